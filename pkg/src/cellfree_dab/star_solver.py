"""Star-topology partially-distributed solver: consensus ADMM at the center.

Each outer iteration the center aggregates the per-BS reports (Q_L, p_L)
into consensus copies Q_C by solving a strongly convex quadratic in closed
form, shares the other-BS interference sums, refreshes the FP auxiliaries,
and distributes; the BSs then run their penalty-MM sweeps with the consensus
augmented-Lagrangian term, update their duals, and re-report. The per-BS
solves within one iteration are independent (the loop is sequential here;
trial-level parallelism lives in the harness).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fp_core, local_solver
from .common import SolutionReport, SolverOptions, channel_scale, initial_beamformers
from .fp_core import FpState, MetricsInputs
from .local_solver import StarContext, vec
from .pa_model import PaModel, bussgang_gain_diag
from .scenario import ChannelSet, SystemConfig

STAR_TRACE_COLUMNS = (
    "iter",
    "sum_rate",
    "consensus_residual",
    "download_cum",
    "upload_cum",
)


@dataclass
class StarState:
    """Center-side view of the consensus variables."""

    Q_L: np.ndarray      # (B, K, K) local reports
    p_L: np.ndarray      # (B, K) real distortion reports
    Q_C: np.ndarray      # (B, K, K) consensus copies
    Q_tilde: np.ndarray  # (B, K, K) other-BS aggregates
    lam: np.ndarray      # (B, K^2) duals
    varrho: float = 10.0


def local_report(H_b: np.ndarray, W_b: np.ndarray, pa: PaModel):
    """(H^H G W, diag(H^H Cd H)) computed at the BS."""
    return fp_core.bs_contribution(H_b, W_b, pa)


def aggregate(Q_L, lam, fp: FpState, varrho: float) -> np.ndarray:
    """Consensus copies minimizing -delta_c plus the proximal coupling.

    The problem separates per matrix entry (k, j) into a B-dimensional
    quadratic whose coupling across b is rank one, giving the closed form
    below; exactness is covered by the gradient and dense-solve oracles.
    """
    Q_L = np.asarray(Q_L, dtype=complex)
    B, K, _ = Q_L.shape
    lam_m = np.stack([local_solver.unvec(l, K, K) for l in np.asarray(lam)])
    V = Q_L - lam_m / varrho
    Vsum = V.sum(axis=0)
    zeta, mu = fp.zeta, fp.mu
    aw = np.abs(zeta) ** 2
    drive = np.diag(np.sqrt(1.0 + mu) * zeta)  # nonzero only on the diagonal
    # shared correction (2/rho)(drive - aw * Ssum), written without forming
    # Ssum first: the direct form cancels catastrophically when |zeta| is big
    correction = (2.0 / varrho) * (drive - aw[:, None] * Vsum) / (
        1.0 + (2.0 * B / varrho) * aw[:, None]
    )
    return V + correction[None, :, :]


def aggregation_gradient(Q_C, Q_L, lam, fp: FpState, varrho: float) -> float:
    """Max norm of the aggregation objective's Wirtinger gradient at Q_C."""
    Q_C = np.asarray(Q_C)
    B = Q_C.shape[0]
    S = Q_C.sum(axis=0)
    aw = np.abs(fp.zeta) ** 2
    drive = np.diag(np.sqrt(1.0 + fp.mu) * fp.zeta)
    lam_m = np.stack([local_solver.unvec(l, Q_C.shape[1], Q_C.shape[1])
                      for l in np.asarray(lam)])
    grad = (-drive + aw[:, None] * S)[None, :, :] + 0.5 * varrho * (
        Q_C - np.asarray(Q_L) + lam_m / varrho
    )
    return float(np.abs(grad).max())


def interference_share(Q_C) -> np.ndarray:
    """Q_tilde[b] = sum of the other BSs' consensus copies."""
    Q_C = np.asarray(Q_C)
    return Q_C.sum(axis=0)[None, :, :] - Q_C


def dual_update(lam_b, Q_C_b, H_b, W_b, pa: PaModel, varrho: float,
                textbook: bool = False) -> np.ndarray:
    """Ascend the dual on the consensus residual (half-step by default)."""
    g = bussgang_gain_diag(W_b, pa)
    resid = vec(np.asarray(Q_C_b)) - vec(H_b.conj().T @ (g[:, None] * W_b))
    step = varrho if textbook else 0.5 * varrho
    return np.asarray(lam_b) + step * resid


def consensus_residual(Q_C, Q_L) -> float:
    Q_C, Q_L = np.asarray(Q_C), np.asarray(Q_L)
    per_bs = [
        np.linalg.norm(Q_C[b] - Q_L[b]) / (1.0 + np.linalg.norm(Q_L[b]))
        for b in range(Q_C.shape[0])
    ]
    return float(max(per_bs))


def download_size(B: int, K: int) -> int:
    return B * (2 * K * K + 2 * K)


def upload_size(B: int, K: int) -> int:
    return B * (2 * K * K + K)


def run_star(channels: ChannelSet, config: SystemConfig, pa: PaModel,
             opts: SolverOptions | None = None) -> SolutionReport:
    opts = opts or SolverOptions()
    B, Nt, K = channels.H.shape
    Pt = config.power_budget
    # solve in normalized channel units; rates and beamformers are invariant
    scale = channel_scale(channels.H)
    H = channels.H / scale
    sigma2 = np.asarray(config.sigma2) / scale**2
    varrho = opts.varrho

    W0 = initial_beamformers(H, Pt, pa, sigma2)
    states = [local_solver.state_from_beamformer(W0[b], opts.rho_init)
              for b in range(B)]
    reports = [local_report(H[b], states[b].W, pa) for b in range(B)]
    Q_L = np.stack([r[0] for r in reports])
    p_L = np.stack([r[1] for r in reports])
    Q_C = Q_L.copy()
    lam = np.zeros((B, K * K), dtype=complex)

    def fp_from(Q_C_now, p_L_now) -> FpState:
        inputs = MetricsInputs(Qsum=Q_C_now.sum(axis=0),
                               psum=p_L_now.sum(axis=0), sigma2=sigma2)
        return fp_core.update_fp(inputs)

    def current_rate() -> float:
        W_all = np.stack([s.W for s in states])
        return fp_core.sum_rate(fp_core.build_metrics_inputs(H, W_all, pa, sigma2))

    fp = fp_from(Q_C, p_L)
    trace = []
    download = upload = 0
    rate_prev = current_rate()
    converged = False
    rejected_iterations = 0
    residual_trace = []

    for it in range(1, opts.max_outer + 1):
        snapshot = (
            [(s.w, s.R, s.F_abs_sq, s.eta, s.prev_residual) for s in states],
            lam.copy(), Q_L.copy(), p_L.copy(), Q_C.copy(), fp,
        )
        Q_C = aggregate(Q_L, lam, fp, varrho)
        Q_tilde = interference_share(Q_C)
        fp = fp_from(Q_C, p_L)
        download += download_size(B, K)

        for b in range(B):
            ctx = StarContext(Q_C=Q_C[b], lam=lam[b], varrho=varrho)
            ws = local_solver.build_workspace(H[b], fp, Nt, K, Q_tilde[b])
            local_solver.sweep(states[b], ws, pa, Pt, opts, ctx)
            lam[b] = dual_update(lam[b], Q_C[b], H[b], states[b].W, pa,
                                 varrho, opts.dual_step_textbook)
            Q_L[b], p_L[b] = local_report(H[b], states[b].W, pa)
        upload += upload_size(B, K)

        rate = current_rate()
        if rate < rate_prev - 1e-9 * max(1.0, abs(rate_prev)):
            # consensus-lagged FP weights can overshoot; retract the whole
            # iteration and shrink every BS's trust region
            saved_states, lam, Q_L, p_L, Q_C, fp = snapshot
            for s, vals in zip(states, saved_states):
                s.w, s.R, s.F_abs_sq, s.eta, s.prev_residual = vals
                s.rho = min(s.rho * 10.0, opts.rho_cap)
            rejected_iterations += 1
            rate = rate_prev

        resid = consensus_residual(Q_C, Q_L)
        residual_trace.append(resid)
        if not np.isfinite(rate):
            raise RuntimeError(f"non-finite sum rate at iteration {it}")
        if opts.collect_traces:
            trace.append((it, rate, resid, download, upload))

        tight = max(local_solver.penalty_residual(s) for s in states)
        if (abs(rate - rate_prev) <= opts.tol * max(1.0, abs(rate_prev))
                and resid <= opts.consensus_tol
                and tight <= opts.penalty_resid_tol):
            converged = True
            break
        rate_prev = rate

    W_final = np.stack([s.W for s in states])
    return SolutionReport(
        W=W_final,
        sum_rate=current_rate(),
        fp=FpState(mu=fp.mu, zeta=fp.zeta / scale),  # original channel units
        iterations=it,
        converged=converged,
        trace=trace,
        trace_columns=STAR_TRACE_COLUMNS,
        counters={
            "download_values": download,
            "upload_values": upload,
            "total_values": download + upload,
            "iterations": it,
        },
        diagnostics={
            "state": StarState(Q_L=Q_L, p_L=p_L, Q_C=Q_C,
                               Q_tilde=interference_share(Q_C), lam=lam,
                               varrho=varrho),
            "consensus_residual": residual_trace[-1] if residual_trace else np.nan,
            "consensus_residual_trace": residual_trace,
            "penalty_residuals": [local_solver.penalty_residual(s) for s in states],
            "ridge_fallbacks": sum(s.ridge_fallbacks for s in states),
            "rejected_iterations": rejected_iterations,
        },
    )
