"""Quick self-check suite behind the ``validate`` CLI subcommand.

A trimmed version of the oracle checks from the test suite, sized to run in
well under a minute. Prints one PASS/FAIL line per check.
"""

from __future__ import annotations

import numpy as np

from . import fp_core, local_solver, metrics
from .common import SolverOptions
from .fp_core import FpState, MetricsInputs
from .pa_model import PaModel, amplify, bussgang_gain, distortion_cov
from .ring_solver import run_ring
from .scenario import desk_profile, make_scenario


def _rand_c(rng, *shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def check_bussgang_moments(seed: int) -> bool:
    rng = np.random.default_rng(seed)
    pa = PaModel.reference()
    Nt, K, n = 4, 2, 100_000
    ok = True
    for _ in range(3):
        W = _rand_c(rng, Nt, K, scale=0.6)
        S = _rand_c(rng, K, n, scale=np.sqrt(0.5))
        X = W @ S
        Z = amplify(X, pa)
        G = bussgang_gain(W, pa)
        Czx = Z @ X.conj().T / n
        Cxx = X @ X.conj().T / n
        gain_err = np.linalg.norm(Czx - G @ Cxx) / np.linalg.norm(G @ Cxx)
        D = Z - G @ X
        Cd_err = (np.linalg.norm(D @ D.conj().T / n - distortion_cov(W, pa))
                  / np.linalg.norm(distortion_cov(W, pa)))
        ok = ok and gain_err < 0.02 and Cd_err < 0.05
    return ok


def check_fp_equivalence(seed: int) -> bool:
    rng = np.random.default_rng(seed + 1)
    for _ in range(20):
        K = rng.integers(1, 4)
        Q = _rand_c(rng, K, K)
        p = rng.uniform(0.0, 0.5, K)
        sig = rng.uniform(0.1, 1.0, K)
        inputs = MetricsInputs(Qsum=Q, psum=p, sigma2=sig)
        fp = fp_core.update_fp(inputs)
        lhs = fp_core.transformed_objective(inputs, fp)
        rhs = fp_core.sum_rate(inputs)
        if abs(lhs - rhs) > 1e-9 * max(1.0, abs(rhs)):
            return False
    return True


def check_lifting_chain(seed: int) -> bool:
    pa = PaModel.reference()
    rng = np.random.default_rng(seed + 2)
    for Nt, K in ((2, 1), (2, 2), (3, 2)):
        N = Nt * K
        J = local_solver.gain_lifting_matrix(Nt, K) @ local_solver.gain_jacobian(pa, Nt, K)
        R = _rand_c(rng, N, N)
        eps = 1e-6
        base = local_solver.vec(
            np.kron(np.eye(K), np.diag(local_solver.gain_diag_from_R(R, pa, Nt, K)))
        )
        for idx in range(0, N * N, max(1, (N * N) // 8)):
            dR = np.zeros((N * N,), dtype=complex)
            dR[idx] = eps
            Rp = R + local_solver.unvec(dR, N, N)
            col = (local_solver.vec(np.kron(
                np.eye(K), np.diag(local_solver.gain_diag_from_R(Rp, pa, Nt, K))
            )) - base) / eps
            if np.abs(col - J[:, idx]).max() > 1e-6 * max(1.0, np.abs(J).max()):
                return False
    return True


def check_r_step(seed: int) -> bool:
    rng = np.random.default_rng(seed + 3)
    pa = PaModel.reference()
    Nt, K = 2, 2
    N = Nt * K
    for _ in range(5):
        H = _rand_c(rng, Nt, K)
        fp = FpState(mu=rng.uniform(0.1, 2.0, K), zeta=_rand_c(rng, K, scale=0.6))
        ws = local_solver.build_workspace(H, fp, Nt, K, _rand_c(rng, K, K, scale=0.4))
        w = _rand_c(rng, N, scale=0.6)
        R0 = np.outer(w, w.conj())
        lag = local_solver.lagged_factor(R0, Nt, K)
        state = local_solver.LocalSolverState(w=w, R=R0, F_abs_sq=lag, rho=1.7)
        R = local_solver.update_R(state, ws, pa)
        R_dense = local_solver.solve_r_dense(w, ws, pa, 1.7, lag)
        if np.abs(R - R_dense).max() > 1e-8 * max(1.0, np.abs(R).max()):
            return False
    return True


def check_w_step(seed: int) -> bool:
    rng = np.random.default_rng(seed + 4)
    pa = PaModel.reference()
    Nt, K = 3, 2
    N = Nt * K
    opts = SolverOptions()
    for _ in range(5):
        H = _rand_c(rng, Nt, K)
        fp = FpState(mu=rng.uniform(0.1, 2.0, K), zeta=_rand_c(rng, K, scale=0.6))
        ws = local_solver.build_workspace(H, fp, Nt, K, _rand_c(rng, K, K, scale=0.4))
        w0 = _rand_c(rng, N, scale=0.5)
        state = local_solver.state_from_beamformer(
            local_solver.unvec(w0, Nt, K), rho=1.3
        )
        Pt = 1.0
        A, C = local_solver.w_subproblem_terms(state, ws, pa)
        w_new = local_solver.update_w(state, ws, pa, Pt, opts)
        if np.linalg.norm(w_new) ** 2 > Pt * (1 + 1e-9):
            return False
        obj = local_solver.w_subproblem_objective(w_new, A, C, 1.3, Nt, K)
        for _ in range(20):
            z = _rand_c(rng, N, scale=1.0)
            z *= np.sqrt(Pt * rng.uniform(0, 1)) / np.linalg.norm(z)
            if local_solver.w_subproblem_objective(z, A, C, 1.3, Nt, K) < obj - 1e-9:
                return False
    return True


def check_ring_consistency(seed: int) -> bool:
    pa = PaModel.reference()
    cfg = desk_profile(rng_seed=seed)
    _, ch = make_scenario(cfg)
    rep = run_ring(ch, cfg, pa, SolverOptions(max_outer=5, tol=0.0))
    inputs = fp_core.build_metrics_inputs(ch.H, rep.W, pa, cfg.sigma2)
    return abs(rep.sum_rate - fp_core.sum_rate(inputs)) < 1e-8 * max(
        1.0, abs(rep.sum_rate)
    )


def check_overhead() -> bool:
    return (metrics.overhead_ring(6, 10) == 420
            and metrics.overhead_star(4, 6, 10)[2] == 6480)


CHECKS = (
    ("bussgang moment formulas", check_bussgang_moments, True),
    ("fp transform equivalence", check_fp_equivalence, True),
    ("gain lifting chain rule", check_lifting_chain, True),
    ("closed-form R step vs dense solve", check_r_step, True),
    ("closed-form w step vs feasible points", check_w_step, True),
    ("ring aggregate consistency", check_ring_consistency, True),
    ("overhead formulas", check_overhead, False),
)


def run_validation(seed: int = 0) -> bool:
    all_ok = True
    for name, fn, needs_seed in CHECKS:
        ok = fn(seed) if needs_seed else fn()
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        all_ok = all_ok and ok
    return all_ok
