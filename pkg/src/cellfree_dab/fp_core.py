"""Fractional-programming auxiliaries and the transformed sum-rate objectives.

The aggregate pair (Qsum, psum) is the interface between the beamformers and
everything else: Qsum[k, j] collects the signal (j == k) and interference
(j != k) reaching UE k from all BSs, psum[k] the total received distortion
power. Rates are in bit/s/Hz (log base 2). Denominators are floored at
``DENOM_FLOOR`` as a guard for degenerate test inputs; valid configurations
never hit the floor because noise powers are positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pa_model import PaModel, bussgang_gain_diag, distortion_cov

DENOM_FLOOR = 1e-30


@dataclass
class FpState:
    """Auxiliary variables of the fractional program."""

    mu: np.ndarray    # (K,) real >= 0
    zeta: np.ndarray  # (K,) complex

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=complex)
        if np.any(self.mu < 0) or not np.all(np.isfinite(self.mu)):
            raise ValueError("mu must be finite and nonnegative")

    @classmethod
    def zeros(cls, K: int) -> "FpState":
        return cls(mu=np.zeros(K), zeta=np.zeros(K, dtype=complex))


@dataclass
class MetricsInputs:
    """Aggregate signal/interference matrix, distortion vector, noise powers."""

    Qsum: np.ndarray   # (K, K) complex
    psum: np.ndarray   # (K,) real nonnegative
    sigma2: np.ndarray  # (K,) watts

    def __post_init__(self):
        self.Qsum = np.asarray(self.Qsum, dtype=complex)
        self.psum = np.asarray(self.psum, dtype=float)
        self.sigma2 = np.asarray(self.sigma2, dtype=float)


def bs_contribution(H_b: np.ndarray, W_b: np.ndarray, pa: PaModel):
    """One BS's (Q, p) contribution: (H^H G W, diag(H^H Cd H)).

    Returns the K x K complex signal/interference block and the real K-vector
    of received distortion powers.
    """
    g = bussgang_gain_diag(W_b, pa)
    Q = H_b.conj().T @ (g[:, None] * W_b)
    if pa.is_ideal:
        p = np.zeros(H_b.shape[1])
    else:
        Cd = distortion_cov(W_b, pa)
        p = np.real(np.einsum("nk,nm,mk->k", H_b.conj(), Cd, H_b))
    return Q, p


def build_metrics_inputs(H, W, pa: PaModel, sigma2) -> MetricsInputs:
    """From-scratch aggregates over all BSs. H, W have shape (B, Nt, K)."""
    B, _, K = np.asarray(H).shape
    Qsum = np.zeros((K, K), dtype=complex)
    psum = np.zeros(K)
    for b in range(B):
        Q, p = bs_contribution(H[b], W[b], pa)
        Qsum += Q
        psum += p
    return MetricsInputs(Qsum=Qsum, psum=psum, sigma2=np.asarray(sigma2, dtype=float))


def _denominators(inputs: MetricsInputs):
    """(interference+distortion+noise, full-power denominator) per UE."""
    power = np.abs(inputs.Qsum) ** 2
    total = power.sum(axis=1) + inputs.psum + inputs.sigma2
    signal = np.abs(np.diag(inputs.Qsum)) ** 2
    return np.maximum(total - signal, DENOM_FLOOR), np.maximum(total, DENOM_FLOOR)


def sindr(inputs: MetricsInputs) -> np.ndarray:
    """Per-UE signal to interference-noise-and-distortion ratio."""
    without_signal, _ = _denominators(inputs)
    return np.abs(np.diag(inputs.Qsum)) ** 2 / without_signal


def sum_rate(inputs: MetricsInputs) -> float:
    return float(np.sum(np.log2(1.0 + sindr(inputs))))


def update_mu(inputs: MetricsInputs) -> np.ndarray:
    """Optimal rate auxiliary: mu* equals the current SINDR."""
    return sindr(inputs)


def update_zeta(inputs: MetricsInputs, mu: np.ndarray) -> np.ndarray:
    """Optimal quadratic-transform auxiliary for fixed mu."""
    _, full = _denominators(inputs)
    return np.sqrt(1.0 + np.asarray(mu)) * np.diag(inputs.Qsum) / full


def update_fp(inputs: MetricsInputs) -> FpState:
    mu = update_mu(inputs)
    return FpState(mu=mu, zeta=update_zeta(inputs, mu))


def transformed_objective(inputs: MetricsInputs, fp: FpState) -> float:
    """Value of the transformed sum-rate objective at (Qsum, psum, mu, zeta).

    At the optimal auxiliaries this equals sum_k log2(1 + sindr_k).
    """
    mu, zeta = fp.mu, fp.zeta
    const = np.sum(np.log2(1.0 + mu) - mu - np.abs(zeta) ** 2 * inputs.sigma2)
    diag = np.diag(inputs.Qsum)
    delta = np.sum(
        2.0 * np.sqrt(1.0 + mu) * np.real(np.conj(zeta) * diag)
        - np.abs(zeta) ** 2 * (np.sum(np.abs(inputs.Qsum) ** 2, axis=1) + inputs.psum)
    )
    return float(const + delta)


def local_objective_ring(Q_hat, p_hat, H_b, W_b, pa: PaModel, fp: FpState) -> float:
    """Single-BS share of the transformed objective, other BSs frozen.

    Equals the global ``delta`` term up to quantities constant in W_b; p_hat
    is one of those constants and is accepted only for interface symmetry
    with the sharing step.
    """
    del p_hat
    mu, zeta = fp.mu, fp.zeta
    g = bussgang_gain_diag(W_b, pa)
    A = H_b.conj().T @ (g[:, None] * W_b)  # K x K local contribution
    useful = np.sum(2.0 * np.sqrt(1.0 + mu) * np.real(np.conj(zeta) * np.diag(A)))
    aw = np.abs(zeta) ** 2
    cross = np.sum(aw[:, None] * 2.0 * np.real(np.conj(np.asarray(Q_hat)) * A))
    own = np.sum(aw[:, None] * np.abs(A) ** 2)
    if pa.is_ideal:
        dist = 0.0
    else:
        Cd = distortion_cov(W_b, pa)
        dist = np.sum(aw * np.real(np.einsum("nk,nm,mk->k", H_b.conj(), Cd, H_b)))
    return float(useful - dist - cross - own)


def central_objective_star(Q_C_list, fp: FpState) -> float:
    """Aggregation objective over the per-BS global copies."""
    S = np.sum(np.asarray(Q_C_list, dtype=complex), axis=0)
    mu, zeta = fp.mu, fp.zeta
    useful = np.sum(2.0 * np.sqrt(1.0 + mu) * np.real(np.conj(zeta) * np.diag(S)))
    interf = np.sum(np.abs(zeta) ** 2 * np.sum(np.abs(S) ** 2, axis=1))
    return float(useful - interf)
