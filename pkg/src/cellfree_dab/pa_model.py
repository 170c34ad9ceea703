"""Third-order memoryless power amplifier and its Bussgang decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PaModel:
    """Polynomial amplifier z = beta1 * x + beta3 * x * |x|^2 (per antenna)."""

    beta1: complex = 1.0
    beta3: complex = 0.0

    def __post_init__(self):
        if self.beta1 == 0:
            raise ValueError("beta1 must be nonzero")

    @classmethod
    def ideal(cls) -> "PaModel":
        return cls(beta1=1.0, beta3=0.0)

    @classmethod
    def reference(cls) -> "PaModel":
        """Measured third-order coefficients used throughout the experiments."""
        return cls(beta1=1.0, beta3=-0.212 * np.exp(-2.816j))

    @property
    def is_ideal(self) -> bool:
        return self.beta3 == 0


@dataclass
class DistortionStats:
    """Linear gain G (diagonal) and distortion covariance Cd for one BS."""

    G: np.ndarray   # (Nt, Nt) complex diagonal
    Cd: np.ndarray  # (Nt, Nt) complex Hermitian PSD


@dataclass
class SignalBlock:
    """One decomposed transmission: x = W s, z = amplify(x), d = z - G x."""

    x: np.ndarray
    z: np.ndarray
    d: np.ndarray
    s: np.ndarray | None = None


def amplify(x: np.ndarray, pa: PaModel) -> np.ndarray:
    """Element-wise nonlinear amplification."""
    x = np.asarray(x)
    return pa.beta1 * x + pa.beta3 * x * np.abs(x) ** 2


def bussgang_gain(W: np.ndarray, pa: PaModel) -> np.ndarray:
    """Linear-gain matrix beta1*I + 2*beta3*diag(W W^H) for Gaussian symbols."""
    W = np.asarray(W)
    Nt = W.shape[0]
    q = np.sum(np.abs(W) ** 2, axis=1)  # diagonal of W W^H
    return pa.beta1 * np.eye(Nt) + 2.0 * pa.beta3 * np.diag(q)


def bussgang_gain_diag(W: np.ndarray, pa: PaModel) -> np.ndarray:
    """Diagonal of the Bussgang gain as a vector (cheaper than the matrix)."""
    q = np.sum(np.abs(np.asarray(W)) ** 2, axis=1)
    return pa.beta1 + 2.0 * pa.beta3 * q


def distortion_cov(W: np.ndarray, pa: PaModel) -> np.ndarray:
    """Distortion covariance 2|beta3|^2 (W W^H o |W W^H|^2).

    Written with |beta3|^2 so the result is Hermitian by construction.
    """
    W = np.asarray(W)
    C = W @ W.conj().T
    return 2.0 * np.abs(pa.beta3) ** 2 * (C * np.abs(C) ** 2)


def distortion_stats(W: np.ndarray, pa: PaModel) -> DistortionStats:
    return DistortionStats(G=bussgang_gain(W, pa), Cd=distortion_cov(W, pa))


def decompose(x: np.ndarray, W: np.ndarray, pa: PaModel, s=None) -> SignalBlock:
    """Split the amplifier output into the linear term plus the residual."""
    z = amplify(x, pa)
    G = bussgang_gain(W, pa)
    d = z - G @ np.asarray(x)
    return SignalBlock(x=np.asarray(x), z=z, d=d, s=s)
