"""Prior precision construction: stable-spline, Hankel-subspace, and combined.

The prior over the stacked impulse response h is Gaussian with precision

    lam0 * G0 + lam1 * G1 + lam2 * G2

where G0 is the blockwise inverse of a first-order stable-spline (TC)
kernel, and G1/G2 weight the energy of the Hankel matrix of h along an
estimated signal subspace and its orthogonal complement.  Precisions (not
covariances) are stored: G1 and G2 are low rank and have no inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .linalg import NotPositiveDefiniteError, chol_factor, symmetrize
from .model import HankelDims, WeightPair


# ---------- domain types ----------


@dataclass(frozen=True)
class SplineHyper:
    """Scale and decay of the first-order stable-spline kernel.

    One (c, beta) pair is shared by all p*m channels; the cross-channel
    coupling is delivered by the Hankel term instead.
    """

    c: float
    beta: float

    def __post_init__(self):
        if not (self.c >= 0.0):
            raise ValueError("spline scale c must be >= 0")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("spline decay beta must be in [0, 1]")


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthogonal basis of R^{pr} split into signal (first n) and noise parts."""

    U: np.ndarray  # (pr, pr) orthogonal
    n: int
    s: np.ndarray  # singular values of the weighted Hankel, descending

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        s = np.asarray(self.s, dtype=float).ravel()
        k = U.shape[0]
        if U.shape != (k, k):
            raise ValueError("U must be square")
        if not (0 <= self.n <= k):
            raise ValueError(f"signal dimension n={self.n} outside [0, {k}]")
        if s.size != k:
            raise ValueError("singular value vector must have length pr")
        if np.max(np.abs(U.T @ U - np.eye(k))) > 1e-10:
            raise ValueError("U is not orthogonal to 1e-10")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @property
    def U_n(self) -> np.ndarray:
        return self.U[:, : self.n]

    @property
    def U_n_perp(self) -> np.ndarray:
        return self.U[:, self.n :]

    @classmethod
    def trivial(cls, pr: int) -> "SubspaceBasis":
        """n = 0 start: empty signal part, identity noise part."""
        return cls(np.eye(pr), 0, np.zeros(pr))


@dataclass(frozen=True)
class LambdaVec:
    """Nonnegative weights of the three precision components."""

    lam0: float
    lam1: float
    lam2: float

    def __post_init__(self):
        if min(self.lam0, self.lam1, self.lam2) < 0:
            raise ValueError("lambda components must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.lam0, self.lam1, self.lam2])


def _lambda_array(lam) -> np.ndarray:
    if isinstance(lam, LambdaVec):
        return lam.as_array()
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape != (3,):
        raise ValueError("lambda must have exactly 3 components")
    if np.min(lam) < 0:
        raise ValueError("lambda components must be >= 0")
    return lam


@dataclass(frozen=True)
class KernelSystem:
    """The three precision components plus their provenance."""

    G0: np.ndarray  # spline precision, PD
    G1: np.ndarray  # signal-subspace Hankel precision, PSD
    G2: np.ndarray  # noise-subspace Hankel precision, PSD
    dims: HankelDims
    weights: WeightPair
    basis: SubspaceBasis

    def __post_init__(self):
        n = self.G0.shape[0]
        for name, G in (("G0", self.G0), ("G1", self.G1), ("G2", self.G2)):
            if G.shape != (n, n):
                raise ValueError(f"{name} must be {n} x {n}")

    @property
    def n_coeff(self) -> int:
        return self.G0.shape[0]

    def component(self, i: int) -> np.ndarray:
        return (self.G0, self.G1, self.G2)[i]


# ---------- stable-spline kernel ----------


def tc_kernel(hp: SplineHyper, T: int) -> np.ndarray:
    """First-order stable-spline kernel, entry (k, l) = c * min(beta^k, beta^l)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    k = np.arange(1, T + 1)
    return hp.c * np.power(hp.beta, np.maximum(k[:, None], k[None, :]))


def tc_precision_block(hp: SplineHyper, T: int) -> np.ndarray:
    """Analytic inverse of the single-channel TC kernel (tridiagonal).

    min(beta^k, beta^l) = beta^max(k,l) is the covariance of a reversed
    Gauss-Markov chain, so the inverse is tridiagonal with entries that can
    be written down directly; this stays well conditioned for beta near 1
    where dense inversion of the kernel degrades.
    """
    if not (0.0 < hp.beta < 1.0):
        raise ValueError("beta must lie strictly inside (0, 1) for inversion")
    if hp.c <= 0.0:
        raise ValueError("c must be > 0 for inversion")
    if T == 1:
        return np.array([[1.0 / (hp.c * hp.beta)]])
    beta = hp.beta
    one_minus = 1.0 - beta
    k = np.arange(1, T + 1)
    diag = (np.power(beta, -(k - 1.0)) + np.power(beta, -k.astype(float))) / one_minus
    diag[0] = 1.0 / (beta * one_minus)
    diag[-1] = np.power(beta, -float(T)) / one_minus
    off = -np.power(beta, -k[:-1].astype(float)) / one_minus
    D = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return D / hp.c


def tc_precision_logdet(hp: SplineHyper, T: int) -> float:
    """log det of the single-channel TC precision (closed form)."""
    if T == 1:
        return -np.log(hp.c * hp.beta)
    # det K = c^T * beta^(T + T(T-1)/2) * (1 - beta)^(T-1)
    logdet_K = (
        T * np.log(hp.c)
        + (T + T * (T - 1) / 2.0) * np.log(hp.beta)
        + (T - 1) * np.log(1.0 - hp.beta)
    )
    return -logdet_K


def spline_precision(hp: SplineHyper, T: int, p: int, m: int) -> np.ndarray:
    """Block-diagonal spline precision over all p*m channels (Tmp x Tmp)."""
    return np.kron(np.eye(p * m), tc_precision_block(hp, T))


# ---------- Hankel-subspace precision ----------


def q_matrix(basis: SubspaceBasis, lam1: float, lam2: float) -> np.ndarray:
    """Subspace weighting lam1 * P_signal + lam2 * P_noise (sum of projections)."""
    Un = basis.U_n
    Up = basis.U_n_perp
    return symmetrize(lam1 * (Un @ Un.T) + lam2 * (Up @ Up.T))


def hankel_weighted_gram(
    Qw: np.ndarray, Gw: np.ndarray, dims: HankelDims, p: int, m: int
) -> np.ndarray:
    """Assemble P^T (Qw kron Gw) P without densifying the Kronecker product.

    Grouping Hankel entries by channel pair, each (T x T) lag block of the
    result is the full 2-D convolution of an (r x r) slice of Qw with a
    (c x c) slice of Gw, so the whole matrix comes out of one batched FFT.
    """
    r, c, T = dims.r, dims.c, dims.T
    Q4 = Qw.reshape(r, p, r, p).transpose(1, 3, 0, 2)  # [a, a', i, i']
    G4 = Gw.reshape(c, m, c, m).transpose(1, 3, 0, 2)  # [b, b', j, j']
    nfft = scipy.fft.next_fast_len(T)
    FQ = np.fft.rfft2(Q4, s=(nfft, nfft))
    FG = np.fft.rfft2(G4, s=(nfft, nfft))
    FC = FQ[:, :, None, None, :, :] * FG[None, None, :, :, :, :]
    C = np.fft.irfft2(FC, s=(nfft, nfft))[..., :T, :T]  # [a, a', b, b', d, d']
    G = C.transpose(0, 2, 4, 1, 3, 5).reshape(T * m * p, T * m * p)
    return symmetrize(G)


def hankel_precisions(
    dims: HankelDims, weights: WeightPair, basis: SubspaceBasis, p: int, m: int
) -> tuple[np.ndarray, np.ndarray]:
    """Signal/noise Hankel precisions.

    G1 = P^T (W2 U_n U_n^T W2^T kron W1^T W1) P and G2 the same with the
    noise part of the basis; h^T (lam1 G1 + lam2 G2) h equals the weighted
    trace penalty on the squared Hankel matrix of h.
    """
    if basis.dim != p * dims.r:
        raise ValueError(
            f"basis dimension {basis.dim} does not match p*r = {p * dims.r}"
        )
    W1, W2 = weights.W1, weights.W2
    if W1.shape[0] != m * dims.c or W2.shape[0] != p * dims.r:
        raise ValueError("weight matrices do not match the Hankel dimensions")
    Gw = W1.T @ W1
    n_coeff = dims.T * m * p
    Un = basis.U_n
    if basis.n == 0:
        G1 = np.zeros((n_coeff, n_coeff))
    else:
        W2Un = W2 @ Un
        G1 = hankel_weighted_gram(W2Un @ W2Un.T, Gw, dims, p, m)
    Up = basis.U_n_perp
    if basis.n == basis.dim:
        G2 = np.zeros((n_coeff, n_coeff))
    else:
        W2Up = W2 @ Up
        G2 = hankel_weighted_gram(W2Up @ W2Up.T, Gw, dims, p, m)
    return G1, G2


def build_kernel_system(
    hp: SplineHyper,
    T: int,
    p: int,
    m: int,
    dims: HankelDims,
    weights: WeightPair,
    basis: SubspaceBasis,
) -> KernelSystem:
    """Construct all three precision components for a fixed basis."""
    G0 = spline_precision(hp, T, p, m)
    G1, G2 = hankel_precisions(dims, weights, basis, p, m)
    return KernelSystem(G0=G0, G1=G1, G2=G2, dims=dims, weights=weights, basis=basis)


def combined_precision(ks: KernelSystem, lam, check: bool = True) -> np.ndarray:
    """lam0*G0 + lam1*G1 + lam2*G2; verified symmetric PD when check=True."""
    lam = _lambda_array(lam)
    K_inv = lam[0] * ks.G0 + lam[1] * ks.G1 + lam[2] * ks.G2
    if check:
        try:
            chol_factor(K_inv)
        except NotPositiveDefiniteError:
            raise NotPositiveDefiniteError(
                f"combined precision not PD at lambda={lam.tolist()}"
            ) from None
    return K_inv
