"""Comparison estimators: spline-only posterior and nuclear-norm FIR.

The nuclear-norm estimator solves

    min_h ||Y - Phi h||_2^2 + lam * ||H(h)||_*

by ADMM on the splitting Z = H(h) (or the weighted Hankel when weights are
supplied): a cached symmetric solve for h, singular-value soft-thresholding
for Z, and a scaled dual ascent.  Its regularization level is picked by
prefix-split cross-validation on one-step simulation error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .bayes import MarglikProblem, estimate_noise_variance, posterior_mean
from .identify import fit_spline_hyperparams
from .kernels import (
    KernelSystem,
    SubspaceBasis,
    hankel_weighted_gram,
    spline_precision,
)
from .model import (
    Dataset,
    HankelDims,
    ImpulseResponse,
    WeightPair,
    build_weights,
    hankel_adjoint,
    hankel_dims,
    hankel_index_map,
    regressor_block,
)


@dataclass(frozen=True)
class CvGrid:
    """Candidate regularization levels plus the train/validation fractions."""

    candidates: np.ndarray
    train_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        cand = np.asarray(self.candidates, dtype=float).ravel()
        if cand.size == 0:
            raise ValueError("candidate grid must be nonempty")
        if np.any(cand <= 0):
            raise ValueError("all candidates must be > 0")
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train fraction must lie in (0, 1)")
        object.__setattr__(self, "candidates", np.sort(cand))

    @property
    def validation_fraction(self) -> float:
        return 1.0 - self.train_fraction


def default_cv_grid(n_train: int, scenario: str = "S1") -> CvGrid:
    """The published grid: 25 log-spaced values of v / N_train."""
    lo = 1e2 if scenario == "S1" else 1e3
    v = np.logspace(np.log10(lo), 7, 25)
    frac = 0.5 if scenario == "S1" else 2.0 / 3.0
    return CvGrid(v / n_train, train_fraction=frac)


# ---------- spline-only baseline ----------


def ss_estimate(
    d: Dataset,
    T: int,
    beta_grid=None,
    c_bounds: tuple = (1e-4, 1e4),
    return_details: bool = False,
):
    """Posterior mean under the stable-spline prior alone (lam = [1, 0, 0]).

    Identical plumbing to the full procedure stopped right after the spline
    hyper-parameter fit.
    """
    if d.N <= T * d.m:
        raise ValueError(f"need N > T*m (N={d.N}, T*m={T * d.m})")
    noise = estimate_noise_variance(d, T)
    phi = regressor_block(d.u, T)
    Y = d.y.T.ravel()
    nu = fit_spline_hyperparams(
        Y, phi, noise, T, d.m, beta_grid=beta_grid, c_bounds=c_bounds
    )
    dims = hankel_dims(T, d.p, d.m)
    n_coeff = T * d.m * d.p
    zeros = np.zeros((n_coeff, n_coeff))
    ks = KernelSystem(
        G0=spline_precision(nu, T, d.p, d.m),
        G1=zeros,
        G2=zeros,
        dims=dims,
        weights=WeightPair(np.eye(d.m * dims.c), np.eye(d.p * dims.r)),
        basis=SubspaceBasis.trivial(d.p * dims.r),
    )
    pb = MarglikProblem(Y=Y, phi=phi, noise=noise, ks=ks, m=d.m)
    h = posterior_mean(pb, np.array([1.0, 0.0, 0.0]))
    if return_details:
        return h, nu, noise
    return h


# ---------- nuclear-norm baseline ----------


def singular_value_soften(M: np.ndarray, level: float):
    """Soft-threshold the singular values of M at the given level."""
    U, s, Vt = la.svd(M, full_matrices=False)
    s_soft = np.maximum(s - level, 0.0)
    return (U * s_soft) @ Vt, s_soft


@dataclass(frozen=True)
class AdmmResult:
    h: ImpulseResponse
    converged: bool
    n_iter: int
    objective: np.ndarray  # per-iteration value of the penalized objective
    dual: np.ndarray  # final scaled dual variable (Hankel-shaped)
    rho: float


def nn_admm(
    Y: np.ndarray,
    Phi: np.ndarray,
    lam_star: float,
    T: int,
    dims: HankelDims,
    p: int,
    m: int,
    weights: WeightPair | None = None,
    rho: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 2000,
) -> AdmmResult:
    """Nuclear-norm penalized FIR fit by ADMM.

    Iterates, with E(h) the (optionally weighted) Hankel map and E* its
    adjoint:

        h <- solve (2 Phi^T Phi + rho E*E) h = 2 Phi^T Y + rho E*(Z - U)
        Z <- svt_{lam/rho}(E(h) + U)
        U <- U + E(h) - Z

    The fixed point satisfies 2 Phi^T (Phi h - Y) + lam * E*(G) = 0 with G
    in the subdifferential of the nuclear norm at E(h).  Always returns the
    last iterate together with a convergence flag.
    """
    if lam_star < 0:
        raise ValueError("lam_star must be >= 0")
    Y = np.asarray(Y, dtype=float).ravel()
    Phi = np.asarray(Phi, dtype=float)
    n_coeff = T * m * p
    if Phi.shape != (Y.size, n_coeff):
        raise ValueError(f"Phi must be {Y.size} x {n_coeff}, got {Phi.shape}")
    idx = hankel_index_map(T, p, m, dims)
    weighted = weights is not None and not weights.is_identity

    if weighted:
        W1, W2 = weights.W1, weights.W2

        def hankel_map(h):
            return W2.T @ h[idx] @ W1.T

        def hankel_adj(M):
            return hankel_adjoint(W2 @ M @ W1, idx, n_coeff)

        EtE = hankel_weighted_gram(W2 @ W2.T, W1.T @ W1, dims, p, m)
    else:

        def hankel_map(h):
            return h[idx]

        def hankel_adj(M):
            return hankel_adjoint(M, idx, n_coeff)

        EtE = np.diag(np.bincount(idx.ravel(), minlength=n_coeff).astype(float))

    PtP2 = 2.0 * (Phi.T @ Phi)
    PtY2 = 2.0 * (Phi.T @ Y)
    solver = la.cho_factor(PtP2 + rho * EtE)

    h = np.zeros(n_coeff)
    Z = np.zeros_like(idx, dtype=float)
    U = np.zeros_like(Z)
    objective = []
    converged = False
    n_iter = max_iter
    for it in range(max_iter):
        h = la.cho_solve(solver, PtY2 + rho * hankel_adj(Z - U))
        H = hankel_map(h)
        Z_prev = Z
        Z, _ = singular_value_soften(H + U, lam_star / rho)
        U = U + H - Z
        resid = Y - Phi @ h
        objective.append(
            float(resid @ resid) + lam_star * float(np.sum(la.svdvals(H)))
        )
        r_primal = la.norm(H - Z)
        r_dual = rho * la.norm(hankel_adj(Z - Z_prev))
        eps_primal = tol * max(1.0, la.norm(H), la.norm(Z))
        eps_dual = tol * max(1.0, rho * la.norm(hankel_adj(U)))
        if r_primal < eps_primal and r_dual < eps_dual:
            converged = True
            n_iter = it + 1
            break

    return AdmmResult(
        h=ImpulseResponse(h, T=T, m=m, p=p),
        converged=converged,
        n_iter=n_iter,
        objective=np.array(objective),
        dual=U,
        rho=rho,
    )


def nn_estimate(
    d: Dataset,
    T: int,
    lam_star: float,
    use_weighted: bool = False,
    **admm_kwargs,
) -> ImpulseResponse:
    """Convenience wrapper building the regressor and Hankel shape from data."""
    dims = hankel_dims(T, d.p, d.m)
    phi = regressor_block(d.u, T)
    Phi = np.kron(np.eye(d.p), phi)
    weights = None
    if use_weighted:
        weights = build_weights(d, dims, "empirical")
    res = nn_admm(
        d.y.T.ravel(), Phi, lam_star, T, dims, d.p, d.m, weights=weights, **admm_kwargs
    )
    return res.h


# ---------- cross-validation ----------


def cross_validate(d: Dataset, grid: CvGrid, estimator):
    """Pick the candidate minimizing one-step simulation error on a prefix split.

    ``estimator(train: Dataset, lam) -> ImpulseResponse``.  The data is
    split train-first/validate-last (time series, no shuffling); the
    winner (ties to the smaller candidate) is refit on all data.
    """
    n_train = int(round(d.N * grid.train_fraction))
    if n_train < 1 or n_train >= d.N:
        raise ValueError("train fraction leaves an empty split")
    train = Dataset(d.u[:n_train], d.y[:n_train])

    h_probe = estimator(train, grid.candidates[0])
    T = h_probe.T
    # validation rows of the full regressor: true inputs across the boundary
    phi_full = regressor_block(d.u, T)
    phi_val = phi_full[n_train:]
    y_val = d.y[n_train:]

    def score(h: ImpulseResponse) -> float:
        hmat = h.h.reshape(d.p, d.m * T)
        pred = phi_val @ hmat.T
        return float(np.sum((y_val - pred) ** 2))

    scores = np.empty(grid.candidates.size)
    scores[0] = score(h_probe)
    for i, lam in enumerate(grid.candidates[1:], start=1):
        scores[i] = score(estimator(train, lam))
    best = int(np.argmin(scores))  # first minimum = smallest candidate on ties
    lam_best = float(grid.candidates[best])
    return lam_best, estimator(d, lam_best)
