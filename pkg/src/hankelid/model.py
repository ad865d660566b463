"""Domain types and deterministic constructions for MIMO FIR identification.

Conventions used throughout the package:

* A dataset holds time-major input/output matrices ``u`` (N x m) and
  ``y`` (N x p).
* Impulse-response coefficients are stacked channel by channel,
  ``h = [h_11, h_12, ..., h_1m, ..., h_p1, ..., h_pm]`` with each
  ``h_ij = [h_ij(1), ..., h_ij(T)]``, giving a vector of length T*m*p.
* Output observations are stacked channel-major,
  ``Y = [y_1(1..N), ..., y_p(1..N)]``.
* Inputs at non-positive times are taken to be zero, so the regressor is
  well defined from the first sample on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .linalg import NotPositiveDefiniteError


# ---------- domain types ----------


@dataclass(frozen=True)
class Dataset:
    """Paired input/output time series; rows are samples."""

    u: np.ndarray  # (N, m)
    y: np.ndarray  # (N, p)

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if u.ndim != 2 or y.ndim != 2:
            raise ValueError("u and y must be 2-D (time-major) arrays")
        if u.shape[0] != y.shape[0]:
            raise ValueError(f"u has {u.shape[0]} rows, y has {y.shape[0]}")
        if u.shape[0] < 1 or u.shape[1] < 1 or y.shape[1] < 1:
            raise ValueError("need N >= 1, m >= 1, p >= 1")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def N(self) -> int:
        return self.u.shape[0]

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class ImpulseResponse:
    """Stacked coefficient vector of a p x m FIR system of length T."""

    h: np.ndarray  # (T*m*p,)
    T: int
    m: int
    p: int

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).ravel()
        if h.size != self.T * self.m * self.p:
            raise ValueError(
                f"h has length {h.size}, expected T*m*p = {self.T * self.m * self.p}"
            )
        if not np.all(np.isfinite(h)):
            raise ValueError("impulse response contains non-finite entries")
        object.__setattr__(self, "h", h)

    def as_matrix_sequence(self) -> np.ndarray:
        """Return the (T, p, m) array M with M[k-1] = h(k)."""
        return self.h.reshape(self.p, self.m, self.T).transpose(2, 0, 1)

    @classmethod
    def from_matrix_sequence(cls, M: np.ndarray) -> "ImpulseResponse":
        """Inverse of :meth:`as_matrix_sequence`; M has shape (T, p, m)."""
        M = np.asarray(M, dtype=float)
        T, p, m = M.shape
        return cls(M.transpose(1, 2, 0).ravel(), T=T, m=m, p=p)


@dataclass(frozen=True)
class HankelDims:
    """Block-Hankel shape: r block rows, c block columns, r + c - 1 = T."""

    r: int
    c: int
    T: int

    def __post_init__(self):
        if self.r < 1 or self.c < 1:
            raise ValueError("need r >= 1 and c >= 1")
        if self.r + self.c - 1 != self.T:
            raise ValueError(f"r + c - 1 = {self.r + self.c - 1} != T = {self.T}")


@dataclass(frozen=True)
class WeightPair:
    """Column/row weighting matrices applied to the block Hankel matrix."""

    W1: np.ndarray  # (m*c, m*c)
    W2: np.ndarray  # (p*r, p*r)
    mode: str = "identity"

    def __post_init__(self):
        W1 = np.asarray(self.W1, dtype=float)
        W2 = np.asarray(self.W2, dtype=float)
        for name, W in (("W1", W1), ("W2", W2)):
            if W.ndim != 2 or W.shape[0] != W.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.all(np.isfinite(W)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "W2", W2)

    @property
    def is_identity(self) -> bool:
        return self.mode == "identity"


@dataclass(frozen=True)
class OutputStack:
    """Channel-major stacking of the outputs, length N*p."""

    Y: np.ndarray
    N: int
    p: int

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float).ravel()
        if Y.size != self.N * self.p:
            raise ValueError(f"Y has length {Y.size}, expected N*p = {self.N * self.p}")
        object.__setattr__(self, "Y", Y)

    def unstack(self) -> np.ndarray:
        """Recover the (N, p) output matrix."""
        return self.Y.reshape(self.p, self.N).T


# ---------- constructions ----------


def stack_outputs(d: Dataset) -> OutputStack:
    """Stack the output matrix channel-major: [y_1(1..N), ..., y_p(1..N)]."""
    return OutputStack(d.y.T.ravel().copy(), N=d.N, p=d.p)


def regressor_block(u: np.ndarray, T: int) -> np.ndarray:
    """Single-output regressor block phi (N x T*m).

    Row t concatenates, input by input, the lagged samples
    [u_i(t-1), ..., u_i(t-T)] with zeros before the first sample.
    """
    if T < 1:
        raise ValueError("FIR length T must be >= 1")
    u = np.atleast_2d(np.asarray(u, dtype=float))
    N, m = u.shape
    phi = np.zeros((N, T * m))
    for i in range(m):
        col = np.concatenate(([0.0], u[:-1, i]))
        # Toeplitz: first column = delayed input, first row = zeros (pre-window)
        phi[:, i * T : (i + 1) * T] = la.toeplitz(col, np.zeros(T))
    return phi


def build_regressor(d: Dataset, T: int) -> np.ndarray:
    """Full regressor Phi (N*p x T*m*p): p diagonal copies of the block phi."""
    phi = regressor_block(d.u, T)
    return np.kron(np.eye(d.p), phi)


def hankel_dims(T: int, p: int, m: int) -> HankelDims:
    """Pick r (and c = T + 1 - r) making the p*r x m*c Hankel nearly square.

    Minimizes |p*r - m*c| over r = 1..T; ties go to the smaller r.
    """
    if T < 1:
        raise ValueError("FIR length T must be >= 1")
    r_candidates = np.arange(1, T + 1)
    gap = np.abs(p * r_candidates - m * (T + 1 - r_candidates))
    r = int(r_candidates[np.argmin(gap)])  # argmin returns the first (smallest r)
    return HankelDims(r=r, c=T + 1 - r, T=T)


def build_hankel(h: ImpulseResponse, dims: HankelDims) -> np.ndarray:
    """Block Hankel matrix (p*r x m*c) with block (i, j) = h(i + j - 1)."""
    if dims.T != h.T:
        raise ValueError(f"dims built for T={dims.T}, impulse response has T={h.T}")
    M = h.as_matrix_sequence()  # (T, p, m)
    p, m = h.p, h.m
    H = np.empty((p * dims.r, m * dims.c))
    for i in range(dims.r):
        H[i * p : (i + 1) * p, :] = (
            M[i : i + dims.c].transpose(1, 0, 2).reshape(p, m * dims.c)
        )
    return H


def hankel_index_map(T: int, p: int, m: int, dims: HankelDims) -> np.ndarray:
    """Index array idx (p*r, m*c): H.ravel() = h[idx.ravel()].

    Entry (i*p + a, j*m + b) of the Hankel matrix holds coefficient
    h_{(a+1)(b+1)}(i + j + 1), which lives at position (a*m + b)*T + i + j
    of the stacked vector.
    """
    i = np.arange(dims.r)[:, None, None, None]
    a = np.arange(p)[None, :, None, None]
    j = np.arange(dims.c)[None, None, :, None]
    b = np.arange(m)[None, None, None, :]
    idx = (a * m + b) * T + (i + j)  # (r, p, c, m)
    return idx.reshape(dims.r * p, dims.c * m)


def hankel_permutation(T: int, p: int, m: int, dims: HankelDims) -> sp.csr_matrix:
    """Sparse 0/1 selection matrix P with vec(H(h)^T) = P h.

    vec stacks columns, so vec(H^T) enumerates H row by row; P has shape
    (r*p*c*m, T*m*p) with exactly one unit entry per row.
    """
    idx = hankel_index_map(T, p, m, dims).ravel()
    n_rows = idx.size
    return sp.csr_matrix(
        (np.ones(n_rows), (np.arange(n_rows), idx)),
        shape=(n_rows, T * m * p),
    )


def hankel_adjoint(M: np.ndarray, idx: np.ndarray, n_coeff: int) -> np.ndarray:
    """Apply P^T to vec(M^T): sum Hankel-position entries back into h slots."""
    return np.bincount(idx.ravel(), weights=M.ravel(), minlength=n_coeff)


def _window_second_moment(X: np.ndarray, width: int) -> np.ndarray:
    """Uncentered sample covariance of sliding windows [x(t); ...; x(t+width-1)]."""
    N, d = X.shape
    n_win = N - width + 1
    if n_win < 1:
        raise ValueError("series too short for the requested window")
    windows = np.empty((n_win, width * d))
    for k in range(width):
        windows[:, k * d : (k + 1) * d] = X[k : k + n_win]
    return windows.T @ windows / n_win


def build_weights(d: Dataset, dims: HankelDims, mode: str = "identity") -> WeightPair:
    """Hankel weighting matrices.

    identity
        Exact identity matrices (the default throughout the package).
    empirical
        W1 is the inverse upper Cholesky factor of the sample covariance of
        stacked past-input windows (m*c x m*c); W2 the same for stacked
        future-output windows (p*r x p*r).  Both covariances get a relative
        ridge of 1e-8 * trace/size before factorization.  This is an
        approximation: the weighting that turns the Hankel singular values
        into conditional canonical correlations needs conditional
        covariances that are not constructed here.
    """
    if mode == "identity":
        return WeightPair(np.eye(d.m * dims.c), np.eye(d.p * dims.r), mode="identity")
    if mode != "empirical":
        raise ValueError(f"unknown weighting mode {mode!r}")

    def inv_upper_chol(S: np.ndarray) -> np.ndarray:
        n = S.shape[0]
        S = S + (1e-8 * np.trace(S) / n) * np.eye(n)
        try:
            R = la.cholesky(S, lower=False)
        except la.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "window covariance not PD after ridge"
            ) from exc
        return la.solve_triangular(R, np.eye(n), lower=False)

    # past-input windows [u(t-1); ...; u(t-c)] share second moments with
    # the forward windows of the same width
    W1 = inv_upper_chol(_window_second_moment(d.u, dims.c))
    W2 = inv_upper_chol(_window_second_moment(d.y, dims.r))
    return WeightPair(W1, W2, mode="empirical")


def weighted_hankel(
    h: ImpulseResponse, dims: HankelDims, weights: WeightPair
) -> np.ndarray:
    """W2^T H(h) W1^T, the normalized Hankel matrix."""
    H = build_hankel(h, dims)
    if weights.is_identity:
        return H
    return weights.W2.T @ H @ weights.W1.T


# ---------- dataset CSV format ----------


def read_dataset_csv(path) -> Dataset:
    """Read a dataset CSV with header ``t,u1..um,y1..yp``.

    Column counts are checked strictly on every row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file")
        header = [c.strip() for c in header]
        if not header or header[0] != "t":
            raise ValueError(f"{path}: header must start with 't', got {header[:1]}")
        m = sum(1 for c in header if c.startswith("u"))
        p = sum(1 for c in header if c.startswith("y"))
        if m < 1 or p < 1:
            raise ValueError(f"{path}: header must contain u and y columns")
        if len(header) != 1 + m + p:
            raise ValueError(f"{path}: unrecognized columns in header {header}")
        u_rows, y_rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1 + m + p:
                raise ValueError(
                    f"{path}:{lineno}: expected {1 + m + p} columns, got {len(row)}"
                )
            vals = [float(v) for v in row]
            u_rows.append(vals[1 : 1 + m])
            y_rows.append(vals[1 + m :])
    if not u_rows:
        raise ValueError(f"{path}: no data rows")
    return Dataset(np.array(u_rows), np.array(y_rows))


def write_dataset_csv(path, d: Dataset) -> None:
    """Write a dataset in the ``t,u1..um,y1..yp`` format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t"]
            + [f"u{i + 1}" for i in range(d.m)]
            + [f"y{i + 1}" for i in range(d.p)]
        )
        for t in range(d.N):
            writer.writerow(
                [t + 1]
                + [repr(float(v)) for v in d.u[t]]
                + [repr(float(v)) for v in d.y[t]]
            )
