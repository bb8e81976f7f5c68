"""Time-domain forward solver, noise synthesis and resolvent evaluations."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import RomresError, StabilityError

__all__ = [
    "TimeSeries",
    "NoiseModel",
    "simulate_response",
    "add_noise",
    "transfer_eval",
    "transfer_moments",
    "shifted_solver",
]

# exp(x) underflows to exactly 0.0 below this argument, so terms past the
# cutoff contribute nothing to a sum and can be skipped bit-identically.
_EXP_UNDERFLOW = -746.0


@dataclass(frozen=True)
class TimeSeries:
    """Samples y(t_k) at t_k = k*h_T for k = 1..N_T."""

    samples: np.ndarray
    step: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.step <= 0:
            raise RomresError("time step must be positive")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise RomresError("time series must be a nonempty vector")
        if not np.all(np.isfinite(self.samples)):
            raise RomresError("time series contains nonfinite samples")

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def horizon(self) -> float:
        return self.n_samples * self.step

    def times(self) -> np.ndarray:
        return self.step * np.arange(1, self.n_samples + 1)

    def to_csv(self) -> str:
        lines = ["t,value"]
        t = self.times()
        for tk, yk in zip(t, self.samples):
            lines.append(f"{tk!r},{yk!r}")
        return "\n".join(lines) + "\n"

    def metadata_json(self, epsilon: float = 0.0, seed: int | None = None) -> str:
        d = {"T": self.horizon, "h_T": self.step, "epsilon": epsilon, "seed": seed}
        return json.dumps(d, indent=2, sort_keys=True)


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative Gaussian noise, d_k = y_k (1 + level * chi_k)."""

    level: float
    seed: int = 0

    def __post_init__(self):
        if self.level < 0:
            raise RomresError("noise level must be nonnegative")


def _as_dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def spectral_weights(A, b) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of A and weights (b^T q_i)^2 for the symmetrized response."""
    Ad = _as_dense(A)
    lam, Q = sla.eigh(Ad)
    w = (Q.T @ b) ** 2
    return lam, w


def _spectral_series(lam, w, n_t, h_t):
    y = np.zeros(n_t)
    t1 = h_t
    for li, wi in zip(lam, w):
        if wi == 0.0:
            continue
        if li < 0:
            # index of the last sample where exp(li * t) is nonzero
            n_i = min(n_t, int(np.floor(_EXP_UNDERFLOW / (li * h_t))) + 1)
        else:
            n_i = n_t
        if n_i <= 0:
            continue
        t = t1 + h_t * np.arange(n_i)
        y[:n_i] += wi * np.exp(li * t)
    return y


def simulate_response(A, b, T: float, h_T: float, method: str = "spectral") -> TimeSeries:
    """Samples of y(t) = b^T exp(At) b on t = h_T, 2 h_T, ..., T.

    ``spectral`` evaluates the eigenexpansion exactly (modes are truncated
    only where exp underflows to zero).  ``euler`` runs explicit forward
    Euler and refuses steps beyond its stability bound 2/|lambda|_max.
    """
    if h_T <= 0 or T <= 0:
        raise RomresError("T and h_T must be positive")
    n_t = int(round(T / h_T))
    if n_t < 1:
        raise RomresError("empty time interval")
    b = np.asarray(b, dtype=float)

    if method == "spectral":
        lam, w = spectral_weights(A, b)
        return TimeSeries(_spectral_series(lam, w, n_t, h_T), h_T)

    if method == "euler":
        lam_max = _extreme_eigenvalue(A)
        bound = 2.0 / abs(lam_max)
        if h_T > bound:
            raise StabilityError(
                f"explicit Euler unstable: h_T={h_T:g} exceeds 2/|lambda|_max={bound:.3e}"
            )
        u = b.copy()
        y = np.empty(n_t)
        As = sp.csr_matrix(A) if not sp.issparse(A) else A
        for k in range(n_t):
            u = u + h_T * (As @ u)
            y[k] = b @ u
        return TimeSeries(y, h_T)

    raise RomresError(f"unknown method {method!r}")


def _extreme_eigenvalue(A) -> float:
    n = A.shape[0]
    if n <= 400 or not sp.issparse(A):
        lam = sla.eigvalsh(_as_dense(A))
        return lam[np.argmax(np.abs(lam))]
    val = spla.eigsh(A, k=1, which="LM", return_eigenvectors=False, tol=1e-8)
    return float(val[0])


def add_noise(series: TimeSeries, noise: NoiseModel) -> TimeSeries:
    """Apply the seeded multiplicative noise model; exact copy at level 0."""
    if noise.level == 0.0:
        return TimeSeries(series.samples.copy(), series.step)
    rng = np.random.default_rng(noise.seed)
    chi = rng.standard_normal(series.n_samples)
    return TimeSeries(series.samples * (1.0 + noise.level * chi), series.step)


class shifted_solver:
    """Cached sparse factorizations of (s I - A) across shifts."""

    def __init__(self, A):
        self._A = sp.csc_matrix(A)
        self._n = A.shape[0]
        self._factors = {}

    def solve(self, s: float, rhs: np.ndarray) -> np.ndarray:
        key = float(s)
        lu = self._factors.get(key)
        if lu is None:
            mat = (key * sp.identity(self._n, format="csc") - self._A).tocsc()
            try:
                lu = spla.splu(mat)
            except RuntimeError as exc:  # singular shift
                raise RomresError(f"singular shift s={s!r}: {exc}") from exc
            self._factors[key] = lu
        return lu.solve(rhs)


def transfer_eval(A, b_left, b_right=None, s: float = 1.0, solver: shifted_solver | None = None):
    """Value and s-derivative of b_left^T (sI - A)^{-1} b_right.

    The derivative is -b_left^T (sI - A)^{-2} b_right, computed from two
    resolvent solves (one when the two vectors coincide, using symmetry).
    """
    if b_right is None:
        b_right = b_left
    solver = solver or shifted_solver(A)
    x = solver.solve(s, np.asarray(b_right, dtype=float))
    same = b_left is b_right or np.array_equal(b_left, b_right)
    value = float(np.dot(b_left, x))
    if same:
        deriv = -float(np.dot(x, x))
    else:
        y = solver.solve(s, np.asarray(b_left, dtype=float))
        deriv = -float(np.dot(y, x))
    return value, deriv


def transfer_moments(A, b, s_hat: float, K: int, solver: shifted_solver | None = None) -> np.ndarray:
    """Taylor coefficients tau_0..tau_{K-1} of the transfer function at s_hat.

    tau_k = (-1)^k b^T (s_hat I - A)^{-(k+1)} b, so that
    Y(s) = sum_k tau_k (s - s_hat)^k.
    """
    import warnings

    if K < 1:
        raise RomresError("need at least one moment")
    if K > A.shape[0]:
        warnings.warn("more moments than system dimension; trailing ones are rank deficient")
    solver = solver or shifted_solver(A)
    b = np.asarray(b, dtype=float)
    tau = np.empty(K)
    x = b
    sign = 1.0
    for k in range(K):
        x = solver.solve(s_hat, x)
        tau[k] = sign * float(np.dot(b, x))
        sign = -sign
    return tau
