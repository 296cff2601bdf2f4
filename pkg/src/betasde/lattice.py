"""Graph parameters and the small dense linear algebra built on them.

Matrices are plain ``numpy`` arrays of shape ``(n, n)``.  The factorizations
are hand written because the same routines run inside the compiled
integrators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import ConfigError, SingularMatrix

PD_TOL = 1e-12


def _as_vector(x, n: Optional[int] = None, name: str = "vector") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {n}")
    return v


def _connected(W: np.ndarray) -> bool:
    n = W.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.nonzero(W[i] > 0)[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return bool(seen.all())


@dataclass(frozen=True)
class GraphPotentialParams:
    """Conductances ``W`` on a connected graph with start levels ``theta`` and drifts ``eta``.

    Parameters
    ----------
    W : array_like, shape (n, n)
        Symmetric nonnegative conductances; self-loops (positive diagonal)
        are allowed.
    theta : array_like, shape (n,)
        Strictly positive start levels.
    eta : array_like, shape (n,)
        Nonnegative drifts.
    labels : sequence of str, optional
        Vertex names.
    """

    W: np.ndarray
    theta: np.ndarray
    eta: np.ndarray
    labels: Optional[tuple] = field(default=None)

    def __post_init__(self):
        W = np.array(self.W, dtype=float, ndmin=2)
        theta = _as_vector(self.theta, name="theta").copy()
        n = theta.shape[0]
        eta = _as_vector(self.eta, n, name="eta").copy()
        if W.shape != (n, n):
            raise ConfigError(f"W: expected shape ({n}, {n}), got {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ConfigError("W: entries must be finite")
        if not np.array_equal(W, W.T):
            raise ConfigError("W: matrix must be symmetric")
        if np.any(W < 0):
            raise ConfigError("W: conductances must be nonnegative")
        if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
            bad = int(np.argmin(theta))
            raise ConfigError(f"theta[{bad}]: start levels must be strictly positive")
        if not np.all(np.isfinite(eta)) or np.any(eta < 0):
            bad = int(np.argmin(eta))
            raise ConfigError(f"eta[{bad}]: drifts must be nonnegative")
        off = W - np.diag(np.diag(W))
        if not _connected(off):
            raise ConfigError("W: graph of positive off-diagonal conductances is not connected")
        labels = None if self.labels is None else tuple(str(s) for s in self.labels)
        if labels is not None and len(labels) != n:
            raise ConfigError("labels: one name per vertex required")
        for a in (W, theta, eta):
            a.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def with_eta(self, eta) -> "GraphPotentialParams":
        return GraphPotentialParams(self.W, self.theta, eta, self.labels)

    def with_theta(self, theta) -> "GraphPotentialParams":
        return GraphPotentialParams(self.W, theta, self.eta, self.labels)

    @classmethod
    def from_edges(cls, n: int, edges: Sequence, theta, eta, labels=None):
        """Build from ``(i, j, w)`` triples; ``i == j`` is a self-loop."""
        W = np.zeros((n, n))
        for i, j, w in edges:
            W[i, j] += w
            if i != j:
                W[j, i] += w
        return cls(W, theta, eta, labels)

    def effective_drift(self) -> np.ndarray:
        """``eta_i + sum_{j != i} W_ij theta_j``, the drift in the IG marginals."""
        off = self.W - np.diag(np.diag(self.W))
        return self.eta + off @ self.theta


def h_beta(params: GraphPotentialParams, beta) -> np.ndarray:
    """``2 diag(beta) - W``."""
    b = _as_vector(beta, params.n, "beta")
    return 2.0 * np.diag(b) - params.W


def k_t(params: GraphPotentialParams, t) -> np.ndarray:
    """``Id - diag(t) W``."""
    tt = _as_vector(t, params.n, "t")
    return np.eye(params.n) - tt[:, None] * params.W


def is_positive_definite(M, tol: float = PD_TOL) -> bool:
    """Cholesky test on the symmetric part with pivots relative to the max-norm."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.all(np.isfinite(A)):
        return False
    work = np.empty_like(A)
    return bool(K.chol_min_pivot(np.ascontiguousarray(A), work) > tol)


def solve(M, v, tol: float = PD_TOL) -> np.ndarray:
    """Solve ``M x = v`` with partial-pivot LU.

    Raises
    ------
    SingularMatrix
        If a pivot falls below ``tol`` relative to the max-norm of ``M``.
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    b = _as_vector(v, A.shape[0], "v").copy()
    if not K.lu_solve_inplace(A, b, tol):
        raise SingularMatrix("pivot below tolerance")
    return b


def determinant(M) -> float:
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    return float(K.lu_determinant(A))
