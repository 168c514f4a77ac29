"""Solve the coupled quadratic system for the hitting-time generating
functions R and compute their first and second derivatives at a point by
implicit differentiation.

The system, written over the flat index ell = (i, j, k), is

    R = lam * (p + A1 @ R + (C @ R) * R)

where A1 carries the same-sign neighbour terms and C the opposite-sign
return terms.  The monotone iteration a_{n+1} = f(a_n) from a_0 = f(0)
increases componentwise to the minimal fixed point, which is the
probabilistically correct root.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .chain import TransitionKernel

DEFAULT_TOL = 1e-13
DEFAULT_MAX_ITER = 10**6


class SolverError(RuntimeError):
    """Iteration failed to converge, or the implicit linear system is singular."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class IndexMap:
    """Documented flat order for the 2N(N-1) arc indices: the sign k runs
    outermost (+1 then -1), then the source i, then the target j skipping
    j = i.  Matrices built on this order are reproducible everywhere."""

    def __init__(self, n_windows: int):
        self.n_windows = n_windows
        self.tuples: List[Tuple[int, int, int]] = [
            (i, j, k)
            for k in (1, -1)
            for i in range(1, n_windows + 1)
            for j in range(1, n_windows + 1)
            if j != i
        ]
        self._flat = {t: n for n, t in enumerate(self.tuples)}

    def __len__(self) -> int:
        return len(self.tuples)

    def flat(self, i: int, j: int, k: int) -> int:
        return self._flat[(i, j, k)]


@dataclass
class RSolution:
    """Converged R values at one lambda, with the fixed-point defect."""

    lam: float
    index: IndexMap
    values: np.ndarray
    residual: float
    iterations: int

    def value(self, i: int, j: int, k: int) -> float:
        return float(self.values[self.index.flat(i, j, k)])

    def as_dict(self) -> Dict[Tuple[int, int, int], float]:
        return {t: float(v) for t, v in zip(self.index.tuples, self.values)}


@dataclass
class RDerivatives:
    """First and second lambda-derivatives of R at the solved point."""

    index: IndexMap
    d1: np.ndarray
    d2: np.ndarray

    def first(self, i: int, j: int, k: int) -> float:
        return float(self.d1[self.index.flat(i, j, k)])

    def second(self, i: int, j: int, k: int) -> float:
        return float(self.d2[self.index.flat(i, j, k)])


def system_matrices(kernel: TransitionKernel) -> Tuple[IndexMap, np.ndarray, np.ndarray, np.ndarray]:
    """Flat-index data (index, p, A1, C) for the quadratic system."""
    index = IndexMap(kernel.n_windows)
    dim = len(index)
    n = kernel.n_windows
    p_vec = np.array([kernel.prob(i, j, k) for (i, j, k) in index.tuples])
    a1 = np.zeros((dim, dim))
    c = np.zeros((dim, dim))
    for row, (i, j, k) in enumerate(index.tuples):
        for m in range(1, n + 1):
            if m != i and m != j:
                a1[row, index.flat(m, j, k)] = kernel.prob(i, m, k)
            if m != i:
                c[row, index.flat(m, i, -k)] = kernel.prob(i, m, -k)
    return index, p_vec, a1, c


def solve_r(
    kernel: TransitionKernel,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RSolution:
    """Minimal fixed point of the quadratic system at ``lam`` in [0, 1]."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    index, p_vec, a1, c = system_matrices(kernel)
    q = np.zeros(len(index))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        q_next = lam * (p_vec + a1 @ q + (c @ q) * q)
        delta = float(np.max(np.abs(q_next - q)))
        q = q_next
        if delta < tol:
            break
    else:
        raise SolverError(
            f"fixed-point iteration did not converge in {max_iter} iterations", residual=delta
        )
    residual = float(np.max(np.abs(q - lam * (p_vec + a1 @ q + (c @ q) * q))))
    return RSolution(lam, index, q, residual, iterations)


def build_m_matrix(
    kernel: TransitionKernel, lam: float, values: np.ndarray
) -> np.ndarray:
    """Jacobian-style matrix of the system linearised at ``values``.

    Entry cases: same-(j, k) column block lam*p, opposite-sign block
    lam*p*R, and the diagonal lam * sum of opposite-sign return terms.
    """
    _, _, a1, c = system_matrices(kernel)
    return lam * (a1 + np.diag(c @ values) + np.diag(values) @ c)


def solve_r_derivatives(kernel: TransitionKernel, r: RSolution) -> RDerivatives:
    """Implicit first and second derivatives of R in lambda at ``r.lam``.

    Differentiating the fixed point once gives (I - M) d1 = r / lam, and a
    second time (I - M) d2 = 2 (M / lam) d1 + 2 lam (C d1) * d1 with the
    quadratic cross terms from the return products.  Both right-hand sides
    are unit-tested against finite differences of solve_r.
    """
    if r.lam <= 0:
        raise ValueError("derivatives require lambda > 0")
    _, _, a1, c = system_matrices(kernel)
    lam, q = r.lam, r.values
    m = lam * (a1 + np.diag(c @ q) + np.diag(q) @ c)
    eye = np.eye(len(q))
    try:
        d1 = np.linalg.solve(eye - m, q / lam)
        rhs2 = 2.0 * (m @ d1) / lam + 2.0 * lam * (c @ d1) * d1
        d2 = np.linalg.solve(eye - m, rhs2)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"implicit derivative system is singular: {exc}") from exc
    return RDerivatives(r.index, d1, d2)


def perron_root(matrix: np.ndarray, tol: float = 1e-12, max_iter: int = 100000) -> float:
    """Dominant eigenvalue of a non-negative matrix by power iteration."""
    dim = matrix.shape[0]
    v = np.full(dim, 1.0 / dim)
    mu = 0.0
    for _ in range(max_iter):
        w = matrix @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        w /= norm
        mu_next = float(w @ matrix @ w) / float(w @ w)
        if abs(mu_next - mu) < tol * max(1.0, abs(mu_next)):
            return mu_next
        mu, v = mu_next, w
    raise SolverError(f"power iteration did not converge in {max_iter} iterations")


def primitivity_pattern_ok(matrix: np.ndarray) -> bool:
    """True when the 0/1 pattern of the matrix cubed is all ones."""
    pattern = (matrix > 0).astype(np.int64)
    return bool((np.linalg.matrix_power(pattern, 3) > 0).all())


def transience_root(kernel: TransitionKernel) -> float:
    """Perron root of the linearised matrix at lambda=1 with all R set to 1.

    This is the recurrence-hypothesis matrix: its root strictly above 1
    certifies that the chain escapes to infinity.
    """
    ones = np.ones(2 * kernel.n_windows * (kernel.n_windows - 1))
    return perron_root(build_m_matrix(kernel, 1.0, ones))


def solution_to_json(r: RSolution, derivs: RDerivatives | None = None) -> dict:
    out = {
        "lambda": r.lam,
        "R": [
            {"i": i, "j": j, "k": k, "value": float(v)}
            for (i, j, k), v in zip(r.index.tuples, r.values)
        ],
        "iterations": r.iterations,
        "residual": r.residual,
    }
    if derivs is not None:
        out["d1"] = [
            {"i": i, "j": j, "k": k, "value": float(v)}
            for (i, j, k), v in zip(r.index.tuples, derivs.d1)
        ]
        out["d2"] = [
            {"i": i, "j": j, "k": k, "value": float(v)}
            for (i, j, k), v in zip(r.index.tuples, derivs.d2)
        ]
    return out
