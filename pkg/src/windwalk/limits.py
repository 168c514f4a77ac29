"""Assemble the chamber matrices, differentiate the determinant
h(lam, z) = det[I - B(+1) B(-1)] through second-order jets, and produce the
drift and variance of the limit theorems.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Dict, List, Optional

import numpy as np

from .chain import TransitionKernel
from .groupoid import Arc, Metric
from .jets import Jet2, power_jet, series_jet
from .solver import (
    RDerivatives,
    RSolution,
    SolverError,
    perron_root,
    solve_r,
    solve_r_derivatives,
)

PIVOT_EPS = 1e-14
SIMPLE_ZERO_TOL = 1e-10


class DegenerateSystemError(RuntimeError):
    """The determinant or its lambda-slope degenerates; upstream inputs are bad."""


@dataclass
class LimitConstants:
    gamma: float
    sigma2: float
    h_value: float
    h_partials: Dict[str, float]
    metric: str

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "sigma2": self.sigma2,
            "h_value": self.h_value,
            "h_partials": dict(self.h_partials),
            "metric": self.metric,
        }


def build_b(
    kernel: TransitionKernel,
    r: RSolution,
    derivs: RDerivatives,
    metric: Metric,
    sign: int,
) -> List[List[Jet2]]:
    """N x N jet matrix with entries z^w(i,j,sign) * R_{i,j}^{(sign)}(lam);
    the diagonal is zero."""
    n = kernel.n_windows
    zero = Jet2()
    rows: List[List[Jet2]] = []
    for i in range(1, n + 1):
        row = []
        for j in range(1, n + 1):
            if i == j:
                row.append(zero)
                continue
            w = metric.weight(Arc(i, j, sign))
            lam_jet = series_jet(r.value(i, j, sign), derivs.first(i, j, sign),
                                 derivs.second(i, j, sign))
            row.append(power_jet(w) * lam_jet)
        rows.append(row)
    return rows


def _mat_mul(a: List[List[Jet2]], b: List[List[Jet2]]) -> List[List[Jet2]]:
    n = len(a)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = Jet2()
            for m in range(n):
                acc = acc + a[i][m] * b[m][j]
            row.append(acc)
        out.append(row)
    return out


def _identity_minus(prod: List[List[Jet2]]) -> List[List[Jet2]]:
    n = len(prod)
    return [
        [(Jet2.const(1.0) - prod[i][j]) if i == j else -prod[i][j] for j in range(n)]
        for i in range(n)
    ]


def det_jet(matrix: List[List[Jet2]]) -> Jet2:
    """Determinant over the jet ring by LU elimination, pivoting on the
    largest constant term.

    Only elimination steps divide by a pivot, so a vanishing constant term in
    the final pivot (the simple zero of h at (1, 1)) is harmless.  If every
    candidate pivot of a non-final column degenerates, fall back to cofactor
    expansion for small matrices.
    """
    n = len(matrix)
    a = [row[:] for row in matrix]
    det = Jet2.const(1.0)
    for col in range(n):
        pivot_row = max(range(col, n), key=lambda r: abs(a[r][col].c00))
        if col < n - 1 and abs(a[pivot_row][col].c00) < PIVOT_EPS:
            if n <= 6:
                return _det_cofactor(matrix)
            raise DegenerateSystemError(
                f"all candidate pivots in column {col} have near-zero constant term"
            )
        if pivot_row != col:
            a[col], a[pivot_row] = a[pivot_row], a[col]
            det = -det
        det = det * a[col][col]
        if col < n - 1:
            inv = a[col][col].inverse()
            for r in range(col + 1, n):
                factor = a[r][col] * inv
                for cc in range(col + 1, n):
                    a[r][cc] = a[r][cc] - factor * a[col][cc]
    return det


def _det_cofactor(matrix: List[List[Jet2]]) -> Jet2:
    n = len(matrix)
    acc = Jet2()
    for perm in permutations(range(n)):
        sign = 1
        seen = list(perm)
        for idx in range(n):  # parity by counting inversions
            for jdx in range(idx + 1, n):
                if seen[idx] > seen[jdx]:
                    sign = -sign
        term = Jet2.const(float(sign))
        for i in range(n):
            term = term * matrix[i][perm[i]]
        acc = acc + term
    return acc


def det_h(b_plus: List[List[Jet2]], b_minus: List[List[Jet2]]) -> Jet2:
    """Full second-order jet of h = det[I - B(+1) B(-1)] about (1, 1)."""
    return det_jet(_identity_minus(_mat_mul(b_plus, b_minus)))


def limit_constants(h: Jet2, metric_name: str = "custom") -> LimitConstants:
    """Drift and variance from the five partials of h at (1, 1)."""
    h_l = h.d_lambda
    h_z = h.d_z
    if abs(h_l) < 1e-12:
        raise DegenerateSystemError("lambda-slope of the determinant vanishes")
    gamma = h_z / h_l
    sigma2 = (
        h.d2_z + h_z - 2.0 * gamma * h.d_lambda_z + gamma**2 * (h.d2_lambda + h_l)
    ) / h_l
    partials = {
        "d_lambda": h_l,
        "d_z": h_z,
        "d2_lambda": h.d2_lambda,
        "d_lambda_z": h.d_lambda_z,
        "d2_z": h.d2_z,
    }
    return LimitConstants(gamma, sigma2, h.value, partials, metric_name)


def compute_limits(
    kernel: TransitionKernel,
    metric: Metric,
    tol: float = 1e-13,
    check_sigma: bool = True,
) -> LimitConstants:
    """Full pipeline: solve R at lambda=1, differentiate implicitly, build the
    jets and read off gamma and sigma^2."""
    r = solve_r(kernel, 1.0, tol=tol)
    derivs = solve_r_derivatives(kernel, r)
    h = det_h(
        build_b(kernel, r, derivs, metric, +1),
        build_b(kernel, r, derivs, metric, -1),
    )
    if abs(h.value) > SIMPLE_ZERO_TOL:
        raise DegenerateSystemError(
            f"determinant at (1,1) is {h.value!r}, expected a simple zero"
        )
    constants = limit_constants(h, metric.name)
    if check_sigma and constants.sigma2 < 0:
        raise DegenerateSystemError(f"negative variance {constants.sigma2!r}")
    return constants


def kms_phi(n: int, x: float, z: float) -> float:
    """Characteristic-polynomial recurrence of the z^|i-j| Toeplitz matrix:
    phi_n = (1 - x - z^2 (1 + x)) phi_{n-1} - x^2 z^2 phi_{n-2}."""
    if n < 0:
        raise ValueError("n must be non-negative")
    phi_prev, phi = 1.0, 1.0 - x  # phi_0, phi_1
    if n == 0:
        return phi_prev
    for _ in range(n - 1):
        phi_prev, phi = phi, (1.0 - x - z * z * (1.0 + x)) * phi - x * x * z * z * phi_prev
    return phi


def b_matrix_values(
    kernel: TransitionKernel,
    metric: Metric,
    sign: int,
    r: RSolution,
    z: float,
) -> np.ndarray:
    """Plain float N x N matrix of z^w R values (constant terms)."""
    n = kernel.n_windows
    out = np.zeros((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                w = metric.weight(Arc(i, j, sign))
                out[i - 1, j - 1] = z**w * r.value(i, j, sign)
    return out


def build_k_matrix(
    kernel: TransitionKernel,
    metric: Metric,
    lam: float,
    z: float,
    tol: float = 1e-13,
    r: Optional[RSolution] = None,
) -> np.ndarray:
    """The 2N x 2N block matrix [[0, B(+1)], [B(-1), 0]] at (lam, z)."""
    r = r if r is not None else solve_r(kernel, lam, tol=tol)
    n = kernel.n_windows
    b_plus = b_matrix_values(kernel, metric, +1, r, z)
    b_minus = b_matrix_values(kernel, metric, -1, r, z)
    k = np.zeros((2 * n, 2 * n))
    k[:n, n:] = b_plus
    k[n:, :n] = b_minus
    return k


def spectral_radius_k(
    kernel: TransitionKernel,
    metric: Metric,
    lam: float,
    z: float,
    tol: float = 1e-13,
) -> float:
    """Perron root of the period-2 block matrix, computed by power iteration
    on its square."""
    if not (0.0 < lam <= 1.0 and 0.0 < z <= 1.0):
        raise ValueError("spectral radius is evaluated for lam, z in (0, 1]")
    k = build_k_matrix(kernel, metric, lam, z, tol=tol)
    if not k.any():
        return 0.0
    try:
        rho_sq = perron_root(k @ k)
    except SolverError as exc:
        raise DegenerateSystemError(str(exc)) from exc
    return float(np.sqrt(max(rho_sq, 0.0)))
