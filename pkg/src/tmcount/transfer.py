"""Transfer-matrix products and their growth exponents.

The one-step factor propagates (u_{k+1}, u_k) to (u_{k+2}, u_{k+1})
through the three-term recursion.  The n-step product is accumulated
with per-factor rescaling so only the 2m x 2m mantissa is stored in
floating point, together with the accumulated log of the pulled-out
scale.  Exponents are the per-step log moduli of the product's
eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import BlockTridiagonalSystem

#: dynamic-range limit: eigenvalue moduli of the rescaled product are
#: trusted only while n * (xi_max - xi_min) stays below this
RELIABLE_SPREAD = 30.0


@dataclass(frozen=True)
class TransferMatrix:
    """An n-step propagator stored as ``mat * exp(log_scale)``."""

    mat: np.ndarray
    log_scale: float

    def __post_init__(self):
        m = np.array(self.mat, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)


@dataclass(frozen=True)
class ExponentSet:
    """Sorted per-step growth exponents of a propagator.

    ``reliable`` is False when the dynamic range of the product exceeds
    what double-precision eigenvalues can resolve; the counting-function
    route remains usable in that regime.
    """

    values: tuple
    reliable: bool


def one_step_transfer(sys: BlockTridiagonalSystem, k: int, energy: complex) -> np.ndarray:
    """One factor of the propagator, for block index k (0-based).

    Solves with B_k rather than forming its inverse.  Raises ValueError
    if B_k is numerically singular or the factor is not finite.
    """
    m = sys.m
    rhs = np.hstack([energy * np.eye(m) - sys.A[k], -sys.C[k]])
    try:
        top = np.linalg.solve(sys.B[k], rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"B[{k}] is singular, one-step factor undefined") from exc
    if not np.all(np.isfinite(top)):
        raise ValueError(f"one-step factor {k} overflowed (B[{k}] nearly singular)")
    t = np.zeros((2 * m, 2 * m), dtype=complex)
    t[:m, :m] = top[:, :m]
    t[:m, m:] = top[:, m:]
    t[m:, :m] = np.eye(m)
    return t


def transfer_product(sys: BlockTridiagonalSystem, energy: complex) -> TransferMatrix:
    """Ordered product of all n one-step factors, last factor leftmost.

    After each multiplication the running product is divided by its
    infinity norm and the log of the scale is accumulated, keeping the
    stored mantissa's norm at one.
    """
    m = sys.m
    acc = np.eye(2 * m, dtype=complex)
    log_scale = 0.0
    for k in range(sys.n):
        acc = one_step_transfer(sys, k, energy) @ acc
        nrm = np.linalg.norm(acc, np.inf)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise ValueError(f"transfer product degenerated at factor {k}")
        acc /= nrm
        log_scale += math.log(nrm)
    return TransferMatrix(mat=acc, log_scale=log_scale)


def stable_exponents(sys: BlockTridiagonalSystem, energy: complex) -> ExponentSet:
    """Growth exponents from the eigenvalues of the rescaled product.

    xi_a = (log_scale + log|eig_a|) / n, sorted ascending.  The result
    is flagged unreliable once the exponent spread exceeds the
    dynamic-range limit; values are still returned for inspection.
    """
    tm = transfer_product(sys, energy)
    lam = np.linalg.eigvals(tm.mat)
    moduli = np.maximum(np.abs(lam), 1e-300)
    xs = np.sort((tm.log_scale + np.log(moduli)) / sys.n)
    spread = sys.n * (xs[-1] - xs[0])
    return ExponentSet(values=tuple(float(x) for x in xs),
                       reliable=bool(spread <= RELIABLE_SPREAD))


def direct_count(sys: BlockTridiagonalSystem, energy: complex, xi: float,
                 guard: float = 1e-9) -> int:
    """Number of exponents strictly below xi, via the eigenvalue route.

    Raises ValueError when xi sits within ``guard`` of an exponent,
    where the strict count is ambiguous in floating point.
    """
    exps = stable_exponents(sys, energy)
    vals = np.asarray(exps.values)
    if np.min(np.abs(vals - xi)) < guard:
        raise ValueError(
            f"xi={xi} is within {guard} of an exponent; count is ambiguous")
    return int(np.sum(vals < xi))
