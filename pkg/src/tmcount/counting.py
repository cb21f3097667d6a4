"""Counting function of the exponents via contour quadrature.

The fraction of exponents below a level xi is recovered from corner
blocks of the balanced ring resolvent sampled on the circle of radius
e^xi.  The integrand is periodic in the angle with period 2*pi/n, so a
uniform trapezoid rule converges geometrically away from the jumps; the
average is the raw value, and 2m times it rounds to an integer count.

Near a jump the quadrature cannot settle: samples blow up when a grid
angle lands next to a zero of the characteristic polynomial, and the
quantization residual stalls.  Both conditions are detected; suspect
grids are retried once with a half-step angular shift, resolution is
escalated while it still pays, and surviving trouble is flagged as
near_eigenvalue rather than hidden.

Exponent location inverts the counting function by bisection.  The key
robustness fact: each mode contributes a term whose sign relative to
its plateau midpoint flips exactly at the mode's own exponent, for any
sample count and any grid offset.  Bisection on raw values therefore
stays correct even where the quadrature error is large, and coincident
exponents are recovered by re-bisecting a cluster against its midpoint
level and reading the multiplicity off the jump size.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import (OVERFLOW_GUARD, RingBandWorkspace, ScaleOverflowError,
                          SpectrumCollisionError, resolvent_corners_open)
from .operators import BlockTridiagonalSystem
from .transfer import ExponentSet, one_step_transfer, stable_exponents

#: escalate the quadrature while the quantization residual exceeds this
ESCALATE_RESIDUAL = 1e-4

#: flag the sample as near_eigenvalue above this quantization residual
NEAR_RESIDUAL = 0.25

#: stop escalating when one step improves the residual less than this
FUTILITY_FACTOR = 10.0

_MAX_BRACKET_GROWTH = 64


@dataclass(frozen=True)
class QuadratureSpec:
    """Uniform trapezoid rule on the periodic angular interval.

    n_phi samples per period; when auto_escalate is set, the sample
    count grows by factors of 4 up to max_n_phi while the quantization
    residual is above ESCALATE_RESIDUAL and still improving.
    """

    n_phi: int = 64
    auto_escalate: bool = True
    max_n_phi: int = 1024

    def __post_init__(self):
        if self.n_phi < 4:
            raise ValueError("n_phi must be at least 4")
        if self.max_n_phi < self.n_phi:
            raise ValueError("max_n_phi must be >= n_phi")


@dataclass(frozen=True)
class CountingSample:
    """One evaluation of the counting function at level xi.

    raw is the complex quadrature value including the 1/2 offset; count
    rounds 2m*raw.re to an integer in [0, 2m]; residual is the distance
    |2m*raw.re - count| before clipping.  error is None for a computed
    sample and a short tag when the point failed entirely.
    """

    xi: float
    raw: complex
    count: int
    n_phi: int
    residual: float
    near_eigenvalue: bool
    error: str | None = None


def _magnitude_threshold(m: int, n_phi: int) -> float:
    # settled integrand samples are O(m / gap); values far beyond that
    # mean a grid angle nearly hit a zero of the determinant
    return 20.0 * m + 0.2 * n_phi


def _quantization_residual(raw_re: float, m: int) -> float:
    t = 2.0 * m * raw_re
    return abs(t - math.floor(t + 0.5))


def _round_count(raw_re: float, m: int) -> int:
    c = int(math.floor(2.0 * m * raw_re + 0.5))
    return min(max(c, 0), 2 * m)


def _balanced_traces(ws: RingBandWorkspace, energy: complex, xi: float,
                     n_phi: int, shift: bool) -> np.ndarray:
    sys = ws.sys
    n, m = sys.n, sys.m
    B_last = sys.B[n - 1]
    C_first = sys.C[0]
    step = 2.0 * math.pi / (n * n_phi)
    out = np.empty(n_phi, dtype=complex)
    for j in range(n_phi):
        phi = (j + (0.5 if shift else 0.0)) * step
        z = cmath.exp(complex(xi, phi))
        f = ws.factor(energy, "balanced", z)
        f.require_nonsingular(f"counting contour at xi={xi:.6g}, phi={phi:.6g}")
        b11, b1n, bn1, bnn = f.corner_solve()
        out[j] = z * np.trace(b1n @ B_last) - np.trace(bn1 @ C_first) / z
    return out


def _sample_with_retry(sampler, m: int, n_phi: int):
    """Average the sampler's grid, retrying once with a half-step shift.

    The shift is taken on a spectrum collision or when some sample is
    implausibly large (grid angle next to a zero); whichever grid has
    the smaller peak magnitude wins.  Returns (mean, max_abs).
    """
    threshold = _magnitude_threshold(m, n_phi)
    plain = None
    plain_exc = None
    try:
        s = sampler(n_phi, False)
        plain = (complex(s.mean()), float(np.max(np.abs(s))))
        if plain[1] <= threshold:
            return plain
    except SpectrumCollisionError as exc:
        plain_exc = exc
    try:
        s = sampler(n_phi, True)
        shifted = (complex(s.mean()), float(np.max(np.abs(s))))
    except SpectrumCollisionError:
        if plain is not None:
            return plain
        raise plain_exc
    if plain is None or shifted[1] < plain[1]:
        return shifted
    return plain


def _adaptive_raw(sampler, m: int, quad: QuadratureSpec):
    """Escalating quadrature; returns (raw, residual, max_abs, n_phi)."""
    n_phi = quad.n_phi
    prev_residual = None
    best = None
    while True:
        mean, max_abs = _sample_with_retry(sampler, m, n_phi)
        raw = 0.5 + mean / (2.0 * m)
        residual = _quantization_residual(raw.real, m)
        if best is None or residual < best[1]:
            best = (raw, residual, max_abs, n_phi)
        if (not quad.auto_escalate or n_phi >= quad.max_n_phi
                or residual <= ESCALATE_RESIDUAL):
            break
        if prev_residual is not None and residual > prev_residual / FUTILITY_FACTOR:
            break
        prev_residual = residual
        n_phi = min(n_phi * 4, quad.max_n_phi)
    return best


def counting_integrand(sys: BlockTridiagonalSystem, energy: complex, xi: float,
                       phi: float, workspace: RingBandWorkspace | None = None) -> complex:
    """Trace of the corner-block combination at one contour angle.

    Value of tr[z G_1n B_n - (1/z) G_n1 C_1] with z = e^{xi + i phi} and
    G the balanced ring resolvent at energy.
    """
    ws = workspace if workspace is not None else RingBandWorkspace(sys)
    z = cmath.exp(complex(xi, phi))
    f = ws.factor(energy, "balanced", z)
    f.require_nonsingular(f"counting integrand at xi={xi:.6g}, phi={phi:.6g}")
    b11, b1n, bn1, bnn = f.corner_solve()
    return complex(z * np.trace(b1n @ sys.B[sys.n - 1])
                   - np.trace(bn1 @ sys.C[0]) / z)


def counting_function(sys: BlockTridiagonalSystem, energy: complex, xi: float,
                      quad: QuadratureSpec | None = None,
                      workspace: RingBandWorkspace | None = None) -> CountingSample:
    """Counting function at level xi through the balanced contour.

    raw = 1/2 + (1/2m) * (grid average of counting_integrand); the 1/2
    absorbs the constant term of the logarithmic derivative, which is
    never quadratured.  count = round(2m * raw.re).
    """
    if abs(xi) > OVERFLOW_GUARD:
        raise ScaleOverflowError(f"|xi| = {abs(xi):.3g} exceeds the overflow guard")
    if quad is None:
        quad = QuadratureSpec()
    ws = workspace if workspace is not None else RingBandWorkspace(sys)

    def sampler(n_phi, shift):
        return _balanced_traces(ws, energy, xi, n_phi, shift)

    raw, residual, max_abs, n_used = _adaptive_raw(sampler, sys.m, quad)
    near = residual > NEAR_RESIDUAL or max_abs > _magnitude_threshold(sys.m, n_used)
    return CountingSample(xi=xi, raw=raw, count=_round_count(raw.real, sys.m),
                          n_phi=n_used, residual=residual, near_eigenvalue=near)


# ---------------------------------------------------------------------------
# corner-block (open chain) path
# ---------------------------------------------------------------------------

def _corner_products(sys: BlockTridiagonalSystem, g):
    return (sys.B[sys.n - 1] @ g.b_1n, sys.B[sys.n - 1] @ g.b_11,
            sys.C[0] @ g.b_nn, sys.C[0] @ g.b_n1)


def _corner_trace_at(products, m: int, big_z: complex, variant: str) -> complex:
    bg1n, bg11, cgnn, cgn1 = products
    eye = np.eye(m)
    upper = big_z * bg1n + eye
    lower = cgn1 / big_z + eye
    try:
        if variant == "matrix":
            M = np.block([[-upper, -big_z * bg11], [cgnn / big_z, lower]])
            return complex(np.trace(np.linalg.inv(M)))
        t1 = -np.trace(np.linalg.inv(upper - bg11 @ np.linalg.solve(lower, cgnn)))
        t2 = np.trace(np.linalg.inv(lower - cgnn @ np.linalg.solve(upper, bg11)))
        return complex(t1 + t2)
    except np.linalg.LinAlgError as exc:
        raise SpectrumCollisionError(
            f"corner-path inner matrix singular at z^n = {big_z:.6g}") from exc


def counting_integrand_corner(sys: BlockTridiagonalSystem, energy: complex,
                              xi: float, phi: float, g=None,
                              variant: str = "schur") -> complex:
    """Corner-path value of the counting integrand at one angle.

    Uses the z-independent open-chain corner blocks g; z^n appears
    explicitly, so the overflow guard on n*|xi| applies.
    """
    if variant not in ("schur", "matrix"):
        raise ValueError(f"unknown corner variant {variant!r}")
    if sys.n * abs(xi) > OVERFLOW_GUARD:
        raise ScaleOverflowError(
            f"n*|xi| = {sys.n * abs(xi):.1f} exceeds the overflow guard; "
            "use the balanced path")
    if g is None:
        g = resolvent_corners_open(sys, energy)
    big_z = cmath.exp(complex(sys.n * xi, sys.n * phi))
    return _corner_trace_at(_corner_products(sys, g), sys.m, big_z, variant)


def counting_function_corner(sys: BlockTridiagonalSystem, energy: complex,
                             xi: float, quad: QuadratureSpec | None = None,
                             g=None, variant: str = "schur") -> CountingSample:
    """Counting function through the open-chain corner blocks.

    Same semantics as counting_function; after the one-time resolvent of
    the corner-free chain, each angle costs only small-matrix algebra.
    The Schur variant inverts two m x m matrices per angle, the matrix
    variant one 2m x 2m matrix; they agree to rounding.
    """
    if variant not in ("schur", "matrix"):
        raise ValueError(f"unknown corner variant {variant!r}")
    if sys.n * abs(xi) > OVERFLOW_GUARD:
        raise ScaleOverflowError(
            f"n*|xi| = {sys.n * abs(xi):.1f} exceeds the overflow guard; "
            "use the balanced path")
    if quad is None:
        quad = QuadratureSpec()
    if g is None:
        g = resolvent_corners_open(sys, energy)
    products = _corner_products(sys, g)
    n, m = sys.n, sys.m
    step = 2.0 * math.pi / n

    def sampler(n_phi, shift):
        out = np.empty(n_phi, dtype=complex)
        for j in range(n_phi):
            phi = (j + (0.5 if shift else 0.0)) * step / n_phi
            big_z = cmath.exp(complex(n * xi, n * phi))
            out[j] = _corner_trace_at(products, m, big_z, variant)
        return out

    raw, residual, max_abs, n_used = _adaptive_raw(sampler, m, quad)
    near = residual > NEAR_RESIDUAL or max_abs > _magnitude_threshold(m, n_used)
    return CountingSample(xi=xi, raw=raw, count=_round_count(raw.real, m),
                          n_phi=n_used, residual=residual, near_eigenvalue=near)


def counting_sweep(sys: BlockTridiagonalSystem, energy: complex, xi_grid,
                   quad: QuadratureSpec | None = None,
                   method: str = "balanced") -> list[CountingSample]:
    """Counting samples over a strictly increasing grid of levels.

    Per-point spectrum collisions are recorded in the sample's error
    field and the sweep continues; counts are monotone non-decreasing
    away from flagged points.
    """
    if method not in ("balanced", "corner"):
        raise ValueError(f"unknown sweep method {method!r}")
    xi_grid = [float(x) for x in xi_grid]
    if any(b <= a for a, b in zip(xi_grid, xi_grid[1:])):
        raise ValueError("xi grid must be strictly increasing")
    if quad is None:
        quad = QuadratureSpec()
    out = []
    if not xi_grid:
        return out
    if method == "corner":
        if sys.n * max(abs(x) for x in xi_grid) > OVERFLOW_GUARD:
            raise ScaleOverflowError(
                "corner sweep grid exceeds the z^n overflow guard; "
                "use the balanced method")
        g = resolvent_corners_open(sys, energy)
    else:
        g = None
    ws = RingBandWorkspace(sys)
    for x in xi_grid:
        try:
            if method == "balanced":
                out.append(counting_function(sys, energy, x, quad, workspace=ws))
            else:
                out.append(counting_function_corner(sys, energy, x, quad, g=g))
        except SpectrumCollisionError:
            out.append(CountingSample(
                xi=x, raw=complex(math.nan, math.nan), count=-1,
                n_phi=quad.n_phi, residual=math.nan, near_eigenvalue=True,
                error="spectrum_collision"))
    return out


# ---------------------------------------------------------------------------
# exponent location by bisection
# ---------------------------------------------------------------------------

def _default_bracket(sys: BlockTridiagonalSystem, energy: complex):
    # |eig(T)| is bounded by the product of one-step norms, so the
    # per-step exponents cannot leave [-max log||t^-1||, max log||t||]
    his, los = [], []
    for k in range(sys.n):
        t = one_step_transfer(sys, k, energy)
        his.append(math.log(np.linalg.norm(t, np.inf)))
        los.append(math.log(np.linalg.norm(np.linalg.inv(t), np.inf)))
    return -(max(los) + 0.1), max(his) + 0.1


def locate_exponents(sys: BlockTridiagonalSystem, energy: complex,
                     quad: QuadratureSpec | None = None,
                     bracket=None, tol: float = 1e-6) -> ExponentSet:
    """All 2m exponents, with multiplicity, by counting bisection.

    Works where the direct eigenvalue oracle loses small exponents to
    rounding.  Each sorted-position boundary is bisected on the raw
    counting value against its plateau midpoint; the flip there is
    sign-exact at any quadrature size, so a modest per-call n_phi
    suffices.  Boundaries closer than a merge window are re-bisected as
    one cluster against the cluster midpoint, then the cluster is
    accepted as a true multiplet only if high-resolution counts on both
    sides confirm the full jump; otherwise the individual boundaries
    stand.  Coincident exponents are exact; distinct exponents closer
    than the merge window are resolved only to the cluster scale.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, m = sys.n, sys.m
    two_m = 2 * m
    n_loc = quad.n_phi if quad is not None else int(np.clip(1024 // n, 16, 256))
    verify_quad = QuadratureSpec(n_phi=256, auto_escalate=False)
    ws = RingBandWorkspace(sys)

    def scaled_raw(xi: float) -> float:
        # 2m * raw.re = m + Re(grid average of the trace integrand)
        def sampler(n_phi, shift):
            return _balanced_traces(ws, energy, xi, n_phi, shift)
        mean, _ = _sample_with_retry(sampler, m, n_loc)
        return m + mean.real

    def count_at(xi: float) -> int:
        return counting_function(sys, energy, xi, verify_quad, workspace=ws).count

    explicit = bracket is not None
    if explicit:
        lo, hi = float(bracket[0]), float(bracket[1])
        if not lo < hi:
            raise ValueError("bracket invalid: lower edge must be below upper edge")
    else:
        lo, hi = _default_bracket(sys, energy)
    for _ in range(_MAX_BRACKET_GROWTH):
        if count_at(lo) == 0:
            break
        if explicit:
            raise ValueError("bracket invalid: count at the lower edge is not 0")
        lo -= max(1.0, 0.25 * (hi - lo))
    else:
        raise ValueError("could not establish a lower bracket with count 0")
    for _ in range(_MAX_BRACKET_GROWTH):
        if count_at(hi) == two_m:
            break
        if explicit:
            raise ValueError("bracket invalid: count at the upper edge is not 2m")
        hi += max(1.0, 0.25 * (hi - lo))
    else:
        raise ValueError("could not establish an upper bracket with count 2m")

    def bisect(a: float, b: float, threshold: float) -> float:
        while b - a > tol:
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if scaled_raw(mid) > threshold:
                b = mid
            else:
                a = mid
        return 0.5 * (a + b)

    bounds = []
    a = lo
    for k in range(two_m):
        bounds.append(bisect(a, hi, k + 0.5))
        a = max(a, bounds[-1] - tol)

    merge_window = max(1e-2, 10.0 * tol, 4.0 * math.log(3.0) / (n * n_loc))
    probe_quad = QuadratureSpec(n_phi=1024 if n < 8 else 256, auto_escalate=False)

    def probe_count(xi: float) -> int:
        return counting_function(sys, energy, xi, probe_quad, workspace=ws).count

    def resolve_cluster(i: int, j: int) -> list[float]:
        # levels i..j share a window narrower than the merge scale; decide
        # between one multiplet and a genuine split.  A true multiplet
        # jumps by the full q within a probe-resolvable distance of the
        # cluster midpoint; anything less reveals internal structure.
        if j == i:
            return [bounds[i]]
        q = j - i + 1
        c_lo = bounds[i] - merge_window
        if i > 0:
            c_lo = max(c_lo, 0.5 * (bounds[i - 1] + bounds[i]))
        c_hi = bounds[j] + merge_window
        if j + 1 < two_m:
            c_hi = min(c_hi, 0.5 * (bounds[j] + bounds[j + 1]))
        xstar = bisect(c_lo, c_hi, i + 0.5 * q)
        eps = max(10.0 * tol, math.log(8.0 * q) / (n * probe_quad.n_phi))
        eps = min(eps, 0.9 * (xstar - c_lo), 0.9 * (c_hi - xstar))
        if (eps > 0 and probe_count(xstar - eps) == i
                and probe_count(xstar + eps) == i + q):
            return [xstar] * q
        gaps = [bounds[t + 1] - bounds[t] for t in range(i, j)]
        t = i + int(np.argmax(gaps))
        return resolve_cluster(i, t) + resolve_cluster(t + 1, j)

    values: list[float] = []
    i = 0
    while i < two_m:
        j = i
        while j + 1 < two_m and bounds[j + 1] - bounds[j] < merge_window:
            j += 1
        values.extend(resolve_cluster(i, j))
        i = j + 1
    return ExponentSet(values=tuple(sorted(values)), reliable=True)


# ---------------------------------------------------------------------------
# sum rules
# ---------------------------------------------------------------------------

def _log_abs_det_b(sys: BlockTridiagonalSystem) -> float:
    total = 0.0
    for b in sys.B:
        sign, lad = np.linalg.slogdet(b)
        total += float(lad)
    return total


def _ring_logdet_average(sys: BlockTridiagonalSystem, energy: complex,
                         xi: float, n_phi: int) -> float:
    """Full-circle average of log|det[ring(e^{n xi + i phi}) - energy]|.

    Evaluated through the balanced variant at radius e^xi, whose
    determinant is identical and whose entries stay at scale e^|xi|.
    """
    ws = RingBandWorkspace(sys)
    n = sys.n
    for shift in (False, True):
        vals = np.empty(n_phi)
        ok = True
        for j in range(n_phi):
            phi = (j + (0.5 if shift else 0.0)) * 2.0 * math.pi / n_phi
            w = cmath.exp(complex(xi, phi / n))
            lad = ws.factor(energy, "balanced", w).logabsdet()
            if not math.isfinite(lad):
                ok = False
                break
            vals[j] = lad
        if ok:
            return float(vals.mean())
    raise SpectrumCollisionError(
        f"determinant contour at xi={xi:.6g} touches the spectrum on both grids")


def jensen_relation(sys: BlockTridiagonalSystem, energy: complex, xi: float,
                    quad: QuadratureSpec | None = None):
    """Both sides of the log-determinant sum rule at level xi.

    lhs = (1/2m) sum_a (|xi_a - xi| + xi_a + xi) - xi from the exponents
    (direct oracle where reliable, bisection otherwise); rhs from the
    full-circle quadrature of log|det| minus the coupling normalization.
    Returns (lhs, rhs).
    """
    n_phi = quad.n_phi if quad is not None else 512
    xs = stable_exponents(sys, energy)
    if not xs.reliable:
        xs = locate_exponents(sys, energy)
    m, n = sys.m, sys.n
    lhs = sum(abs(x - xi) + x + xi for x in xs.values) / (2.0 * m) - xi
    rhs = (_ring_logdet_average(sys, energy, xi, n_phi) / (m * n)
           - _log_abs_det_b(sys) / (m * n))
    return lhs, rhs


def positive_exponent_sum(sys: BlockTridiagonalSystem, energy: complex,
                          quad: QuadratureSpec | None = None) -> float:
    """(1/m) * (sum of positive exponents) from quadrature alone.

    The unit-radius case of the sum rule; no exponents are computed.
    """
    n_phi = quad.n_phi if quad is not None else 512
    m, n = sys.m, sys.n
    return (_ring_logdet_average(sys, energy, 0.0, n_phi) / (m * n)
            - _log_abs_det_b(sys) / (m * n))


def total_exponent_sum(sys: BlockTridiagonalSystem) -> float:
    """Sum of all 2m exponents from the coupling determinants only."""
    total = 0.0
    for c, b in zip(sys.C, sys.B):
        sign_c, lad_c = np.linalg.slogdet(c)
        sign_b, lad_b = np.linalg.slogdet(b)
        total += float(lad_c) - float(lad_b)
    return total / sys.n


def imaginary_part_check(sys: BlockTridiagonalSystem, energy: complex,
                         xi: float, quad: QuadratureSpec | None = None) -> float:
    """|grid average of Im(counting integrand)|; vanishes when valid.

    Individual samples need not be real; only the average is.
    """
    n_phi = quad.n_phi if quad is not None else 64
    ws = RingBandWorkspace(sys)

    def sampler(k, shift):
        return _balanced_traces(ws, energy, xi, k, shift)

    mean, _ = _sample_with_retry(sampler, sys.m, n_phi)
    return abs(mean.imag)
