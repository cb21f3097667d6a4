"""Contour counting function, exponent location by bisection, sum rules."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmcount import (
    QuadratureSpec,
    ScaleOverflowError,
    AndersonConfig,
    clean_limit_exponents,
    counting_function,
    counting_function_corner,
    counting_integrand,
    counting_integrand_corner,
    counting_sweep,
    direct_count,
    generate,
    imaginary_part_check,
    jensen_relation,
    locate_exponents,
    positive_exponent_sum,
    stable_exponents,
)

from conftest import random_system, scalar_chain

ARCCOSH_15 = 0.9624236501192069
ARCCOSH_25 = 1.5667992369724109
# frozen oracle: positive-exponent average of the clean 2x1 bar at
# energy 4, transverse modes {1, -1}: (acosh(3/2) + acosh(5/2)) / 2
POS_SUM_21_E4 = 1.2646114435458089


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(n_phi=2)
    with pytest.raises(ValueError):
        QuadratureSpec(n_phi=64, max_n_phi=32)


def test_integrand_periodicity():
    rng = np.random.default_rng(50)
    sys = random_system(rng, 2, 5)
    E = 0.3 - 0.1j
    for phi in (0.17, 1.9, 4.4):
        a = counting_integrand(sys, E, 0.25, phi)
        b = counting_integrand(sys, E, 0.25, phi + 2 * math.pi / sys.n)
        assert abs(a - b) < 1e-10


def test_scalar_counts_and_plateau_values():
    sys = scalar_chain(6)
    lo = counting_function(sys, 3.0, -2.0)
    mid = counting_function(sys, 3.0, 0.0)
    hi = counting_function(sys, 3.0, 2.0)
    assert (lo.count, mid.count, hi.count) == (0, 1, 2)
    # plateau raw values are exact half-integers for one pole per side
    assert lo.raw.real == pytest.approx(0.0, abs=1e-12)
    assert mid.raw.real == pytest.approx(0.5, abs=1e-12)
    assert hi.raw.real == pytest.approx(1.0, abs=1e-12)
    assert mid.residual < 1e-10
    assert not mid.near_eigenvalue
    assert mid.error is None


def test_count_matches_direct_oracle_random():
    rng = np.random.default_rng(51)
    for _ in range(6):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(3, 7))
        sys = random_system(rng, m, n)
        E = complex(rng.normal(), rng.normal() * 0.3)
        exps = np.asarray(stable_exponents(sys, E).values)
        for _ in range(4):
            xi = float(rng.uniform(exps[0] - 1.0, exps[-1] + 1.0))
            if np.min(np.abs(exps - xi)) < 0.05:
                continue
            sample = counting_function(sys, E, xi)
            assert sample.count == direct_count(sys, E, xi)
            # loose sanity bound; the default grid is still converging
            # this close to an exponent
            assert abs(sample.raw.imag) < 1e-3


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_count_matches_direct_oracle_property(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 3))
    n = int(rng.integers(3, 6))
    sys = random_system(rng, m, n)
    exps = np.asarray(stable_exponents(sys, 0.5).values)
    xi = float(rng.uniform(exps[0] - 0.8, exps[-1] + 0.8))
    if np.min(np.abs(exps - xi)) < 0.05:
        xi = exps[-1] + 0.5
    assert counting_function(sys, 0.5, xi).count == direct_count(sys, 0.5, xi)


def test_near_eigenvalue_flag():
    sys = scalar_chain(6)
    sample = counting_function(sys, 3.0, ARCCOSH_15 + 1e-9)
    assert sample.near_eigenvalue
    assert 0 <= sample.count <= 2


def test_overflow_guard_on_level():
    sys = scalar_chain(4)
    with pytest.raises(ScaleOverflowError):
        counting_function(sys, 3.0, 400.0)


def test_corner_route_matches_balanced():
    rng = np.random.default_rng(52)
    for _ in range(4):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(3, 6))
        sys = random_system(rng, m, n)
        E = complex(rng.normal(), rng.normal() * 0.4)
        for _ in range(5):
            xi = float(rng.uniform(-1.5, 1.5))
            phi = float(rng.uniform(0.0, 2 * math.pi))
            ref = counting_integrand(sys, E, xi, phi)
            for variant in ("schur", "matrix"):
                got = counting_integrand_corner(sys, E, xi, phi, variant=variant)
                assert abs(got - ref) < 1e-10


def test_corner_counting_function_agrees():
    sys = scalar_chain(6)
    for xi in (-1.6, 0.0, 1.4):
        a = counting_function(sys, 3.0, xi)
        b = counting_function_corner(sys, 3.0, xi)
        assert b.count == a.count
        assert abs(b.raw - a.raw) < 1e-10


def test_corner_route_overflow_guard():
    sys = scalar_chain(6)
    with pytest.raises(ScaleOverflowError, match="balanced"):
        counting_function_corner(sys, 3.0, 60.0)


def test_weak_coupling_decoupling_limit():
    # with near-zero couplings the chain ends decouple: the open-chain
    # corner product vanishes and the count sits at m exactly
    sys = scalar_chain(5, b=1e-8, c=1e-8)
    assert abs(counting_integrand(sys, 1.0, 0.0, 0.9)) < 1e-6
    sample = counting_function(sys, 1.0, 0.0)
    assert sample.count == 1
    assert sample.raw.real == pytest.approx(0.5, abs=1e-9)
    corner = counting_function_corner(sys, 1.0, 0.0)
    assert corner.count == 1


def test_retry_handles_contour_through_spectrum():
    # at energy 2 the uniform ring at z = 1 is exactly singular and z = 1
    # sits on the unshifted xi = 0 sampling grid; the half-step retry
    # must still produce a finite sample instead of raising
    sys = scalar_chain(3)
    sample = counting_function(sys, 2.0, 0.0)
    assert sample.error is None
    assert 0 <= sample.count <= 2
    assert np.isfinite(sample.raw.real)


def test_sweep_monotone_and_flag_free():
    sys = scalar_chain(6)
    grid = np.linspace(-2.0, 2.0, 41)
    samples = counting_sweep(sys, 3.0, grid)
    counts = [s.count for s in samples]
    assert counts[0] == 0 and counts[-1] == 2
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert all(s.error is None for s in samples)
    corner = counting_sweep(sys, 3.0, grid, method="corner")
    assert [s.count for s in corner] == counts


def test_sweep_rejects_bad_grid():
    sys = scalar_chain(4)
    with pytest.raises(ValueError):
        counting_sweep(sys, 3.0, [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        counting_sweep(sys, 3.0, [1.0, 0.5])
    assert counting_sweep(sys, 3.0, []) == []


def test_locate_scalar_exponents():
    sys = scalar_chain(6)
    exps = locate_exponents(sys, 3.0, tol=1e-8)
    assert exps.reliable
    assert len(exps.values) == 2
    assert exps.values[0] == pytest.approx(-ARCCOSH_15, abs=1e-7)
    assert exps.values[1] == pytest.approx(ARCCOSH_15, abs=1e-7)


def test_locate_accepts_explicit_bracket():
    sys = scalar_chain(6)
    exps = locate_exponents(sys, 3.0, bracket=(-3.0, 3.0), tol=1e-7)
    assert exps.values[1] == pytest.approx(ARCCOSH_15, abs=1e-6)


def test_locate_rejects_invalid_bracket():
    sys = scalar_chain(6)
    with pytest.raises(ValueError, match="bracket"):
        locate_exponents(sys, 3.0, bracket=(2.0, -2.0))


def test_locate_resolves_degenerate_multiplet():
    # clean square bar: transverse modes {2, 0, 0, -2} at energy 5 give
    # a doubly degenerate decay rate; bisection must report it twice
    cfg = AndersonConfig(wx=2, wy=2, length=12, disorder=0.0, seed=1,
                         energy=5.0)
    sys = generate(cfg)
    oracle = np.asarray(clean_limit_exponents(cfg).values)
    got = np.asarray(locate_exponents(sys, 5.0, tol=1e-7).values)
    assert got.shape == oracle.shape
    assert np.max(np.abs(got - oracle)) < 1e-5


def test_locate_matches_direct_oracle_random():
    rng = np.random.default_rng(53)
    for _ in range(3):
        m = int(rng.integers(1, 3))
        n = int(rng.integers(3, 6))
        sys = random_system(rng, m, n)
        direct = np.asarray(stable_exponents(sys, 0.8).values)
        got = np.asarray(locate_exponents(sys, 0.8, tol=1e-7).values)
        assert np.max(np.abs(got - direct)) < 1e-5


def test_jensen_frozen_scalar_value():
    sys = scalar_chain(6)
    lhs, rhs = jensen_relation(sys, 3.0, 0.0)
    assert lhs == pytest.approx(ARCCOSH_15, abs=1e-9)
    assert rhs == pytest.approx(ARCCOSH_15, abs=1e-9)


def test_jensen_trivial_regimes():
    # with the level above every exponent both sides reduce to the
    # level itself; below every exponent they reduce to minus the level
    # plus the full exponent average, here zero by symmetry
    sys = scalar_chain(6)
    for xi, expect in ((2.0, 2.0), (-2.0, 2.0)):
        lhs, rhs = jensen_relation(sys, 3.0, xi)
        assert lhs == pytest.approx(expect, abs=1e-9)
        assert abs(lhs - rhs) < 1e-8


def test_jensen_random_systems():
    rng = np.random.default_rng(54)
    for _ in range(4):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(3, 6))
        sys = random_system(rng, m, n)
        for _ in range(2):
            xi = float(rng.uniform(-1.0, 1.0))
            lhs, rhs = jensen_relation(sys, 0.45, xi)
            assert abs(lhs - rhs) < 1e-6


def test_positive_exponent_sum_scalar():
    sys = scalar_chain(6)
    assert positive_exponent_sum(sys, 3.0) == pytest.approx(
        ARCCOSH_15, abs=1e-9)


def test_positive_exponent_sum_clean_bar():
    cfg = AndersonConfig(wx=2, wy=1, length=8, disorder=0.0, seed=1)
    sys = generate(cfg)
    assert positive_exponent_sum(sys, 4.0) == pytest.approx(
        POS_SUM_21_E4, abs=1e-8)


def test_imaginary_part_average_vanishes():
    rng = np.random.default_rng(55)
    sys = random_system(rng, 2, 5, hermitian=True)
    for xi in (0.13, 0.52):
        assert imaginary_part_check(sys, 0.7, xi) < 1e-8
    assert imaginary_part_check(scalar_chain(5), 3.0, 0.3) < 1e-10
