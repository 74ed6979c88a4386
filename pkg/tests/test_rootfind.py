"""Bracketed root solving and implicit derivatives."""

import math

import numpy as np
import pytest

from pdegensol.numeric import NumericConfig, find_root
from pdegensol.numeric.errors import DegenerateRoot, RootNotFound
from pdegensol.numeric.rootfind import OK, bracket_bisect_newton


CFG = NumericConfig()


def test_simple_roots():
    # z^2 = 2 from seed 1: sqrt(2)                              [TRIVIAL]
    j = find_root(lambda z: z * z - 2.0, 1.0, CFG)
    assert j.value == pytest.approx(math.sqrt(2.0), abs=1e-12)
    # cos z = z from seed 0.5: the Dottie number 0.739085...    [DERIVED]
    j = find_root(lambda z: math.cos(z) - z, 0.5, CFG)
    assert j.value == pytest.approx(0.7390851332151607, abs=1e-12)


def test_root_below_seed():
    j = find_root(lambda z: math.exp(z) - 0.5, 0.0, CFG)
    assert j.value == pytest.approx(math.log(0.5), abs=1e-12)


def test_seed_exactly_at_root():
    j = find_root(lambda z: z - 1.25, 1.25, CFG)
    assert j.value == 1.25


def test_no_root_in_span_raises():
    # z^2 + 1 has no real root anywhere
    with pytest.raises(RootNotFound):
        find_root(lambda z: z * z + 1.0, 1.0, CFG)


def test_nan_wall_blocks_direction_but_other_side_found():
    # f undefined left of 0, root at 4 above the seed
    def f(z):
        if z < 0:
            return float("nan")
        return math.sqrt(z) - 2.0

    j = find_root(f, 0.5, CFG)
    assert j.value == pytest.approx(4.0, abs=1e-10)


def test_degenerate_derivative_detected():
    # z^2 has a double root: dphi/dz = 0 there
    with pytest.raises((DegenerateRoot, RootNotFound)):
        find_root(lambda z: z * z, 0.5, CFG, phi_z=lambda z: 2 * z)


def test_newton_polish_hits_tolerance():
    j = find_root(lambda z: z**3 - 7.0, 1.5, CFG,
                  phi_z=lambda z: 3.0 * z**2)
    z = 7.0 ** (1.0 / 3.0)
    assert j.value == pytest.approx(z, abs=1e-13)
    assert abs(j.value**3 - 7.0) <= 1e-11


def test_batched_columns_independent():
    # column k solves z^2 = k + 1; all columns at once
    targets = np.arange(1.0, 9.0)

    def fval(zs, cols):
        return zs * zs - targets[cols]

    def fprime(zs, cols):
        return 2.0 * zs

    seeds = np.ones(8)
    roots, status = bracket_bisect_newton(fval, fprime, seeds, CFG)
    assert (status == OK).all()
    assert np.allclose(roots, np.sqrt(targets), atol=1e-12)


def test_batched_partial_failure_isolates_columns():
    # odd columns have no real root; even columns still come back clean
    def fval(zs, cols):
        out = zs * zs - 2.0
        out[cols % 2 == 1] = zs[cols % 2 == 1] ** 2 + 1.0
        return out

    seeds = np.ones(6)
    roots, status = bracket_bisect_newton(fval, None, seeds, CFG)
    even = np.arange(6) % 2 == 0
    assert (status[even] == OK).all()
    assert np.allclose(roots[even], math.sqrt(2.0), atol=1e-10)
    assert not (status[~even] == OK).any()
    assert np.isnan(roots[~even]).all()


def test_span_cap_respected():
    # nearest root far outside the bracket span: must refuse
    with pytest.raises(RootNotFound):
        find_root(lambda z: z - 50.0, 0.0, CFG)
