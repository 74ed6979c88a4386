"""Scenario sampling, residual plumbing, and report semantics.

These use few scenarios and points; the acceptance suite runs the full
production settings.
"""

import json

import numpy as np
import pytest

from pdegensol.catalog import get_family
from pdegensol.numeric import NumericConfig, SamplingExhausted
from pdegensol.verifier import (
    FAMILY_TOL,
    HINTS,
    FuncSpec,
    SamplingHints,
    Scenario,
    VerificationReport,
    _negate_seeds,
    crosscheck_derivatives,
    draw_function,
    draw_scenario,
    scenario_residuals,
    verify_catalog,
    verify_family,
)

CFG = NumericConfig()


def test_draw_function_deterministic():
    r1 = np.random.default_rng(42)
    r2 = np.random.default_rng(42)
    spec = FuncSpec(2, 0.2, (0.5, 1.0), slope=(0.3, 0.6), sin_amp=0.1)
    f1 = draw_function(r1, "F", 1, spec)
    f2 = draw_function(r2, "F", 1, spec)
    assert f1 == f2
    assert dict(f1.coeffs)[(1,)] >= 0.3  # forced slope range


def test_draw_scenario_respects_hints():
    fam = get_family("3.5")
    rng = np.random.default_rng(7)
    scn = draw_scenario(fam, rng, 0, 6, CFG)
    p = scn.parameters
    assert 0.7 <= p["a"] <= 1.1
    assert p["b"] ** 2 - 4 * p["a"] * p["k"] >= 0.05
    assert scn.points.shape == (6, 2)
    assert set(scn.functions) == {"F", "G"}
    assert set(scn.base_points) == set(fam.base_names)


def test_draw_scenario_exhaustion():
    fam = get_family("3.1")
    rng = np.random.default_rng(0)
    impossible = SamplingHints(admissible=lambda p: False)
    with pytest.raises(SamplingExhausted):
        draw_scenario(fam, rng, 0, 4, CFG, hints=impossible)


def test_scenario_residuals_resamples_bad_points():
    fam = get_family("3.6")
    rng = np.random.default_rng(3)
    scn = draw_scenario(fam, rng, 0, 6, CFG)
    # t = -80 drives this family's inner exponential out of range, which
    # poisons that column; the resample loop must swap the point out
    scn.points[2] = (-80.0, 0.5)
    rel, data, iset, resampled = scenario_residuals(fam, scn, CFG, rng)
    assert np.isfinite(rel).all()
    assert resampled >= 1
    # the sabotaged row was replaced inside the box
    assert 0.2 <= scn.points[2][0] <= 1.2


def test_residuals_tiny_for_valid_family():
    fam = get_family("3.4")
    rng = np.random.default_rng(11)
    scn = draw_scenario(fam, rng, 0, 8, CFG)
    rel, data, iset, _ = scenario_residuals(fam, scn, CFG, rng)
    assert float(np.max(rel)) < 1e-10


def test_crosscheck_catches_wrong_jet():
    fam = get_family("3.4")
    rng = np.random.default_rng(5)
    scn = draw_scenario(fam, rng, 0, 4, CFG)
    rel, data, iset, _ = scenario_residuals(fam, scn, CFG, rng)
    dev = crosscheck_derivatives(fam, scn, data, iset, np.arange(2), CFG)
    assert dev < 1e-5
    # corrupt one derivative row: the check must notice
    broken = data.copy()
    broken[iset.pos[(1, 0)]] += 0.37
    dev2 = crosscheck_derivatives(fam, scn, broken, iset, np.arange(2), CFG)
    assert dev2 > 0.05


def test_verify_family_pass_and_report_shape():
    r = verify_family("3.6", n_scenarios=2, n_points=6, seed=5)
    assert r.verdict == "PASS"
    assert r.max_rel_residual < 1e-8
    d = r.to_dict()
    assert d["family"] == "3.6"
    assert len(d["scenarios"]) == 2
    assert all(s["status"] == "ok" for s in d["scenarios"])
    assert "wall_time_s" not in json.loads(r.to_json())
    assert r.wall_time_s > 0


def test_verify_family_accepts_family_object():
    fam = get_family("3.1")
    r = verify_family(fam, n_scenarios=1, n_points=4)
    assert r.family == "3.1"
    assert r.verdict == "PASS"


def test_verify_json_deterministic():
    a = verify_family("3.2", n_scenarios=2, n_points=6, seed=7).to_json()
    b = verify_family("3.2", n_scenarios=2, n_points=6, seed=7).to_json()
    assert a == b
    c = verify_family("3.2", n_scenarios=2, n_points=6, seed=8).to_json()
    assert a != c


def test_wrong_solution_fails_with_confirmed_crosscheck():
    # verify a family whose stored solution we break on purpose: clone the
    # family record with a perturbed solution text
    import copy

    fam = copy.copy(get_family("3.1"))
    from pdegensol.expr_core import Env, parse

    env = Env(variables=fam.variables, parameters=fam.parameters,
              functions=fam.functions)
    fam.solution = parse(f"({fam.sol_text}) + x^2/50", env)
    r = verify_family(fam, n_scenarios=2, n_points=6, seed=1)
    assert r.verdict == "FAIL"
    assert r.max_rel_residual > 1e-4
    # cross-check still fine: the jet evaluator is not at fault
    assert r.xcheck_max_dev <= r.xcheck_tol


def test_tolerance_floor_guards_fail_verdict():
    import copy

    fam = copy.copy(get_family("3.1"))
    from pdegensol.expr_core import Env, parse

    env = Env(variables=fam.variables, parameters=fam.parameters,
              functions=fam.functions)
    fam.solution = parse(f"({fam.sol_text}) + x^2/50", env)
    # tolerance below 10x the numeric floor: must refuse to call it FAIL
    r = verify_family(fam, n_scenarios=1, n_points=4, tol_rel=1e-8)
    assert r.verdict == "INDETERMINATE"
    assert any("floor" in n for n in r.notes)


def test_param_overrides_pin_values():
    r = verify_family("3.1", n_scenarios=1, n_points=4,
                      param_overrides={"c": 0.0})
    assert r.verdict == "PASS"
    assert r.scenarios[0]["parameters"]["c"] == 0.0


def test_base_shift_scenarios_pass():
    r = verify_family("3.2", n_scenarios=1, n_points=6, base_shift=0.5)
    assert r.verdict == "PASS"


def test_probe_branches_mirrored_root():
    r = verify_family("5.3", n_scenarios=1, n_points=4,
                      probe_branches=True)
    assert r.branch_probe is not None
    assert r.branch_probe["status"] in {"solves", "no_root"}
    d = r.to_dict()
    assert "branch_probe" in d


def test_negate_seeds_transform():
    fam = get_family("5.2")
    alt = _negate_seeds(fam.solution)
    from pdegensol.expr_core import RootOf, walk

    seeds = [n.seed for n in walk(alt) if isinstance(n, RootOf)]
    orig = [n.seed for n in walk(fam.solution) if isinstance(n, RootOf)]
    assert seeds == [-s for s in orig]


def test_verify_catalog_orders_results():
    ids = ["3.2", "3.1"]
    rs = verify_catalog(ids, n_scenarios=1, n_points=4)
    assert [r.family for r in rs] == ids


def test_verify_catalog_threaded_matches_serial():
    ids = ["3.1", "3.4", "6.1"]
    serial = [r.to_json() for r in
              verify_catalog(ids, n_scenarios=1, n_points=4)]
    threaded = [r.to_json() for r in
                verify_catalog(ids, threads=3, n_scenarios=1, n_points=4)]
    assert serial == threaded


def test_family_tolerances_registered():
    assert FAMILY_TOL["3.7"] == 1e-5
    assert FAMILY_TOL["3.8"] == 1e-5
    assert set(HINTS) == set(
        f"{a}.{b}" for a, b in [
            (3, i) for i in range(1, 12)
        ] + [(4, i) for i in range(1, 5)]
        + [(5, i) for i in range(1, 4)]
        + [(6, i) for i in range(1, 6)]
        + [(7, i) for i in range(1, 3)])
