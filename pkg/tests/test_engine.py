"""Batched expression evaluation: values, exact derivative jets, and the
typed failure surface.

Every derivative produced by the engine is compared against either a hand
closed form or Richardson-improved central differences of the engine's own
values, which exercises a fully independent route (value evaluation plus
difference quotients vs jet algebra).
"""

import math

import numpy as np
import pytest

from pdegensol.expr_core import Env, parse
from pdegensol.numeric import (
    DomainError,
    EvalContext,
    IndexSet,
    JetBatch,
    NestLimitExceeded,
    NumericConfig,
    RootNotFound,
    eval_batch,
    eval_jet,
    polynomial,
)

from conftest import central_diff, mk_poly1, richardson

CFG = NumericConfig()


def _jet(text, point, scn, orders, env_vars=None, cfg=None):
    env = Env(variables=tuple(scn.variables),
              parameters=tuple(scn.parameters),
              functions={k: v.arity for k, v in scn.functions.items()})
    e = parse(text, env)
    return eval_jet(e, point, scn, orders, cfg or CFG)


def test_values_and_derivatives_closed_form(scn_tx):
    j = _jet("exp(t*x) + x^3", {"t": 0.5, "x": 0.8}, scn_tx,
             [(2, 1), (0, 3)])
    t, x = 0.5, 0.8
    assert j.value == pytest.approx(math.exp(t * x) + x**3, rel=1e-14)
    assert j.d(x=1) == pytest.approx(t * math.exp(t * x) + 3 * x**2,
                                     rel=1e-13)
    # d/dt: x e^{tx}; d2/dt2: x^2 e^{tx}; d/dx of that:
    # 2x e^{tx} + x^2 t e^{tx}                                 [DERIVED]
    want = math.exp(t * x) * (2 * x + x * x * t)
    assert j.d(t=2, x=1) == pytest.approx(want, rel=1e-12)
    assert j.d(x=3) == pytest.approx(
        t**3 * math.exp(t * x) + 6.0, rel=1e-12)


def test_function_instance_derivatives_exact(scn_tx):
    F = mk_poly1("F", {0: 0.7, 1: 0.4, 2: -0.3, 3: 0.05}, sin_amp=0.2,
                 sin_freq=1.7, sin_phase=0.3)
    scn_tx.functions["F"] = F
    j = _jet("F(x)", {"t": 0.2, "x": 0.9}, scn_tx, [(0, 3)])
    x = 0.9

    def f(x):
        return (0.7 + 0.4 * x - 0.3 * x**2 + 0.05 * x**3
                + 0.2 * math.sin(1.7 * x + 0.3))

    assert j.value == pytest.approx(f(x), rel=1e-14)
    d1 = 0.4 - 0.6 * x + 0.15 * x**2 + 0.2 * 1.7 * math.cos(1.7 * x + 0.3)
    assert j.d(x=1) == pytest.approx(d1, rel=1e-13)
    d3 = 0.3 - 0.2 * 1.7**3 * math.cos(1.7 * x + 0.3)
    assert j.d(x=3) == pytest.approx(d3, rel=1e-12)


def test_composed_function_chain_rule(scn_tx):
    scn_tx.functions["G"] = mk_poly1("G", {0: 0.3, 1: 0.8, 2: 0.1})
    j = _jet("G(t*x + x^2)", {"t": 0.6, "x": 0.7}, scn_tx, [(1, 1)])
    t, x = 0.6, 0.7

    def g(u):
        return 0.3 + 0.8 * u + 0.1 * u * u

    def gp(u):
        return 0.8 + 0.2 * u

    u = t * x + x * x
    assert j.value == pytest.approx(g(u), rel=1e-14)
    assert j.d(t=1) == pytest.approx(gp(u) * x, rel=1e-13)
    # mixed: d/dt d/dx g(u) with u_x = t + 2x, u_t = x
    want = 0.2 * x * (t + 2 * x) + gp(u)
    assert j.d(t=1, x=1) == pytest.approx(want, rel=1e-12)


def test_integral_jet_exact_via_leibniz(scn_tx):
    # I(t, x) = int_0^x exp(t*xi) dxi; all derivatives have closed forms
    text = "int(xi, base(p0), x, exp(t*xi))"
    t, x = 0.7, 1.1
    j = _jet(text, {"t": t, "x": x}, scn_tx, [(2, 1), (1, 2), (0, 2)])
    exact = (math.exp(t * x) - 1.0) / t
    assert j.value == pytest.approx(exact, rel=1e-11)
    # dI/dx = e^{tx}; d2I/dx2 = t e^{tx}
    assert j.d(x=1) == pytest.approx(math.exp(t * x), rel=1e-12)
    assert j.d(x=2) == pytest.approx(t * math.exp(t * x), rel=1e-12)
    # dI/dt = int xi e^{t xi} = (x t e^{tx} - e^{tx} + 1)/t^2   [DERIVED]
    dt = (x * t * math.exp(t * x) - math.exp(t * x) + 1.0) / t**2
    assert j.d(t=1) == pytest.approx(dt, rel=1e-11)
    # d2I/dtdx = x e^{tx} (Leibniz through the upper limit)
    assert j.d(t=1, x=1) == pytest.approx(x * math.exp(t * x), rel=1e-12)


def test_integral_lower_base_point_offset(scn_tx):
    scn_tx.base_points["p0"] = 0.25
    j = _jet("int(xi, base(p0), x, 2*xi)", {"t": 0.5, "x": 1.0}, scn_tx,
             [(0, 1)])
    assert j.value == pytest.approx(1.0 - 0.25**2, rel=1e-12)
    assert j.d(x=1) == pytest.approx(2.0, rel=1e-12)


def test_expression_upper_limit(scn_tx):
    # the upper limit can be any expression of the variables
    j = _jet("int(xi, base(p0), t + x, 3*xi^2)", {"t": 0.4, "x": 0.6},
             scn_tx, [(1, 1)])
    s = 1.0
    assert j.value == pytest.approx(s**3, rel=1e-12)
    assert j.d(t=1) == pytest.approx(3 * s**2, rel=1e-12)
    assert j.d(t=1, x=1) == pytest.approx(6 * s, rel=1e-11)


def test_nested_integral_jet_vs_finite_difference(scn_tx):
    # two-level nest with the dummy crossing levels
    text = "int(xi, base(p0), x, exp(-int(eta, base(p1), xi, t + eta^2)))"
    t0, x0 = 0.5, 0.9
    j = _jet(text, {"t": t0, "x": x0}, scn_tx, [(1, 1)])

    def val(t, x):
        jj = _jet(text, {"t": t, "x": x}, scn_tx, [(0, 0)])
        return jj.value

    h = 1e-4
    fd_t = richardson(
        central_diff(lambda tt: val(tt, x0), t0, h),
        central_diff(lambda tt: val(tt, x0), t0, h / 2))
    assert j.d(t=1) == pytest.approx(fd_t, rel=1e-8)
    fd_x = richardson(
        central_diff(lambda xx: val(t0, xx), x0, h),
        central_diff(lambda xx: val(t0, xx), x0, h / 2))
    assert j.d(x=1) == pytest.approx(fd_x, rel=1e-8)
    # mixed by differencing the x-derivative in t
    def dx(t):
        return _jet(text, {"t": t, "x": x0}, scn_tx, [(0, 1)]).d(x=1)

    fd_tx = richardson(central_diff(dx, t0, h),
                       central_diff(dx, t0, h / 2))
    assert j.d(t=1, x=1) == pytest.approx(fd_tx, rel=1e-7)


def test_rootof_jet_through_integral(scn_x):
    # z(x) = root of  int_0^z e^{-u} du - x = 0  =>  z = -ln(1 - x)
    text = "rootof(Z, int(u, base(p0), Z, exp(-u)) - x, 0.5)"
    x0 = 0.6
    j = _jet(text, {"x": x0}, scn_x, [(2,)])
    z = -math.log(1.0 - x0)
    assert j.value == pytest.approx(z, abs=1e-10)
    # dz/dx = 1/phi_z = e^{z} = 1/(1-x)                        [DERIVED]
    assert j.d(x=1) == pytest.approx(1.0 / (1.0 - x0), rel=1e-9)
    assert j.d(x=2) == pytest.approx(1.0 / (1.0 - x0) ** 2, rel=1e-8)


def test_let_evaluation(scn_tx):
    j = _jet("let(s, t^2 + x, s*exp(s))", {"t": 0.5, "x": 0.3}, scn_tx,
             [(1, 1)])
    s = 0.55
    assert j.value == pytest.approx(s * math.exp(s), rel=1e-13)
    ds = math.exp(s) * (1 + s)
    assert j.d(x=1) == pytest.approx(ds, rel=1e-12)
    assert j.d(t=1) == pytest.approx(ds * 1.0, rel=1e-12)  # ds/dt = 2t = 1


def test_domain_error_raises_typed(scn_x):
    with pytest.raises(DomainError):
        _jet("ln(x - 2)", {"x": 0.5}, scn_x, [(1,)])
    with pytest.raises(DomainError):
        _jet("sqrt(-x)", {"x": 0.5}, scn_x, [(1,)])
    with pytest.raises(DomainError):
        _jet("1/(x - 1/2)", {"x": 0.5}, scn_x, [(0,)])


def test_root_not_found_raises(scn_x):
    with pytest.raises(RootNotFound):
        _jet("rootof(Z, Z^2 + 1 + 0*x, 1)", {"x": 0.5}, scn_x, [(0,)])


def test_nest_limit_raises(scn_x):
    # nesting through the integrand (quadrature inside quadrature), the
    # thing the structural limit is for; chained upper limits do not count
    deep = "1"
    for i in range(6, -1, -1):
        up = "x" if i == 0 else f"d{i - 1}"
        deep = f"int(d{i}, base(p0), {up}, {deep})"
    tight = CFG.with_(nest_limit=3)
    with pytest.raises(NestLimitExceeded):
        _jet(deep, {"x": 0.5}, scn_x, [(0,)], cfg=tight)


def test_batch_poison_is_per_column(scn_x):
    env1 = Env(variables=("x",))
    e = parse("ln(x)", env1)
    iset = IndexSet(("x",), {(1,)})
    xs = np.array([0.5, -1.0, 2.0])
    env = {"x": JetBatch.variable(iset, "x", xs)}
    ctx = EvalContext(iset, scn_x)
    jb = eval_batch(e, env, ctx, 3)
    assert np.isfinite(jb.data[:, 0]).all()
    assert np.isnan(jb.data[:, 1]).all()
    assert np.isfinite(jb.data[:, 2]).all()
    assert jb.data[0, 2] == pytest.approx(math.log(2.0))
    assert ctx.causes and ctx.causes[0][0] == "domain"


def test_params_and_functions_resolve(scn_tx):
    scn_tx.parameters.update({"a": 1.4, "b": -0.6})
    scn_tx.functions["F"] = mk_poly1("F", {0: 1.0, 1: 2.0})
    j = _jet("a*F(x) + b", {"t": 0.1, "x": 0.5}, scn_tx, [(0, 1)])
    assert j.value == pytest.approx(1.4 * 2.0 - 0.6, rel=1e-14)
    assert j.d(x=1) == pytest.approx(2.8, rel=1e-14)


def test_two_argument_function_partials(scn_tx):
    q = polynomial("q", 2, {(0, 0): 0.2, (1, 0): 0.5, (0, 1): -0.3,
                            (1, 1): 0.7, (2, 0): 0.1})
    scn_tx.functions["q"] = q
    j = _jet("q(t, x) + D[1,0]q(t, x)", {"t": 0.4, "x": 0.8}, scn_tx,
             [(1, 1)])
    t, x = 0.4, 0.8
    val = (0.2 + 0.5 * t - 0.3 * x + 0.7 * t * x + 0.1 * t * t) \
        + (0.5 + 0.7 * x + 0.2 * t)
    assert j.value == pytest.approx(val, rel=1e-13)
    # d/dx of the whole thing: -0.3 + 0.7 t + 0.7
    assert j.d(x=1) == pytest.approx(-0.3 + 0.7 * t + 0.7, rel=1e-12)
