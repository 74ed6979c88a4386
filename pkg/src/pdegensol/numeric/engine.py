"""Batched jet evaluation of expression trees.

One eval call processes N evaluation points at once; every node maps to a
handful of numpy operations on (K, N) arrays.  Integrals feed the batched
adaptive quadrature with an integrand evaluator that re-enters this module,
so the whole nest evaluates breadth-first; implicit roots solve all N
columns simultaneously by bracketed bisection, then take jet-Newton steps
to get derivative rows.

Failures do not raise mid-batch: offending columns are poisoned with NaN
and the cause is recorded on the context.  The single-point wrapper
eval_jet() raises the typed error for the first recorded cause."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import expr_core as X
from .config import NumericConfig
from .errors import (
    DegenerateRoot,
    DomainError,
    EvalError,
    NestLimitExceeded,
    QuadratureNonconvergence,
    RootNotFound,
)
from .jets import IndexSet, Jet, JetBatch, jb_cos, jb_div, jb_exp, jb_ln, jb_mul, jb_powc, jb_powi, jb_sin, jb_sqrt, jb_sub, jb_tan
from .quadrature import adaptive_gk_batched
from . import rootfind

_ERROR_BY_KIND = {
    "domain": DomainError,
    "quad": QuadratureNonconvergence,
    "root": RootNotFound,
    "degenerate": DegenerateRoot,
}


class EvalContext:
    """Evaluation state: index set, scenario bindings, config, guard scale,
    nesting depth, shared cause recorder and root-seed cache."""

    def __init__(
        self,
        iset: IndexSet,
        scenario,
        cfg: Optional[NumericConfig] = None,
        guard_scale: float = 1.0,
        _shared=None,
    ):
        self.iset = iset
        self.scenario = scenario
        self.cfg = cfg or NumericConfig()
        self.guard_scale = guard_scale
        self.depth = 0
        if _shared is None:
            _shared = {"causes": [], "root_cache": {}, "stats": {"quad_panels": 0, "root_solves": 0}}
        self._shared = _shared
        self.causes: List[Tuple[str, str]] = _shared["causes"]
        self.root_cache: Dict[int, tuple] = _shared["root_cache"]
        self.stats: Dict[str, int] = _shared["stats"]

    @property
    def den_guard(self):
        return self.cfg.den_guard * self.guard_scale

    @property
    def pos_guard(self):
        return self.cfg.pos_guard * self.guard_scale

    @property
    def tan_guard(self):
        return self.cfg.tan_guard * self.guard_scale

    def value_context(self) -> "EvalContext":
        sub = EvalContext(self.iset.value_only(), self.scenario, self.cfg, self.guard_scale, self._shared)
        sub.depth = self.depth
        return sub

    def child(self) -> "EvalContext":
        sub = EvalContext(self.iset, self.scenario, self.cfg, self.guard_scale, self._shared)
        sub.depth = self.depth + 1
        return sub

    def record(self, kind: str, mask, node) -> None:
        if len(self.causes) < 64:
            n = int(np.count_nonzero(mask)) if mask is not None else 0
            self.causes.append((kind, f"{X.to_text(node)[:80]} ({n} column(s))"))

    def first_error(self) -> EvalError:
        if self.causes:
            kind, detail = self.causes[0]
            return _ERROR_BY_KIND[kind](detail)
        return DomainError("non-finite result (overflow)")


# symbolic dummy-derivative caches, keyed by node identity (nodes pinned)
_DDERIV: Dict[int, tuple] = {}


def _dummy_derivative(e, k: int) -> X.Expr:
    """The k-th symbolic derivative of e.integrand with respect to e.dummy
    (k=0 is the integrand itself), cached per node."""
    ent = _DDERIV.get(id(e))
    if ent is None or ent[0] is not e:
        ent = (e, {0: e.integrand})
        _DDERIV[id(e)] = ent
    ds = ent[1]
    while k not in ds:
        top = max(ds)
        ds[top + 1] = X.simplify(X.differentiate(ds[top], e.dummy))
    return ds[k]


_ROOT_DERIV: Dict[int, tuple] = {}


def _root_derivative(e) -> X.Expr:
    ent = _ROOT_DERIV.get(id(e))
    if ent is None or ent[0] is not e:
        ent = (e, X.simplify(X.differentiate(e.body, e.dummy)))
        _ROOT_DERIV[id(e)] = ent
    return ent[1]


def eval_batch(e: X.Expr, env: Dict[str, JetBatch], ctx: EvalContext, ncols: int) -> JetBatch:
    """Evaluate e to a JetBatch of width ncols.  env binds variable names
    to jets of that width; parameters/functions/base points come from
    ctx.scenario."""
    return _ev(e, env, ctx, ncols, {})


def _ev(e: X.Expr, env, ctx: EvalContext, n: int, memo: dict) -> JetBatch:
    got = memo.get(id(e))
    if got is not None:
        return got
    r = _ev_node(e, env, ctx, n, memo)
    memo[id(e)] = r
    return r


def _const(ctx: EvalContext, n: int, value) -> JetBatch:
    return JetBatch.constants(ctx.iset, np.full(n, float(value)))


def _ev_node(e: X.Expr, env, ctx: EvalContext, n: int, memo: dict) -> JetBatch:
    iset = ctx.iset
    if isinstance(e, X.Const):
        return _const(ctx, n, e.value)
    if isinstance(e, X.Var):
        jb = env.get(e.name)
        if jb is None:
            raise EvalError(f"unbound variable {e.name!r}")
        return jb
    if isinstance(e, X.Param):
        try:
            return _const(ctx, n, ctx.scenario.parameters[e.name])
        except KeyError:
            raise EvalError(f"parameter {e.name!r} not bound in scenario") from None
    if isinstance(e, X.BasePoint):
        try:
            return _const(ctx, n, ctx.scenario.base_points[e.name])
        except KeyError:
            raise EvalError(f"base point for {e.name!r} not in scenario") from None
    if isinstance(e, X.Neg):
        a = _ev(e.arg, env, ctx, n, memo)
        return JetBatch(iset, -a.data)
    if isinstance(e, X.Add):
        out = _ev(e.terms[0], env, ctx, n, memo).data.copy()
        for t in e.terms[1:]:
            out += _ev(t, env, ctx, n, memo).data
        return JetBatch(iset, out)
    if isinstance(e, X.Mul):
        acc = _ev(e.factors[0], env, ctx, n, memo)
        for f in e.factors[1:]:
            acc = jb_mul(acc, _ev(f, env, ctx, n, memo))
        return acc
    if isinstance(e, X.Div):
        a = _ev(e.num, env, ctx, n, memo)
        b = _ev(e.den, env, ctx, n, memo)
        out, bad = jb_div(a, b, ctx.den_guard)
        if bad is not None:
            ctx.record("domain", bad, e)
        return out
    if isinstance(e, X.Pow):
        return _ev_pow(e, env, ctx, n, memo)
    if isinstance(e, X.Exp):
        return jb_exp(_ev(e.arg, env, ctx, n, memo))
    if isinstance(e, X.Ln):
        out, bad = jb_ln(_ev(e.arg, env, ctx, n, memo), ctx.pos_guard)
        if bad is not None:
            ctx.record("domain", bad, e)
        return out
    if isinstance(e, X.Sqrt):
        out, bad = jb_sqrt(_ev(e.arg, env, ctx, n, memo), ctx.pos_guard)
        if bad is not None:
            ctx.record("domain", bad, e)
        return out
    if isinstance(e, X.Sin):
        return jb_sin(_ev(e.arg, env, ctx, n, memo))
    if isinstance(e, X.Cos):
        return jb_cos(_ev(e.arg, env, ctx, n, memo))
    if isinstance(e, X.Tan):
        out, bad = jb_tan(_ev(e.arg, env, ctx, n, memo), ctx.tan_guard)
        if bad is not None:
            ctx.record("domain", bad, e)
        return out
    if isinstance(e, X.FuncApp):
        return _ev_funcapp(e, env, ctx, n, memo)
    if isinstance(e, X.Integral):
        return _ev_integral(e, env, ctx, n, memo)
    if isinstance(e, X.RootOf):
        return _ev_rootof(e, env, ctx, n, memo)
    if isinstance(e, X.Let):
        bound = _ev(e.bound, env, ctx, n, memo)
        env2 = dict(env)
        env2[e.name] = bound
        # fresh memo: the body sees a different environment
        return _ev(e.body, env2, ctx, n, {})
    raise EvalError(f"cannot evaluate node {type(e).__name__}")


def _ev_pow(e: X.Pow, env, ctx: EvalContext, n: int, memo: dict) -> JetBatch:
    base = _ev(e.base, env, ctx, n, memo)
    nexp = X.int_exponent(e.exponent)
    if nexp is not None:
        out, bad = jb_powi(base, nexp, ctx.den_guard)
        if bad is not None:
            ctx.record("domain", bad, e)
        return out
    ejb = _ev(e.exponent, env, ctx, n, memo)
    if not ejb.data[1:].any():
        # constant exponent (per column): real power, positive base
        out, bad = jb_powc(base, ejb.data[0], ctx.pos_guard)
        if bad is not None:
            ctx.record("domain", bad, e)
        return out
    ln_b, bad = jb_ln(base, ctx.pos_guard)
    if bad is not None:
        ctx.record("domain", bad, e)
    return jb_exp(jb_mul(ejb, ln_b))


def _ev_funcapp(e: X.FuncApp, env, ctx: EvalContext, n: int, memo: dict) -> JetBatch:
    try:
        inst = ctx.scenario.functions[e.name]
    except KeyError:
        raise EvalError(f"function {e.name!r} not bound in scenario") from None
    args = [_ev(a, env, ctx, n, memo) for a in e.args]
    vals = [a.data[0] for a in args]
    m = len(args)
    f_at = {}
    for gamma in ctx.iset.needed_gammas(m):
        orders = tuple(o + g for o, g in zip(e.orders, gamma))
        f_at[gamma] = np.broadcast_to(np.asarray(inst.eval(orders, vals), dtype=float), (n,))
    data = ctx.iset.chain(f_at, [a.data for a in args])
    return JetBatch(ctx.iset, data)


def _ev_integral(e: X.Integral, env, ctx: EvalContext, n: int, memo: dict) -> JetBatch:
    if ctx.depth + 1 > ctx.cfg.nest_limit:
        raise NestLimitExceeded(
            f"quadrature nesting deeper than {ctx.cfg.nest_limit}"
        )
    iset = ctx.iset
    lo_jb = _ev(e.lower, env, ctx, n, memo)
    up_jb = _ev(e.upper, env, ctx, n, memo)
    subctx = ctx.child()
    names = [nm for nm in env if nm in e.integrand._free]

    def integrand_eval(xs: np.ndarray, cols: np.ndarray) -> np.ndarray:
        ienv = {nm: env[nm].gather(cols) for nm in names}
        ienv[e.dummy] = JetBatch.constants(iset, xs)
        ctx.stats["quad_panels"] += 1
        return _ev(e.integrand, ienv, subctx, xs.size, {}).data

    def on_noconv(mask):
        ctx.record("quad", mask, e)

    data, _err = adaptive_gk_batched(
        integrand_eval, lo_jb.data[0], up_jb.data[0], iset.K, ctx.cfg, on_noconv
    )
    out = JetBatch(iset, data)
    if iset.K > 1:
        for limit_jb, sgn in ((up_jb, 1.0), (lo_jb, -1.0)):
            if not limit_jb.data[1:].any():
                continue
            ejets = []
            for k in range(iset.max_endpoint_order + 1):
                gk = _dummy_derivative(e, k)
                eenv = {nm: env[nm] for nm in env if nm in gk._free}
                eenv[e.dummy] = JetBatch.constants(iset, limit_jb.data[0])
                ejets.append(_ev(gk, eenv, ctx, n, {}).data)
            iset.boundary_accumulate(out.data, ejets, limit_jb.data, sgn)
    return out


def _ev_rootof(e: X.RootOf, env, ctx: EvalContext, n: int, memo: dict) -> JetBatch:
    iset = ctx.iset
    body_z = _root_derivative(e)
    vctx = ctx.value_context()
    viset = vctx.iset
    venv = {nm: jb.value_rows() for nm, jb in env.items() if nm in e.body._free}

    def fval(zs: np.ndarray, cols: np.ndarray) -> np.ndarray:
        en = {nm: jb.gather(cols) for nm, jb in venv.items()}
        en[e.dummy] = JetBatch.constants(viset, zs)
        return _ev(e.body, en, vctx, zs.size, {}).data[0]

    def fprime(zs: np.ndarray, cols: np.ndarray) -> np.ndarray:
        en = {nm: jb.gather(cols) for nm, jb in venv.items()}
        en[e.dummy] = JetBatch.constants(viset, zs)
        return _ev(body_z, en, vctx, zs.size, {}).data[0]

    ctx.stats["root_solves"] += 1
    seeds = _root_seeds(e, ctx, n)
    roots, status = rootfind.bracket_bisect_newton(fval, fprime, seeds, ctx.cfg)
    fail = status != rootfind.OK
    if fail.any():
        ctx.record("root", fail, e)
        roots = roots.copy()
        roots[fail] = np.nan
    ok = ~fail
    if ok.any():
        cache_roots = roots[ok]
        ctx.root_cache[id(e)] = (e, float(np.median(cache_roots)), roots.copy())
    if iset.K == 1:
        return JetBatch.constants(iset, roots)

    z = JetBatch.constants(iset, roots)
    for _ in range(3):
        en = {nm: jb for nm, jb in env.items() if nm in e.body._free}
        en[e.dummy] = z
        F = _ev(e.body, en, ctx, n, {})
        Fz = _ev(body_z, en, ctx, n, {})
        degen = np.isfinite(Fz.data[0]) & (np.abs(Fz.data[0]) < ctx.cfg.degenerate_tol)
        if degen.any():
            ctx.record("degenerate", degen, e)
            Fz = JetBatch(iset, Fz.data.copy())
            Fz.data[:, degen] = np.nan
        q, bad = jb_div(F, Fz, ctx.cfg.den_guard)
        z = jb_sub(z, q)
    return z


def _root_seeds(e: X.RootOf, ctx: EvalContext, n: int) -> np.ndarray:
    ent = ctx.root_cache.get(id(e))
    if ent is not None and ent[0] is e:
        _, med, prev = ent
        if prev.size == n and np.isfinite(prev).all():
            return prev
        return np.full(n, med)
    if e.seed is not None:
        return np.full(n, float(e.seed))
    return np.ones(n)


# ---------------------------------------------------------------------------
# public single-point API


def eval_jet(e: X.Expr, point: Dict[str, float], scenario, index_set, cfg: Optional[NumericConfig] = None) -> Jet:
    """Evaluate e at one point, returning value and exact partial
    derivatives for every multi-index in index_set (downward-closed over
    scenario.variables).  Raises a typed EvalError on failure."""
    variables = tuple(scenario.variables)
    iset = IndexSet(variables, [tuple(mi) for mi in index_set])
    env = {
        v: JetBatch.variable(iset, v, np.array([float(point[v])]))
        for v in variables
    }
    ctx = EvalContext(iset, scenario, cfg)
    jb = eval_batch(e, env, ctx, 1)
    if not np.isfinite(jb.data[:, 0]).all():
        raise ctx.first_error()
    return Jet.from_batch(jb, 0)
