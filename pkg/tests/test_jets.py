"""Index sets and truncated jet algebra.

Jet products and compositions are checked against symbolic differentiation
of the corresponding closed forms, an independent derivation route.
"""


import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdegensol.numeric.jets import (
    IndexSet,
    Jet,
    JetBatch,
    jb_add,
    jb_exp,
    jb_ln,
    jb_mul,
    jb_reciprocal,
    jb_sqrt,
    set_partitions,
)


def test_index_set_downward_closed():
    iset = IndexSet(("t", "x"), {(2, 1)})
    got = set(iset.indices)
    want = {(i, j) for i in range(3) for j in range(2)}
    assert got == want


def test_index_set_caches_instances():
    a = IndexSet(("t", "x"), {(1, 1), (2, 0)})
    b = IndexSet(("t", "x"), {(2, 0), (1, 1)})
    assert a is b


def test_value_only():
    iset = IndexSet(("t", "x"), {(2, 1)})
    assert set(iset.value_only().indices) == {(0, 0)}


_idx = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 2)),
    min_size=1, max_size=4,
).filter(lambda ls: all(sum(m) <= 3 for m in ls))


@settings(max_examples=100, deadline=None)
@given(_idx)
def test_closure_property(indices):
    iset = IndexSet(("t", "x"), set(indices))
    got = set(iset.indices)
    for mi in got:
        for k in range(len(mi)):
            if mi[k] > 0:
                down = tuple(m - (1 if i == k else 0) for i, m in
                             enumerate(mi))
                assert down in got
    for mi in indices:
        assert mi in got


def test_set_partitions_counts():
    # Bell numbers 1, 2, 5, 15 for n = 1..4                    [DERIVED]
    for n, bell in [(1, 1), (2, 2), (3, 5), (4, 15)]:
        assert len(list(set_partitions(list(range(n))))) == bell


def _poly_jet(iset, coeffs, tv, xv):
    """Exact jet of sum c_{ij} t^i x^j at (tv, xv)."""
    K = len(iset.indices)
    data = np.zeros((K, len(tv)))
    for k, (p, q) in enumerate(iset.indices):
        acc = np.zeros(len(tv))
        for (i, j), c in coeffs.items():
            if i >= p and j >= q:
                fall = 1.0
                for r in range(p):
                    fall *= i - r
                for r in range(q):
                    fall *= j - r
                acc += c * fall * tv ** (i - p) * xv ** (j - q)
        data[k] = acc
    return JetBatch(iset, data)


COEF_A = {(0, 0): 0.7, (1, 0): 0.4, (0, 1): -0.3, (1, 1): 0.2, (2, 0): 0.1}
COEF_B = {(0, 0): 1.3, (1, 0): -0.2, (0, 2): 0.15, (2, 1): 0.05}


def _prod_coeffs(a, b):
    out = {}
    for (i, j), c in a.items():
        for (p, q), d in b.items():
            out[(i + p, j + q)] = out.get((i + p, j + q), 0.0) + c * d
    return out


def test_jet_product_matches_polynomial_product():
    iset = IndexSet(("t", "x"), {(2, 1), (1, 2)})
    tv = np.array([0.3, 0.9, 1.4])
    xv = np.array([0.5, 1.1, 0.2])
    ja = _poly_jet(iset, COEF_A, tv, xv)
    jb = _poly_jet(iset, COEF_B, tv, xv)
    jab = jb_mul(ja, jb)
    ref = _poly_jet(iset, _prod_coeffs(COEF_A, COEF_B), tv, xv)
    assert np.allclose(jab.data, ref.data, rtol=1e-13, atol=1e-13)


def test_jet_add():
    iset = IndexSet(("t", "x"), {(2, 1)})
    tv = np.array([0.4])
    xv = np.array([0.8])
    ja = _poly_jet(iset, COEF_A, tv, xv)
    jb = _poly_jet(iset, COEF_B, tv, xv)
    s = jb_add(ja, jb)
    both = {k: COEF_A.get(k, 0) + COEF_B.get(k, 0)
            for k in set(COEF_A) | set(COEF_B)}
    ref = _poly_jet(iset, both, tv, xv)
    assert np.allclose(s.data, ref.data, rtol=1e-13)


def _fd_rows(fn, iset, tv, xv, h=1e-4):
    """Finite-difference jet of a scalar function; reference route."""
    rows = []
    for (p, q) in iset.indices:
        def D(t, x, p=p, q=q):
            if p == 0 and q == 0:
                return fn(t, x)
            if p > 0:
                return (D(t + h, x, p - 1, q) - D(t - h, x, p - 1, q)) / (2 * h)
            return (D(t, x + h, p, q - 1) - D(t, x - h, p, q - 1)) / (2 * h)
        rows.append([D(t, x) for t, x in zip(tv, xv)])
    return np.array(rows)


def test_exp_jet_vs_finite_differences():
    iset = IndexSet(("t", "x"), {(1, 1), (2, 0), (0, 2)})
    tv = np.array([0.3, 0.7])
    xv = np.array([0.5, 0.2])
    base = _poly_jet(iset, COEF_A, tv, xv)
    je = jb_exp(base)

    def fn(t, x):
        return np.exp(sum(c * t**i * x**j for (i, j), c in COEF_A.items()))

    ref = _fd_rows(fn, iset, tv, xv)
    assert np.allclose(je.data, ref, rtol=2e-6, atol=2e-6)


def test_ln_sqrt_reciprocal_consistency():
    iset = IndexSet(("t", "x"), {(2, 1)})
    tv = np.array([0.5, 1.1])
    xv = np.array([0.9, 0.4])
    base = _poly_jet(iset, COEF_B, tv, xv)  # positive on these points
    ln_j, bad = jb_ln(base, 1e-13)
    assert bad is None or not bad.any()
    # exp(ln f) = f
    back = jb_exp(ln_j)
    assert np.allclose(back.data, base.data, rtol=1e-11)
    # sqrt(f)^2 = f
    sq, bad2 = jb_sqrt(base, 1e-13)
    assert bad2 is None or not bad2.any()
    sq2 = jb_mul(sq, sq)
    assert np.allclose(sq2.data, base.data, rtol=1e-11)
    # f * (1/f) = 1
    inv, bad3 = jb_reciprocal(base, 1e-13)
    one = jb_mul(base, inv)
    val = one.data[0]
    assert np.allclose(val, 1.0, rtol=1e-12)
    assert np.allclose(one.data[1:], 0.0, atol=1e-10)


def test_variable_jet_rows():
    iset = IndexSet(("t", "x"), {(1, 1)})
    xv = np.array([2.0, 3.0])
    jx = JetBatch.variable(iset, "x", xv)
    assert np.allclose(jx.value(), xv)
    pos_x = iset.pos[(0, 1)]
    assert np.allclose(jx.data[pos_x], 1.0)
    pos_t = iset.pos[(1, 0)]
    assert np.allclose(jx.data[pos_t], 0.0)


def test_jet_accessors():
    iset = IndexSet(("t", "x"), {(1, 1)})
    jb = _poly_jet(iset, COEF_A, np.array([0.5]), np.array([0.25]))
    j = Jet.from_batch(jb, 0)
    assert j.d() == pytest.approx(j.value)
    assert j.d(t=1, x=1) == pytest.approx(COEF_A[(1, 1)])
    with pytest.raises(KeyError):
        j.partial((3, 3))
