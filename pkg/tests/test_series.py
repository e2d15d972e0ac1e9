"""Tests for the slope-aware series arithmetic.

Oracles: products are checked against a direct definitional convolution
written here; Gauss valuations and Weierstrass degrees against direct scans
of exact coefficient valuations; divisions by multiplying back.
"""

import random
from fractions import Fraction

import pytest

from ssmodp import KPoly, PadicContext
from ssmodp.errors import NotCertifiable, PreconditionViolated
from ssmodp.series import (
    NewtonPolygon,
    NuSeries,
    euclid_div,
    newton_polygon,
    phi,
    poly_divmod,
    snup_decompose,
    unit_inverse,
    weierstrass_prep,
)


def ctx_qp(p=3):
    return PadicContext(p, [0, 1], [-p, 1])


def ctx52():
    return PadicContext(5, [2, 1, 1], [-5, 0, 1])


def conv_oracle(fs, gs, n_out):
    """Definitional convolution using element arithmetic only."""
    ctx = fs.ctx
    out = [ctx.zero()] * n_out
    for i, a in enumerate(fs.coeffs):
        for j, b in enumerate(gs.coeffs):
            if i + j < n_out:
                out[i + j] = out[i + j] + a * b
    return out


def rand_series(ctx, rng, n, nu, prec=8, kmax=2, g=Fraction(0)):
    coeffs = [ctx.unram([rng.randrange(0, ctx.p**6) for _ in range(ctx.f)],
                        k=rng.randrange(0, kmax + 1), prec=prec)
              for _ in range(n)]
    return NuSeries(ctx, nu, coeffs, g)


def test_mul_matches_definitional_convolution():
    rng = random.Random(11)
    for ctx in (ctx_qp(3), ctx52()):
        for _ in range(25):
            nu = Fraction(rng.randrange(0, 3), rng.randrange(1, 5))
            f = rand_series(ctx, rng, rng.randrange(1, 15), nu)
            g = rand_series(ctx, rng, rng.randrange(1, 15), nu)
            h = f * g
            want = conv_oracle(f, g, h.n_trunc)
            for a, b in zip(h.coeffs, want):
                assert not any((a - b).unit)


def test_mul_precision_envelope_formula():
    ctx = ctx_qp(3)
    rng = random.Random(12)
    nu = Fraction(1, 2)
    f = rand_series(ctx, rng, 6, nu, prec=9)
    g = rand_series(ctx, rng, 6, nu, prec=7)
    h = f * g
    mf, mg = f.prec_envelope(), g.prec_envelope()
    x = min(mf + g.vnu_floor(), mg + f.vnu_floor())
    import math
    for k, c in enumerate(h.coeffs):
        want = math.ceil(x - nu * k)
        assert c.prec is not None and c.prec <= want
        # envelope is the binding bound for generic draws
        assert c.prec >= want - 9


def test_gauss_val_additive_and_definitional():
    rng = random.Random(13)
    ctx = ctx52()
    for _ in range(40):
        nu = Fraction(rng.randrange(0, 4), rng.randrange(1, 6))
        f = rand_series(ctx, rng, rng.randrange(2, 12), nu, g=Fraction(50))
        g = rand_series(ctx, rng, rng.randrange(2, 12), nu, g=Fraction(50))
        vf = min(Fraction(c.val()) + nu * i for i, c in enumerate(f.coeffs)
                 if c.is_readable())
        assert f.gauss_val() == vf
        # additivity needs the full product: a shorter truncation can drop
        # the index where the minimum is attained
        h = f.mul(g, n_out=len(f.coeffs) + len(g.coeffs) - 1)
        assert h.gauss_val() == f.gauss_val() + g.gauss_val()


def test_weierstrass_degree_additive():
    rng = random.Random(14)
    ctx = ctx_qp(5)
    for _ in range(40):
        nu = Fraction(1, rng.randrange(1, 5))
        f = rand_series(ctx, rng, rng.randrange(2, 10), nu)
        g = rand_series(ctx, rng, rng.randrange(2, 10), nu)
        try:
            df, dg = f.weierstrass_degree(), g.weierstrass_degree()
            h = f.mul(g, n_out=len(f.coeffs) + len(g.coeffs) - 1)
            dh = h.weierstrass_degree()
        except NotCertifiable:
            continue
        assert dh == df + dg


def test_gauss_val_not_certifiable_cases():
    ctx = ctx_qp(3)
    nu = Fraction(1, 2)
    # unreadable coefficient sits below the readable minimum
    f = NuSeries(ctx, nu, [ctx.from_int(0, prec=1), ctx.from_int(9, prec=6)], Fraction(5))
    with pytest.raises(NotCertifiable):
        f.gauss_val()
    # tail guarantee below the readable minimum
    g = NuSeries(ctx, nu, [ctx.from_int(9, prec=6)], Fraction(-3))
    with pytest.raises(NotCertifiable):
        g.gauss_val()
    # fine when everything clears the bar
    h = NuSeries(ctx, nu, [ctx.from_int(3, prec=6), ctx.from_int(0, prec=4)], Fraction(1))
    assert h.gauss_val() == 1


def test_unit_inverse():
    rng = random.Random(15)
    ctx = ctx52()
    for n in (1, 2, 7, 33):
        f = rand_series(ctx, rng, n, Fraction(1, 3), prec=9, kmax=0)
        v = unit_inverse(f)
        prod = f.mul(v, n_out=n)
        one = NuSeries.from_kpoly(KPoly(ctx, [ctx.one()]), f.nu, n=n)
        assert (prod - one).is_zero_at_prec()


def test_weierstrass_prep_properties():
    rng = random.Random(16)
    ctx = ctx_qp(3)
    for _ in range(25):
        nu = Fraction(1, rng.randrange(1, 4))
        n = rng.randrange(4, 12)
        f = rand_series(ctx, rng, n, nu, prec=9, g=Fraction(4))
        try:
            s = f.weierstrass_degree()
        except NotCertifiable:
            continue
        P, U, V = weierstrass_prep(f)
        assert P.degree() == s
        assert P.coeffs[-1].is_one()
        # distinguished: below-degree coefficients sit strictly above the slope line
        for i in range(s):
            lb = P.coeffs[i].val_lb()
            assert Fraction(lb) + nu * i > nu * s or not P.coeffs[i].is_readable()
        # unit: constant term attains the valuation
        assert U.weierstrass_degree() == 0
        back = NuSeries.from_kpoly(P, nu).mul(U, n_out=n)
        assert (back - f).is_zero_at_prec()


def test_euclid_div_multiply_back():
    rng = random.Random(17)
    ctx = ctx52()
    for _ in range(20):
        nu = Fraction(1, rng.randrange(2, 4))
        nf, ng = rng.randrange(3, 8), rng.randrange(3, 10)
        f = rand_series(ctx, rng, nf, nu, prec=9, kmax=1, g=Fraction(3))
        g = f.mul(rand_series(ctx, rng, ng, nu, prec=9, kmax=1, g=Fraction(3)),
                  n_out=min(nf, ng))  # guarantees v(g) >= v(f)
        try:
            q, r = euclid_div(f, g)
            s = f.weierstrass_degree()
        except NotCertifiable:
            continue
        assert r.degree() < s
        n_chk = g.n_trunc
        back = f.pad_to(n_chk).mul(q.pad_to(n_chk), n_out=n_chk) + \
            NuSeries.from_kpoly(r, nu, n=n_chk)
        assert (back - g).is_zero_at_prec()


def test_euclid_div_precondition():
    ctx = ctx_qp(3)
    nu = Fraction(1, 2)
    f = NuSeries(ctx, nu, [ctx.from_int(3, prec=8), ctx.from_int(1, prec=8)], Fraction(2))
    g = NuSeries(ctx, nu, [ctx.from_int(1, prec=8)], Fraction(2))
    with pytest.raises(PreconditionViolated):
        euclid_div(f, g)


def test_phi_mapping():
    ctx = ctx52()
    rng = random.Random(18)
    nu = Fraction(1, 2)
    f = rand_series(ctx, rng, 5, nu, prec=8, g=Fraction(50))
    h = f.phi()
    assert h.nu == Fraction(1, 10)
    assert h.n_trunc == 5 * 4 + 1
    for i, c in enumerate(f.coeffs):
        assert h.coeffs[5 * i].same_at_prec(c.sigma())
    for j in range(h.n_trunc):
        if j % 5:
            assert h.coeffs[j].is_exact_zero()
    # v_{nu/p}(phi f) = v_nu(f)
    assert h.gauss_val() == f.gauss_val()


def test_snup_decompose():
    rng = random.Random(19)
    for ctx, r in ((ctx_qp(3), 1), (ctx_qp(3), 2), (ctx52(), 1)):
        er = ctx.e * r
        nu = Fraction(1, 4 * er)
        n = 40
        g = rand_series(ctx, rng, n, nu, prec=9, kmax=1, g=Fraction(2))
        x, y = snup_decompose(g, r)
        assert x.nu == 1 / (1 / nu - er)
        assert y.degree() < 1 / nu
        # y really is a polynomial of small degree, x starts high enough
        for i, c in enumerate(x.coeffs):
            if c.is_readable():
                assert i >= 1 / nu - er
        # multiply back: E^r * x + y == g at precision
        e_r = NuSeries.from_kpoly(ctx.E_power(r), nu)
        back = e_r.mul(NuSeries(ctx, nu, x.coeffs, x.g), n_out=n) + \
            NuSeries.from_kpoly(y, nu, n=n)
        assert (back - g).is_zero_at_prec()


def test_newton_polygon_frozen():
    ctx = ctx_qp(5)
    nu = Fraction(0)
    # f = (u - p)(1 + u) = -p + (1-p)u + u^2: one slope -1 side of length 1
    f = NuSeries.from_kpoly(KPoly.from_ints(ctx, [-5, -4, 1]), nu)
    np_f = newton_polygon(f)
    assert np_f.finite_slopes() == [(Fraction(-1), Fraction(1))]
    assert np_f.multiplicity_at(Fraction(-1)) == 1
    assert np_f.multiplicity_at(Fraction(-2)) == 0
    # 1 + u has no steep sides
    g = NuSeries.from_kpoly(KPoly.from_ints(ctx, [1, 1]), nu)
    assert newton_polygon(g).finite_slopes() == []


def test_newton_polygon_product_additivity():
    rng = random.Random(20)
    ctx = ctx_qp(3)
    nu = Fraction(1, 3)
    for _ in range(40):
        def rand_poly(n):
            return NuSeries.from_kpoly(
                KPoly(ctx, [ctx.from_int(rng.randrange(1, 50) * 3**rng.randrange(0, 4))
                            for _ in range(n)]), nu)
        f, g = rand_poly(rng.randrange(2, 7)), rand_poly(rng.randrange(2, 7))
        h = f.mul(g, n_out=len(f.coeffs) + len(g.coeffs) - 1)
        sf = dict()
        for m, l in newton_polygon(f).finite_slopes() + newton_polygon(g).finite_slopes():
            sf[m] = sf.get(m, 0) + l
        sh = dict()
        for m, l in newton_polygon(h).finite_slopes():
            sh[m] = sh.get(m, 0) + l
        assert sf == sh


def test_newton_polygon_refuses_unreadable_below_hull():
    ctx = ctx_qp(3)
    nu = Fraction(0)
    f = NuSeries(ctx, nu, [ctx.from_int(9, prec=8), ctx.from_int(0, prec=0),
                           ctx.from_int(1, prec=8)], None)
    with pytest.raises(NotCertifiable):
        newton_polygon(f).finite_slopes()


def test_pad_truncate_reslope_guarantees():
    ctx = ctx_qp(3)
    nu = Fraction(1, 2)
    f = NuSeries(ctx, nu, [ctx.from_int(3, prec=6)] * 4, Fraction(1))
    t = f.truncate(2)
    # dropped known coefficient folds into the tail bound: val(3)+nu*2 = 2, etc.
    assert t.g == min(Fraction(1), 1 + nu * 2, 1 + nu * 3)
    pd = f.pad_to(6)
    assert pd.coeffs[5].prec == -1  # ceil(g - nu*5) = ceil(-3/2)
    r = f.reslope(Fraction(2, 3))
    assert r.g == Fraction(1) + (Fraction(2, 3) - nu) * 4
    with pytest.raises(Exception):
        f.reslope(Fraction(1, 3))


def test_series_text():
    ctx = ctx_qp(3)
    f = NuSeries(ctx, Fraction(1, 2), [ctx.from_int(1), ctx.from_int(3, prec=4)],
                 Fraction(2))
    txt = f.to_text()
    assert "@ nu=1/2" in txt and txt.startswith("[2; ")
