"""Tests for the lattice construction from a filtered module.

Oracles: horizontal lifts are checked by substituting back into the
twisted derivation and dividing by powers of E; the assembled Frobenius
matrix is checked against the exact product identity
E^r Phi phi(X) = X PhiBK, which any correct change of basis must obey;
the lattice itself is recomputed by a brute-force intersection
recursion and compared by mutual span membership; rank-one inputs with
Phi = (p^r) have the closed form p^r E^r as output, checked
coefficient by coefficient.
"""

import math
import random
from fractions import Fraction

import pytest

from ssmodp import (
    FilteredPhiNModule,
    KPoly,
    MatK,
    MatNu,
    NuSeries,
    PadicContext,
    Stage1Constants,
    beta_oracle,
    compute_phibk,
    compute_tm,
    compute_Wm,
    compute_Yn,
    height_certificate,
    hodge_pink_basis,
    releve_hp,
)
from ssmodp.errors import OracleScaleExceeded, PreconditionViolated
from ssmodp.linalg import plu_integral
from ssmodp.series import euclid_div


def ctx_qp(p=3):
    return PadicContext(p, [0, 1], [-p, 1])


def ctx_ram(p=5):
    return PadicContext(p, [0, 1], [-p, 0, 1])


def ctx52():
    return PadicContext(5, [2, 1, 1], [-5, 0, 1])


def cyclo(ctx, r=1):
    """Rank one, Phi = (p^r), jump r: the r-fold cyclotomic type."""
    Phi = MatK.from_ints(ctx, [[ctx.p ** r]])
    Z = MatK.from_ints(ctx, [[0]])
    F = MatK.from_ints(ctx, [[1]])
    return FilteredPhiNModule(ctx, Phi, Z, (r,), F)


def steinberg(ctx):
    p = ctx.p
    Phi = MatK.from_ints(ctx, [[p, 0], [0, 1]])
    N = MatK.from_ints(ctx, [[0, 0], [1, 0]])
    return FilteredPhiNModule(ctx, Phi, N, (1, 0), MatK.identity(ctx, 2))


def km_mul(A, B):
    d, m, n = len(A), len(B), len(B[0])
    return [[sum((A[i][k] * B[k][j] for k in range(m)),
                 KPoly.zero(A[0][0].ctx)) for j in range(n)]
            for i in range(d)]


def km_phi(A, prec):
    return [[x.phi(1, prec) for x in row] for row in A]


def km_from_matk(M):
    return [[KPoly(M.ctx, [c]) for c in row] for row in M.rows]


def rem_mod(x, monic):
    return x.divmod_exact_monic(monic)[1]


def is_mult_of(x, monic):
    return rem_mod(x, monic).is_zero_at_prec()


def nhat(ctx, Nmat, m, vec):
    out = []
    for a in range(len(vec)):
        acc = KPoly.zero(ctx)
        for b in range(len(vec)):
            c = Nmat.rows[a][b]
            if not c.is_exact_zero():
                acc = acc + vec[b].scale(c)
        out.append(acc.scale_p(m) + vec[a].u_derivative())
    return out


def in_span(B, v, nu, T):
    """Whether the vector v of KPoly lies in the span of the columns of
    the d x d KPoly matrix B over the slope-nu series ring with p
    inverted, for d <= 2, by adjugate division."""
    ctx = B[0][0].ctx
    d = len(B)
    if d == 1:
        det = B[0][0]
        adj = [[KPoly.one(ctx)]]
    else:
        det = B[0][0] * B[1][1] - B[0][1] * B[1][0]
        adj = [[B[1][1], -B[0][1]], [-B[1][0], B[0][0]]]
    det_s = NuSeries.from_kpoly(det, nu, T)
    for i in range(d):
        num = sum((adj[i][j] * v[j] for j in range(d)), KPoly.zero(ctx))
        _q, rem = euclid_div(det_s, NuSeries.from_kpoly(num, nu, T),
                             require_integral=False)
        if not rem.is_zero_at_prec():
            return False
    return True


def spans_match(B1, B2, nu, T):
    d = len(B1)
    fwd = all(in_span(B2, [B1[a][j] for a in range(d)], nu, T)
              for j in range(d))
    bwd = all(in_span(B1, [B2[a][j] for a in range(d)], nu, T)
              for j in range(d))
    return fwd and bwd


def test_releve_trivial_derivation_keeps_constants():
    ctx = ctx_qp(3)
    Z = MatK.from_ints(ctx, [[0, 0], [0, 0]])
    w = [ctx.from_int(2), ctx.from_int(7)]
    out = releve_hp(w, Z, 3)
    assert (out[0] - KPoly(ctx, [w[0]])).is_zero_at_prec()
    assert (out[1] - KPoly(ctx, [w[1]])).is_zero_at_prec()


@pytest.mark.parametrize("p", [3, 5])
def test_releve_hand_example(p):
    """For E = u - p and the rank-two nilpotent derivation, the lift of
    (1, 0) to order two is (1, p - u)."""
    ctx = ctx_qp(p)
    N = MatK.from_ints(ctx, [[0, 0], [1, 0]])
    out = releve_hp([ctx.one(), ctx.zero()], N, 2, m=1)
    assert (out[0] - KPoly.one(ctx)).is_zero_at_prec()
    want = KPoly.from_ints(ctx, [p, -1])
    assert (out[1] - want).is_zero_at_prec()


@pytest.mark.parametrize("mk", [ctx_qp, ctx_ram])
def test_releve_substitution_oracle(mk):
    """The defining congruence: substituting the lift back into the
    twisted derivation yields a multiple of E^{i-1}, and the lift
    agrees with the input modulo E."""
    ctx = mk(3)
    rng = random.Random(11)
    E = ctx.E_kpoly()
    for _ in range(25):
        d = rng.choice([1, 2])
        i = rng.choice([1, 2, 3])
        m = rng.choice([1, 2])
        rows = [[0] * d for _ in range(d)]
        for a in range(1, d):
            rows[a][0] = rng.randrange(-9, 10)
        N = MatK.from_ints(ctx, rows, prec=40)
        w = [KPoly.from_ints(ctx, [rng.randrange(-9, 10)
                                   for _ in range(ctx.e)], prec=40)
             for _ in range(d)]
        out = releve_hp(w, N, i, m=m)
        for a in range(d):
            assert is_mult_of(out[a] - w[a], E)
        if i >= 2:
            defect = nhat(ctx, N, m, out)
            for a in range(d):
                assert is_mult_of(defect[a], ctx.E_power(i - 1))


def test_releve_incremental_agreement():
    """Raising the target order only appends corrections: the order-i
    and order-(i+1) lifts agree modulo E^i exactly."""
    ctx = ctx_qp(3)
    N = MatK.from_ints(ctx, [[0, 0], [2, 0]], prec=40)
    w = [ctx.from_int(1, prec=40), ctx.from_int(4, prec=40)]
    for i in (2, 3):
        a = releve_hp(w, N, i)
        b = releve_hp(w, N, i + 1)
        for t in range(2):
            assert is_mult_of(b[t] - a[t], ctx.E_power(i))


def test_releve_perturbed_start_agrees_mod_Ei():
    """The lift is unique modulo E^i: starting from a different
    representative of w modulo E moves the output only by a multiple
    of E^i, up to working precision."""
    ctx = ctx_qp(3)
    N = MatK.from_ints(ctx, [[0, 0], [1, 0]], prec=44)
    w = [ctx.from_int(1, prec=44), ctx.from_int(2, prec=44)]
    i = 3
    base = releve_hp(w, N, i)
    eta = [KPoly.from_ints(ctx, [5], prec=44),
           KPoly.from_ints(ctx, [-3], prec=44)]
    start = [KPoly(ctx, [w[a]]) + ctx.E_kpoly() * eta[a] for a in range(2)]
    other = releve_hp(w, N, i, lift0=start)
    for a in range(2):
        rem = rem_mod(other[a] - base[a], ctx.E_power(i))
        lb = rem.min_val_lb()
        assert rem.is_zero_at_prec() or (lb is not None and lb >= 30)


def test_releve_rejects_nonintegral():
    ctx = ctx_qp(5)
    N = MatK.from_ints(ctx, [[0]])
    bad = [ctx.from_int(1).div(ctx.from_int(5), prec=20)]
    with pytest.raises(PreconditionViolated):
        releve_hp(bad, N, 2)


def test_releve_label_loss_unramified():
    """Over an unramified base the p-twist of the derivation absorbs
    the division losses: the output labels sit within the documented
    allowance of the input labels."""
    ctx = ctx_qp(3)
    P = 36
    rng = random.Random(5)
    dd = ctx.diff_val()
    delta = math.ceil(Fraction(1, ctx.e) + dd)
    for _ in range(20):
        i = rng.choice([2, 3])
        rows = [[0, 0], [rng.randrange(-9, 10), 0]]
        N = MatK.from_ints(ctx, rows, prec=P)
        w = [ctx.from_int(rng.randrange(-9, 10), prec=P) for _ in range(2)]
        out = releve_hp(w, N, i, m=1)
        allowance = max((i - 2) * delta + Fraction(i - 1, ctx.p - 1), 0)
        for a in range(2):
            mp = out[a].min_prec()
            if mp is not None:
                assert P - mp <= allowance


def test_wm_first_step_and_identity():
    ctx = ctx_qp(3)
    D = steinberg(ctx)
    W1 = compute_Wm(D, 1)
    ref = D.Phi.inverse(30) * D.F
    for a in range(2):
        for b in range(2):
            assert (W1.rows[a][b] - ref.rows[a][b]).is_zero_at_prec()
    I2 = MatK.identity(ctx, 2)
    DI = FilteredPhiNModule(ctx, I2, MatK.from_ints(ctx, [[0, 0], [0, 0]]),
                            (1, 0), I2)
    for m in (1, 2, 3):
        Wm = compute_Wm(DI, m)
        for a in range(2):
            for b in range(2):
                assert (Wm.rows[a][b] - I2.rows[a][b]).is_zero_at_prec()


def test_wm_rank_one_powers():
    ctx = ctx_qp(5)
    D = cyclo(ctx, 1)
    for m in (1, 2, 3):
        Wm = compute_Wm(D, m)
        assert Wm.rows[0][0].val() == -m


def test_hodge_pink_cyclotomic_example():
    """Rank one with Phi = (p): the unimodular factor is (1) and the
    triangular cofactor is (1/p)."""
    ctx = ctx_qp(5)
    What, U = hodge_pink_basis(cyclo(ctx, 1), m=1)
    rows = What.as_kpoly_rows()
    assert (rows[0][0] - KPoly.one(ctx)).is_zero_at_prec()
    assert U.rows[0][0].val() == -1


def test_hodge_pink_zero_jump_is_plain_lift():
    ctx = ctx_qp(3)
    Phi = MatK.from_ints(ctx, [[1]])
    D = FilteredPhiNModule(ctx, Phi, MatK.from_ints(ctx, [[0]]), (0,), Phi)
    What, _U = hodge_pink_basis(D, m=1)
    rows = What.as_kpoly_rows()
    assert (rows[0][0] - KPoly.one(ctx)).is_zero_at_prec()


@pytest.mark.parametrize("m", [1, 2])
def test_hodge_pink_congruence_and_horizontality(m):
    """Columns of the lifted basis agree with the unimodular factor of
    W_m modulo E and satisfy the twisted horizontality congruence to
    the order prescribed by their jump."""
    ctx = ctx_qp(3)
    p = ctx.p
    Phi = MatK.from_ints(ctx, [[p, 1], [0, 1]], prec=40)
    N = MatK.from_ints(ctx, [[0, 0], [2, 0]], prec=40)
    F = MatK.from_ints(ctx, [[1, 1], [1, 2]], prec=40)
    D = FilteredPhiNModule(ctx, Phi, N, (2, 0), F)
    What, _U = hodge_pink_basis(D, m=m)
    rows = What.as_kpoly_rows()
    Wp, _W = plu_integral(compute_Wm(D, m), prec=30)
    E = ctx.E_kpoly()
    for i in range(2):
        col = [rows[a][i] for a in range(2)]
        for a in range(2):
            assert is_mult_of(col[a] - KPoly(ctx, [Wp.rows[a][i]]), E)
        if D.H[i] >= 2:
            defect = nhat(ctx, N, m, col)
            for a in range(2):
                assert is_mult_of(defect[a], ctx.E_power(D.H[i] - 1))


@pytest.mark.parametrize("r", [1, 2])
def test_tm_partition_congruences(r):
    """The interpolation polynomials: t_0 = 1, t_m = 1 mod E^r, and
    t_m = 0 mod phi^j(E)^r for every 1 <= j <= m."""
    ctx = ctx_qp(3)
    t_list, _tp = compute_tm(ctx, r, 2)
    assert (t_list[0] - KPoly.one(ctx)).is_zero_at_prec()
    E = ctx.E_kpoly()
    for m in (1, 2):
        tm = t_list[m]
        assert is_mult_of(tm - KPoly.one(ctx), ctx.E_power(r))
        for j in range(1, m + 1):
            phiEj = E.phi(j)
            acc = phiEj
            for _ in range(r - 1):
                acc = acc * phiEj
            assert is_mult_of(tm, acc)


def test_yn_base_and_identity_cases():
    ctx = ctx_qp(3)
    one = KPoly.one(ctx)
    zero = KPoly.zero(ctx)
    L1 = [[one, zero], [KPoly.from_ints(ctx, [2, 1]), one]]
    t_list, _ = compute_tm(ctx, 1, 2)
    Y = compute_Yn([L1], t_list, 1)
    for a in range(2):
        for b in range(2):
            assert (Y[a][b] - L1[a][b]).is_zero_at_prec()
    I = [[one, zero], [zero, one]]
    Y3 = compute_Yn([I, I, I], t_list, 3)
    for a in range(2):
        for b in range(2):
            assert (Y3[a][b] - I[a][b]).is_zero_at_prec()


def test_yn_congruent_to_last_term():
    """Y_n = L_n mod E^r: the interpolation picks out the newest
    unipotent factor at the E-adic place."""
    ctx = ctx_qp(3)
    rng = random.Random(3)
    r = 2
    one = KPoly.one(ctx)
    zero = KPoly.zero(ctx)

    def rand_L():
        low = KPoly.from_ints(
            ctx, [rng.randrange(-9, 10) for _ in range(ctx.e * r)], prec=40)
        return [[one, zero], [low, one]]

    L_list = [rand_L(), rand_L(), rand_L()]
    t_list, _ = compute_tm(ctx, r, 2)
    Y = compute_Yn(L_list, t_list, 3, prec=40)
    Er = ctx.E_power(r)
    for a in range(2):
        for b in range(2):
            assert is_mult_of(Y[a][b] - L_list[2][a][b], Er)
    assert (Y[0][0] - one).is_zero_at_prec()
    assert (Y[1][1] - one).is_zero_at_prec()
    assert Y[0][1].is_zero_at_prec()


@pytest.mark.parametrize("p,r", [(3, 1), (5, 1), (3, 2)])
def test_phibk_closed_form_rank_one(p, r):
    """Phi = (p^r) with jump r gives p^r E^r on the nose."""
    ctx = ctx_qp(p)
    K = compute_phibk(cyclo(ctx, r), seed=1)
    rows = K.PhiBK.as_kpoly_rows()
    want = ctx.E_power(r).scale(ctx.from_int(p ** r))
    assert (rows[0][0] - want).is_zero_at_prec()
    assert K.height_certificate is not None
    assert K.verify_height()


def test_phibk_certificate_and_bounds():
    ctx = ctx_qp(3)
    K = compute_phibk(steinberg(ctx), nu=Fraction(1, 6), seed=7)
    assert K.d == 2 and K.r_height == 1
    assert K.height_certificate is not None
    assert K.verify_height()
    aud = K.audit
    for key in ("input_prec", "working_prec", "slope", "stability_bound",
                "measured_floor", "guaranteed_output_prec", "budget",
                "redraws"):
        assert key in aud
    assert aud["measured_floor"] >= K.constants.ctec - K.constants.n * K.r_height
    assert aud["budget"]["total"] == K.constants.M0


@pytest.mark.parametrize("make,ds", [(ctx_qp, 3), (ctx52, None)])
def test_phibk_assembly_identity(make, ds):
    """E^r Phi phi(X) = X PhiBK, exactly as polynomial matrices: the
    output is the matrix of the twisted Frobenius in the basis X."""
    ctx = make(ds) if ds is not None else make()
    D = steinberg(ctx) if ds is not None else cyclo(ctx, 1)
    K = compute_phibk(D, seed=7)
    X = K.basis_x
    d = K.d
    Er = ctx.E_power(K.r_height)
    lhs = km_mul(km_from_matk(D.Phi), km_phi(X, 40))
    lhs = [[Er * x for x in row] for row in lhs]
    rhs = km_mul(X, K.PhiBK.as_kpoly_rows())
    for a in range(d):
        for b in range(d):
            assert (lhs[a][b] - rhs[a][b]).is_zero_at_prec()


def test_phibk_reproducible_for_seed():
    ctx = ctx_qp(3)
    K1 = compute_phibk(steinberg(ctx), seed=12)
    K2 = compute_phibk(steinberg(ctx), seed=12)
    assert repr(K1.PhiBK.as_kpoly_rows()) == repr(K2.PhiBK.as_kpoly_rows())
    assert K1.audit["redraws"] == K2.audit["redraws"]


def test_phibk_height_zero_degenerate():
    ctx = ctx_qp(3)
    Phi = MatK.from_ints(ctx, [[2]])
    D = FilteredPhiNModule(ctx, Phi, MatK.from_ints(ctx, [[0]]), (0,),
                           MatK.from_ints(ctx, [[1]]))
    K = compute_phibk(D, seed=0)
    rows = K.PhiBK.as_kpoly_rows()
    assert (rows[0][0] - KPoly.from_ints(ctx, [2])).is_zero_at_prec()
    assert K.audit.get("degenerate_height_zero")


def test_height_certificate_examples():
    ctx = ctx_qp(3)
    r = 1
    Er = ctx.E_power(r)
    nu = Fraction(1, 3)
    rows = [[Er, KPoly.zero(ctx)], [KPoly.zero(ctx), Er]]
    M = MatNu.from_kpoly_rows(ctx, nu, rows, 6)
    H = height_certificate(M, r)
    assert H is not None
    prod = km_mul(H.as_kpoly_rows(), rows)
    for a in range(2):
        for b in range(2):
            want = Er if a == b else KPoly.zero(ctx)
            assert (prod[a][b] - want).is_zero_at_prec()
    E2 = ctx.E_power(2)
    rows2 = [[KPoly.one(ctx), KPoly.zero(ctx)], [KPoly.zero(ctx), E2]]
    M2 = MatNu.from_kpoly_rows(ctx, nu, rows2, 8)
    assert height_certificate(M2, 1) is None
    H2 = height_certificate(M2, 2)
    assert H2 is not None
    prod2 = km_mul(H2.as_kpoly_rows(), rows2)
    for a in range(2):
        for b in range(2):
            want = E2 if a == b else KPoly.zero(ctx)
            assert (prod2[a][b] - want).is_zero_at_prec()


def test_beta_oracle_matches_basis_rank_one():
    ctx = ctx_qp(5)
    D = cyclo(ctx, 1)
    K = compute_phibk(D, seed=3)
    B = beta_oracle(D, K.constants.n, prec=30).as_kpoly_rows()
    assert spans_match(B, K.basis_x, K.nu, 40)


def test_beta_oracle_matches_basis_rank_two():
    ctx = ctx_qp(3)
    p = ctx.p
    Phi = MatK(ctx, [[ctx.from_int(p), ctx.zero()], [ctx.zero(), ctx.one()]])
    N = MatK.from_ints(ctx, [[0, 0], [1, 0]])
    D = FilteredPhiNModule(ctx, Phi, N, (1, 0), MatK.identity(ctx, 2))
    K = compute_phibk(D, nu=Fraction(1, 6), seed=7)
    B = beta_oracle(D, K.constants.n, prec=30).as_kpoly_rows()
    assert spans_match(B, K.basis_x, K.nu, 60)


def test_beta_oracle_start_invariance():
    """Replacing the starting span by a unimodular multiple leaves the
    recursion output span unchanged."""
    ctx = ctx_qp(3)
    D = steinberg(ctx)
    one = KPoly.one(ctx)
    L = [[one + KPoly.from_ints(ctx, [0, 1]), KPoly.from_ints(ctx, [0, 2])],
         [KPoly.zero(ctx), one]]
    B1 = beta_oracle(D, 1, prec=30).as_kpoly_rows()
    B2 = beta_oracle(D, 1, L=L, prec=30).as_kpoly_rows()
    nu = Fraction(1, 3 * ctx.e)
    assert spans_match(B1, B2, nu, 50)


def test_beta_oracle_scale_guard():
    ctx = ctx_qp(3)
    I3 = MatK.identity(ctx, 3)
    Z3 = MatK.from_ints(ctx, [[0] * 3 for _ in range(3)])
    D = FilteredPhiNModule(ctx, I3, Z3, (1, 1, 0), I3)
    with pytest.raises(OracleScaleExceeded):
        beta_oracle(D, 1)


def test_constants_basic():
    ctx = ctx_qp(3)
    D = steinberg(ctx)
    c = Stage1Constants.for_module(D, Fraction(1, 6))
    assert c.n == 2
    assert ctx.p ** c.v >= 2 * c.n * len(set(D.H))
    assert ctx.p ** (c.v - 1) < 2 * c.n * len(set(D.H)) or c.v == 1
    assert c.M0 >= 0 and c.c >= 0
    d = c.to_dict()
    assert set(d) == {"n", "v", "rho1", "rho2", "M0", "c"}
