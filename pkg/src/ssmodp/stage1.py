"""Finite-height Frobenius lattices for effective filtered (phi, N)-modules.

Starting from a filtered module with non-negative jumps, this stage builds
a polynomial basis of the canonical Frobenius-stable lattice inside the
scalar extension to the open unit disk, together with the matrix of the
twisted Frobenius in that basis.  The construction runs in three layers:

  * horizontal lifts: each column of the filtration matrix is corrected,
    degree by degree along powers of the Eisenstein polynomial E, until
    the twisted derivation p^m N + u d/du kills it to the required order
    (releve_hp, hodge_pink_basis);
  * a simultaneous unipotent reduction of the lifted bases across the
    first n Frobenius twists, glued by a partition of unity built from
    images of E under Frobenius (compute_Wm, compute_tm, compute_Yn);
  * assembly of the Frobenius matrix of the glued lattice, division by
    the diagonal of E-power products, and a height certificate
    (compute_phibk, height_certificate).

Normalization: the partition elements and the diagonal use the monic
polynomials phi^j(E) themselves rather than their value-one rescalings
phi^j(E)/E(0).  The two choices differ by scalars from the coefficient
field, which are units of the disk algebra (p is inverted there), so the
lattice is the same; the monic choice keeps every division exact.

beta_oracle recomputes the lattice from its defining intersection
recursion by brute-force linear algebra over the coefficient field, for
cross-checking small instances.
"""

import math
import random
from fractions import Fraction

from .errors import (
    DivisionNotExact,
    GuaranteeViolated,
    LUFailure,
    NotEffective,
    OracleScaleExceeded,
    PrecisionExhausted,
    PreconditionViolated,
    SingularAtPrecision,
    SSModpError,
    ValidationError,
)
from .padic import KPoly, RamElem, UnramElem
from .series import NuSeries, euclid_div
from .linalg import (
    EPowerQuot,
    MatK,
    MatNu,
    hermite_form,
    plu_integral,
    simultaneous_lu,
)

_PHI_E_CACHE = {}
_LAMBDA_CACHE = {}


def _phi_E(ctx, j):
    """phi^j(E) as an exact monic polynomial, cached per context."""
    key = (id(ctx), j)
    hit = _PHI_E_CACHE.get(key)
    if hit is not None and hit[0] is ctx:
        return hit[1]
    try:
        poly = ctx.E_kpoly().phi(j)
    except ValueError:
        raise ValidationError(
            "the Eisenstein coefficients are not fixed by Frobenius; "
            "an exact image under phi^%d is not available" % j)
    _PHI_E_CACHE[key] = (ctx, poly)
    return poly


def big_lambda(ctx, n):
    """The product E * phi(E) * ... * phi^{n-1}(E), exact and monic."""
    if n < 0:
        raise ValidationError("the product length must be non-negative")
    key = (id(ctx), n)
    hit = _LAMBDA_CACHE.get(key)
    if hit is not None and hit[0] is ctx:
        return hit[1]
    if n == 0:
        poly = KPoly.one(ctx)
    else:
        poly = big_lambda(ctx, n - 1) * _phi_E(ctx, n - 1)
    _LAMBDA_CACHE[key] = (ctx, poly)
    return poly


def _kpoly_pow(base, k):
    out = KPoly.one(base.ctx)
    for _ in range(k):
        out = out * base
    return out


def _to_kpoly(ctx, x):
    if isinstance(x, KPoly):
        return x
    if isinstance(x, RamElem):
        return x.as_kpoly()
    if isinstance(x, UnramElem):
        return KPoly(ctx, [x])
    raise ValidationError(f"cannot read {x!r} as a polynomial over K0")


# -- polynomial matrix helpers --------------------------------------------------


def _km_from_matk(M):
    ctx = M.ctx
    return [[_to_kpoly(ctx, x) for x in row] for row in M.rows]


def _km_eye(ctx, d):
    one, zero = KPoly.one(ctx), KPoly.zero(ctx)
    return [[one if i == j else zero for j in range(d)] for i in range(d)]


def _km_mul(A, B):
    n, m, k = len(A), len(B[0]), len(B)
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = A[i][0] * B[0][j]
            for t in range(1, k):
                acc = acc + A[i][t] * B[t][j]
            row.append(acc)
        out.append(row)
    return out


def _km_add(A, B):
    return [[A[i][j] + B[i][j] for j in range(len(A[0]))] for i in range(len(A))]


def _km_sub(A, B):
    return [[A[i][j] - B[i][j] for j in range(len(A[0]))] for i in range(len(A))]


def _km_scale(t, A):
    return [[t * x for x in row] for row in A]


def _km_phi(A, prec=None):
    return [[x.phi(1, prec) for x in row] for row in A]


def _km_inv_unipotent_lower(ctx, Y):
    """Invert a lower triangular matrix whose diagonal is 1 at precision.

    The strictly lower part is nilpotent, so the alternating power sum
    terminates; the result is checked by a multiply-back at precision."""
    d = len(Y)
    zero = KPoly.zero(ctx)
    for i in range(d):
        for j in range(d):
            if i == j:
                dev = Y[i][i] - KPoly.one(ctx)
            elif j > i:
                dev = Y[i][j]
            else:
                continue
            if not dev.is_zero_at_prec():
                raise GuaranteeViolated(
                    "the glued reduction matrix is not unipotent lower "
                    "triangular at entry (%d, %d)" % (i + 1, j + 1))
    Nst = [[Y[i][j] if j < i else zero for j in range(d)] for i in range(d)]
    inv = _km_eye(ctx, d)
    term = _km_eye(ctx, d)
    for _ in range(d - 1):
        term = _km_scale(KPoly.from_ints(ctx, [-1]), _km_mul(term, Nst))
        inv = _km_add(inv, term)
    check = _km_sub(_km_mul(inv, Y), _km_eye(ctx, d))
    for row in check:
        for x in row:
            if not x.is_zero_at_prec():
                raise GuaranteeViolated(
                    "the unipotent inverse fails its multiply-back check")
    return inv


# -- constants -------------------------------------------------------------------


class Stage1Constants:
    """Precision and iteration constants for one lattice construction.

    n is the number of Frobenius twists glued (the output slope is
    1/(e p^n)); v bounds the denominators of the inverted row mix; rho1
    and rho2 bound the precision spent by the horizontal lifts and by the
    unipotent reductions; M0 is the total precision budget and c the
    integrality allowance for the output entries."""

    __slots__ = ("d", "r", "n", "v", "delta", "rho1", "rho2", "M0",
                 "ctec", "c", "nu")

    def __init__(self, d, r, n, v, delta, rho1, rho2, M0, ctec, c, nu):
        self.d = d
        self.r = r
        self.n = n
        self.v = v
        self.delta = delta
        self.rho1 = rho1
        self.rho2 = rho2
        self.M0 = M0
        self.ctec = ctec
        self.c = c
        self.nu = nu

    @classmethod
    def for_module(cls, D, nu):
        ctx = D.ctx
        p, e, d = ctx.p, ctx.e, D.d
        if any(h < 0 for h in D.H):
            raise NotEffective("the filtration jumps must be non-negative")
        r = max(D.H) if D.H else 0
        nu = Fraction(nu)
        if nu <= 0:
            raise ValidationError("the target slope must be positive")
        n = 1
        while Fraction(1, e * p**n) > nu:
            n += 1
        r_card = len(set(D.H))
        v = 1
        while p**v < 2 * n * r_card:
            v += 1
        dd = ctx.diff_val()
        delta = math.ceil(Fraction(1, e) + dd)
        rho1 = (r - 2) * delta + Fraction(r - 1, p - 1)
        rho2 = r * (Fraction(1, e) + v + dd)
        cv = math.ceil(dd)
        t_losses = r * (2 + cv) * (n * (n - 1)) // 2
        M0 = (n * r + d * r + max(0, math.ceil(rho1))
              + 2 * max(0, math.ceil(rho2)) + t_losses + r * (n + 1) + v)
        ctec = -(d * r * (Fraction(n * (n + 1), 2) * (2 + cv)
                          + math.ceil(Fraction(1, e) + v + 2 * dd))
                 + v + r * (n + 1))
        c = max(0, math.ceil(-ctec))
        return cls(d, r, n, v, delta, rho1, rho2, M0, Fraction(ctec), c, nu)

    def to_dict(self):
        return {
            "n": self.n,
            "v": self.v,
            "rho1": [self.rho1.numerator, self.rho1.denominator],
            "rho2": [self.rho2.numerator, self.rho2.denominator],
            "M0": self.M0,
            "c": self.c,
        }

    def __repr__(self):
        return (f"Stage1Constants(n={self.n}, v={self.v}, rho1={self.rho1}, "
                f"rho2={self.rho2}, M0={self.M0}, c={self.c})")


# -- horizontal lifts -------------------------------------------------------------


def _apply_nhat(ctx, Nmat, m, vec):
    """The twisted derivation p^m (N tensor 1) + (1 tensor u d/du)."""
    d = len(vec)
    out = []
    for a in range(d):
        acc = KPoly.zero(ctx)
        for b in range(d):
            c = Nmat.rows[a][b]
            if c.is_exact_zero():
                continue
            acc = acc + vec[b].scale(c)
        out.append(acc.scale_p(m) + vec[a].u_derivative())
    return out


def releve_hp(w, Nmat, i, m=1, prec=None, lift0=None):
    """Horizontal lift of an integral vector along powers of E.

    Returns a polynomial vector w_hat with w_hat = w mod E and
    (p^m N + u d/du)(w_hat) = 0 mod E^{i-1}; w_hat is the unique such
    lift modulo E^i.  One correction digit is added per pass: the defect
    y with Nhat(w_hat) = E^j y is multiplied by the inverse B of
    u E'(u) mod E and folded back, using the identity
    Nhat(E^j x) = E^j Nhat(x) + j (u E'(u)) E^{j-1} x.

    w: entries over K (or polynomials of degree < e), integral.
    Nmat: the nilpotent matrix of the derivation, over K0.
    i: the target congruence order; i <= 1 returns the plain lift.
    m: the power of p twisting the derivation.
    lift0: an optional alternative starting lift, congruent to w mod E.
    """
    ctx = Nmat.ctx
    d = len(w)
    if Nmat.nrows != d or Nmat.ncols != d:
        raise ValidationError("the derivation matrix does not match the vector")
    what = [_to_kpoly(ctx, x) for x in (lift0 if lift0 is not None else w)]
    for x in what:
        lb = x.min_val_lb()
        if lb < 0:
            raise PreconditionViolated(
                "the vector to lift must be integral; found a coefficient "
                "with valuation bound %s" % lb)
    if i <= 1:
        return what
    labels = [x.min_prec() for x in what] + [Nmat.min_prec()]
    finite = [t for t in labels if t is not None]
    base_prec = prec if prec is not None else (min(finite) if finite else 48)
    dd = ctx.diff_val()
    delta = math.ceil(Fraction(1, ctx.e) + dd)
    prec_aux = base_prec + (i + 1) * (delta + 2) + 4
    E = ctx.E_kpoly()
    A = E.u_derivative()
    B = EPowerQuot(ctx, 1, A.mod_E_power(1)).inv(prec_aux).poly
    y = _apply_nhat(ctx, Nmat, m, what)
    for j in range(1, i):
        jinv = ctx.from_int(j).inv(prec_aux)
        x = []
        for a in range(d):
            t = (B * y[a]).mod_E_power(1).scale(jinv)
            t = -t
            mp = t.min_prec()
            if mp is not None and mp <= 0:
                raise PrecisionExhausted(
                    "no precision left for the degree-%d correction" % j)
            x.append(t)
        Ej = ctx.E_power(j)
        what = [what[a] + Ej * x[a] for a in range(d)]
        if j == i - 1:
            break
        jconst = ctx.from_int(j)
        new_y = []
        for a in range(d):
            num = y[a] + (A * x[a]).scale(jconst)
            q, rem = num.divmod_exact_monic(E)
            if not rem.is_zero_at_prec():
                raise DivisionNotExact(
                    "the horizontality defect is not divisible by E at the "
                    "working precision")
            new_y.append(q)
        nx = _apply_nhat(ctx, Nmat, m, x)
        y = [nx[a] + new_y[a] for a in range(d)]
        for a in range(d):
            mp = y[a].min_prec()
            if mp is not None and mp <= 0:
                raise PrecisionExhausted(
                    "no precision left in the defect after %d passes" % j)
    return what


def compute_Wm(D, m, prec=None):
    """The m-th Frobenius iterate of the filtration matrix:
    phi^{m-1}(Phi^{-1}) ... phi(Phi^{-1}) Phi^{-1} F, over K."""
    if m < 1:
        raise ValidationError("the iterate index starts at 1")
    prec_aux = prec if prec is not None else _module_prec(D) + 8
    Phi_inv = D.Phi.inverse(prec_aux)
    P = Phi_inv
    for j in range(1, m):
        P = Phi_inv.sigma(j, prec_aux) * P
    return P * D.F


def _module_prec(D):
    labels = [M.min_prec() for M in (D.Phi, D.Nmat, D.F)]
    finite = [t for t in labels if t is not None]
    return min(finite) if finite else 48


def hodge_pink_basis(D, m=1, prec=None, nu=None):
    """Integral column basis of the m-th iterate, lifted horizontally.

    Factors W_m = W' U with W' integral of unit determinant and U upper
    triangular, then lifts column i of W' to order H[i] with the twist
    p^m.  Returns (the lifted basis as a polynomial matrix at slope nu,
    the upper factor U)."""
    ctx = D.ctx
    d = D.d
    W = compute_Wm(D, m, prec)
    prec_aux = prec if prec is not None else _module_prec(D) + 8
    Wp, U = plu_integral(W, prec_aux)
    cols = []
    for idx in range(d):
        col = [Wp.rows[a][idx] for a in range(d)]
        cols.append(releve_hp(col, D.Nmat, D.H[idx], m=m, prec=prec))
    rows = [[cols[idx][a] for idx in range(d)] for a in range(d)]
    if nu is None:
        nu = Fraction(1, ctx.e * ctx.p)
    n_tr = max(1, max(len(x.coeffs) for row in rows for x in row))
    return MatNu.from_kpoly_rows(ctx, nu, rows, n_tr), U


# -- the partition of unity across Frobenius twists -------------------------------


def compute_tm(ctx, r, m_max, prec=None):
    """Polynomials t_0 = 1, t_1, ..., t_{m_max} with t_m = 1 mod E^r and
    t_m = 0 mod phi^{m'}(E)^r for 1 <= m' <= m.

    t_m accumulates the factors phi^i(E)^r times their inverses mod E^r;
    returns (the list of t_m, the list of those inverses t'_i, each of
    u-degree < e r)."""
    if r < 1:
        raise ValidationError("the height exponent must be at least 1")
    prec_aux = prec if prec is not None else 48
    t_list = [KPoly.one(ctx)]
    tprime_list = []
    for i in range(1, m_max + 1):
        phiEr = _kpoly_pow(_phi_E(ctx, i), r)
        q = EPowerQuot(ctx, r, phiEr.mod_E_power(r))
        tpi = q.inv(prec_aux).poly
        tprime_list.append(tpi)
        t_list.append(t_list[-1] * phiEr * tpi)
    return t_list, tprime_list


def compute_Yn(L_list, t_list, n, prec=None):
    """Glue the unipotent factors of the first n iterates: Y_1 = L_1 and
    Y_{m+1} = t_m L_{m+1} + (1 - t_m) phi(Y_m).  Returns Y_n as a lower
    triangular polynomial matrix with unit diagonal, satisfying
    Y_n = phi^m(L_{n-m}) mod phi^m(E)^r for 0 <= m < n."""
    if len(L_list) < n or n < 1:
        raise ValidationError("need the unipotent factors of iterates 1..n")
    Y = L_list[0]
    for m in range(1, n):
        tm = t_list[m]
        phiY = _km_phi(Y, prec)
        Y = _km_add(_km_scale(tm, L_list[m]), _km_sub(phiY, _km_scale(tm, phiY)))
    return Y


# -- assembly ---------------------------------------------------------------------


class KisinModule:
    """A finite-height lattice: the matrix of the E^r-twisted Frobenius
    in a polynomial basis, at a slope below 1/(e p^{n-1}).

    PhiBK is the d x d matrix over the slope-nu series ring, truncated at
    u^N; r_height is the height exponent; height_certificate, when
    present, is a matrix H with H * PhiBK = E^{r_height} * identity mod
    u^N, certifying the height.  constants and audit carry the precision
    bookkeeping of the construction; basis_x is the polynomial basis in
    the coordinates of the input module, and omega the integer row mix
    used by the unipotent reductions."""

    __slots__ = ("ctx", "nu", "N", "r_height", "PhiBK", "height_certificate",
                 "constants", "audit", "basis_x", "omega")

    def __init__(self, ctx, nu, N, r_height, PhiBK, height_certificate=None,
                 constants=None, audit=None, basis_x=None, omega=None):
        self.ctx = ctx
        self.nu = Fraction(nu)
        self.N = int(N)
        self.r_height = int(r_height)
        self.PhiBK = PhiBK
        self.height_certificate = height_certificate
        self.constants = constants
        self.audit = audit
        self.basis_x = basis_x
        self.omega = omega

    @property
    def d(self):
        return self.PhiBK.nrows

    def verify_height(self):
        """Recheck the certificate congruence at the stored truncation."""
        if self.height_certificate is None:
            return False
        ctx = self.ctx
        prod = self.height_certificate.matmul(self.PhiBK, n_out=self.N)
        Er = NuSeries.from_kpoly(ctx.E_power(self.r_height), self.nu, self.N)
        target = MatNu.identity(ctx, self.nu, self.d, self.N).scale_series(
            Er, n_out=self.N)
        return (prod - target).is_zero_at_prec()

    def __repr__(self):
        return (f"KisinModule(d={self.d}, r={self.r_height}, nu={self.nu}, "
                f"N={self.N}, certified={self.height_certificate is not None})")


def height_certificate(M, r_try):
    """Try to produce H with H * M = E^{r_try} * identity mod u^N.

    Brings M to lower triangular form by unimodular column operations,
    solves for E^{r_try} times the inverse of the triangle by Euclidean
    division, and verifies the product; returns None when any division
    leaves a remainder or the final check fails."""
    ctx, nu, N = M.ctx, M.nu, M.n_trunc
    d = M.nrows
    try:
        Hf, T = hermite_form(M.transpose())
    except SSModpError:
        return None
    L = Hf.transpose()
    Tt = T.transpose()
    Er = NuSeries.from_kpoly(ctx.E_power(r_try), nu, N)
    zero = NuSeries.zero(ctx, nu, N)
    X = [[zero for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for jj in range(i, -1, -1):
            acc = Er if jj == i else zero
            for k in range(jj + 1, i + 1):
                acc = acc - X[i][k].mul(L.rows[k][jj], n_out=N)
            if acc.is_zero_at_prec():
                X[i][jj] = zero
                continue
            try:
                q, rem = euclid_div(L.rows[jj][jj], acc, require_integral=False)
            except SSModpError:
                return None
            if not rem.is_zero_at_prec():
                return None
            if len(q.coeffs) < N:
                q = q.pad_to(N)
            elif len(q.coeffs) > N:
                q = q.truncate(N)
            X[i][jj] = q
    H = MatNu(ctx, nu, X).matmul(Tt, n_out=N)
    prod = H.matmul(M, n_out=N)
    target = MatNu.identity(ctx, nu, d, N).scale_series(Er, n_out=N)
    if not (prod - target).is_zero_at_prec():
        return None
    return H


def compute_phibk(D, nu=None, N=None, seed=0, prec=None, constants=None,
                  max_redraws=20):
    """Build the finite-height lattice of an effective filtered module.

    Runs the horizontal lifts of the first n Frobenius iterates, reduces
    them simultaneously by one random integral row mix omega, glues the
    unipotent factors with the Frobenius partition of unity, and assembles
    the twisted Frobenius matrix

        PhiBK = E^r Delta^{-1} Y^{-1} omega phi^n(Phi) omega^{-1} phi(Y)
                phi(Delta),

    where Delta is the diagonal of (E phi(E) ... phi^{n-1}(E))^{r - h_i}.
    Each entry division is exact and checked; the certified slope floor
    and the height certificate are attached to the result.

    nu: the slope the caller needs (the output is labeled 1/(e p^n) with
    the smallest adequate n).  N: the u-adic truncation of the output.
    seed: drives the row-mix draws; redraws consume the same stream."""
    ctx = D.ctx
    d = D.d
    if any(h < 0 for h in D.H):
        raise NotEffective("the filtration jumps must be non-negative")
    r = max(D.H) if D.H else 0
    if nu is None:
        nu = Fraction(1, ctx.e * ctx.p)
    if constants is None:
        constants = Stage1Constants.for_module(D, nu)
    n, v = constants.n, constants.v
    nu_lab = Fraction(1, ctx.e * ctx.p**n)
    M_in = None
    labels = [M.min_prec() for M in (D.Phi, D.Nmat, D.F)]
    finite = [t for t in labels if t is not None]
    if finite:
        M_in = min(finite)
    prec_work = prec if prec is not None else (
        M_in if M_in is not None else constants.M0 + 3)
    prec_aux = prec_work + 8

    if r == 0:
        rows = _km_from_matk(D.Phi)
        n_eff = max(N or 0, max(len(x.coeffs) for row in rows for x in row), 1)
        matnu = MatNu.from_kpoly_rows(ctx, nu_lab, rows, n_eff)
        cert = height_certificate(matnu, 0)
        audit = {
            "input_prec": M_in, "working_prec": prec_work,
            "slope": nu_lab, "degenerate_height_zero": True,
            "measured_floor": matnu.vnu_floor(),
            "measured_output_prec": _rows_min_prec(rows),
            "guaranteed_output_prec":
                (M_in - constants.M0) if M_in is not None else None,
            "budget": _budget_dict(constants), "redraws": 0,
        }
        return KisinModule(ctx, nu_lab, n_eff, 0, matnu, cert,
                           constants=constants, audit=audit,
                           basis_x=_km_eye(ctx, d), omega=None)

    # horizontal lifts of the first n iterates
    Phi_inv = D.Phi.inverse(prec_aux)
    P = None
    what_list = []
    for m in range(1, n + 1):
        P = Phi_inv if P is None else Phi_inv.sigma(m - 1, prec_aux) * P
        Wm = P * D.F
        Wp, _U = plu_integral(Wm, prec_aux)
        cols = [releve_hp([Wp.rows[a][idx] for a in range(d)],
                          D.Nmat, D.H[idx], m=m, prec=prec_work)
                for idx in range(d)]
        what_list.append([[cols[idx][a] for idx in range(d)] for a in range(d)])

    # one integral row mix for every iterate
    rng = random.Random(seed)
    p_width = ctx.p ** (v + 3)
    omega_rows = None
    lu = None
    redraws = 0
    for attempt in range(max_redraws):
        cand = [[rng.randrange(p_width) for _ in range(d)] for _ in range(d)]
        omega = MatK.from_ints(ctx, cand)
        try:
            om_inv = omega.inverse(prec_aux)
        except (SingularAtPrecision, ZeroDivisionError):
            redraws += 1
            continue
        if om_inv.min_val_lb() < -v:
            redraws += 1
            continue
        try:
            lu = simultaneous_lu(cand, what_list, r, prec_aux)
        except LUFailure:
            redraws += 1
            continue
        omega_rows = cand
        break
    if lu is None:
        raise LUFailure(
            "no row mix with unit pivots and denominators within p^%d was "
            "found in %d draws" % (v, max_redraws))

    # glue the unipotent factors and assemble the Frobenius matrix
    L_list = [L for (L, _V) in lu]
    t_list, _tprime = compute_tm(ctx, r, n - 1, prec_aux)
    Y = compute_Yn(L_list, t_list, n, prec=prec_aux)
    Yinv = _km_inv_unipotent_lower(ctx, Y)
    Phin = D.Phi.sigma(n, prec_aux)
    conj = (omega * Phin) * om_inv
    M1 = _km_mul(_km_mul(Yinv, _km_from_matk(conj)), _km_phi(Y, prec_aux))
    Lam = big_lambda(ctx, n)
    phiLam = KPoly.one(ctx)
    for j in range(1, n + 1):
        phiLam = phiLam * _phi_E(ctx, j)
    lam_pows = [KPoly.one(ctx)]
    philam_pows = [KPoly.one(ctx)]
    for _ in range(r):
        lam_pows.append(lam_pows[-1] * Lam)
        philam_pows.append(philam_pows[-1] * phiLam)
    Er = ctx.E_power(r)
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            G = Er * M1[i][j] * philam_pows[r - D.H[j]]
            q, rem = G.divmod_exact_monic(lam_pows[r - D.H[i]])
            if not rem.is_zero_at_prec():
                raise DivisionNotExact(
                    "entry (%d, %d) is not divisible by the diagonal "
                    "E-power product at the working precision" % (i + 1, j + 1))
            row.append(q)
        rows.append(row)

    max_len = max(len(x.coeffs) for row in rows for x in row)
    n_eff = max(N or 0, max_len, 1)
    matnu = MatNu.from_kpoly_rows(ctx, nu_lab, rows, n_eff)
    floor = matnu.vnu_floor()
    ctec_eff = constants.ctec - n * r
    if floor < ctec_eff:
        raise GuaranteeViolated(
            "the certified slope floor %s undercuts the stability bound %s"
            % (floor, ctec_eff))

    # the basis in the coordinates of the input module
    Pi = D.Phi
    for j in range(1, n):
        Pi = Pi * D.Phi.sigma(j, prec_aux)
    XK = _km_mul(_km_mul(_km_from_matk(Pi * om_inv), Y),
                 [[lam_pows[r - D.H[j]] if i == j else KPoly.zero(ctx)
                   for j in range(d)] for i in range(d)])

    cert = height_certificate(matnu, r)
    audit = {
        "input_prec": M_in,
        "working_prec": prec_work,
        "slope": nu_lab,
        "stability_bound": ctec_eff,
        "measured_floor": floor,
        "measured_output_prec": _rows_min_prec(rows),
        "guaranteed_output_prec":
            (M_in - constants.M0) if M_in is not None else None,
        "budget": _budget_dict(constants),
        "redraws": redraws,
    }
    return KisinModule(ctx, nu_lab, n_eff, r, matnu, cert,
                       constants=constants, audit=audit,
                       basis_x=XK, omega=omega_rows)


def _rows_min_prec(rows):
    best = None
    for row in rows:
        for x in row:
            mp = x.min_prec()
            if mp is not None and (best is None or mp < best):
                best = mp
    return best


def _budget_dict(c):
    others = (c.n * c.r + c.d * c.r + max(0, math.ceil(c.rho1))
              + 2 * max(0, math.ceil(c.rho2)) + c.r * (c.n + 1) + c.v)
    return {
        "iterates": c.n * c.r,
        "column_reduction": c.d * c.r,
        "horizontal_lift": max(0, math.ceil(c.rho1)),
        "row_mix": 2 * max(0, math.ceil(c.rho2)),
        "partition": c.M0 - others,
        "assembly": c.r * (c.n + 1) + c.v,
        "total": c.M0,
    }


# -- the brute-force lattice oracle ------------------------------------------------


def _nullspace(ctx, rows, prec):
    """Basis of the right nullspace of a matrix over K0.

    Gauss-Jordan elimination with the readable pivot of smallest
    valuation in each column; entries indistinguishable from zero at
    their precision are treated as zero."""
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    M = [list(r) for r in rows]
    pivot_of_col = {}
    used = set()
    for c in range(ncols):
        best, best_val = None, None
        for i in range(nrows):
            if i in used:
                continue
            x = M[i][c]
            if x.is_zero_at_prec() or not x.is_readable():
                continue
            xv = x.val()
            if best is None or xv < best_val:
                best, best_val = i, xv
        if best is None:
            continue
        used.add(best)
        pivot_of_col[c] = best
        piv_inv = M[best][c].inv(prec)
        for i in range(nrows):
            if i == best:
                continue
            x = M[i][c]
            if x.is_zero_at_prec():
                continue
            f = x * piv_inv
            M[i] = [M[i][j] - f * M[best][j] for j in range(ncols)]
    basis = []
    free_cols = [c for c in range(ncols) if c not in pivot_of_col]
    for fc in free_cols:
        vec = [ctx.zero()] * ncols
        vec[fc] = ctx.one()
        for c, i in pivot_of_col.items():
            num = M[i][fc]
            if num.is_zero_at_prec():
                continue
            vec[c] = -(num * M[i][c].inv(prec))
        basis.append(vec)
    return basis


def _span_columns(ctx, A_rows, G, prec):
    """Columns u^t A[:, j] mod G as vectors over K0, j major, t minor."""
    d = len(A_rows)
    g = len(G.coeffs) - 1
    cols = []
    for j in range(d):
        for t in range(g):
            col = []
            for a in range(d):
                rem = A_rows[a][j].shift_u(t).divmod_exact_monic(G)[1]
                col.extend(rem[i] for i in range(g))
            cols.append(col)
    return cols


def beta_oracle(D, n, L=None, prec=None):
    """Recompute the lattice by its defining intersection recursion.

    Starting from the sublattice spanned by L (the identity by default),
    each step intersects the Frobenius image of the previous span with
    the span of the lifted filtration basis scaled by E^{r - h_i}, then
    applies Phi.  The intersection is computed by brute-force linear
    algebra over K0 modulo the monic product (E phi(E) ... )^r, which
    both spans contain.  Small instances only: d <= 2 and n <= 2."""
    ctx = D.ctx
    d = D.d
    if d > 2 or n > 2:
        raise OracleScaleExceeded(
            "the intersection oracle is limited to d <= 2 and n <= 2")
    if any(h < 0 for h in D.H):
        raise NotEffective("the filtration jumps must be non-negative")
    r = max(D.H) if D.H else 0
    prec_aux = prec if prec is not None else _module_prec(D) + 8
    What, _U = hodge_pink_basis(D, m=1, prec=prec)
    Wrows = What.as_kpoly_rows()
    C = [[Wrows[a][i] * ctx.E_power(r - D.H[i]) for i in range(d)]
         for a in range(d)]
    PhiK = _km_from_matk(D.Phi)
    B = _km_from_matk(L) if isinstance(L, MatK) else (
        [list(row) for row in L] if L is not None else _km_eye(ctx, d))
    for k in range(1, n + 1):
        A = _km_phi(B, prec_aux)
        G = _kpoly_pow(big_lambda(ctx, k), r)
        if G.degree() < 1:
            B = _km_mul(PhiK, A)
            continue
        MA = _span_columns(ctx, A, G, prec_aux)
        MC = _span_columns(ctx, C, G, prec_aux)
        stacked = [[(MA[j][i] if j < len(MA) else MC[j - len(MA)][i])
                    for j in range(len(MA) + len(MC))]
                   for i in range(len(MA[0]))]
        sols = _nullspace(ctx, stacked, prec_aux)
        g = G.degree()
        gens = []
        for vec in sols:
            col = [KPoly.zero(ctx) for _ in range(d)]
            for j in range(d):
                for t in range(g):
                    c = vec[j * g + t]
                    if c.is_exact_zero() or c.is_zero_at_prec():
                        continue
                    for a in range(d):
                        col[a] = col[a] + A[a][j].shift_u(t).scale(c)
            gens.append(col)
        for j in range(d):
            gens.append([A[a][j] * G for a in range(d)])
        wide_rows = [[gens[t][a] for t in range(len(gens))] for a in range(d)]
        n_tr = max(2, max(len(x.coeffs) for row in wide_rows for x in row))
        wide = MatNu.from_kpoly_rows(ctx, Fraction(1, ctx.e * ctx.p**k),
                                     wide_rows, n_tr)
        Hf, _T = hermite_form(wide)
        Hrows = Hf.as_kpoly_rows()
        base = [[Hrows[a][len(gens) - d + j] for j in range(d)]
                for a in range(d)]
        B = _km_mul(PhiK, base)
    nu_lab = Fraction(1, ctx.e * ctx.p**n)
    n_tr = max(1, max(len(x.coeffs) for row in B for x in row))
    return MatNu.from_kpoly_rows(ctx, nu_lab, B, n_tr)
