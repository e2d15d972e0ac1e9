"""Frobenius-stable lattices by slope raising.

The finite-height Frobenius matrix built in stage one acts on a module
over the open slope ring with p inverted; nothing forces it to preserve
an integral lattice yet.  This stage raises the slope in small steps,
saturating the spanned module after every Frobenius application, until
the module becomes stable.  A final p-power rescaling repairs freeness
over the target slope ring and the height of the result is certified.

Every computation here happens in the quotient model modulo u^N: series
are plain length-N coefficient vectors with an exactly-zero declared
tail, and all statements about the output hold modulo u^N.  Fractional
powers of p, which scale the basis vectors of the intermediate graded
modules, are never materialized; they are tracked as integer exponent
vectors (b for the fine grading, a for the coarse one) and enter the
arithmetic only through integer biases on weighted valuations.
"""

import math
from fractions import Fraction

from .errors import (BudgetError, GuaranteeViolated, IndistinguishableFromZero,
                     IterationBudgetExceeded, NonConvergence, PreconditionViolated)
from .series import NuSeries, euclid_div, snup_decompose
from .linalg import MatNu
from .stage1 import KisinModule, height_certificate


# -- parameters --------------------------------------------------------------------


class Stage2Params:
    """Slopes, truncation order and integrality constants for one run.

    D is the common denominator of the slope ladder: the stage starts at
    nu = 1/(2D), stabilizes at nu_prime = 1/D, and hands the free module
    off at nu_second = d/D.  N is the u-adic working order; c bounds the
    p-denominators of the input matrix (p^c times it is integral at slope
    nu) and c_GL bounds how far a stable lattice can sit from the input
    one."""

    __slots__ = ("D", "N", "nu", "nu_prime", "nu_second", "c", "c_GL", "d")

    def __init__(self, D, N, nu, nu_prime, nu_second, c, c_GL, d):
        self.D = int(D)
        self.N = int(N)
        self.nu = Fraction(nu)
        self.nu_prime = Fraction(nu_prime)
        self.nu_second = Fraction(nu_second)
        self.c = int(c)
        self.c_GL = int(c_GL)
        self.d = int(d)
        if self.N <= 0 or self.N % self.D != 0:
            raise PreconditionViolated("the working order must be a positive multiple of D")
        if (self.N * self.nu).denominator != 1:
            raise PreconditionViolated("N times the starting slope must be an integer")
        if not (0 < self.nu < self.nu_prime):
            raise PreconditionViolated("slopes must satisfy 0 < nu < nu_prime")

    def to_dict(self):
        return {"D": self.D, "N": self.N, "nu": str(self.nu),
                "nu_prime": str(self.nu_prime), "nu_second": str(self.nu_second),
                "c": self.c, "c_GL": self.c_GL, "d": self.d}

    def __repr__(self):
        return (f"Stage2Params(D={self.D}, N={self.N}, nu={self.nu}, "
                f"c={self.c}, c_GL={self.c_GL}, d={self.d})")


def select_parameters(p, e, r, d, c, c_GL, N=None):
    """The smallest admissible slope denominator and its companions.

    D is the least integer strictly greater than p*e*r*d^2/(p-1); this
    makes d/D smaller than (p-1)/(p*e*r*d), which is what the integral
    descent at height r*d requires.  The default working order is
    4*c*c_GL*D^2, with degenerate constants lifted to 1 so the order
    stays positive; a caller may pass a smaller N (any positive multiple
    of 2D) and rely on the runtime budget guards instead."""
    p, e, r, d = int(p), int(e), int(r), int(d)
    c, c_GL = int(c), int(c_GL)
    if min(p, e, r, d) < 1 or c < 0 or c_GL < 0:
        raise PreconditionViolated("parameters must be positive (constants nonnegative)")
    D = (p * e * r * d * d) // (p - 1) + 1
    nu = Fraction(1, 2 * D)
    nu_prime = Fraction(1, D)
    nu_second = Fraction(d, D)
    if not nu_second < Fraction(p - 1, p * e * r * d):
        raise PreconditionViolated("slope bound failed; D selection is inconsistent")
    if N is None:
        N = 4 * max(c, 1) * max(c_GL, 1) * D * D
    N = int(N)
    if N % (2 * D) != 0:
        raise PreconditionViolated("a working order override must be a multiple of 2D")
    return Stage2Params(D, N, nu, nu_prime, nu_second, c, c_GL, d)


# -- the working model -------------------------------------------------------------


def _as_model(s, nu, N):
    """Recast a series at slope nu in the mod-u^N quotient model.

    The head is padded honestly (tail slots inherit the precision the
    old guarantee certifies) and then declared exact beyond u^N, which
    is the semantics of working in the quotient."""
    nu = Fraction(nu)
    if len(s.coeffs) < N:
        s = s.pad_to(N)
    return NuSeries(s.ctx, nu, list(s.coeffs[:N]), None)


def _mul_mod(x, y, N):
    out = x.mul(y, n_out=N)
    return _as_model(out, x.nu, N)


def _phi_mod(s, N, work_prec=None):
    """Frobenius in the quotient model: the slope drops by p under phi,
    so raising it back to the input slope is always sound."""
    t = s.phi(work_prec)
    return _as_model(t, s.nu, N)


def _capped_val(s, nu_eval, scale, bias, cap):
    """scale * v_{nu_eval}(s) + bias, certified, read only below cap.

    Returns the value as a Fraction when it is certified and smaller
    than cap, None when it is certified to be at least cap, and raises
    IndistinguishableFromZero when unreadable coefficients prevent the
    comparison.  nu_eval must not be below the slope the series carries,
    so its tail guarantee stays a valid lower bound."""
    nu_eval = Fraction(nu_eval)
    if nu_eval < s.nu and s.g is not None:
        raise PreconditionViolated("cannot evaluate a guarded series below its slope")
    best = None
    fog = None
    for i, coeff in enumerate(s.coeffs):
        if coeff.is_readable():
            cand = scale * (Fraction(coeff.val()) + nu_eval * i) + bias
            if best is None or cand < best:
                best = cand
        elif coeff.prec is not None:
            lvl = scale * (Fraction(coeff.prec) + nu_eval * i) + bias
            if fog is None or lvl < fog:
                fog = lvl
    if s.g is not None:
        lvl = scale * Fraction(s.g) + bias
        if fog is None or lvl < fog:
            fog = lvl
    if best is not None and (fog is None or best <= fog):
        return best if best < cap else None
    if fog is None:
        return None
    if fog >= cap:
        return None
    raise IndistinguishableFromZero(
        "a weighted valuation is unreadable below the comparison level; "
        "raise the working precision")


def _capped_int(s, N, bias, cap):
    """The integer N*v(s) + bias below cap, or None when at least cap."""
    v = _capped_val(s, s.nu, N, bias, cap)
    if v is None:
        return None
    if v.denominator != 1:
        raise PreconditionViolated("scaled valuation is not an integer; N*nu must be integral")
    return int(v)


# -- saturation on explicit bases ----------------------------------------------------


def _det_series(rows, N):
    d = len(rows)
    if d == 1:
        return rows[0][0]
    acc = None
    for k in range(d):
        minor = [row[:k] + row[k + 1:] for row in rows[1:]]
        term = _mul_mod(rows[0][k], _det_series(minor, N), N)
        if k % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def span_coordinates(basis, x, nu, N):
    """Coordinates of x on a free family, by Cramer in the quotient model.

    basis is a list of d vectors of length d (series entries), x a vector.
    Raises PreconditionViolated when the family is not free at working
    precision or when x falls outside the span."""
    d = len(basis)
    nu = Fraction(nu)
    mat = [[_as_model(basis[k][i], nu, N) for k in range(d)] for i in range(d)]
    xm = [_as_model(comp, nu, N) for comp in x]
    det = _det_series(mat, N)
    if det.is_zero_at_prec():
        raise PreconditionViolated("the family is not free at working precision")
    coords = []
    for pos in range(d):
        cols = [[mat[i][k] if k != pos else xm[i] for k in range(d)] for i in range(d)]
        num = _det_series(cols, N)
        q, rem = euclid_div(det, num, require_integral=False)
        if not rem.is_zero_at_prec():
            raise PreconditionViolated(
                "the vector is not in the span at working precision")
        coords.append(_as_model(q, nu, N))
    return coords


def ajout_vecteur(basis, x, c, N, nu):
    """Smallest free module containing a given one and one extra vector.

    basis is a free family of d vectors over the slope ring with p
    inverted, x a vector of the ambient space lying in p^{-c} times the
    span.  The loop rescales the basis vector carrying the most negative
    coordinate by an integral power of p, then kills degrees by Euclidean
    division, the saturation that computes the maximal lattice with the
    same p-power and u-power hulls.  Valuations are measured at slope
    nu + c/N on the mod-u^N model; the p^{-c} promise on x is exactly
    what certifies every negative valuation read at that slope.  The
    rescaling exponent is the fractional valuation gap rounded up, so a
    rescaled coordinate always reaches its target and the loop makes
    progress; on inputs with integral valuations nothing is rounded.
    Returns the new basis."""
    d = len(basis)
    nu_val = Fraction(nu) + Fraction(c, N)
    work = [[_as_model(comp, nu_val, N) for comp in vec] for vec in basis]
    xm = [_as_model(comp, nu_val, N) for comp in x]
    coords = span_coordinates(work, xm, nu_val, N)
    for y in coords:
        if _capped_val(y, nu_val, 1, 0, Fraction(-c)) is not None:
            raise GuaranteeViolated(
                f"a coordinate of the new vector falls below p^{-c}")
    budget = N * N * max(c, 1) * d + d + 8
    steps = 0
    while True:
        steps += 1
        if steps > budget:
            raise BudgetError("saturation did not terminate within the degree budget")
        vals = [_capped_val(coords[k], nu_val, 1, 0, Fraction(0)) for k in range(d)]
        live = [k for k in range(d) if vals[k] is not None]
        if not live:
            return work
        i = min(live, key=lambda k: (vals[k], k))
        v_j = None
        j = None
        for k in live:
            if k != i and (v_j is None or vals[k] < v_j):
                v_j, j = vals[k], k
        target = Fraction(0) if v_j is None else min(Fraction(0), v_j)
        delta = math.ceil(target - vals[i])
        if delta > 0:
            coords[i] = coords[i].scale_p(delta)
            work[i] = [comp.scale_p(-delta) for comp in work[i]]
        if v_j is not None:
            ii, jj = i, j
            if coords[ii].weierstrass_degree() < coords[jj].weierstrass_degree():
                ii, jj = jj, ii
            q, rpoly = euclid_div(coords[jj], coords[ii], require_integral=False)
            coords[ii] = _as_model(NuSeries.from_kpoly(rpoly, nu_val, N), nu_val, N)
            qm = _as_model(q, nu_val, N)
            work[jj] = [work[jj][t] + _mul_mod(qm, work[ii][t], N) for t in range(d)]


# -- saturation in exponent bookkeeping ----------------------------------------------


def change_base(b, PhiBK, a_target, X, c, N, nu, work_prec=None):
    """Adjoin one vector to a graded lattice and rewrite the Frobenius.

    The lattice has basis vectors that are the working basis e_i scaled
    by the b_i-th negative power of the N-th root of p; the new vector is
    the a_target-th negative power times the column X written on the e_i.
    The loop rescales exponents and divides coordinates until every
    scaled valuation reaches a_target; each Euclidean division rewrites
    the basis by e_j <- e_j + q e_i, so the Frobenius matrix picks up
    phi(q) times column i on column j and loses q times row j on row i.
    All valuations are taken at slope nu + c/N and all series live in the
    mod-u^N model.  Returns (b', PhiBK' as MatNu, info dict)."""
    d = len(b)
    nu = Fraction(nu)
    nu_p = nu + Fraction(c, N)
    if (N * nu_p).denominator != 1:
        raise PreconditionViolated("N times the slope must be an integer")
    rows = PhiBK.rows if isinstance(PhiBK, MatNu) else PhiBK
    rows = [[_as_model(entry, nu_p, N) for entry in row] for row in rows]
    Xw = [_as_model(comp, nu_p, N) for comp in X]
    b2 = [int(t) for t in b]
    a_target = int(a_target)
    for comp in Xw:
        if _capped_val(comp, nu_p, N, 0, Fraction(-c * N)) is not None:
            raise GuaranteeViolated("a coordinate of the adjoined vector falls below p^{-c}")
    ctx = Xw[0].ctx
    budget = N * N * max(c, 1) * d + d + 8
    steps = 0
    variants = []
    elementary = []
    rescales = []
    while True:
        vals = [_capped_int(Xw[k], N, b2[k], a_target) for k in range(d)]
        live = [k for k in range(d) if vals[k] is not None]
        if not live:
            break
        steps += 1
        if steps > budget:
            raise BudgetError("saturation did not terminate within the degree budget")
        vmin = min(vals[k] for k in live)
        attain = [k for k in live if vals[k] == vmin]
        degs = {k: Xw[k].weierstrass_degree() for k in attain}
        dmax = max(degs.values())
        ncnt = sum(1 for k in attain if degs[k] == dmax)
        var = (-vmin, dmax, ncnt)
        if variants and not var < variants[-1]:
            raise BudgetError("the saturation loop variant failed to decrease")
        variants.append(var)
        i = min(attain)
        v_j = None
        j = None
        for k in live:
            if k != i and (v_j is None or vals[k] < v_j or (vals[k] == v_j and k < j)):
                v_j, j = vals[k], k
        target = a_target if v_j is None else min(a_target, v_j)
        delta = target - vals[i]
        b2[i] += delta
        rescales.append((i, delta))
        if v_j is not None:
            ii, jj = i, j
            if Xw[ii].weierstrass_degree() < Xw[jj].weierstrass_degree():
                ii, jj = jj, ii
            q, rpoly = euclid_div(Xw[jj], Xw[ii], require_integral=False)
            Xw[ii] = _as_model(NuSeries.from_kpoly(rpoly, nu_p, N), nu_p, N)
            qm = _as_model(q, nu_p, N)
            phiq = _phi_mod(qm, N, work_prec)
            for t in range(d):
                rows[t][jj] = rows[t][jj] + _mul_mod(phiq, rows[t][ii], N)
            for t in range(d):
                rows[ii][t] = rows[ii][t] - _mul_mod(qm, rows[jj][t], N)
            elementary.append((ii, jj, qm))
    info = {"iterations": steps, "variants": variants, "elementary": elementary,
            "rescales": rescales, "x_final": Xw, "slope": nu_p}
    return b2, MatNu(ctx, nu_p, rows), info


class GradedBasisState:
    """Exponent bookkeeping of the stabilization loop.

    b holds the fine grading (exponents of the N-th root of p on the
    current basis), a its coarse floor a_i = floor(b_i D / N), nu_cur the
    slope the matrix currently lives at.  The logs keep one entry per
    outer pass for the audit trail."""

    __slots__ = ("b", "a", "nu_cur", "PhiBK", "outer_steps", "inner_steps",
                 "variant_log", "pair_log")

    def __init__(self, d, nu):
        self.b = [0] * d
        self.a = [0] * d
        self.nu_cur = Fraction(nu)
        self.PhiBK = None
        self.outer_steps = 0
        self.inner_steps = 0
        self.variant_log = []
        self.pair_log = []

    def to_dict(self):
        return {"b": list(self.b), "a": list(self.a), "nu_cur": str(self.nu_cur),
                "outer_steps": self.outer_steps, "inner_steps": self.inner_steps,
                "pairs": [list(t) for t in self.pair_log],
                "variants": [[list(v) for v in log] for log in self.variant_log]}


def _stability_violation(rows, a, D, nu_prime):
    """The worst pair (i, j) violating D*v(M[i,j]) >= a[j] - a[i], or None."""
    worst = None
    d = len(rows)
    for j in range(d):
        for i in range(d):
            cap = Fraction(a[j] - a[i])
            v = _capped_val(rows[i][j], nu_prime, D, 0, cap)
            if v is None:
                continue
            margin = v - cap
            if worst is None or margin < worst[0]:
                worst = (margin, j, i)
    if worst is None:
        return None
    return worst[2], worst[1]


def iteration_frobenius(PhiBK, params, work_prec=None):
    """Stabilize the lattice under Frobenius by repeated saturation.

    Starting from the standard lattice, every violating column of the
    matrix (an image of a basis vector that leaves the current graded
    lattice) is adjoined and saturated away; each pass advances the
    working slope by c/N.  Stops when every entry satisfies the stability
    inequality D*v(M[i,j]) >= a[j] - a[i] at the target slope.  Returns
    (a, PhiBK', state); raises IterationBudgetExceeded when either the
    pass budget c_GL*d*D or the slope budget runs out, which signals that
    the stability constant was chosen too small."""
    rows = PhiBK.rows if isinstance(PhiBK, MatNu) else PhiBK
    d = len(rows)
    D, N, c = params.D, params.N, params.c
    rows = [[_as_model(entry, params.nu, N) for entry in row] for row in rows]
    ctx = rows[0][0].ctx
    state = GradedBasisState(d, params.nu)
    outer_budget = params.c_GL * d * D
    step = Fraction(c, N)
    while True:
        viol = _stability_violation(rows, state.a, D, params.nu_prime)
        if viol is None:
            break
        if state.outer_steps >= outer_budget:
            raise IterationBudgetExceeded(
                f"not stable after {outer_budget} saturation passes; "
                f"the stability constant c_GL={params.c_GL} is too small")
        if state.nu_cur + step > params.nu_prime:
            raise IterationBudgetExceeded(
                "slope budget exhausted before stability; the stability "
                "constant or the working order is too small")
        i, j = viol
        X = [rows[t][j] for t in range(d)]
        b2, mat, info = change_base(state.b, rows, (N // D) * state.a[j], X,
                                    c, N, state.nu_cur, work_prec)
        rows = [list(row) for row in mat.rows]
        state.b = b2
        state.a = [(bk * D) // N for bk in b2]
        state.nu_cur += step
        state.outer_steps += 1
        state.inner_steps += info["iterations"]
        state.variant_log.append(info["variants"])
        state.pair_log.append((i, j))
    final = MatNu(ctx, state.nu_cur, rows)
    if _stability_violation(final.rows, state.a, D, params.nu_prime) is not None:
        raise PreconditionViolated("postcondition scan failed")  # pragma: no cover
    state.PhiBK = final
    return state.a, final, state


# -- freeness repair -----------------------------------------------------------------


def liberte(a, PhiBK, D, d=None, r=None, N=None):
    """Rescale the stable graded lattice into a free module.

    The exponents a_i are only known modulo D as fractional p-powers; a
    shift t chosen by the pigeonhole gap argument aligns them so that
    every residue of -(a_i + t) mod D is either 0 or at least D/d.  Each
    basis vector is then rescaled by an honest integral power of p (the
    Euclidean quotient q_i, bumped by one when the residue is positive)
    and the slope is raised to d/D, where the rescaled module is free.
    Conjugating by diag(p^{q_i}) turns entry (i, j) into p^{q_j - q_i}
    times itself.  Returns a KisinModule carrying a height certificate
    at d*r when r is given and the certificate exists."""
    rows = PhiBK.rows if isinstance(PhiBK, MatNu) else PhiBK
    if d is None:
        d = len(rows)
    D = int(D)
    if N is None:
        N = len(rows[0][0].coeffs)
    rhos = sorted((-int(ai)) % D for ai in a)
    rhos.append(rhos[0] + D)
    t = None
    for idx in range(d):
        if Fraction(rhos[idx + 1]) >= Fraction(rhos[idx]) + Fraction(D, d):
            t = rhos[idx]
            break
    if t is None:  # pragma: no cover
        raise PreconditionViolated("no admissible shift exists; the gap argument failed")
    qs = []
    residues = []
    for ai in a:
        m = -(int(ai) + t)
        qi, ri = divmod(m, D)
        if ri > 0:
            qi += 1
        qs.append(qi)
        residues.append(ri)
    nu_second = Fraction(d, D)
    ctx = rows[0][0].ctx
    out = [[_as_model(rows[i][j].scale_p(qs[j] - qs[i]), nu_second, N)
            for j in range(d)] for i in range(d)]
    mat = MatNu(ctx, nu_second, out)
    cert = None
    r_height = 0
    if r is not None:
        r_height = int(r) * d
        cert = height_certificate(mat, r_height)
    audit = {"t": t, "q": qs, "residues": residues, "a": [int(ai) for ai in a]}
    return KisinModule(ctx, nu_second, N, r_height, mat,
                       height_certificate=cert, audit=audit)


# -- orchestration -------------------------------------------------------------------


def _min_envelope(rows):
    best = None
    for row in rows:
        for entry in row:
            env = entry.prec_envelope()
            if env is not None and (best is None or env < best):
                best = env
    return best


def run_stage2(kisin, params, r=None, work_prec=None):
    """Stabilize, repair freeness, certify, and audit precision.

    kisin is the stage-one output; params the slope parameters.  The
    returned module lives at slope d/D with a height certificate at
    d*r.  The audit records the measured precision envelopes before and
    after: the contract is that at most two digits are lost (the final
    rescaling exponents are off by at most one from the exact fractional
    scaling on each side)."""
    if r is None:
        r = kisin.r_height
    m_in = _min_envelope(kisin.PhiBK.rows)
    a, mat, state = iteration_frobenius(kisin.PhiBK, params, work_prec)
    out = liberte(a, mat, params.D, d=params.d, r=r, N=params.N)
    m_out = _min_envelope(out.PhiBK.rows)
    if m_in is None:
        contract_ok = True
    elif m_out is None:
        contract_ok = True
    else:
        contract_ok = m_out >= m_in - 2
    out.audit.update({
        "m_in": None if m_in is None else str(m_in),
        "m_out": None if m_out is None else str(m_out),
        "precision_contract_ok": contract_ok,
        "outer_iterations": state.outer_steps,
        "outer_budget": params.c_GL * params.d * params.D,
        "inner_iterations": state.inner_steps,
        "inner_budget": params.N * params.N * max(params.c, 1) * params.d,
        "final_slope": str(state.nu_cur),
        "certified": out.height_certificate is not None,
    })
    return out, state


# -- integral descent ----------------------------------------------------------------


def _all_integral(rows):
    for row in rows:
        for entry in row:
            for coeff in entry.coeffs:
                lb = coeff.val_lb()
                if lb is not math.inf and lb < 0:
                    return False
    return True


def descend_integral(PhiBK, r, N=None, cert=None, max_rounds=64, work_prec=None):
    """Conjugate a finite-height matrix down to the integral ring.

    Splits G = Y - E^r X with Y of small degree, forms P = I + X H from a
    height certificate H, and replaces G by P G phi(P)^{-1} = Y phi(P)^{-1},
    whose slope is the previous one divided by (p - p e r nu).  Iterates
    until every coefficient is certified integral; the slopes decrease
    geometrically precisely because nu < (p-1)/(p e r).  Returns (matrix
    over the integral ring in the mod-u^N model, audit dict)."""
    mat = PhiBK if isinstance(PhiBK, MatNu) else None
    rows = PhiBK.rows if mat is not None else PhiBK
    d = len(rows)
    ctx = rows[0][0].ctx
    nu_cur = Fraction(rows[0][0].nu)
    if N is None:
        N = len(rows[0][0].coeffs)
    per = ctx.p * ctx.e * int(r)
    if not nu_cur < Fraction(ctx.p - 1, per):
        raise PreconditionViolated(
            f"descent needs slope below (p-1)/(p e r) = {Fraction(ctx.p - 1, per)}")
    rows = [[_as_model(entry, nu_cur, N) for entry in row] for row in rows]
    slopes = [nu_cur]
    for rnd in range(max_rounds):
        if _all_integral(rows):
            return (MatNu(ctx, nu_cur, rows),
                    {"rounds": rnd, "slopes": [str(s) for s in slopes]})
        if rnd == 0 and cert is not None:
            H = cert
        else:
            H = height_certificate(MatNu(ctx, nu_cur, rows), r)
        if H is None:
            raise NonConvergence("no height certificate at the working precision")
        inv_nu = 1 / nu_cur - ctx.e * int(r)
        nu_x = 1 / inv_nu
        nu_next = nu_x / ctx.p
        if not nu_next < nu_cur:
            raise NonConvergence("the slope stopped decreasing")
        XP = [[None] * d for _ in range(d)]
        Y = [[None] * d for _ in range(d)]
        for i in range(d):
            for j in range(d):
                x, y = snup_decompose(rows[i][j], r)
                XP[i][j] = -_as_model(x, nu_x, N)
                Y[i][j] = _as_model(NuSeries.from_kpoly(y, nu_next, N), nu_next, N)
        Hx = [[_as_model(H.rows[i][j], nu_x, N) for j in range(d)] for i in range(d)]
        S = _mat_mul(XP, Hx, N)
        Pinv = _neumann_inverse(S, ctx, nu_x, d, N)
        phiPinv = [[_as_model(Pinv[i][j].phi(work_prec), nu_next, N)
                    for j in range(d)] for i in range(d)]
        rows = _mat_mul(Y, phiPinv, N)
        nu_cur = nu_next
        slopes.append(nu_cur)
        bound = slopes[0] * Fraction(ctx.p - per * slopes[0]) ** -(rnd + 1)
        if nu_cur > bound:  # pragma: no cover
            raise NonConvergence("the slope sequence exceeded its closed-form bound")
    raise NonConvergence("entries did not become integral within the round budget")


def _mat_identity(ctx, nu, d, N):
    return [[NuSeries.one(ctx, nu, N) if i == j else NuSeries.zero(ctx, nu, N)
             for j in range(d)] for i in range(d)]


def _mat_add(A, B):
    return [[A[i][j] + B[i][j] for j in range(len(A))] for i in range(len(A))]


def _mat_mul(A, B, N):
    d = len(A)
    out = []
    for i in range(d):
        row = []
        for j in range(d):
            acc = None
            for k in range(d):
                term = _mul_mod(A[i][k], B[k][j], N)
                acc = term if acc is None else acc + term
            row.append(acc)
        out.append(row)
    return out


def _neumann_inverse(S, ctx, nu, d, N):
    """(I + S)^{-1} when S has positive u-adic order: the alternating
    power sum terminates in the quotient model."""
    acc = _mat_identity(ctx, nu, d, N)
    term = _mat_identity(ctx, nu, d, N)
    for _ in range(N + 1):
        term = _mat_mul(term, S, N)
        term = [[-entry for entry in row] for row in term]
        if all(entry.is_zero_at_prec() for row in term for entry in row):
            return acc
        acc = _mat_add(acc, term)
    raise NonConvergence("the correction matrix is not topologically nilpotent")
