"""Truncated power series with slope-weighted valuation bookkeeping.

A series f = sum a_i u^i is stored by its known head (a_0 .. a_{N-1}, each
an UnramElem with its own absolute precision) together with a slope nu >= 0
and a tail guarantee g: val(a_i) >= g - nu*i for every i >= N (g = None
means the tail is exactly zero, i.e. f is a polynomial).  The weighted
valuation v_nu(f) = min_i (val(a_i) + nu*i) is additive on products, as is
the Weierstrass degree (the smallest index attaining v_nu); both are
certified from the representation or refused (NotCertifiable), never
guessed.

Multiplication packs each residue-ring component of the coefficient vector
into a single big integer (Kronecker substitution), so a length-N product
costs one machine-level big-int multiply per component pair instead of N^2
element operations.  Precision propagates by the envelope rule: writing
M(f) = min_i (prec_i + nu*i), the unknown parts of a product lie in
p^X S_nu with X = min(M(f) + v_nu(g), M(g) + v_nu(f)), so coefficient k of
the product is known mod p^ceil(X - nu*k).
"""

import math
from fractions import Fraction

from .errors import (
    NonConvergence,
    NotCertifiable,
    PreconditionViolated,
    ValidationError,
)
from .padic import KPoly


def _min_opt(*vals):
    """Minimum treating None as +infinity; None if all None."""
    finite = [v for v in vals if v is not None]
    return min(finite) if finite else None


def _ceil_int(x):
    return int(math.ceil(x))


class NuSeries:
    """Truncated series over O_{K0}[1/p] with slope-nu tail guarantee."""

    __slots__ = ("ctx", "nu", "coeffs", "g", "_floor")

    def __init__(self, ctx, nu, coeffs, g):
        self.ctx = ctx
        self.nu = Fraction(nu)
        if self.nu < 0:
            raise ValidationError("slope nu must be >= 0")
        self.coeffs = tuple(coeffs)
        self.g = None if g is None else Fraction(g)
        self._floor = None

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_kpoly(cls, kp, nu, n=None):
        """Wrap a polynomial as a series; the tail beyond its degree is
        exactly zero.  Truncating below the degree folds the dropped
        coefficients into the guarantee."""
        coeffs = list(kp.coeffs)
        nu = Fraction(nu)
        if n is None or n >= len(coeffs):
            pad = 0 if n is None else n - len(coeffs)
            return cls(kp.ctx, nu, coeffs + [kp.ctx.zero()] * pad, None)
        dropped = coeffs[n:]
        g = None
        for j, c in enumerate(dropped):
            lb = c.val_lb()
            if lb is not math.inf:
                g = _min_opt(g, Fraction(lb) + nu * (n + j))
        return cls(kp.ctx, nu, coeffs[:n], g)

    @classmethod
    def zero(cls, ctx, nu, n):
        return cls(ctx, nu, [ctx.zero()] * n, None)

    @classmethod
    def one(cls, ctx, nu, n):
        return cls(ctx, nu, [ctx.one()] + [ctx.zero()] * (n - 1), None)

    # -- structure -----------------------------------------------------------

    @property
    def n_trunc(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        raise IndexError(f"coefficient {i} is beyond the truncation order")

    def vnu_floor(self):
        """Certified lower bound for v_nu(f), from coefficient lower bounds
        and the tail guarantee.  +inf only for the exact zero series."""
        if self._floor is None:
            best = math.inf if self.g is None else self.g
            for i, c in enumerate(self.coeffs):
                lb = c.val_lb()
                if lb is not math.inf:
                    cand = Fraction(lb) + self.nu * i
                    if cand < best:
                        best = cand
            self._floor = best
        return self._floor

    def head_floor(self):
        """Certified lower bound for the v_nu of the known head alone,
        ignoring the tail guarantee.  Residual certificates use this:
        window coefficients of a quotient or inverse depend only on
        window coefficients of the residual."""
        best = math.inf
        for i, c in enumerate(self.coeffs):
            lb = c.val_lb()
            if lb is not math.inf:
                cand = Fraction(lb) + self.nu * i
                if cand < best:
                    best = cand
        return best

    def prec_envelope(self):
        """M(f) = min_i (prec_i + nu*i); None when every coefficient is
        exact (infinite envelope)."""
        best = None
        for i, c in enumerate(self.coeffs):
            if c.prec is not None:
                cand = Fraction(c.prec) + self.nu * i
                best = cand if best is None or cand < best else best
        return best

    def _prefix_envelope(self):
        """prefix[k] = min over i <= k of prec_i + nu*i (None: all exact
        so far).  Lets products give low output indices honest labels even
        when high slots carry weak precision."""
        out = []
        cur = None
        for i, c in enumerate(self.coeffs):
            if c.prec is not None:
                cand = Fraction(c.prec) + self.nu * i
                cur = cand if cur is None or cand < cur else cur
            out.append(cur)
        return out

    def is_zero_at_prec(self):
        return all(not any(c.unit) for c in self.coeffs)

    def is_polynomial(self):
        return self.g is None

    # -- certified invariants --------------------------------------------------

    def gauss_val(self):
        """The exact weighted valuation v_nu(f) = min_i (val(a_i) + nu*i).

        Certified: some readable coefficient attains the minimum, every
        unreadable coefficient's precision bound sits at or above it, and
        the tail guarantee sits at or above it.  Raises NotCertifiable
        otherwise."""
        nu = self.nu
        best = None
        for i, c in enumerate(self.coeffs):
            if c.is_readable():
                cand = Fraction(c.val()) + nu * i
                if best is None or cand < best:
                    best = cand
        if best is None:
            raise NotCertifiable("no readable coefficient; series is zero at precision")
        for i, c in enumerate(self.coeffs):
            if not c.is_readable() and c.prec is not None:
                if Fraction(c.prec) + nu * i < best:
                    raise NotCertifiable(
                        f"coefficient {i} is unreadable below the candidate valuation")
        if self.g is not None and self.g < best:
            raise NotCertifiable("tail guarantee lies below the candidate valuation")
        return best

    def weierstrass_degree(self):
        """Smallest index attaining v_nu(f); certified or NotCertifiable."""
        v = self.gauss_val()
        nu = self.nu
        for i, c in enumerate(self.coeffs):
            if c.is_readable() and Fraction(c.val()) + nu * i == v:
                return i
            if not c.is_readable() and c.prec is not None:
                if Fraction(c.prec) + nu * i == v:
                    raise NotCertifiable(
                        f"coefficient {i} could attain the valuation but is unreadable")
        raise NotCertifiable("no attaining coefficient found")  # pragma: no cover

    # -- linear operations -----------------------------------------------------

    def _check_compat(self, other):
        if self.ctx is not other.ctx or self.nu != other.nu:
            raise ValidationError("series contexts or slopes differ")

    def __add__(self, other):
        self._check_compat(other)
        n = min(len(self.coeffs), len(other.coeffs))
        g = _min_opt(self.g, other.g)
        for src in (self, other):
            for i in range(n, len(src.coeffs)):
                lb = src.coeffs[i].val_lb()
                if lb is not math.inf:
                    g = _min_opt(g, Fraction(lb) + self.nu * i)
        coeffs = [a + b for a, b in zip(self.coeffs, other.coeffs)]
        return NuSeries(self.ctx, self.nu, coeffs, g)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return NuSeries(self.ctx, self.nu, [-c for c in self.coeffs], self.g)

    def scale(self, c):
        """Multiply by a scalar from K0.  The tail guarantee shifts by the
        scalar's valuation bound (precision of the scalar never undercuts
        it, so c.val_lb() is the right shift)."""
        if c.is_exact_zero():
            return NuSeries(self.ctx, self.nu, [self.ctx.zero()] * len(self.coeffs), None)
        g = None if self.g is None else self.g + Fraction(c.val_lb())
        return NuSeries(self.ctx, self.nu, [c * a for a in self.coeffs], g)

    def scale_p(self, t):
        """Multiply by p^t exactly."""
        g = None if self.g is None else self.g + t
        return NuSeries(self.ctx, self.nu, [a.scale_p(t) for a in self.coeffs], g)

    def shift_u(self, i):
        """Multiply by u^i (the truncation order grows by i)."""
        g = None if self.g is None else self.g + self.nu * i
        return NuSeries(self.ctx, self.nu,
                        [self.ctx.zero()] * i + list(self.coeffs), g)

    def truncate(self, n):
        if n >= len(self.coeffs):
            return self
        g = self.g
        for i in range(n, len(self.coeffs)):
            lb = self.coeffs[i].val_lb()
            if lb is not math.inf:
                g = _min_opt(g, Fraction(lb) + self.nu * i)
        return NuSeries(self.ctx, self.nu, self.coeffs[:n], g)

    def pad_to(self, n):
        """Extend the known head to length n.  Tail coefficients become
        zero-at-precision slots carrying what the guarantee certifies
        (exactly zero when the tail is exactly zero)."""
        if n <= len(self.coeffs):
            return self
        extra = []
        for i in range(len(self.coeffs), n):
            if self.g is None:
                extra.append(self.ctx.zero())
            else:
                extra.append(self.ctx.from_int(0, prec=_ceil_int(self.g - self.nu * i)))
        return NuSeries(self.ctx, self.nu, list(self.coeffs) + extra, self.g)

    def reslope(self, nu_new):
        """Reinterpret at a steeper slope nu_new >= nu; the tail guarantee
        tightens accordingly."""
        nu_new = Fraction(nu_new)
        if nu_new == self.nu:
            return self
        if nu_new < self.nu and self.g is not None:
            raise ValidationError("cannot lower the slope of a non-polynomial series")
        g = None if self.g is None else self.g + (nu_new - self.nu) * len(self.coeffs)
        return NuSeries(self.ctx, nu_new, self.coeffs, g)

    def reduce(self, prec):
        return NuSeries(self.ctx, self.nu, [c.reduce(prec) for c in self.coeffs],
                        _min_opt(self.g, Fraction(prec)))

    def map_coeffs(self, fn):
        return NuSeries(self.ctx, self.nu, [fn(c) for c in self.coeffs], self.g)

    def as_kpoly(self):
        """The known head as a polynomial (drops the tail bound)."""
        return KPoly(self.ctx, list(self.coeffs))

    # -- multiplication ---------------------------------------------------------

    def __mul__(self, other):
        return self.mul(other)

    def mul(self, other, n_out=None):
        """Product with envelope precision propagation.

        The default output truncation is min(N1, N2), except that a true
        polynomial factor does not cap its partner.  Any n_out is sound:
        contributions from unknown tails are absorbed into the per-index
        precision label of each output coefficient, and indices past the
        computable head are pure tail."""
        self._check_compat(other)
        ctx = self.ctx
        n1, n2 = len(self.coeffs), len(other.coeffs)
        if n1 == 0 or n2 == 0:
            return NuSeries.zero(ctx, self.nu, 0)
        full = n1 + n2 - 1
        if n_out is None:
            n_out = min(n1 if self.g is not None else full,
                        n2 if other.g is not None else full,
                        full)

        vf, vg = self.vnu_floor(), other.vnu_floor()
        if vf is math.inf or vg is math.inf:
            return NuSeries.zero(ctx, self.nu, n_out)
        pre_f = self._prefix_envelope()
        pre_g = other._prefix_envelope()
        # beyond a factor's known head its unknown tail contributes to the
        # output coefficient, bounded by that factor's tail guarantee
        tail_f = self.g + vg if self.g is not None else None
        tail_g = other.g + vf if other.g is not None else None

        def x_at(k):
            """Sound precision level for output index k.  A pair a_i*b_j
            with i+j = k only sees slots at index <= k, so the prefix
            minima apply, not the global envelope."""
            c = []
            a = pre_f[min(k, n1 - 1)]
            b = pre_g[min(k, n2 - 1)]
            if a is not None:
                c.append(a + vg)
            if b is not None:
                c.append(b + vf)
            if tail_f is not None and k >= n1:
                c.append(tail_f)
            if tail_g is not None and k >= n2:
                c.append(tail_g)
            return min(c) if c else None

        def tail_cap(k):
            c = []
            if tail_f is not None and k >= n1:
                c.append(tail_f)
            if tail_g is not None and k >= n2:
                c.append(tail_g)
            return min(c) if c else None

        g_cands = []
        if self.g is not None:
            g_cands.append(self.g + vg)
        if other.g is not None:
            g_cands.append(other.g + vf)
        if (n1 - 1) + (n2 - 1) >= n_out:
            g_cands.append(vf + vg)
        g_out = min(g_cands) if g_cands else None

        xs = [x_at(k) for k in range(n_out)]
        if all(x is not None for x in xs):
            coeffs = self._packed_mul(other, n_out, xs)
        else:
            # some output coefficient is exact: compute pairwise so the
            # per-pair precision rule applies, then cap by tail bounds
            coeffs = self._schoolbook(other, n_out)
            out = []
            for k, c in enumerate(coeffs):
                cap = tail_cap(k)
                out.append(c if cap is None else c.reduce(_ceil_int(cap - self.nu * k)))
            coeffs = out
        return NuSeries(ctx, self.nu, coeffs, g_out)

    def _schoolbook(self, other, n_out):
        ctx = self.ctx
        out = [ctx.zero()] * n_out
        for i, a in enumerate(self.coeffs):
            if a.is_exact_zero():
                continue
            jmax = min(len(other.coeffs), n_out - i)
            for j in range(jmax):
                b = other.coeffs[j]
                if b.is_exact_zero():
                    continue
                out[i + j] = out[i + j] + a * b
        return out

    def _packed_mul(self, other, n_out, xs):
        ctx = self.ctx
        nu = self.nu
        prec_out = [_ceil_int(xs[k] - nu * k) for k in range(n_out)]
        if prec_out and max(prec_out) <= 0:
            return [ctx.from_int(0, prec=pk) for pk in prec_out]

        def min_coeff_val(s):
            lbs = [c.val_lb() for c in s.coeffs if c.val_lb() is not math.inf]
            return min(lbs) if lbs else 0

        sf = max(0, -min_coeff_val(self))
        sg = max(0, -min_coeff_val(other))
        m_work = max(prec_out) + sf + sg
        convs = _component_convolutions(ctx, self.coeffs, other.coeffs, sf, sg,
                                        m_work, n_out)
        pm = ctx.ppow(m_work)
        shift = -(sf + sg)
        out = []
        for k in range(n_out):
            unit = [c % pm for c in convs[k]]
            out.append(ctx.make(shift, unit, prec_out[k]))
        return out

    # -- Frobenius ----------------------------------------------------------------

    def phi(self, work_prec=None):
        """The endomorphism sum a_i u^i -> sum sigma(a_i) u^{p i}, mapping
        slope nu to slope nu/p.  The output truncation is p*(N-1)+1: every
        intermediate index is exactly zero, so nothing is lost.  Exact
        coefficients with f > 1 need work_prec for their sigma image."""
        ctx = self.ctx
        p = ctx.p
        n_new = p * (len(self.coeffs) - 1) + 1 if self.coeffs else 0
        coeffs = [ctx.zero()] * n_new
        for i, c in enumerate(self.coeffs):
            if c.is_exact_zero():
                continue
            if c.prec is None and ctx.f > 1:
                coeffs[p * i] = c.sigma(1, prec=work_prec)
            else:
                coeffs[p * i] = c.sigma(1)
        return NuSeries(ctx, self.nu / p, coeffs, self.g)

    # -- io -------------------------------------------------------------------------

    def to_text(self):
        gtxt = "inf" if self.g is None else str(self.g)
        body = ", ".join(f"({c.to_text()})" for c in self.coeffs)
        return f"[{gtxt}; {body}] @ nu={self.nu}"

    def __repr__(self):
        if len(self.coeffs) > 8:
            head = ", ".join(f"({c.to_text()})" for c in self.coeffs[:4])
            return f"NuSeries[{head}, ... {len(self.coeffs)} coeffs] @ nu={self.nu}"
        return self.to_text()


def _component_convolutions(ctx, acoeffs, bcoeffs, sf, sg, m_work, n_out):
    """Coefficient convolutions of two UnramElem vectors, reduced mod F,
    via Kronecker-packed big-int multiplication.  Returns, for each output
    index k < n_out, the length-f component list of p^{sf+sg} (a*b)_k mod
    p^m_work."""
    f = ctx.f
    n1, n2 = len(acoeffs), len(bcoeffs)
    pm = ctx.ppow(m_work)
    val_bits = pm.bit_length()
    slot_bits = 2 * val_bits + (min(n1, n2)).bit_length() + 1
    slot_bytes = (slot_bits + 7) // 8

    def pack(coeffs, shift, comp):
        buf = bytearray(len(coeffs) * slot_bytes)
        for i, c in enumerate(coeffs):
            if not any(c.unit):
                continue
            rep = c.lift_shift(shift, m_work)[comp]
            if rep:
                buf[i * slot_bytes:(i + 1) * slot_bytes] = rep.to_bytes(slot_bytes, "little")
        return int.from_bytes(buf, "little")

    packed_a = [pack(acoeffs, sf, s) for s in range(f)]
    packed_b = [pack(bcoeffs, sg, t) for t in range(f)]

    if f == 1:
        prod = packed_a[0] * packed_b[0]
        conv = _unpack(prod, slot_bytes, n_out)
        return [[c] for c in conv]

    red = _reduction_rows(ctx)
    acc = [[0] * f for _ in range(n_out)]
    for s in range(f):
        if packed_a[s] == 0:
            continue
        for t in range(f):
            if packed_b[t] == 0:
                continue
            conv = _unpack(packed_a[s] * packed_b[t], slot_bytes, n_out)
            row = red[s + t]
            for k, v in enumerate(conv):
                if v:
                    ak = acc[k]
                    for comp in range(f):
                        rc = row[comp]
                        if rc:
                            ak[comp] += v * rc
    return acc


def _unpack(n, slot_bytes, count):
    nbytes = max((n.bit_length() + 7) // 8, count * slot_bytes)
    raw = n.to_bytes(nbytes, "little")
    return [int.from_bytes(raw[i * slot_bytes:(i + 1) * slot_bytes], "little")
            for i in range(count)]


def _reduction_rows(ctx):
    """Coefficient vectors of X^d mod F for d = 0 .. 2f-2."""
    f = ctx.f
    rows = []
    for d in range(2 * f - 1):
        if d < f:
            rows.append(tuple(1 if i == d else 0 for i in range(f)))
        else:
            prev = rows[d - 1]
            shifted = (0,) + prev[:-1]
            lead = prev[-1]
            rows.append(tuple(shifted[i] - lead * ctx.F[i] for i in range(f)))
    return rows


# -- named operations (module-level API) -------------------------------------------


def gauss_val(fseries):
    return fseries.gauss_val()


def weierstrass_degree(fseries):
    return fseries.weierstrass_degree()


def _exact_rep(ctx, c):
    """The stored representative of c as a label-free element."""
    if not any(c.unit):
        return ctx.zero()
    return ctx.make(c.k, list(c.unit), None)


def _lift_exact(series):
    """Replace every coefficient by its bare representative (labels and
    tail bound dropped); the gap to the true element stays within the
    labels, which is what the a-posteriori relabeling accounts for."""
    ctx = series.ctx
    return NuSeries(ctx, series.nu,
                    [_exact_rep(ctx, c) for c in series.coeffs], None)


def _clamp(series, level, pad=2):
    """Reduce representatives mod the working modulus p^(level - nu*i + pad).

    Keeps integer sizes bounded during an iteration.  Clamping is a ring
    map on representatives, so value floors read off the clamped data
    certify the unclamped ones at any level below the modulus."""
    ctx = series.ctx
    out = []
    for i, c in enumerate(series.coeffs):
        m = _ceil_int(level - series.nu * i) + pad
        out.append(_exact_rep(ctx, c.reduce(m)))
    return NuSeries(ctx, series.nu, out, None)


def _relabel(series, level, g):
    """Cap coefficient i at absolute precision ceil(level - nu*i) and set
    the tail bound; used to state an a-posteriori accuracy claim."""
    out = [c.reduce(_ceil_int(level - series.nu * i))
           for i, c in enumerate(series.coeffs)]
    return NuSeries(series.ctx, series.nu, out, g)


def _one_series(ctx, nu, n, value=1):
    return NuSeries(ctx, nu, [ctx.from_int(value)] + [ctx.zero()] * (n - 1), None)


def unit_inverse(useries, work_prec=None, n_out=None):
    """Inverse of a unit of S_nu (v_nu attained at the constant term).

    Newton doubling (V <- V(2 - UV)) runs on bare representatives at a
    fixed working modulus; the output is labeled a posteriori.  An input
    known at level X = min(envelope, tail bound) pins its inverse down at
    level X - 2v where v = v_nu(U), the sharp rule for reciprocals, and
    the claim is certified by an exact residual check
    v_nu(U*V - 1) >= X - v before the labels are written.  An all-exact
    input needs work_prec to supply the target level X."""
    ctx = useries.ctx
    nu = useries.nu
    n = len(useries.coeffs)
    if n == 0 or not useries.coeffs[0].is_readable():
        raise DivisionByIndistinguishableZero(
            "constant term is indistinguishable from zero")
    u0 = useries.coeffs[0]
    v = Fraction(u0.val())
    for i in range(1, n):
        lb = useries.coeffs[i].val_lb()
        if lb is not math.inf and Fraction(lb) + nu * i < v:
            raise NotCertifiable(
                "cannot certify the unit property at this precision")
    if useries.g is not None and useries.g < v:
        raise NotCertifiable(
            "cannot certify the unit property: tail bound below v_nu")
    cands = [c for c in (useries.prec_envelope(), useries.g) if c is not None]
    if work_prec is not None:
        cands.append(Fraction(work_prec))
    if not cands:
        raise PreconditionViolated(
            "an all-exact input needs an explicit work_prec")
    X = min(cands)
    level = X - 2 * v
    target = X - v
    if n_out is None:
        n_out = n
    u_ex = _lift_exact(useries)
    if len(u_ex.coeffs) > n_out:
        u_ex = u_ex.truncate(n_out)
    elif len(u_ex.coeffs) < n_out:
        u_ex = NuSeries(ctx, nu, list(u_ex.coeffs)
                        + [ctx.zero()] * (n_out - len(u_ex.coeffs)), None)
    v0 = _exact_rep(ctx, u0.inv(prec=_ceil_int(level) + 2))
    vser = NuSeries(ctx, nu, [v0], None)
    length = 1
    two = _one_series(ctx, nu, n_out, value=2)
    one = _one_series(ctx, nu, n_out)
    while length < n_out:
        length = min(2 * length, n_out)
        ut = u_ex.truncate(length)
        uv = ut.mul(vser, n_out=length)
        vser = _clamp(vser.mul(two.truncate(length) - uv, n_out=length), level)
    for _ in range(12):
        uv = u_ex.mul(vser, n_out=n_out)
        fl = (uv - one).head_floor()
        if fl is math.inf or fl >= target:
            return _relabel(vser, level, -v)
        vser = _clamp(vser.mul(two - uv, n_out=n_out), level)
    raise NonConvergence("unit inverse did not reach its certified level")


def weierstrass_prep(fseries, max_iter=None):
    """Factor f = P * U with P a monic distinguished polynomial of degree
    deg_nu(f) and U a unit of S_nu.

    Returns (P, U, V) with P a KPoly, U the unit as a series, and V the
    certified inverse of U (callers doing Euclidean division need it).

    The Hensel scheme on the factorization runs on bare representatives
    at a fixed working modulus and stops when the residual f - P*U has
    certified v_nu at least X = min(envelope(f), tail bound of f); labels
    are then assigned a posteriori from the perturbation rule.  Writing
    v = v_nu(f) and comparing two factorizations of inputs that agree to
    level X: the difference equation dP*U + P*dU = df inverts with
    v_nu(dP) >= X - v(U) and v_nu(dU) >= X - nu*s, because division by
    the distinguished P preserves v_nu-floors up to nu*s and division by
    the unit U costs v(U) = v - nu*s.  An all-exact input gets a default
    target level in place of X."""
    ctx = fseries.ctx
    nu = fseries.nu
    s = fseries.weierstrass_degree()
    n = len(fseries.coeffs)
    vF = Fraction(fseries.gauss_val())
    cands = [c for c in (fseries.prec_envelope(), fseries.g) if c is not None]
    X = min(cands) if cands else Fraction(_ceil_int(2 * nu * max(n, 4)) + 8)
    vU = vF - nu * s
    lev_P = X - vU
    lev_U = X - nu * s
    lev_V = lev_U - 2 * vU

    if s == 0:
        work = None if cands else X
        return (KPoly.one(ctx), fseries,
                unit_inverse(fseries, work_prec=work))

    f_ex = _lift_exact(fseries)
    a_s = f_ex.coeffs[s]
    as_inv = a_s.inv(prec=_ceil_int(lev_P) + 2)
    P = KPoly(ctx, [_exact_rep(ctx, f_ex.coeffs[i] * as_inv) for i in range(s)]
              + [ctx.one()])
    nu_len = n - s
    U = NuSeries(ctx, nu, list(f_ex.coeffs[s:]), None)
    V = _newton_inverse(U, lev_V, nu_len)

    if max_iter is None:
        denom = nu.denominator
        span = abs(_ceil_int(X)) + abs(_ceil_int(vF)) + 8
        max_iter = 2 * (max(1, denom * span)).bit_length() + 8

    two = _one_series(ctx, nu, nu_len, value=2)
    done = False
    for _ in range(max_iter):
        eps = f_ex - NuSeries.from_kpoly(P, nu).mul(U, n_out=n)
        fl = eps.head_floor()
        if fl is math.inf or fl >= X:
            done = True
            break
        eta = eps.mul(V, n_out=n)
        q_eta, r_eta = poly_divmod(eta, P)
        P = KPoly(ctx, [_exact_rep(ctx, c.reduce(_ceil_int(lev_P) + 2))
                        for c in (P + r_eta).coeffs])
        U = _clamp(U + U.mul(q_eta, n_out=nu_len), lev_U)
        uv = U.mul(V, n_out=nu_len)
        V = _clamp(V.mul(two - uv, n_out=nu_len), lev_V)
    if not done:
        raise NonConvergence("Weierstrass preparation did not stabilize")

    # the relabeling below quotes the perturbation rule, which needs the
    # computed factors to genuinely be distinguished resp. a unit
    for i in range(s):
        c = P.coeffs[i]
        if any(c.unit) and Fraction(c.val()) + nu * i < nu * s:
            raise NonConvergence("computed factor is not distinguished")
    u0 = U.coeffs[0]
    if not any(u0.unit) or Fraction(u0.val()) != vU:
        raise NonConvergence("computed cofactor is not a unit")
    for i in range(1, nu_len):
        c = U.coeffs[i]
        if any(c.unit) and Fraction(c.val()) + nu * i < vU:
            raise NonConvergence("computed cofactor is not a unit")

    one = _one_series(ctx, nu, nu_len)
    for _ in range(12):
        uv = U.mul(V, n_out=nu_len)
        fl = (uv - one).head_floor()
        if fl is math.inf or fl >= lev_U - vU:
            break
        V = _clamp(V.mul(two - uv, n_out=nu_len), lev_V)
    else:
        raise NonConvergence("unit inverse did not reach its certified level")

    P_lab = KPoly(ctx, [c.reduce(_ceil_int(lev_P - nu * i))
                        for i, c in enumerate(P.coeffs[:-1])] + [ctx.one()])
    U_lab = _relabel(U, lev_U, vU)
    V_lab = _relabel(V, lev_V, -vU)
    return P_lab, U_lab, V_lab


def _newton_inverse(useries, level, n_out):
    """Newton doubling inverse of a bare-representative unit, clamped at
    the given level; certification is the caller's responsibility."""
    ctx = useries.ctx
    nu = useries.nu
    u0 = useries.coeffs[0]
    v0 = _exact_rep(ctx, u0.inv(prec=_ceil_int(level) + 2))
    vser = NuSeries(ctx, nu, [v0], None)
    length = 1
    two = _one_series(ctx, nu, n_out, value=2)
    while length < n_out:
        length = min(2 * length, n_out)
        ut = useries.truncate(length)
        uv = ut.mul(vser, n_out=length)
        vser = _clamp(vser.mul(two.truncate(length) - uv, n_out=length), level)
    return vser


def poly_divmod(gseries, P):
    """Divide a series by a monic polynomial P of degree s: g = P*q + r
    with r a polynomial of degree < s.  Plain long division from the top;
    the per-coefficient precision flows through the subtraction cascade."""
    ctx = gseries.ctx
    s = P.degree()
    if s < 0 or not P.coeffs[-1].is_one():
        raise ValidationError("divisor must be monic")
    if s == 0:
        return gseries, KPoly.zero(ctx)
    n = len(gseries.coeffs)
    r = list(gseries.coeffs)
    nq = max(n - s, 0)
    q = [ctx.zero()] * nq
    for top in range(n - 1, s - 1, -1):
        c = r[top]
        if c.is_exact_zero():
            continue
        q[top - s] = c
        for i in range(s):
            r[top - s + i] = r[top - s + i] - c * P.coeffs[i]
        r[top] = ctx.zero()
    gq = None if gseries.g is None else gseries.g - gseries.nu * s
    q_series = NuSeries(ctx, gseries.nu, q, gq)
    return q_series, KPoly(ctx, r[:s])


def euclid_div(fseries, gseries, require_integral=True):
    """Euclidean division in S_nu: write g = f*q + r with r a polynomial of
    degree < deg_nu(f).  Precondition: v_nu(g) >= v_nu(f) (checked when
    both sides are certifiable), unless require_integral is False, which
    admits quotients of negative weighted valuation; the larger ring of
    series with coefficients merely bounded below is still Euclidean for
    the same stathme.  Returns (q, r) with r a KPoly."""
    if require_integral:
        try:
            vf = fseries.gauss_val()
            vg = gseries.gauss_val()
            if vg < vf:
                raise PreconditionViolated(
                    f"v_nu(g) = {vg} < v_nu(f) = {vf}: quotient leaves S_nu")
        except NotCertifiable:
            pass
    n = max(len(fseries.coeffs), len(gseries.coeffs))
    P, _U, V = weierstrass_prep(fseries.pad_to(n))
    q_poly, r = poly_divmod(gseries, P)
    q = q_poly * V
    return q, r


def phi(fseries, work_prec=None):
    return fseries.phi(work_prec)


def snup_decompose(gseries, r):
    """Split g in S_nu as g = E^r * x + y with y a polynomial of u-degree
    < 1/nu and x in S_nu' where 1/nu' = 1/nu - e*r.

    Iterative: split off the head below index 1/nu, reduce the rest using
    u^{er} = E^r + p*F_E, and recurse on the p*F_E part, whose weighted
    valuation rises each round; stops when the residue is zero at working
    precision."""
    ctx = gseries.ctx
    nu = gseries.nu
    if nu <= 0:
        raise PreconditionViolated("snup decomposition needs nu > 0")
    er = ctx.e * r
    inv_nu = 1 / nu
    if er >= inv_nu:
        raise PreconditionViolated("need e*r < 1/nu for the target slope to exist")
    nu_prime = 1 / (inv_nu - er)
    y_cut = _ceil_int(inv_nu)

    # u^{er} = E^r + p*F_E with F_E an exact integral polynomial, so the
    # series below is p*F_E itself
    e_pow = ctx.E_power(r)
    u_er = KPoly(ctx, [ctx.zero()] * er + [ctx.one()])
    pf_e = NuSeries.from_kpoly(u_er - e_pow, nu)

    n = len(gseries.coeffs)
    x_acc = NuSeries.zero(ctx, nu, n)
    y_acc = KPoly.zero(ctx)
    cur = gseries

    env = gseries.prec_envelope()
    vfloor = gseries.vnu_floor()
    if env is None:
        budget = 4 * (ctx.p - 1) * (n + 8)
    else:
        budget = (ctx.p - 1) * (abs(_ceil_int(env)) + abs(_ceil_int(vfloor)) + 8) + 16
    for _ in range(budget):
        if cur.is_zero_at_prec():
            break
        head = list(cur.coeffs[:y_cut])
        y_acc = y_acc + KPoly(ctx, head)
        tail_coeffs = list(cur.coeffs[y_cut:])
        g_step = None if cur.g is None else cur.g - nu * er
        x_step = NuSeries(ctx, nu, [ctx.zero()] * (y_cut - er) + tail_coeffs, g_step)
        x_acc = x_acc + x_step.pad_to(n)
        cur = pf_e.mul(x_step, n_out=n)
    else:
        raise NonConvergence("snup decomposition did not terminate in budget")
    return x_acc.reslope(nu_prime), y_acc


# -- Newton polygons -----------------------------------------------------------------


class NewtonPolygon:
    """Lower convex hull of (i, val(a_i)) for the readable coefficients,
    with certification against unreadable slots and the tail bound.

    Only the sides of slope < -nu are finite data of the series; those are
    the ones exposed with multiplicities."""

    def __init__(self, fseries):
        self.nu = fseries.nu
        self.g = fseries.g
        self.n_trunc = len(fseries.coeffs)
        pts = []
        self._lb_pts = []
        for i, c in enumerate(fseries.coeffs):
            if c.is_readable():
                pts.append((Fraction(i), Fraction(c.val())))
            elif c.prec is not None:
                self._lb_pts.append((Fraction(i), Fraction(c.prec)))
        self.points = pts
        self.vertices = _lower_hull(pts)

    def _hull_height(self, x):
        """Ordinate of the hull at abscissa x (+inf outside the span)."""
        vs = self.vertices
        if not vs or x < vs[0][0]:
            return math.inf
        if x >= vs[-1][0]:
            # beyond the last vertex the hull is only bounded by the tail
            return None
        for (x0, y0), (x1, y1) in zip(vs, vs[1:]):
            if x0 <= x <= x1:
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        return None  # pragma: no cover

    def sides(self):
        """All hull sides as (slope, length) pairs, steepest first."""
        out = []
        for (x0, y0), (x1, y1) in zip(self.vertices, self.vertices[1:]):
            out.append(((y1 - y0) / (x1 - x0), x1 - x0))
        return out

    def finite_slopes(self):
        """Certified (slope, multiplicity) pairs for slopes < -nu.

        Certification: every unreadable coefficient's precision bound and
        the first tail point must lie on or above the hull sides in
        question (each extended to the right, where tail points only gain
        clearance)."""
        steep = [(m, l) for (m, l) in self.sides() if m < -self.nu]
        if not steep:
            return []
        for (xi, yi) in self._lb_pts:
            h = self._hull_height(xi)
            if h is not None and h is not math.inf and yi < h:
                raise NotCertifiable(
                    f"unreadable coefficient at index {xi} below the hull")
        checks = []
        x_cursor = self.vertices[0][0]
        for (m, l) in self.sides():
            if m < -self.nu:
                checks.append((x_cursor, m))
            x_cursor += l
        for (x0, m) in checks:
            y0 = self._hull_height(x0)
            tail_x = Fraction(self.n_trunc)
            tail_y = None if self.g is None else self.g - self.nu * tail_x
            if tail_y is not None and tail_y < y0 + m * (tail_x - x0):
                raise NotCertifiable("tail bound cuts below a steep hull side")
            for (xi, yi) in self._lb_pts:
                if yi < y0 + m * (xi - x0):
                    raise NotCertifiable(
                        f"unreadable coefficient at index {xi} below an extended side")
        return steep

    def multiplicity_at(self, mu):
        """Abscissa length of the side of slope exactly mu (slopes < -nu
        only); 0 when no side has that slope."""
        mu = Fraction(mu)
        if mu >= -self.nu:
            raise NotCertifiable(f"slope {mu} >= -nu is not certified data")
        for (m, l) in self.finite_slopes():
            if m == mu:
                return l
        return Fraction(0)


def _lower_hull(pts):
    """Andrew's monotone chain, lower hull only; pts sorted by abscissa."""
    pts = sorted(pts)
    hull = []
    for pt in pts:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (y1 - y0) * (pt[0] - x0) >= (pt[1] - y0) * (x1 - x0):
                hull.pop()
            else:
                break
        hull.append(pt)
    return hull


def newton_polygon(fseries):
    return NewtonPolygon(fseries)
