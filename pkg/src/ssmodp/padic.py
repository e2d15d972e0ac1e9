"""Exact arithmetic over an unramified p-adic coefficient ring and its
Eisenstein extension, with per-element absolute precision.

The base field K0 is the unramified extension of Q_p of degree f, presented
as Q_p[X]/(F) for a monic F irreducible mod p.  Elements carry a val-unit
split: x = p^k * unit where the unit is an integer polynomial of degree < f
with content coprime to p, reduced mod p^(prec - k) when the absolute
precision prec is finite.  With this representation the valuation of every
distinguishable-from-zero element is read off exactly, and precision rules
for products and inverses are sharp rather than heuristic.

The totally ramified extension K = K0[u]/(E) for an Eisenstein E of degree
e is handled by KPoly (polynomials over K0 with per-coefficient precision)
and RamElem (K-elements as length-e coefficient vectors).  val(p) = 1, so
val takes values in (1/e)Z on K.
"""

import math
import re
from fractions import Fraction

from . import gfp
from .errors import (
    DivisionByIndistinguishableZero,
    IndistinguishableFromZero,
    NotCertifiable,
    SingularAtPrecision,
    ValidationError,
)


def int_val(n, p):
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of integer zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


class PadicContext:
    """Shared data for one pair (K0, K): prime, defining polynomials,
    Frobenius lifts, and caches.

    F: monic integer polynomial of degree f, irreducible mod p.
    E: monic Eisenstein polynomial of degree e over O_{K0}; coefficients
       may be ints or exact UnramElem specs (val-unit dicts or int lists).
    """

    def __init__(self, p, F, E):
        if p < 2 or not gfp.is_prime(p):
            raise ValidationError(f"p = {p} is not prime")
        self.p = p
        F = [int(c) for c in F]
        if len(F) < 2 or F[-1] != 1:
            raise ValidationError("F must be monic of degree >= 1")
        if not gfp.is_irreducible(F, p):
            raise ValidationError("F is not irreducible mod p")
        self.F = tuple(F)
        self.f = len(F) - 1
        self.residue_field = gfp.GF(p, tuple(c % p for c in F))
        self._ppow = {}
        self._sigma_cache = {}
        self._E_power_cache = {}
        self._zero = UnramElem(self, 0, (0,) * self.f, None)
        self._one = self.from_int(1)
        self.E = tuple(self._coerce_exact(c) for c in E)
        self.e = len(self.E) - 1
        self._validate_eisenstein()
        self._diff_val = None

    def _coerce_exact(self, c):
        if isinstance(c, UnramElem):
            if c.prec is not None:
                raise ValidationError("E coefficients must be exact")
            return c
        if isinstance(c, int):
            return self.from_int(c)
        if isinstance(c, (list, tuple)):
            return self.unram(list(c))
        raise ValidationError(f"cannot coerce {c!r} to an exact element")

    def _validate_eisenstein(self):
        if self.e < 1:
            raise ValidationError("E must have degree >= 1")
        if not self.E[-1].is_one():
            raise ValidationError("E must be monic")
        for c in self.E[:-1]:
            if not c.is_exact_zero() and c.val() < 1:
                raise ValidationError("E must have positive-valuation lower coefficients")
        if self.E[0].is_exact_zero() or self.E[0].val() != 1:
            raise ValidationError("E must have constant term of valuation exactly 1")

    # -- small caches ------------------------------------------------------

    def ppow(self, m):
        if m not in self._ppow:
            self._ppow[m] = self.p**m
        return self._ppow[m]

    def zero(self):
        return self._zero

    def one(self):
        return self._one

    # -- constructors ------------------------------------------------------

    def from_int(self, n, prec=None):
        return self.make(0, [n] + [0] * (self.f - 1), prec)

    def unram(self, poly, k=0, prec=None):
        """Element p^k * (poly in X), poly a list of ints of length <= f."""
        poly = list(poly) + [0] * (self.f - len(poly))
        if len(poly) > self.f:
            raise ValidationError("unit polynomial degree must be < f")
        return self.make(k, poly, prec)

    def make(self, k, unit, prec):
        """Normalize and build an element; unit is a list of f ints."""
        if all(c == 0 for c in unit):
            if prec is None:
                return self._zero
            return UnramElem(self, 0, (0,) * self.f, prec)
        g = min(int_val(c, self.p) for c in unit if c != 0)
        if g:
            pg = self.ppow(g)
            unit = [c // pg for c in unit]
            k += g
        if prec is not None:
            m = prec - k
            if m <= 0:
                return UnramElem(self, 0, (0,) * self.f, prec)
            pm = self.ppow(m)
            unit = [c % pm for c in unit]
        return UnramElem(self, k, tuple(unit), prec)

    # -- modular polynomial helpers (units live in Z[X]/(F, p^m)) ---------

    def polymulmod(self, a, b, m=None):
        """Product of two length-f coefficient tuples, reduced mod (F, p^m)."""
        f = self.f
        if f == 1:
            r = a[0] * b[0]
            return ((r % self.ppow(m),) if m is not None else (r,))
        out = [0] * (2 * f - 1)
        for i, c in enumerate(a):
            if c:
                for j, d in enumerate(b):
                    out[i + j] += c * d
        for i in range(2 * f - 2, f - 1, -1):
            c = out[i]
            if c:
                out[i] = 0
                for j in range(f):
                    out[i - f + j] -= c * self.F[j]
        out = out[:f]
        if m is not None:
            pm = self.ppow(m)
            out = [c % pm for c in out]
        return tuple(out)

    def poly_inv_mod(self, a, m):
        """Inverse of a unit tuple mod (F, p^m) by Hensel lifting."""
        p = self.p
        b = gfp.inv_mod([c % p for c in a], list(self.F), p)
        b = tuple(b + [0] * (self.f - len(b)))
        have = 1
        while have < m:
            have = min(2 * have, m)
            ab = self.polymulmod(a, b, have)
            corr = tuple((2 if i == 0 else 0) - c for i, c in enumerate(ab))
            b = self.polymulmod(b, corr, have)
        return b

    def _compose_mod(self, poly, s, m):
        """poly(s(X)) mod (F, p^m) by Horner; poly, s length-f tuples... poly
        is a coefficient tuple of degree < f in X."""
        pm = self.ppow(m)
        acc = (0,) * self.f
        for c in reversed(poly):
            acc = self.polymulmod(acc, s, m)
            acc = tuple((acc[0] + c) % pm if i == 0 else acc[i] for i in range(self.f))
        return acc

    def sigma_poly(self, j, m):
        """Image of X under the j-th power of the Witt-vector Frobenius,
        as a coefficient tuple mod (F, p^m).  sigma lifts x -> x^p on the
        residue field and fixes F's root structure: F(sigma(X)) = 0."""
        j = j % self.f
        if j == 0:
            raise ValueError("sigma^0 is the identity; no lift needed")
        key = (j, m)
        if key in self._sigma_cache:
            return self._sigma_cache[key]
        if j == 1:
            s = self._frobenius_lift(m)
        else:
            s1 = self.sigma_poly(1, m)
            s = self.sigma_poly(j - 1, m)
            s = self._compose_mod(s, s1, m)
        self._sigma_cache[key] = s
        return s

    def _frobenius_lift(self, m):
        """Hensel-lift t = X^p mod (F, p) to a root of F mod (F, p^m)."""
        p = self.p
        t = gfp.powmod([0, 1], p, list(self.F), p)
        t = tuple(t + [0] * (self.f - len(t)))
        have = 1
        while have < m:
            have = min(2 * have, m)
            Ft = self._eval_F(t, have)
            dFt = self._eval_dF(t, have)
            inv = self.poly_inv_mod(dFt, have)
            corr = self.polymulmod(Ft, inv, have)
            pm = self.ppow(have)
            t = tuple((a - b) % pm for a, b in zip(t, corr))
        return t

    def _eval_F(self, t, m):
        acc = (0,) * self.f
        pm = self.ppow(m)
        for c in reversed(self.F):
            acc = self.polymulmod(acc, t, m)
            acc = ((acc[0] + c) % pm,) + acc[1:]
        return acc

    def _eval_dF(self, t, m):
        dF = [i * c for i, c in enumerate(self.F)][1:]
        acc = (0,) * self.f
        pm = self.ppow(m)
        for c in reversed(dF):
            acc = self.polymulmod(acc, t, m)
            acc = ((acc[0] + c) % pm,) + acc[1:]
        return acc

    def apply_frob(self, unit, j, m):
        """Apply sigma^j to a unit tuple known mod p^m."""
        if self.f == 1 or j % self.f == 0:
            pm = self.ppow(m)
            return tuple(c % pm for c in unit)
        s = self.sigma_poly(j, m)
        return self._compose_mod(unit, s, m)

    # -- derived quantities -------------------------------------------------

    def E_kpoly(self):
        return KPoly(self, list(self.E))

    def E_power(self, i):
        """E^i as an exact KPoly, cached."""
        if i not in self._E_power_cache:
            if i == 0:
                self._E_power_cache[i] = KPoly(self, [self.one()])
            else:
                self._E_power_cache[i] = self.E_power(i - 1) * self.E_kpoly()
        return self._E_power_cache[i]

    def diff_val(self):
        """Valuation of E'(pi), the different's generator valuation."""
        if self._diff_val is None:
            dE = self.E_kpoly().derivative()
            self._diff_val = dE.eval_at_pi().val()
        return self._diff_val

    def __repr__(self):
        return f"PadicContext(p={self.p}, f={self.f}, e={self.e})"


class UnramElem:
    """Element of K0 with absolute precision.

    Attributes: ctx, k (the valuation when the unit part is nonzero),
    unit (length-f tuple of ints), prec (absolute precision, None = exact).
    Instances are immutable; build them through the ctx constructors, which
    normalize.  unit == 0 with prec None is the exact zero; unit == 0 with
    finite prec means "zero to precision prec", i.e. valuation >= prec.
    """

    __slots__ = ("ctx", "k", "unit", "prec")

    def __init__(self, ctx, k, unit, prec):
        self.ctx = ctx
        self.k = k
        self.unit = unit
        self.prec = prec

    # -- predicates ---------------------------------------------------------

    def is_exact_zero(self):
        return self.prec is None and not any(self.unit)

    def is_zero_at_prec(self):
        """True when the element is indistinguishable from zero."""
        return not any(self.unit)

    def is_readable(self):
        """True when val() is certified: nonzero unit part."""
        return any(self.unit)

    def is_one(self):
        return (self.prec is None and self.k == 0
                and self.unit == (1,) + (0,) * (self.ctx.f - 1))

    def is_exact(self):
        return self.prec is None

    # -- valuation ----------------------------------------------------------

    def val(self):
        """Exact valuation.  Raises IndistinguishableFromZero when the
        element is zero to working precision (or exactly zero)."""
        if not any(self.unit):
            raise IndistinguishableFromZero(
                "exact zero" if self.prec is None else f"zero to precision O(p^{self.prec})")
        return self.k

    def val_lb(self):
        """Certified lower bound on the valuation; +inf for the exact zero."""
        if any(self.unit):
            return self.k
        return math.inf if self.prec is None else self.prec

    # -- ring operations ----------------------------------------------------

    def _prec_min(self, other):
        if self.prec is None:
            return other.prec
        if other.prec is None:
            return self.prec
        return min(self.prec, other.prec)

    def __add__(self, other):
        ctx = self.ctx
        n = self._prec_min(other)
        k0 = min(self.k, other.k)
        pa = ctx.ppow(self.k - k0)
        pb = ctx.ppow(other.k - k0)
        combined = [a * pa + b * pb for a, b in zip(self.unit, other.unit)]
        return ctx.make(k0, combined, n)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        if not any(self.unit):
            return self
        if self.prec is None:
            return UnramElem(self.ctx, self.k, tuple(-c for c in self.unit), None)
        pm = self.ctx.ppow(self.prec - self.k)
        return UnramElem(self.ctx, self.k, tuple((-c) % pm for c in self.unit), self.prec)

    def __mul__(self, other):
        ctx = self.ctx
        if self.is_exact_zero() or other.is_exact_zero():
            return ctx.zero()
        cands = []
        if self.prec is not None:
            cands.append(self.prec + other.val_lb())
        if other.prec is not None:
            cands.append(other.prec + self.val_lb())
        n = min(cands) if cands else None
        if not any(self.unit) or not any(other.unit):
            return ctx.make(0, [0] * ctx.f, n)
        k = self.k + other.k
        m = None if n is None else n - k
        if m is not None and m <= 0:
            return ctx.make(0, [0] * ctx.f, n)
        unit = ctx.polymulmod(self.unit, other.unit, m)
        return ctx.make(k, list(unit), n)

    def inv(self, prec=None):
        """Multiplicative inverse.  Absolute precision drops by 2*val, the
        sharp rule for p-adic reciprocals.  Exact elements need an explicit
        target precision (their inverse has an infinite expansion)."""
        ctx = self.ctx
        if not any(self.unit):
            raise DivisionByIndistinguishableZero(
                "exact zero" if self.prec is None else f"zero to precision O(p^{self.prec})")
        if self.prec is None:
            if prec is None:
                raise ValueError("inverse of an exact element needs a target precision")
            m_rel = prec + self.k
        else:
            m_rel = self.prec - self.k
            if prec is not None:
                m_rel = min(m_rel, prec + self.k)
        if m_rel <= 0:
            raise DivisionByIndistinguishableZero("no relative precision left for inverse")
        unit = ctx.poly_inv_mod(self.unit, m_rel)
        return ctx.make(-self.k, list(unit), m_rel - self.k)

    def div(self, other, prec=None):
        return self * other.inv(prec)

    def __truediv__(self, other):
        if other.prec is None and self.prec is None:
            raise ValueError("use .div(other, prec=...) for exact/exact division")
        return self * other.inv(self.prec - other.k if other.prec is None else None)

    def __pow__(self, n):
        if n < 0:
            return self.inv() ** (-n)
        result = self.ctx.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def sigma(self, j=1, prec=None):
        """Witt Frobenius sigma^j; an isometry, so precision is preserved.
        Exact input with f > 1 needs a target precision."""
        ctx = self.ctx
        if ctx.f == 1 or j % ctx.f == 0:
            return self
        if not any(self.unit):
            return self
        if self.prec is None and not any(self.unit[1:]):
            return self
        if self.prec is None:
            if prec is None:
                raise ValueError("sigma of an exact element needs a target precision")
            m_rel = prec - self.k
        else:
            m_rel = self.prec - self.k
            if prec is not None:
                m_rel = min(m_rel, prec - self.k)
        unit = ctx.apply_frob(self.unit, j, m_rel)
        return ctx.make(self.k, list(unit), self.k + m_rel)

    def reduce(self, prec):
        """Cap the absolute precision at prec."""
        if self.prec is not None and self.prec <= prec:
            return self
        return self.ctx.make(self.k, list(self.unit), prec)

    def lift_shift(self, shift, m):
        """Integer-tuple representative of p^shift * self mod p^m.
        Requires val + shift >= 0 so the representative is integral."""
        if not any(self.unit):
            return (0,) * self.ctx.f
        t = self.k + shift
        if t < 0:
            raise ValueError(f"lift of negative valuation: val={self.k}, shift={shift}")
        pm = self.ctx.ppow(m)
        pt = self.ctx.ppow(t)
        return tuple((c * pt) % pm for c in self.unit)

    def scale_p(self, t):
        """Multiply by p^t exactly (shifts valuation and precision)."""
        if not any(self.unit):
            if self.prec is None:
                return self
            return UnramElem(self.ctx, 0, self.unit, self.prec + t)
        return UnramElem(self.ctx, self.k + t, self.unit,
                         None if self.prec is None else self.prec + t)

    def residue(self):
        """Image in the residue field (requires val >= 0)."""
        fld = self.ctx.residue_field
        if not any(self.unit):
            return fld.zero
        if self.k < 0:
            raise ValueError("residue of a negative-valuation element")
        if self.k > 0:
            return fld.zero
        return fld.from_coeffs(list(self.unit))

    # -- comparison / io ----------------------------------------------------

    def __eq__(self, other):
        return (isinstance(other, UnramElem) and self.ctx is other.ctx
                and self.k == other.k and self.unit == other.unit
                and self.prec == other.prec)

    def __hash__(self):
        return hash((self.k, self.unit, self.prec))

    def same_at_prec(self, other):
        """True when self - other is indistinguishable from zero."""
        d = self - other
        return not any(d.unit)

    def to_text(self):
        if self.is_exact_zero():
            return "0"
        if not any(self.unit):
            return f"O(p^{self.prec})"
        body = " + ".join(
            (f"{c}" if i == 0 else (f"{c}*X" if i == 1 else f"{c}*X^{i}"))
            for i, c in enumerate(self.unit))
        s = f"p^{self.k} * ({body})"
        if self.prec is not None:
            s += f" + O(p^{self.prec})"
        return s

    def to_dict(self):
        return {"val_unit": self.k, "poly": list(self.unit), "prec": self.prec}

    def __repr__(self):
        return self.to_text()


_TEXT_RE = re.compile(
    r"^\s*p\^(?P<k>-?\d+)\s*\*\s*\((?P<body>[^)]*)\)\s*(?:\+\s*O\(p\^(?P<n>-?\d+)\))?\s*$")
_ZERO_RE = re.compile(r"^\s*(?:0|O\(p\^(?P<n>-?\d+)\))\s*$")


def parse_elem(ctx, text):
    """Parse the to_text() format back into an element."""
    m = _ZERO_RE.match(text)
    if m:
        n = m.group("n")
        return ctx.make(0, [0] * ctx.f, int(n) if n is not None else None)
    m = _TEXT_RE.match(text)
    if not m:
        raise ValidationError(f"cannot parse element text: {text!r}")
    k = int(m.group("k"))
    prec = m.group("n")
    coeffs = [0] * ctx.f
    for term in m.group("body").split("+"):
        term = term.strip()
        if not term:
            continue
        if "*X^" in term:
            c, i = term.split("*X^")
            coeffs[int(i)] = int(c)
        elif term.endswith("*X"):
            coeffs[1] = int(term[:-2])
        else:
            coeffs[0] = int(term)
    return ctx.make(k, coeffs, int(prec) if prec is not None else None)


def elem_from_dict(ctx, d):
    return ctx.make(int(d["val_unit"]), [int(c) for c in d["poly"]], d.get("prec"))


class KPoly:
    """Polynomial over K0 with per-coefficient precision, little-endian.

    Trailing exact zeros are stripped; coefficients that are merely zero to
    precision are kept, since they carry information.  Used for the small
    quotient-ring algebra (classes mod E^i) where coefficient-exact
    precision tracking is required.
    """

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx, coeffs):
        while coeffs and coeffs[-1].is_exact_zero():
            coeffs = coeffs[:-1]
        self.ctx = ctx
        self.coeffs = tuple(coeffs)

    @classmethod
    def from_ints(cls, ctx, ints, prec=None):
        return cls(ctx, [ctx.from_int(c, prec) for c in ints])

    @classmethod
    def zero(cls, ctx):
        return cls(ctx, [])

    @classmethod
    def one(cls, ctx):
        return cls(ctx, [ctx.one()])

    def degree(self):
        """Degree counting any non-exact-zero leading coefficient."""
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return self.ctx.zero()

    def __add__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        return KPoly(self.ctx, [self[i] + other[i] for i in range(n)])

    def __sub__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        return KPoly(self.ctx, [self[i] - other[i] for i in range(n)])

    def __neg__(self):
        return KPoly(self.ctx, [-c for c in self.coeffs])

    def __mul__(self, other):
        if not self.coeffs or not other.coeffs:
            return KPoly.zero(self.ctx)
        out = [self.ctx.zero()] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_exact_zero():
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return KPoly(self.ctx, out)

    def scale(self, c):
        return KPoly(self.ctx, [c * a for a in self.coeffs])

    def scale_p(self, t):
        return KPoly(self.ctx, [a.scale_p(t) for a in self.coeffs])

    def shift_u(self, i):
        """Multiply by u^i."""
        if not self.coeffs:
            return self
        return KPoly(self.ctx, [self.ctx.zero()] * i + list(self.coeffs))

    def derivative(self):
        return KPoly(self.ctx, [self.ctx.from_int(i) * c
                                for i, c in enumerate(self.coeffs)][1:])

    def u_derivative(self):
        """u * d/du, the operator that respects the u-filtration."""
        return KPoly(self.ctx, [self.ctx.from_int(i) * c
                                for i, c in enumerate(self.coeffs)])

    def divmod_exact_monic(self, D):
        """Long division by a monic KPoly with exact coefficients.  No
        precision is lost beyond the honest subtraction cascade."""
        s = D.degree()
        if s < 0 or not D.coeffs[-1].is_one():
            raise ValueError("divisor must be monic with exact coefficients")
        r = list(self.coeffs)
        q = [self.ctx.zero()] * max(len(r) - s, 0)
        for top in range(len(r) - 1, s - 1, -1):
            c = r[top]
            if c.is_exact_zero():
                continue
            q[top - s] = c
            for i in range(s + 1):
                r[top - s + i] = r[top - s + i] - c * D.coeffs[i]
        return KPoly(self.ctx, q), KPoly(self.ctx, r[:s])

    def mod_E_power(self, i):
        return self.divmod_exact_monic(self.ctx.E_power(i))[1]

    def sigma(self, j=1, prec=None):
        return KPoly(self.ctx, [c.sigma(j, prec) for c in self.coeffs])

    def phi(self, j=1, prec=None):
        """Ring endomorphism lift of Frobenius: sigma^j on coefficients
        and u -> u^{p^j}.  Exact coefficients over an extension with f > 1
        need prec for their sigma image; everything else keeps its label."""
        ctx = self.ctx
        if j == 0 or not self.coeffs:
            return self
        step = ctx.p ** j
        out = [ctx.zero()] * ((len(self.coeffs) - 1) * step + 1)
        for i, c in enumerate(self.coeffs):
            if c.is_exact_zero():
                continue
            out[i * step] = c.sigma(j, prec)
        return KPoly(ctx, out)

    def reduce(self, prec):
        return KPoly(self.ctx, [c.reduce(prec) for c in self.coeffs])

    def eval_at_pi(self):
        """Value in K = K0[u]/(E), i.e. at the Eisenstein root."""
        r = self.mod_E_power(1)
        coeffs = [r[i] for i in range(self.ctx.e)]
        return RamElem(self.ctx, coeffs)

    def is_zero_at_prec(self):
        return all(c.is_zero_at_prec() for c in self.coeffs)

    def min_prec(self):
        precs = [c.prec for c in self.coeffs if c.prec is not None]
        return min(precs) if precs else None

    def min_val_lb(self):
        if not self.coeffs:
            return math.inf
        return min(c.val_lb() for c in self.coeffs)

    def __eq__(self, other):
        return (isinstance(other, KPoly) and self.ctx is other.ctx
                and self.coeffs == other.coeffs)

    def __repr__(self):
        if not self.coeffs:
            return "KPoly(0)"
        return "KPoly[" + ", ".join(c.to_text() for c in self.coeffs) + "]"


class RamElem:
    """Element of K = K0[u]/(E), stored as e coefficients over K0.

    The valuations val(c_i) + i/e are distinct mod Z, so the valuation of a
    nonzero element is the minimum over readable coefficients; it is exact
    whenever every coefficient of smaller lower bound is readable.
    """

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx, coeffs):
        coeffs = list(coeffs) + [ctx.zero()] * (ctx.e - len(coeffs))
        self.ctx = ctx
        self.coeffs = tuple(coeffs)

    def val(self):
        """Exact valuation in (1/e)Z, as a Fraction."""
        e = self.ctx.e
        best = math.inf
        for i, c in enumerate(self.coeffs):
            if c.is_readable():
                cand = Fraction(c.val() * e + i, e)
                if cand < best:
                    best = cand
        for i, c in enumerate(self.coeffs):
            if not c.is_readable():
                lb = math.inf if c.prec is None else Fraction(c.prec * e + i, e)
                if lb < best:
                    raise NotCertifiable(
                        "valuation not certified: an unreadable coefficient could be smaller")
        if best is math.inf:
            raise IndistinguishableFromZero("ramified element is zero at precision")
        return best

    def val_lb(self):
        """Certified lower bound on the valuation; +inf for the exact zero."""
        e = self.ctx.e
        best = math.inf
        for i, c in enumerate(self.coeffs):
            lb = c.val_lb()
            if lb is not math.inf:
                cand = Fraction(lb * e + i, e)
                if cand < best:
                    best = cand
        return best

    def is_readable(self):
        """True when val() is certified."""
        try:
            self.val()
        except (NotCertifiable, IndistinguishableFromZero):
            return False
        return True

    def is_exact(self):
        return all(c.prec is None for c in self.coeffs)

    def __add__(self, other):
        return RamElem(self.ctx, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        return RamElem(self.ctx, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return RamElem(self.ctx, [-a for a in self.coeffs])

    def __mul__(self, other):
        prod = self.as_kpoly() * other.as_kpoly()
        return prod.eval_at_pi()

    def scale(self, c):
        return RamElem(self.ctx, [c * a for a in self.coeffs])

    def as_kpoly(self):
        return KPoly(self.ctx, list(self.coeffs))

    def inv(self, prec=None):
        """Inverse via the multiplication-by-self matrix over K0."""
        ctx = self.ctx
        e = ctx.e
        cols = []
        for i in range(e):
            basis_vec = RamElem(ctx, [ctx.zero()] * i + [ctx.one()])
            cols.append((self * basis_vec).coeffs)
        rows = [[cols[j][i] for j in range(e)] for i in range(e)]
        rhs = [ctx.one()] + [ctx.zero()] * (e - 1)
        sol = solve_linear(ctx, rows, rhs, prec=prec)
        return RamElem(ctx, sol)

    def is_zero_at_prec(self):
        return all(not any(c.unit) for c in self.coeffs)

    def __eq__(self, other):
        return (isinstance(other, RamElem) and self.ctx is other.ctx
                and self.coeffs == other.coeffs)

    def __repr__(self):
        return "RamElem[" + ", ".join(c.to_text() for c in self.coeffs) + "]"


def solve_linear(ctx, rows, rhs, prec=None):
    """Solve a small dense K0-linear system by Gaussian elimination with
    minimal-valuation pivoting.  rows: list of lists of UnramElem.  The
    prec argument sets the inversion precision when a pivot is exact; when
    every entry is exact it is required."""
    n = len(rows)
    A = [list(r) + [b] for r, b in zip(rows, rhs)]
    if prec is None:
        finite = [x.prec for row in A for x in row if x.prec is not None]
        prec = min(finite) if finite else None
    for col in range(n):
        best, best_val = None, math.inf
        for r in range(col, n):
            c = A[r][col]
            if c.is_readable() and c.val() < best_val:
                best, best_val = r, c.val()
        if best is None:
            raise SingularAtPrecision(f"no readable pivot in column {col}")
        A[col], A[best] = A[best], A[col]
        piv = A[col][col]
        piv_inv = piv.inv(prec=prec) if piv.is_exact() else piv.inv()
        for j in range(col, n + 1):
            A[col][j] = A[col][j] * piv_inv
        for r in range(n):
            if r != col:
                factor = A[r][col]
                if factor.is_exact_zero():
                    continue
                for j in range(col, n + 1):
                    A[r][j] = A[r][j] - factor * A[col][j]
    return [A[i][n] for i in range(n)]
