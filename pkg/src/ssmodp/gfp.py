"""Polynomial arithmetic over F_p and small finite-field quotients.

Polynomials are little-endian lists of ints reduced mod p; the zero
polynomial is the empty list.  These helpers back the residue-field
computations (mod-p reduction, Frobenius fixed points) and the Hensel
seeds used by the unramified tower.
"""

from functools import cache


def trim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def add(a, b, p):
    n = max(len(a), len(b))
    out = [0] * n
    for i, c in enumerate(a):
        out[i] = c
    for i, c in enumerate(b):
        out[i] = (out[i] + c) % p
    return trim(out)


def sub(a, b, p):
    n = max(len(a), len(b))
    out = [0] * n
    for i, c in enumerate(a):
        out[i] = c
    for i, c in enumerate(b):
        out[i] = (out[i] - c) % p
    return trim(out)


def mul(a, b, p):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, c in enumerate(a):
        if c:
            for j, d in enumerate(b):
                out[i + j] += c * d
    return trim([c % p for c in out])


def divmod_(a, b, p):
    """Quotient and remainder of a by b (b nonzero), coefficients mod p."""
    if not b:
        raise ZeroDivisionError("division by zero polynomial")
    r = [c % p for c in a]
    trim(r)
    db = len(b) - 1
    inv_lead = pow(b[-1], -1, p)
    q = [0] * max(len(r) - db, 0)
    while len(r) - 1 >= db and r:
        shift = len(r) - 1 - db
        coef = (r[-1] * inv_lead) % p
        q[shift] = coef
        for i, c in enumerate(b):
            r[shift + i] = (r[shift + i] - coef * c) % p
        trim(r)
    return trim(q), r


def gcd(a, b, p):
    a, b = [c % p for c in a], [c % p for c in b]
    trim(a), trim(b)
    while b:
        a, b = b, divmod_(a, b, p)[1]
    if a:
        inv_lead = pow(a[-1], -1, p)
        a = [(c * inv_lead) % p for c in a]
    return a


def powmod(a, n, mod, p):
    result = [1]
    base = divmod_(a, mod, p)[1]
    while n:
        if n & 1:
            result = divmod_(mul(result, base, p), mod, p)[1]
        base = divmod_(mul(base, base, p), mod, p)[1]
        n >>= 1
    return result


def xgcd(a, b, p):
    """Extended gcd: returns (g, s, t) with s*a + t*b = g, g monic or zero."""
    r0, r1 = [c % p for c in a], [c % p for c in b]
    trim(r0), trim(r1)
    s0, s1 = [1], []
    t0, t1 = [], [1]
    while r1:
        q, r = divmod_(r0, r1, p)
        r0, r1 = r1, r
        s0, s1 = s1, sub(s0, mul(q, s1, p), p)
        t0, t1 = t1, sub(t0, mul(q, t1, p), p)
    if r0:
        c = pow(r0[-1], -1, p)
        r0 = [(x * c) % p for x in r0]
        s0 = [(x * c) % p for x in s0]
        t0 = [(x * c) % p for x in t0]
    return r0, s0, t0


def inv_mod(a, mod, p):
    """Inverse of a modulo mod over F_p; raises if not coprime."""
    g, s, _ = xgcd(a, mod, p)
    if g != [1]:
        raise ZeroDivisionError("element not invertible in quotient")
    return divmod_(s, mod, p)[1]


def is_irreducible(f, p):
    """Rabin test; f monic over F_p."""
    f = [c % p for c in f]
    d = len(f) - 1
    if d <= 0:
        return False
    x = [0, 1]
    if powmod(x, p**d, f, p) != divmod_(x, f, p)[1]:
        return False
    for ell in {q for q in range(2, d + 1) if d % q == 0 and is_prime(q)}:
        h = sub(powmod(x, p ** (d // ell), f, p), x, p)
        if gcd(h, f, p) != [1]:
            return False
    return True


def is_prime(n):
    if n < 2:
        return False
    for q in range(2, int(n**0.5) + 1):
        if n % q == 0:
            return False
    return True


@cache
def GF(p, modulus):
    """Field F_{p^f} presented as F_p[X]/(modulus); modulus a tuple of ints.

    Returns a field object whose elements are FFElem instances.  Cached so
    element classes compare by identity of their field.
    """
    return _Field(p, modulus)


class FFElem:
    """Element of a small finite field, fixed-length coefficient tuple."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        self.field = field
        self.coeffs = coeffs

    def __add__(self, other):
        f = self.field
        return FFElem(f, tuple((a + b) % f.p for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        f = self.field
        return FFElem(f, tuple((a - b) % f.p for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        f = self.field
        return FFElem(f, tuple((-a) % f.p for a in self.coeffs))

    def __mul__(self, other):
        f = self.field
        a = mul(list(self.coeffs), list(other.coeffs), f.p)
        r = divmod_(a, list(f.modulus), f.p)[1]
        return FFElem(f, tuple(r + [0] * (f.deg - len(r))))

    def inv(self):
        f = self.field
        if not any(self.coeffs):
            raise ZeroDivisionError("inverse of zero")
        r = inv_mod(list(self.coeffs), list(f.modulus), f.p)
        return FFElem(f, tuple(r + [0] * (f.deg - len(r))))

    def __truediv__(self, other):
        return self * other.inv()

    def __pow__(self, n):
        f = self.field
        if n < 0:
            return self.inv() ** (-n)
        result = f.one
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def frob(self, j=1):
        """x -> x^(p^j), the arithmetic Frobenius iterated j times."""
        return self ** (self.field.p ** (j % self.field.deg if self.field.deg > 1 else 1))

    def frob_inv(self):
        """Inverse of x -> x^p; bijective on a finite field."""
        f = self.field
        return self ** (f.p ** (f.deg - 1))

    def __eq__(self, other):
        return isinstance(other, FFElem) and self.field is other.field and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((id(self.field), self.coeffs))

    def __bool__(self):
        return any(self.coeffs)

    def __repr__(self):
        return f"FF({list(self.coeffs)})"


class _Field:
    def __init__(self, p, modulus):
        self.p = p
        self.modulus = modulus
        self.deg = len(modulus) - 1
        self.order = p**self.deg
        self.zero = FFElem(self, (0,) * self.deg)
        self.one = FFElem(self, (1,) + (0,) * (self.deg - 1))

    def from_coeffs(self, coeffs):
        r = [c % self.p for c in coeffs]
        r = divmod_(r, list(self.modulus), self.p)[1]
        return FFElem(self, tuple(r + [0] * (self.deg - len(r))))

    def from_int(self, n):
        return self.from_coeffs([n])

    def elements(self):
        """All q elements, in lexicographic coefficient order."""
        def rec(i):
            if i == self.deg:
                yield ()
                return
            for rest in rec(i + 1):
                for c in range(self.p):
                    yield (c,) + rest
        for tup in rec(0):
            yield FFElem(self, tup)

    def __repr__(self):
        return f"GF({self.p}^{self.deg})"
