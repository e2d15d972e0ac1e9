"""Small dense linear algebra over the field and series layers.

Every matrix in the pipeline has rank at most a handful, so the classes
here are plain row-tuples with explicit loops.  The module provides:

  * MatK: matrices over the unramified or ramified field layer;
  * MatNu: matrices of coefficient series at a common slope and length;
  * plu_integral: M = M'*U with M' invertible over the integer ring and
    U upper triangular, by minimum-valuation pivoting;
  * EPowerQuot and simultaneous_lu: arithmetic and plain LU in the
    quotient of the series ring by E(u)^r;
  * taylor_at_pi: the expansion of a polynomial along powers of (u - pi);
  * hermite_form: a column Hermite normal form oracle for small series
    matrices;
  * triangular_inverse: back substitution for unipotent matrices;
  * det: signed permutation expansion for tiny determinants.
"""

import itertools
import math
from fractions import Fraction

from .errors import (
    DivisionByIndistinguishableZero,
    IndistinguishableFromZero,
    IterationBudgetExceeded,
    LUFailure,
    NonConvergence,
    NotCertifiable,
    PreconditionViolated,
    SingularAtPrecision,
    ValidationError,
)
from .padic import KPoly, RamElem, UnramElem, solve_linear
from .series import NuSeries, euclid_div


def _lift_ram(ctx, x):
    """Embed an unramified element into the ramified layer."""
    if isinstance(x, RamElem):
        return x
    return RamElem(ctx, [x])


def _entry_mul(ctx, a, b):
    if isinstance(a, RamElem) or isinstance(b, RamElem):
        return _lift_ram(ctx, a) * _lift_ram(ctx, b)
    return a * b


def _is_exact_one(x):
    if isinstance(x, RamElem):
        return (x.coeffs[0].is_one()
                and all(c.is_exact_zero() for c in x.coeffs[1:]))
    return x.is_one()


def _try_val(x):
    """The exact valuation, or None when unreadable at precision."""
    try:
        return x.val()
    except (IndistinguishableFromZero, NotCertifiable):
        return None


def _inv_entry(x, prec):
    """Invert a field entry; exact entries other than 1 need a target."""
    if _is_exact_one(x):
        return x
    if x.is_exact():
        if prec is None:
            raise PreconditionViolated(
                "inverting an exact entry needs an explicit working precision")
        return x.inv(prec=prec)
    return x.inv()


class MatK:
    """Dense matrix over the unramified layer K0 or the ramified layer K.

    Entries are UnramElem or RamElem sharing one context; mixed products
    lift the unramified side.  Rows are stored as tuples, so instances
    are value-like and safe to share.
    """

    __slots__ = ("ctx", "rows")

    def __init__(self, ctx, rows):
        rows = tuple(tuple(r) for r in rows)
        if rows:
            w = len(rows[0])
            if any(len(r) != w for r in rows):
                raise ValidationError("matrix rows have unequal lengths")
        self.ctx = ctx
        self.rows = rows

    @classmethod
    def identity(cls, ctx, d, ram=False):
        one = RamElem(ctx, [ctx.one()]) if ram else ctx.one()
        zero = RamElem(ctx, []) if ram else ctx.zero()
        return cls(ctx, [[one if i == j else zero for j in range(d)]
                         for i in range(d)])

    @classmethod
    def zeros(cls, ctx, nrows, ncols, ram=False):
        zero = RamElem(ctx, []) if ram else ctx.zero()
        return cls(ctx, [[zero] * ncols for _ in range(nrows)])

    @classmethod
    def from_ints(cls, ctx, rows, prec=None):
        return cls(ctx, [[ctx.from_int(c, prec) for c in r] for r in rows])

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def ncols(self):
        return len(self.rows[0]) if self.rows else 0

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __add__(self, other):
        return MatK(self.ctx, [[a + b for a, b in zip(ra, rb)]
                               for ra, rb in zip(self.rows, other.rows)])

    def __sub__(self, other):
        return MatK(self.ctx, [[a - b for a, b in zip(ra, rb)]
                               for ra, rb in zip(self.rows, other.rows)])

    def __neg__(self):
        return self.map_entries(lambda x: -x)

    def __mul__(self, other):
        if not isinstance(other, MatK):
            return NotImplemented
        if self.ncols != other.nrows:
            raise ValidationError("inner dimensions do not match")
        ctx = self.ctx
        out = []
        for i in range(self.nrows):
            row = []
            for j in range(other.ncols):
                acc = None
                for k in range(self.ncols):
                    t = _entry_mul(ctx, self.rows[i][k], other.rows[k][j])
                    acc = t if acc is None else acc + t
                row.append(acc)
            out.append(row)
        return MatK(ctx, out)

    def scale(self, c):
        return self.map_entries(lambda x: _entry_mul(self.ctx, c, x))

    def transpose(self):
        return MatK(self.ctx, [[self.rows[i][j] for i in range(self.nrows)]
                               for j in range(self.ncols)])

    def map_entries(self, fn):
        return MatK(self.ctx, [[fn(x) for x in r] for r in self.rows])

    def lift_ram(self):
        """The same matrix with entries moved into the ramified layer."""
        return self.map_entries(lambda x: _lift_ram(self.ctx, x))

    def sigma(self, j=1, prec=None):
        return self.map_entries(lambda x: x.sigma(j, prec))

    def inverse(self, prec=None):
        """Inverse by Gaussian elimination, one column at a time."""
        d = self.nrows
        if self.ncols != d:
            raise ValidationError("only square matrices are inverted")
        ctx = self.ctx
        ram = any(isinstance(x, RamElem) for r in self.rows for x in r)
        rows = self.lift_ram().rows if ram else self.rows
        cols = []
        for j in range(d):
            if ram:
                rhs = [RamElem(ctx, [ctx.one()] if i == j else [])
                       for i in range(d)]
            else:
                rhs = [ctx.one() if i == j else ctx.zero() for i in range(d)]
            cols.append(solve_linear(ctx, [list(r) for r in rows], rhs,
                                     prec=prec))
        return MatK(ctx, [[cols[j][i] for j in range(d)] for i in range(d)])

    def min_val_lb(self):
        """Certified entrywise valuation lower bound."""
        best = math.inf
        for r in self.rows:
            for x in r:
                lb = x.val_lb()
                if lb < best:
                    best = lb
        return best

    def min_prec(self):
        best = None
        for r in self.rows:
            for x in r:
                if isinstance(x, RamElem):
                    p = min((c.prec for c in x.coeffs if c.prec is not None),
                            default=None)
                else:
                    p = x.prec
                if p is not None and (best is None or p < best):
                    best = p
        return best

    def is_zero_at_prec(self):
        return all(x.is_zero_at_prec() for r in self.rows for x in r)

    def __eq__(self, other):
        return (isinstance(other, MatK) and self.ctx is other.ctx
                and self.rows == other.rows)

    def __repr__(self):
        return "MatK(%d x %d)" % (self.nrows, self.ncols)


class MatNu:
    """Dense matrix of coefficient series at one slope and one length."""

    __slots__ = ("ctx", "nu", "rows")

    def __init__(self, ctx, nu, rows):
        rows = tuple(tuple(r) for r in rows)
        if rows:
            w = len(rows[0])
            if any(len(r) != w for r in rows):
                raise ValidationError("matrix rows have unequal lengths")
            n = len(rows[0][0].coeffs) if w else 0
            for r in rows:
                for x in r:
                    if x.nu != nu:
                        raise ValidationError("entries carry mixed slopes")
                    if len(x.coeffs) != n:
                        raise ValidationError("entries carry mixed lengths")
        self.ctx = ctx
        self.nu = nu
        self.rows = rows

    @classmethod
    def identity(cls, ctx, nu, d, n):
        return cls(ctx, nu, [[NuSeries.one(ctx, nu, n) if i == j
                              else NuSeries.zero(ctx, nu, n)
                              for j in range(d)] for i in range(d)])

    @classmethod
    def from_kpoly_rows(cls, ctx, nu, rows, n):
        return cls(ctx, nu, [[NuSeries.from_kpoly(x, nu, n) for x in r]
                             for r in rows])

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def ncols(self):
        return len(self.rows[0]) if self.rows else 0

    @property
    def n_trunc(self):
        return len(self.rows[0][0].coeffs) if self.rows and self.rows[0] else 0

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __add__(self, other):
        return MatNu(self.ctx, self.nu,
                     [[a + b for a, b in zip(ra, rb)]
                      for ra, rb in zip(self.rows, other.rows)])

    def __sub__(self, other):
        return MatNu(self.ctx, self.nu,
                     [[a - b for a, b in zip(ra, rb)]
                      for ra, rb in zip(self.rows, other.rows)])

    def __neg__(self):
        return self.map_entries(lambda x: -x)

    def matmul(self, other, n_out=None):
        if self.ncols != other.nrows:
            raise ValidationError("inner dimensions do not match")
        if n_out is None:
            n_out = self.n_trunc
        out = []
        for i in range(self.nrows):
            row = []
            for j in range(other.ncols):
                acc = None
                for k in range(self.ncols):
                    t = self.rows[i][k].mul(other.rows[k][j], n_out=n_out)
                    acc = t if acc is None else acc + t
                row.append(acc)
            out.append(row)
        return MatNu(self.ctx, self.nu, out)

    def __mul__(self, other):
        if not isinstance(other, MatNu):
            return NotImplemented
        return self.matmul(other)

    def scale(self, c):
        return self.map_entries(lambda x: x.scale(c))

    def scale_series(self, s, n_out=None):
        m = n_out if n_out is not None else self.n_trunc
        return self.map_entries(lambda x: x.mul(s, n_out=m))

    def transpose(self):
        return MatNu(self.ctx, self.nu,
                     [[self.rows[i][j] for i in range(self.nrows)]
                      for j in range(self.ncols)])

    def map_entries(self, fn):
        return MatNu(self.ctx, self.nu, [[fn(x) for x in r] for r in self.rows])

    def phi(self, work_prec=None):
        rows = [[x.phi(work_prec) for x in r] for r in self.rows]
        nu_new = rows[0][0].nu if rows and rows[0] else self.nu
        return MatNu(self.ctx, nu_new, rows)

    def truncate(self, n):
        return self.map_entries(lambda x: x.truncate(n))

    def pad_to(self, n):
        return self.map_entries(lambda x: x.pad_to(n))

    def reduce(self, prec):
        return self.map_entries(lambda x: x.reduce(prec))

    def as_kpoly_rows(self):
        return [[x.as_kpoly() for x in r] for r in self.rows]

    def vnu_floor(self):
        return min(x.vnu_floor() for r in self.rows for x in r)

    def is_zero_at_prec(self):
        return all(x.is_zero_at_prec() for r in self.rows for x in r)

    def __eq__(self, other):
        return (isinstance(other, MatNu) and self.ctx is other.ctx
                and self.nu == other.nu and self.rows == other.rows)

    def __repr__(self):
        return "MatNu(%d x %d, nu=%s, n=%d)" % (
            self.nrows, self.ncols, self.nu, self.n_trunc)


def plu_integral(M, prec=None):
    """Factor M = Mp * U with Mp invertible over the integer ring and U
    upper triangular.

    Gaussian elimination by rows: each column takes its pivot of minimal
    valuation among the remaining rows, swaps it up, and clears the rows
    below it.  Minimality makes every multiplier integral, so the
    collected inverse operations form a matrix with integral entries and
    unit determinant.

    prec sets the pivot-inversion precision when a pivot is exact; the
    smallest finite precision label in M is the default.  Raises
    SingularAtPrecision when a column has no readable pivot, or when an
    unreadable entry's label is too weak to certify its multiplier
    integral.
    """
    ctx = M.ctx
    d = M.nrows
    if M.ncols != d:
        raise ValidationError("only square matrices are factored")
    if prec is None:
        prec = M.min_prec()
    ram = any(isinstance(x, RamElem) for r in M.rows for x in r)
    W = [list(r) for r in (M.lift_ram().rows if ram else M.rows)]
    A = [list(r) for r in MatK.identity(ctx, d, ram=ram).rows]

    for c in range(d):
        best, best_val = None, math.inf
        for r in range(c, d):
            v = _try_val(W[r][c])
            if v is not None and v < best_val:
                best, best_val = r, v
        if best is None:
            raise SingularAtPrecision(
                "no readable pivot in column %d" % (c + 1))
        if best != c:
            W[c], W[best] = W[best], W[c]
            for i in range(d):
                A[i][c], A[i][best] = A[i][best], A[i][c]
        piv_inv = None
        for r in range(c + 1, d):
            x = W[r][c]
            if x.is_zero_at_prec():
                continue
            if piv_inv is None:
                piv_inv = _inv_entry(W[c][c], prec)
            m = _entry_mul(ctx, x, piv_inv)
            if m.val_lb() < 0:
                raise SingularAtPrecision(
                    "cannot certify the multiplier integral in column %d; "
                    "an unreadable entry may undercut the pivot" % (c + 1))
            W[r] = [W[r][j] - _entry_mul(ctx, m, W[c][j]) for j in range(d)]
            for i in range(d):
                A[i][c] = A[i][c] + _entry_mul(ctx, m, A[i][r])
    return MatK(ctx, A), MatK(ctx, W)


class EPowerQuot:
    """Element of the quotient of the series ring by E(u)^r, held as its
    unique polynomial representative of u-degree < e*r."""

    __slots__ = ("ctx", "r", "poly")

    def __init__(self, ctx, r, poly):
        if r < 1:
            raise ValidationError("quotient exponent must be at least 1")
        if poly.degree() >= ctx.e * r:
            poly = poly.mod_E_power(r)
        self.ctx = ctx
        self.r = r
        self.poly = poly

    @classmethod
    def one(cls, ctx, r):
        return cls(ctx, r, KPoly.one(ctx))

    @classmethod
    def zero(cls, ctx, r):
        return cls(ctx, r, KPoly.zero(ctx))

    def _check(self, other):
        if self.r != other.r:
            raise ValidationError("mixed quotient exponents")

    def __add__(self, other):
        self._check(other)
        return EPowerQuot(self.ctx, self.r, self.poly + other.poly)

    def __sub__(self, other):
        self._check(other)
        return EPowerQuot(self.ctx, self.r, self.poly - other.poly)

    def __neg__(self):
        return EPowerQuot(self.ctx, self.r, -self.poly)

    def __mul__(self, other):
        self._check(other)
        return EPowerQuot(self.ctx, self.r, self.poly * other.poly)

    def scale(self, c):
        return EPowerQuot(self.ctx, self.r, self.poly.scale(c))

    def residue(self):
        """Image in K, i.e. the value at the Eisenstein root."""
        return self.poly.eval_at_pi()

    def inv(self, prec=None):
        """Inverse by lifting the residue inverse through the powers of E.

        The residue must be a readable unit of K; each lifting step
        g <- g*(2 - f*g) squares the E-adic accuracy.  The result is
        certified by a multiply-back check.
        """
        ctx = self.ctx
        res = self.residue()
        try:
            res.val()
        except IndistinguishableFromZero as exc:
            raise DivisionByIndistinguishableZero(
                "residue mod E is zero at precision") from exc
        g = res.inv(prec).as_kpoly()
        k = 1
        two = KPoly(ctx, [ctx.from_int(2)])
        while k < self.r:
            k = min(2 * k, self.r)
            fg = (self.poly * g).mod_E_power(k)
            g = (g * (two - fg)).mod_E_power(k)
        out = EPowerQuot(ctx, self.r, g)
        if not (self * out - EPowerQuot.one(ctx, self.r)).is_zero_at_prec():
            raise NonConvergence("quotient-ring inverse failed its check")
        return out

    def is_zero_at_prec(self):
        return self.poly.is_zero_at_prec()

    def __eq__(self, other):
        return (isinstance(other, EPowerQuot) and self.r == other.r
                and self.poly == other.poly)

    def __repr__(self):
        return "EPowerQuot(r=%d, %r)" % (self.r, self.poly)


def _to_kpoly(ctx, x):
    if isinstance(x, KPoly):
        return x
    if isinstance(x, NuSeries):
        return x.as_kpoly()
    if isinstance(x, EPowerQuot):
        return x.poly
    raise ValidationError("expected a polynomial or series entry")


def quot_matmul(A, B):
    """Product of two matrices of EPowerQuot entries (lists of lists)."""
    out = []
    for i in range(len(A)):
        row = []
        for j in range(len(B[0])):
            acc = None
            for k in range(len(B)):
                t = A[i][k] * B[k][j]
                acc = t if acc is None else acc + t
            row.append(acc)
        out.append(row)
    return out


def mat_to_quot(ctx, r, M):
    """Wrap a matrix (MatNu, or lists of KPoly/NuSeries) in the quotient."""
    rows = M.rows if hasattr(M, "rows") else M
    return [[EPowerQuot(ctx, r, _to_kpoly(ctx, x)) for x in row]
            for row in rows]


def simultaneous_lu(omega, what_list, r, prec=None):
    """Decompose omega*W into unipotent-lower times upper mod E(u)^r for
    every W in what_list, with the one row mix omega.

    Plain LU without pivoting in the quotient ring: every principal pivot
    must reduce mod E(u) to a readable nonzero element of K; otherwise
    LUFailure is raised and the caller redraws omega.  Representatives of
    u-degree < e*r pin each factor uniquely.

    omega: square matrix as lists of ints or UnramElem.  what_list:
    matrices of series or polynomials.  Returns [(L, V), ...] where L and
    V are lists of lists of KPoly.
    """
    if not what_list:
        return []
    first = what_list[0]
    ctx = first.ctx if hasattr(first, "ctx") else first[0][0].ctx
    om = [[c if isinstance(c, UnramElem) else ctx.from_int(c) for c in row]
          for row in omega]
    d = len(om)
    out = []
    for W in what_list:
        Wq = mat_to_quot(ctx, r, W)
        if len(Wq) != d:
            raise ValidationError("row mix and matrix dimensions differ")
        B = []
        for i in range(d):
            row = []
            for j in range(len(Wq[0])):
                acc = None
                for k in range(d):
                    t = Wq[k][j].scale(om[i][k])
                    acc = t if acc is None else acc + t
                row.append(acc)
            B.append(row)
        L = [[EPowerQuot.one(ctx, r) if i == j else EPowerQuot.zero(ctx, r)
              for j in range(d)] for i in range(d)]
        for k in range(d):
            piv = B[k][k]
            try:
                piv.residue().val()
            except (IndistinguishableFromZero, NotCertifiable) as exc:
                raise LUFailure(
                    "principal pivot %d is indistinguishable from zero mod E"
                    % (k + 1)) from exc
            piv_inv = piv.inv(prec)
            for i in range(k + 1, d):
                m = B[i][k] * piv_inv
                L[i][k] = m
                B[i] = [B[i][j] - m * B[k][j] for j in range(d)]
        out.append(([[x.poly for x in row] for row in L],
                    [[x.poly for x in row] for row in B]))
    return out


def taylor_at_pi(kp, r, prec=None):
    """The first r coefficients of the expansion of a polynomial along
    powers of (u - pi): returns [f(pi), f'(pi), f''(pi)/2!, ...] in K.

    The factorial divisions need an inversion precision; prec defaults to
    the smallest finite label of the input, and exact inputs with r > 2
    must pass one explicitly.
    """
    ctx = kp.ctx
    if prec is None:
        prec = kp.min_prec()
    out = []
    cur = kp
    fact = 1
    for s in range(r):
        val = cur.eval_at_pi()
        if fact != 1:
            c = ctx.from_int(fact)
            if prec is None:
                raise PreconditionViolated(
                    "exact input needs an explicit precision to divide by "
                    "the factorial")
            val = val.scale(c.inv(prec=prec))
        out.append(val)
        cur = cur.derivative()
        fact *= s + 1
    return out


def hermite_form(M, max_steps=None):
    """Column Hermite form over the series ring: (H, T) with M*T = H
    upper triangular and T a product of column swaps and shears, hence
    invertible over the ring.

    Rows are processed bottom up.  Within a row, the active column whose
    entry has the smallest Weierstrass degree serves as the divisor, and
    Euclidean division clears the other active columns; the stathme drops
    strictly each pass, so the loop terminates.  Entries must have
    certifiable degree data (NotCertifiable propagates).  Small-instance
    oracle only; cost grows quickly with size and length.
    """
    ctx, nu, n = M.ctx, M.nu, M.n_trunc
    nrows, ncols = M.nrows, M.ncols
    cols = [[M.rows[i][j] for i in range(nrows)] for j in range(ncols)]
    tcols = [[NuSeries.one(ctx, nu, n) if i == j else NuSeries.zero(ctx, nu, n)
              for i in range(ncols)] for j in range(ncols)]
    if max_steps is None:
        max_steps = (n + 2) * ncols * max(nrows, 1) + 16
    steps = 0
    t = ncols - 1
    for i in range(nrows - 1, -1, -1):
        if t < 0:
            break
        while True:
            steps += 1
            if steps > max_steps:
                raise IterationBudgetExceeded(
                    "hermite reduction exceeded its step budget")
            live = [j for j in range(t + 1)
                    if not cols[j][i].is_zero_at_prec()]
            if not live:
                break
            degs = [(cols[j][i].weierstrass_degree(), j) for j in live]
            degs.sort()
            if len(live) == 1:
                j = live[0]
                cols[j], cols[t] = cols[t], cols[j]
                tcols[j], tcols[t] = tcols[t], tcols[j]
                t -= 1
                break
            jp = degs[0][1]
            pivot = cols[jp][i]
            for _, j in degs[1:]:
                q, _rem = euclid_div(pivot, cols[j][i],
                                     require_integral=False)
                cols[j] = [cols[j][k] - cols[jp][k].mul(q, n_out=n)
                           for k in range(nrows)]
                tcols[j] = [tcols[j][k] - tcols[jp][k].mul(q, n_out=n)
                            for k in range(ncols)]
    H = MatNu(ctx, nu, [[cols[j][i] for j in range(ncols)]
                        for i in range(nrows)])
    T = MatNu(ctx, nu, [[tcols[j][i] for j in range(ncols)]
                        for i in range(ncols)])
    return H, T


def triangular_inverse(Y):
    """Inverse of a unipotent triangular series matrix, by substitution.

    Accepts lower or upper unipotent input and returns the inverse of the
    same shape.  Each output entry is a signed sum of products of at most
    d-1 entries of Y, which gives the bound v(Y^{-1}) >= (d-1)*v(Y)
    whenever v(Y) <= 0.
    """
    d = Y.nrows
    if Y.ncols != d:
        raise ValidationError("only square matrices are inverted")
    ctx, nu, n = Y.ctx, Y.nu, Y.n_trunc
    lower = all(Y.rows[i][j].is_zero_at_prec()
                for i in range(d) for j in range(i + 1, d))
    if not lower:
        upper = all(Y.rows[i][j].is_zero_at_prec()
                    for i in range(d) for j in range(i))
        if not upper:
            raise PreconditionViolated("matrix is not triangular")
        return triangular_inverse(Y.transpose()).transpose()
    one = NuSeries.one(ctx, nu, n)
    for i in range(d):
        if not (Y.rows[i][i] - one).is_zero_at_prec():
            raise PreconditionViolated("diagonal is not unipotent")
    Z = [[one if i == j else NuSeries.zero(ctx, nu, n) for j in range(d)]
         for i in range(d)]
    for j in range(d):
        for i in range(j + 1, d):
            acc = None
            for k in range(j, i):
                t = Y.rows[i][k].mul(Z[k][j], n_out=n)
                acc = t if acc is None else acc + t
            Z[i][j] = -acc
    return MatNu(ctx, nu, Z)


def _perm_sign(perm):
    inv = 0
    for a, b in itertools.combinations(range(len(perm)), 2):
        if perm[a] > perm[b]:
            inv += 1
    return -1 if inv % 2 else 1


def det(M, mul=None):
    """Determinant by signed permutation expansion.  Fine for the ranks
    used here (a handful); mul overrides the entry product when entries
    need a truncation-aware one."""
    rows = M.rows if hasattr(M, "rows") else M
    d = len(rows)
    if d and len(rows[0]) != d:
        raise ValidationError("determinant of a non-square matrix")
    if mul is None and isinstance(M, MatNu):
        n = M.n_trunc
        mul = lambda a, b: a.mul(b, n_out=n)
    if mul is None:
        def mul(a, b):
            if isinstance(M, MatK):
                return _entry_mul(M.ctx, a, b)
            return a * b
    acc = None
    for perm in itertools.permutations(range(d)):
        term = None
        for i in range(d):
            x = rows[i][perm[i]]
            term = x if term is None else mul(term, x)
        if _perm_sign(perm) < 0:
            term = -term
        acc = term if acc is None else acc + term
    return acc
