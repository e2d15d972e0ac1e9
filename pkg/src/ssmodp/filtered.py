"""Data model for effective filtered (phi, N)-modules over a p-adic field.

A module of rank d is a quadruple of matrices over the context's fields:
Phi (the Frobenius matrix, over the unramified layer), Nmat (the monodromy
operator, over the unramified layer), H (the weakly decreasing filtration
jumps), and F (the matrix over K whose column i spans the filtration step
of depth H[i] together with the earlier columns).

Ingestion (`from_dict`) sorts the jumps, twists the module until it is
effective with an integral Frobenius matrix (recording the twist so the
final answer can be untwisted), normalizes F into the integral general
linear group by the pivoting factorization, and rejects inputs that break
the monodromy relation or the Newton-Hodge balance.  `validate` is the
non-destructive, report-style counterpart.
"""

import math

from .errors import (
    NotAdmissible,
    NotCertifiable,
    IndistinguishableFromZero,
    ValidationError,
)
from .linalg import MatK, det, plu_integral
from .padic import PadicContext, RamElem, elem_from_dict


def _ceil_int(x):
    return int(math.ceil(x))


def _entry_from_json(ctx, obj, default_prec):
    """One matrix entry from its JSON form.

    Accepted forms: a plain integer (labeled with the global precision),
    a {"val_unit", "poly", "prec"} object for an unramified-layer value,
    or a list of e such objects for a ramified-layer value, coordinate by
    coordinate along 1, u, ..., u^(e-1).
    """
    if isinstance(obj, int):
        return ctx.from_int(obj, prec=default_prec)
    if isinstance(obj, dict):
        return elem_from_dict(ctx, obj)
    if isinstance(obj, list):
        coords = [_entry_from_json(ctx, c, default_prec) for c in obj]
        if len(coords) > ctx.e:
            raise ValidationError("ramified entry has more than e coordinates")
        if any(isinstance(c, RamElem) for c in coords):
            raise ValidationError("ramified coordinates must be scalars")
        return RamElem(ctx, coords)
    raise ValidationError(f"cannot read a field entry from {obj!r}")


def _entry_to_json(x):
    if isinstance(x, RamElem):
        return [c.to_dict() for c in x.coeffs]
    return x.to_dict()


def _rational_coeff(obj):
    """Eisenstein-coefficient JSON: an int, or [num, k] meaning num/p^k."""
    if isinstance(obj, int):
        return obj, 0
    if isinstance(obj, list) and len(obj) == 2:
        return int(obj[0]), int(obj[1])
    raise ValidationError(f"cannot read a defining coefficient from {obj!r}")


class HodgeNewtonData:
    """The two numbers whose balance is the first admissibility test."""

    __slots__ = ("t_N", "t_H")

    def __init__(self, t_N, t_H):
        self.t_N = t_N
        self.t_H = t_H

    def is_balanced(self):
        return self.t_N == self.t_H

    def __repr__(self):
        return "HodgeNewtonData(t_N=%s, t_H=%s)" % (self.t_N, self.t_H)


class FilteredPhiNModule:
    """An effective filtered (phi, N)-module, immutable after creation.

    Invariants enforced here: square shapes, H weakly decreasing; the
    deeper relations (monodromy, Newton-Hodge balance, integrality) are
    checked by validate() and enforced at ingestion.
    """

    __slots__ = ("ctx", "d", "Phi", "Nmat", "H", "F", "twist")

    def __init__(self, ctx, Phi, Nmat, H, F, twist=0):
        H = tuple(int(h) for h in H)
        d = len(H)
        for name, M in (("Phi", Phi), ("Nmat", Nmat), ("F", F)):
            if M.nrows != d or M.ncols != d:
                raise ValidationError(f"{name} must be {d} x {d}")
        if any(H[i] < H[i + 1] for i in range(d - 1)):
            raise ValidationError(
                "filtration jumps must be weakly decreasing; "
                "ingest unsorted data through from_data")
        self.ctx = ctx
        self.d = d
        self.Phi = Phi
        self.Nmat = Nmat
        self.H = H
        self.F = F
        self.twist = int(twist)

    @classmethod
    def from_data(cls, ctx, Phi, Nmat, H, F, twist=0):
        """Build from possibly unsorted jumps, permuting the columns of F
        along with H so each column keeps its own jump."""
        d = len(H)
        order = sorted(range(d), key=lambda i: -H[i])
        H_sorted = [H[i] for i in order]
        F_sorted = MatK(ctx, [[F.rows[i][order[j]] for j in range(d)]
                              for i in range(d)])
        return cls(ctx, Phi, Nmat, H_sorted, F_sorted, twist)

    # -- numbers and reports ------------------------------------------------

    def hodge_newton(self):
        t_N = det(self.Phi).val()
        t_H = sum(max(h, 0) for h in self.H)
        return HodgeNewtonData(t_N, t_H)

    def validate(self, prec=None):
        """Necessary-condition report: monodromy relation, Newton-Hodge
        balance, effectivity, and integral invertibility of F.  Full
        admissibility over all stable submodules is not decided here.

        prec feeds the Frobenius twist of exact entries when the
        unramified layer is a proper extension.
        """
        report = {}
        try:
            lhs = self.Nmat * self.Phi
            rhs = (self.Phi * self.Nmat.sigma(1, prec)).map_entries(
                lambda x: x.scale_p(1))
            report["monodromy"] = (lhs - rhs).is_zero_at_prec()
        except (ValueError, NotCertifiable) as exc:
            report["monodromy"] = False
            report["monodromy_reason"] = str(exc)
        try:
            hn = self.hodge_newton()
            report["newton_number"] = hn.t_N
            report["hodge_number"] = hn.t_H
            report["balanced"] = hn.is_balanced()
        except (NotCertifiable, IndistinguishableFromZero) as exc:
            report["balanced"] = False
            report["balanced_reason"] = str(exc)
        report["effective"] = self.H[-1] >= 0 if self.H else True
        try:
            integral = self.F.min_val_lb() >= 0
            unit_det = det(self.F).val() == 0
            report["f_unimodular"] = bool(integral and unit_det)
        except (NotCertifiable, IndistinguishableFromZero) as exc:
            report["f_unimodular"] = False
            report["f_unimodular_reason"] = str(exc)
        report["all_pass"] = all(report.get(k, False) for k in
                                 ("monodromy", "balanced", "effective",
                                  "f_unimodular"))
        return report

    # -- transformations ------------------------------------------------------

    def twist_effective(self, k):
        """Scale Phi by p^k and shift every jump by k, recording the twist
        so the final classification can be untwisted."""
        k = int(k)
        if k == 0:
            return self
        Phi = self.Phi.map_entries(lambda x: x.scale_p(k))
        return FilteredPhiNModule(self.ctx, Phi, self.Nmat,
                                  [h + k for h in self.H], self.F,
                                  self.twist + k)

    def normalize_F(self, prec=None):
        """Replace F by the integral factor of its pivoting factorization.
        The discarded factor is upper triangular, so with decreasing jumps
        every filtration step keeps its span."""
        Mp, _U = plu_integral(self.F, prec=prec)
        return FilteredPhiNModule(self.ctx, self.Phi, self.Nmat, self.H,
                                  Mp, self.twist)

    def effective_integral_form(self, prec=None):
        """The smallest twist making the module effective with an integral
        Frobenius matrix, followed by F-normalization when needed."""
        k = 0
        if self.H and self.H[-1] < 0:
            k = -self.H[-1]
        mv = self.Phi.min_val_lb()
        if mv is not math.inf and mv < 0:
            k = max(k, _ceil_int(-mv))
        out = self.twist_effective(k)
        try:
            ok = out.F.min_val_lb() >= 0 and det(out.F).val() == 0
        except (NotCertifiable, IndistinguishableFromZero):
            ok = False
        if not ok:
            out = out.normalize_F(prec=prec)
        return out

    # -- serialization --------------------------------------------------------

    @classmethod
    def from_dict(cls, data, strict=True):
        """Read the interchange form (see to_dict) and ingest: sort jumps,
        twist to the effective integral form, normalize F, and in strict
        mode reject broken monodromy or an unbalanced Newton-Hodge pair."""
        p = int(data["p"])
        f = int(data.get("f", 1))
        F_poly = data.get("F_poly")
        if F_poly is None:
            F_poly = [0] * f + [1]
        e_coeffs = []
        for obj in data["E_poly"]:
            num, kden = _rational_coeff(obj)
            if kden != 0:
                if num % (p ** kden):
                    raise ValidationError(
                        "defining polynomial must have integral coefficients")
                num //= p ** kden
            e_coeffs.append(num)
        ctx = PadicContext(p, F_poly, e_coeffs)
        d = int(data["d"])
        default_prec = data.get("precision")
        def read_mat(key):
            rows = data[key]
            if len(rows) != d or any(len(r) != d for r in rows):
                raise ValidationError(f"{key} must be {d} x {d}")
            return MatK(ctx, [[_entry_from_json(ctx, x, default_prec)
                               for x in row] for row in rows])
        Phi = read_mat("Phi")
        Nmat = read_mat("N")
        F = read_mat("Fmat")
        H = [int(h) for h in data["H"]]
        if len(H) != d:
            raise ValidationError("H must list one jump per basis column")
        mod = cls.from_data(ctx, Phi, Nmat, H, F,
                            twist=int(data.get("twist", 0)))
        mod = mod.effective_integral_form(prec=default_prec)
        if strict:
            report = mod.validate(prec=default_prec)
            if not report["monodromy"]:
                raise ValidationError(
                    "monodromy relation fails at the stated precision")
            if not report["balanced"]:
                raise NotAdmissible(
                    "Newton and Hodge numbers differ: %s vs %s" % (
                        report.get("newton_number"),
                        report.get("hodge_number")))
            if not report["f_unimodular"]:
                raise ValidationError(
                    "filtration matrix is not invertible over the integers "
                    "at the stated precision")
        return mod

    def to_dict(self, precision=None):
        ctx = self.ctx
        e_poly = []
        for c in ctx.E:
            if all(u == 0 for u in c.unit[1:]):
                e_poly.append([c.unit[0] * ctx.p ** c.k if any(c.unit) else 0,
                               0])
            else:
                e_poly.append([list(c.unit), c.k])
        out = {
            "p": ctx.p,
            "f": ctx.f,
            "F_poly": list(ctx.F),
            "E_poly": e_poly,
            "d": self.d,
            "Phi": [[_entry_to_json(x) for x in row] for row in self.Phi.rows],
            "N": [[_entry_to_json(x) for x in row] for row in self.Nmat.rows],
            "H": list(self.H),
            "Fmat": [[_entry_to_json(x) for x in row] for row in self.F.rows],
            "twist": self.twist,
        }
        if precision is not None:
            out["precision"] = precision
        return out

    def __eq__(self, other):
        return (isinstance(other, FilteredPhiNModule)
                and self.ctx.p == other.ctx.p and self.ctx.F == other.ctx.F
                and self.H == other.H and self.twist == other.twist
                and self.Phi == other.Phi and self.Nmat == other.Nmat
                and self.F == other.F)

    def __repr__(self):
        return ("FilteredPhiNModule(d=%d, H=%s, twist=%d)"
                % (self.d, list(self.H), self.twist))
