"""Catalog of magnetic fields used by the confinement criteria.

Each field exposes a potential one-form A (coefficients against dx_1..dx_d,
broadcasting over leading axes) and the field two-form B = dA.  Fields with a
printed closed form (constant, disk counterexample, monopole, dipole) return
it exactly; the rest differentiate the potential by central differences with
a step that shrinks near the domain boundary.

The monopole has no global potential; it carries the standard two-patch
gauge, written in the singularity-free form

    A_north = (m/2) (x dy - y dx) / (r (r + z)),
    A_south = -(m/2) (x dy - y dx) / (r (r - z)),

singular only on the negative (resp. positive) z-axis.  Multipoles of degree
n are iterated derivatives of the charge-2 monopole in its center parameter,
computed by nested central differences with one Richardson extrapolation.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import exterior
from .domains import Ball3D, Disk2D, Polytope, PuncturedSpace, SolidTorus3D, domain_from_json
from .errors import ChartRankError, DomainError, SingularityError, ValidationError
from .exterior import CoVector, PotentialField, TwoForm, norm_sp_batch

SQRT3_OVER_2 = math.sqrt(3.0) / 2.0
_DENOM_TINY = 1e-14


@dataclass
class Polynomial:
    """Multivariate polynomial sum_t c_t * prod_i x_i^{e_ti} with exact gradient."""

    terms: list  # of (coeff, exponent tuple)

    def __post_init__(self):
        cleaned = []
        dim = None
        for coeff, exps in self.terms:
            exps = tuple(int(e) for e in exps)
            if any(e < 0 for e in exps):
                raise ValidationError("polynomial exponents must be nonnegative")
            if dim is None:
                dim = len(exps)
            elif len(exps) != dim:
                raise ValidationError("all polynomial terms must share one dimension")
            cleaned.append((float(coeff), exps))
        if dim is None:
            raise ValidationError("polynomial needs at least one term")
        self.terms = cleaned
        self.dim = dim

    @property
    def degree(self):
        return max(sum(e) for _, e in self.terms)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for coeff, exps in self.terms:
            term = np.full(x.shape[:-1], coeff)
            for i, e in enumerate(exps):
                if e:
                    term = term * x[..., i] ** e
            out = out + term
        return out

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for coeff, exps in self.terms:
            for i, e in enumerate(exps):
                if not e:
                    continue
                term = np.full(x.shape[:-1], coeff * e)
                for j, ej in enumerate(exps):
                    p = ej - 1 if j == i else ej
                    if p:
                        term = term * x[..., j] ** p
                out[..., i] += term
        return out

    def to_json(self):
        return {"terms": [[c, list(e)] for c, e in self.terms]}

    @staticmethod
    def from_json(obj):
        if not isinstance(obj, dict) or set(obj) != {"terms"}:
            raise ValidationError("polynomial JSON must be {'terms': [[coeff, [exps]], ...]}")
        return Polynomial(terms=[(t[0], t[1]) for t in obj["terms"]])


# ---------------------------------------------------------------------------
# reference one-forms used by the toroidal / non-toroidal constructions


class AzimuthalOneForm:
    """(-y dx + x dy) / (x^2 + y^2): the angle form around the z-axis."""

    kind = "azimuthal"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        rho2 = x[..., 0] ** 2 + x[..., 1] ** 2
        if np.any(rho2 < _DENOM_TINY):
            raise SingularityError("azimuthal one-form evaluated on the z-axis")
        out = np.zeros_like(x)
        out[..., 0] = -x[..., 1] / rho2
        out[..., 1] = x[..., 0] / rho2
        return out

    def to_json(self):
        return {"kind": self.kind}


class RotationOneForm:
    """scale * (x dy - y dx): smooth everywhere, pullback to spheres vanishes at the poles."""

    kind = "rotation_z"

    def __init__(self, scale=1.0):
        self.scale = float(scale)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = -self.scale * x[..., 1]
        out[..., 1] = self.scale * x[..., 0]
        return out

    def to_json(self):
        return {"kind": self.kind, "scale": self.scale}


def one_form_from_json(obj):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("one-form JSON must carry a 'kind'")
    kind = obj["kind"]
    if kind == "azimuthal":
        _reject_unknown(obj, {"kind"}, "azimuthal one-form")
        return AzimuthalOneForm()
    if kind == "rotation_z":
        _reject_unknown(obj, {"kind", "scale"}, "rotation_z one-form")
        return RotationOneForm(scale=obj.get("scale", 1.0))
    raise ValidationError(f"unknown one-form kind {kind!r}")


# ---------------------------------------------------------------------------
# field catalog


class MagneticField:
    """Base class: a potential with an optional closed-form two-form."""

    kind = "abstract"
    dim = None
    domain = None

    def potential(self, x):
        raise NotImplementedError

    def field_matrix_batch(self, x, domain=None, step=None):
        """Closed-form (..., d, d) coefficients of dA, or vectorized central
        differences of the potential when no closed form is printed."""
        x = np.asarray(x, dtype=float)
        closed = self._closed_field(x)
        if closed is not None:
            return closed
        dom = domain if domain is not None else self.domain
        squeeze = x.ndim == 1
        pts = x[None, :] if squeeze else x.reshape(-1, self.dim)
        if step is None:
            h = exterior.FD_BASE * (1.0 + np.linalg.norm(pts, axis=-1))
            if dom is not None:
                if not np.all(dom.contains(pts)):
                    raise DomainError("field evaluation outside the domain")
                h = np.minimum(h, exterior.FD_BOUNDARY_FRACTION * dom._distance_raw(pts))
        else:
            h = np.full(pts.shape[0], float(step))
        d = self.dim
        jac = np.empty((pts.shape[0], d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            dx = h[:, None] * e[None, :]
            jac[:, j, :] = (self.potential(pts + dx) - self.potential(pts - dx)) / (2.0 * h[:, None])
        mats = jac - np.swapaxes(jac, -1, -2)
        if squeeze:
            return mats[0]
        return mats.reshape(x.shape[:-1] + (d, d))

    def _closed_field(self, x):
        return None

    def field(self, x, domain=None, step=None) -> TwoForm:
        return TwoForm(self.field_matrix_batch(np.asarray(x, float), domain=domain, step=step))

    def norm_sp(self, x, domain=None):
        out = norm_sp_batch(self.field_matrix_batch(x, domain=domain))
        return float(out) if np.ndim(out) == 0 else out

    def singular_locus_hits(self, x):
        """Boolean mask of points on the field's singular locus (default: none)."""
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1], dtype=bool)

    def as_potential_field(self, domain=None) -> PotentialField:
        closed = None
        if getattr(self, "_has_closed_form", False):
            closed = lambda x: self._closed_field(np.asarray(x, float))
        return PotentialField(
            potential=self.potential,
            dim=self.dim,
            field=closed,
            domain=domain if domain is not None else self.domain,
            meta={"kind": self.kind},
        )

    def to_json(self):
        raise NotImplementedError


class ConstantField(MagneticField):
    """Constant two-form B0 with the linear gauge a(x) = (1/2) B0^T x."""

    kind = "constant"
    _has_closed_form = True

    def __init__(self, two_form, domain=None):
        b = two_form if isinstance(two_form, TwoForm) else TwoForm(two_form)
        self.two_form = b
        self.dim = b.dim
        self.domain = domain

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (x @ self.two_form.entries)

    def _closed_field(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.two_form.entries, x.shape[:-1] + (self.dim, self.dim)).copy()

    def to_json(self):
        return {"kind": "constant", "two_form": self.two_form.entries.tolist()}


class PolytopeField(MagneticField):
    """Blow-up field on a convex polytope: a_2(x) = -sum_i 1/(n_i1 L_i(x)).

    The sign is chosen so that b_12 = sum_i 1/L_i(x)^2 >= D(x)^-2 > 0.
    Requires every facet normal to have a nonzero first component; a generic
    isometry of the polytope always achieves this.
    """

    kind = "polytope_field"
    _has_closed_form = False

    def __init__(self, domain: Polytope):
        if not isinstance(domain, Polytope):
            raise ValidationError("polytope field needs a Polytope domain")
        n1 = np.array([f.normal[0] for f in domain.functionals])
        if np.any(np.abs(n1) < 1e-12):
            raise ValidationError(
                "polytope field needs n_i1 != 0 for every facet; rotate the polytope generically"
            )
        self.domain = domain
        self.dim = domain.dim
        self._n1 = n1

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        vals = self.domain.values(x)
        if np.any(np.abs(vals) < _DENOM_TINY):
            raise SingularityError("polytope potential evaluated on a facet hyperplane")
        out = np.zeros_like(x)
        out[..., 1] = -np.sum(1.0 / (self._n1 * vals), axis=-1)
        return out

    def exact_b12(self, x):
        """Closed-form b_12 = sum_i L_i^-2, used as a cross-check oracle."""
        vals = self.domain.values(x)
        return np.sum(1.0 / vals**2, axis=-1)

    def singular_locus_hits(self, x):
        return np.any(np.abs(self.domain.values(x)) < _DENOM_TINY, axis=-1)

    def to_json(self):
        return {"kind": "polytope_field", "domain": self.domain.to_json()}


class ToroidalField(MagneticField):
    """A = A0 / D^alpha near the boundary of a tubular domain (alpha >= 1)."""

    kind = "toroidal"
    _has_closed_form = False

    def __init__(self, alpha, domain, base_one_form=None):
        if alpha < 1.0:
            raise ValidationError("toroidal field needs alpha >= 1")
        self.alpha = float(alpha)
        self.domain = domain
        self.dim = domain.dim
        self.base_one_form = base_one_form if base_one_form is not None else AzimuthalOneForm()

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.domain.contains(x)):
            raise DomainError("toroidal potential evaluated outside its domain")
        dist = self.domain._distance_raw(x)
        return self.base_one_form(x) / dist[..., None] ** self.alpha

    def to_json(self):
        return {
            "kind": "toroidal",
            "alpha": self.alpha,
            "domain": self.domain.to_json(),
            "base_one_form": self.base_one_form.to_json(),
        }


class NonToroidalField(MagneticField):
    """A = A0 / D^2 on a ball; A0 smooth, its boundary pullback has zeros."""

    kind = "nontoroidal"
    _has_closed_form = False

    def __init__(self, domain: Ball3D, base_one_form=None):
        if not isinstance(domain, Ball3D):
            raise ValidationError("non-toroidal field is defined on a ball")
        self.domain = domain
        self.dim = 3
        self.base_one_form = base_one_form if base_one_form is not None else RotationOneForm(1.0)

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.domain.contains(x)):
            raise DomainError("non-toroidal potential evaluated outside its domain")
        dist = self.domain._distance_raw(x)
        return self.base_one_form(x) / dist[..., None] ** 2

    def to_json(self):
        return {
            "kind": "nontoroidal",
            "domain": self.domain.to_json(),
            "base_one_form": self.base_one_form.to_json(),
        }


class DiskCounterexampleField(MagneticField):
    """A = alpha (x dy - y dx)/(r - 1) on the unit disk, 0 < alpha < sqrt(3)/2.

    Closed form: B = alpha (r - 2)/(r - 1)^2 dx^dy, so the confinement margin
    |B| D^2 equals alpha (2 - r) exactly and tends to alpha at the boundary.
    """

    kind = "disk_counterexample"
    _has_closed_form = True

    def __init__(self, alpha):
        if not (0.0 < alpha < SQRT3_OVER_2):
            raise ValidationError(
                f"disk counterexample needs 0 < alpha < sqrt(3)/2 = {SQRT3_OVER_2:.6f}"
            )
        self.alpha = float(alpha)
        self.dim = 2
        self.domain = Disk2D(1.0)

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        den = r - 1.0
        if np.any(np.abs(den) < _DENOM_TINY):
            raise SingularityError("disk counterexample potential evaluated at r = 1")
        out = np.empty_like(x)
        out[..., 0] = -self.alpha * x[..., 1] / den
        out[..., 1] = self.alpha * x[..., 0] / den
        return out

    def _closed_field(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        den = r - 1.0
        if np.any(np.abs(den) < _DENOM_TINY):
            raise SingularityError("disk counterexample field evaluated at r = 1")
        b = self.alpha * (r - 2.0) / den**2
        mats = np.zeros(x.shape[:-1] + (2, 2))
        mats[..., 0, 1] = b
        mats[..., 1, 0] = -b
        return mats

    def margin_exact(self, r):
        """|B| D^2 at radius r: alpha (2 - r)."""
        return self.alpha * (2.0 - np.asarray(r, dtype=float))

    def singular_locus_hits(self, x):
        r = np.linalg.norm(np.asarray(x, float), axis=-1)
        return np.abs(r - 1.0) < _DENOM_TINY

    def to_json(self):
        return {"kind": "disk_counterexample", "alpha": self.alpha}


class MonopoleField(MagneticField):
    """Charge-m monopole on punctured 3-space; |B|_sp = (|m|/2) / |x|^2."""

    kind = "monopole"
    _has_closed_form = True

    def __init__(self, charge):
        if not isinstance(charge, (int, np.integer)) or isinstance(charge, bool):
            raise ValidationError("monopole charge must be an integer flux quantum")
        self.charge = int(charge)
        self.dim = 3
        self.domain = PuncturedSpace(3)

    def potential(self, x, patch="auto"):
        """Gauge-patch potential.  patch: 'north', 'south', or 'auto' (pick by
        the sign of z, so the Dirac string of the chosen patch is avoided)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r < _DENOM_TINY):
            raise SingularityError("monopole potential evaluated at the origin")
        if patch == "auto":
            north = x[..., 2] >= 0.0
        elif patch == "north":
            north = np.ones(x.shape[:-1], dtype=bool)
        elif patch == "south":
            north = np.zeros(x.shape[:-1], dtype=bool)
        else:
            raise ValidationError("patch must be 'north', 'south', or 'auto'")
        # denominators r (r +/- z) vanish exactly on the patch's Dirac string
        den = np.where(north, r * (r + x[..., 2]), r * (r - x[..., 2]))
        if np.any(np.abs(den) < _DENOM_TINY * np.maximum(r * r, 1.0)):
            raise SingularityError("monopole potential evaluated on the patch's polar axis")
        g = 0.5 * self.charge * np.where(north, 1.0, -1.0) / den
        out = np.zeros_like(x)
        out[..., 0] = -g * x[..., 1]
        out[..., 1] = g * x[..., 0]
        return out

    def _closed_field(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r < _DENOM_TINY):
            raise SingularityError("monopole field evaluated at the origin")
        v = (0.5 * self.charge) * x / r[..., None] ** 3
        mats = np.zeros(x.shape[:-1] + (3, 3))
        mats[..., 1, 2] = v[..., 0]
        mats[..., 2, 1] = -v[..., 0]
        mats[..., 2, 0] = v[..., 1]
        mats[..., 0, 2] = -v[..., 1]
        mats[..., 0, 1] = v[..., 2]
        mats[..., 1, 0] = -v[..., 2]
        return mats

    def flux_through_sphere(self):
        """Total flux through any origin-centered sphere: 2 pi m exactly."""
        return 2.0 * math.pi * self.charge

    def singular_locus_hits(self, x):
        return np.linalg.norm(np.asarray(x, float), axis=-1) < _DENOM_TINY

    def to_json(self):
        return {"kind": "monopole", "charge": self.charge}


class DipoleField(MagneticField):
    """Derivative of the charge-2 monopole along a unit direction V.

    Closed form (axial vector): w(x) = (3 (V.xhat) xhat - V)/|x|^3, with the
    global potential A = (V cross x)/|x|^3.  Homogeneous of degree -3 and
    nowhere vanishing, so |B|_sp |x|^2 blows up like 1/|x| at the origin.
    """

    kind = "dipole"
    _has_closed_form = True

    def __init__(self, direction=(0.0, 0.0, 1.0)):
        v = np.asarray(direction, dtype=float).reshape(3)
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            raise ValidationError("dipole direction must be nonzero")
        self.direction = v / nv
        self.dim = 3
        self.domain = PuncturedSpace(3)

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r < _DENOM_TINY):
            raise SingularityError("dipole potential evaluated at the origin")
        return np.cross(np.broadcast_to(self.direction, x.shape), x) / r[..., None] ** 3

    def axial(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r < _DENOM_TINY):
            raise SingularityError("dipole field evaluated at the origin")
        xhat = x / r[..., None]
        c = np.sum(xhat * self.direction, axis=-1)
        return (3.0 * c[..., None] * xhat - self.direction) / r[..., None] ** 3

    def _closed_field(self, x):
        v = self.axial(x)
        x = np.asarray(x, dtype=float)
        mats = np.zeros(x.shape[:-1] + (3, 3))
        mats[..., 1, 2] = v[..., 0]
        mats[..., 2, 1] = -v[..., 0]
        mats[..., 2, 0] = v[..., 1]
        mats[..., 0, 2] = -v[..., 1]
        mats[..., 0, 1] = v[..., 2]
        mats[..., 1, 0] = -v[..., 2]
        return mats

    def singular_locus_hits(self, x):
        return np.linalg.norm(np.asarray(x, float), axis=-1) < _DENOM_TINY

    def to_json(self):
        return {"kind": "dipole", "direction": self.direction.tolist()}


def multipole_field(directions, x, rel_step=1e-2):
    """Degree-n multipole two-form by nested center-parameter differences.

    B_P(x) = P(d/dc)|_{c=0} B_2(x - c) for P the product of directional
    derivatives along ``directions``; one Richardson extrapolation in the step
    (scaled by |x|) removes the leading O(h^2) error.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    dirs = [np.asarray(v, dtype=float).reshape(3) for v in directions]
    dirs = [v / np.linalg.norm(v) for v in dirs]
    base = MonopoleField(2)

    def nested(pt, remaining, h):
        if not remaining:
            return base._closed_field(pt)
        v, rest = remaining[0], remaining[1:]
        return (nested(pt - h * v, rest, h) - nested(pt + h * v, rest, h)) / (2.0 * h)

    h = rel_step * float(np.linalg.norm(x))
    if h == 0.0:
        raise SingularityError("multipole field evaluated at the origin")
    coarse = nested(x, dirs, h)
    fine = nested(x, dirs, 0.5 * h)
    return TwoForm((4.0 * fine - coarse) / 3.0)


class MultipoleField(MagneticField):
    """Multipole of arbitrary degree; degree 0 is the charge-2 monopole,
    degree 1 matches the dipole closed form to O(h^2)."""

    kind = "multipole"
    _has_closed_form = False

    def __init__(self, directions):
        self.directions = [np.asarray(v, float).reshape(3) / np.linalg.norm(v) for v in directions]
        self.degree = len(self.directions)
        self.dim = 3
        self.domain = PuncturedSpace(3)

    def potential(self, x, rel_step=1e-2):
        x = np.asarray(x, dtype=float)
        if self.degree == 0:
            return MonopoleField(2).potential(x)
        base = DipoleField(self.directions[0])
        rest = self.directions[1:]
        squeeze = x.ndim == 1
        pts = x.reshape(-1, 3)

        def nested(pt, remaining, h):
            if not remaining:
                return base.potential(pt)
            v, tail = remaining[0], remaining[1:]
            return (nested(pt - h * v, tail, h) - nested(pt + h * v, tail, h)) / (2.0 * h)

        out = np.empty_like(pts)
        for i, pt in enumerate(pts):
            h = rel_step * float(np.linalg.norm(pt))
            if h == 0.0:
                raise SingularityError("multipole potential evaluated at the origin")
            coarse = nested(pt, rest, h)
            fine = nested(pt, rest, 0.5 * h)
            out[i] = (4.0 * fine - coarse) / 3.0
        return out[0] if squeeze else out.reshape(x.shape)

    def field_matrix_batch(self, x, domain=None, step=None):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        pts = x.reshape(-1, 3)
        mats = np.empty((pts.shape[0], 3, 3))
        for i, pt in enumerate(pts):
            mats[i] = multipole_field(self.directions, pt).entries
        return mats[0] if squeeze else mats.reshape(x.shape[:-1] + (3, 3))

    def singular_locus_hits(self, x):
        return np.linalg.norm(np.asarray(x, float), axis=-1) < _DENOM_TINY

    def to_json(self):
        return {"kind": "multipole", "directions": [v.tolist() for v in self.directions]}


class GaugeShiftField(MagneticField):
    """base potential plus the exact gradient of a polynomial: same field."""

    kind = "gauge_shift"

    def __init__(self, base: MagneticField, polynomial: Polynomial):
        if polynomial.dim != base.dim:
            raise ValidationError("gauge polynomial dimension must match the base field")
        self.base = base
        self.polynomial = polynomial
        self.dim = base.dim
        self.domain = base.domain

    @property
    def _has_closed_form(self):
        return getattr(self.base, "_has_closed_form", False)

    def potential(self, x):
        return self.base.potential(x) + self.polynomial.gradient(x)

    def field_matrix_batch(self, x, domain=None, step=None):
        # Bit-identical to the base field: the gauge term never enters.
        return self.base.field_matrix_batch(x, domain=domain, step=step)

    def _closed_field(self, x):
        return self.base._closed_field(x)

    def singular_locus_hits(self, x):
        return self.base.singular_locus_hits(x)

    def to_json(self):
        return {
            "kind": "gauge_shift",
            "base": self.base.to_json(),
            "polynomial": self.polynomial.to_json(),
        }


# ---------------------------------------------------------------------------
# module-level operations (spec interface)


def evaluate_potential(f: MagneticField, x) -> CoVector:
    """Potential one-form of a catalog field at a point."""
    return CoVector(f.potential(np.asarray(x, dtype=float)))


def evaluate_field(f: MagneticField, x, domain=None, step=None) -> TwoForm:
    """Field two-form at a point: closed form where printed, else d(potential)."""
    return f.field(x, domain=domain, step=step)


def _reject_unknown(obj, known, what):
    unknown = set(obj) - known
    if unknown:
        raise ValidationError(f"unknown keys for {what}: {sorted(unknown)}")


def field_from_json(obj) -> MagneticField:
    """Rebuild a catalog field from its JSON dict (unknown kinds/keys rejected)."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("field JSON must be an object with a 'kind' key")
    kind = obj["kind"]
    if kind == "constant":
        _reject_unknown(obj, {"kind", "two_form"}, "constant field")
        return ConstantField(np.asarray(obj["two_form"], dtype=float))
    if kind == "polytope_field":
        _reject_unknown(obj, {"kind", "domain"}, "polytope field")
        dom = domain_from_json(obj["domain"])
        return PolytopeField(dom)
    if kind == "toroidal":
        _reject_unknown(obj, {"kind", "alpha", "domain", "base_one_form"}, "toroidal field")
        dom = domain_from_json(obj["domain"])
        a0 = one_form_from_json(obj["base_one_form"]) if "base_one_form" in obj else None
        return ToroidalField(obj["alpha"], dom, base_one_form=a0)
    if kind == "nontoroidal":
        _reject_unknown(obj, {"kind", "domain", "base_one_form"}, "non-toroidal field")
        dom = domain_from_json(obj["domain"])
        a0 = one_form_from_json(obj["base_one_form"]) if "base_one_form" in obj else None
        return NonToroidalField(dom, base_one_form=a0)
    if kind == "disk_counterexample":
        _reject_unknown(obj, {"kind", "alpha"}, "disk counterexample")
        return DiskCounterexampleField(obj["alpha"])
    if kind == "monopole":
        _reject_unknown(obj, {"kind", "charge"}, "monopole")
        return MonopoleField(obj["charge"])
    if kind == "dipole":
        _reject_unknown(obj, {"kind", "direction"}, "dipole")
        return DipoleField(obj["direction"])
    if kind == "multipole":
        _reject_unknown(obj, {"kind", "directions"}, "multipole")
        return MultipoleField(obj["directions"])
    if kind == "gauge_shift":
        _reject_unknown(obj, {"kind", "base", "polynomial"}, "gauge shift")
        return GaugeShiftField(field_from_json(obj["base"]), Polynomial.from_json(obj["polynomial"]))
    raise ValidationError(f"unknown field kind {kind!r}")


# ---------------------------------------------------------------------------
# boundary one-form analysis (non-toroidal assumption check)


@dataclass
class OneFormZero:
    point: np.ndarray
    derivative_norm_sp: float


@dataclass
class OneFormBoundaryReport:
    zeros: list  # of OneFormZero
    assumption_satisfied: bool  # |d omega|_sp > 1 at every zero
    max_tangential_norm: float


class _SphereSurface:
    def __init__(self, radius):
        self.radius = float(radius)

    def grid(self, resolution):
        n_th = max(resolution // 2, 8)
        n_ph = max(resolution, 16)
        th = (np.arange(n_th) + 0.5) * np.pi / n_th
        ph = 2 * np.pi * np.arange(n_ph) / n_ph
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        pts = self.radius * np.stack(
            [np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], axis=-1
        )
        # include the poles, which the open grid misses
        poles = self.radius * np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        return np.concatenate([pts.reshape(-1, 3), poles])

    def normal(self, p):
        return p / np.linalg.norm(p)

    def project(self, p):
        return self.radius * p / np.linalg.norm(p)

    def local_chart(self, p0, frame):
        e1, e2 = frame

        def chart(u):
            q = p0 + u[0] * e1 + u[1] * e2
            return self.radius * q / np.linalg.norm(q)

        return chart


class _TorusSurface:
    def __init__(self, major_radius, minor_radius):
        self.major = float(major_radius)
        self.minor = float(minor_radius)

    def grid(self, resolution):
        n_phi = max(resolution, 16)
        n_psi = max(resolution // 2, 8)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        psi = 2 * np.pi * np.arange(n_psi) / n_psi
        PHI, PSI = np.meshgrid(phi, psi, indexing="ij")
        rho = self.major + self.minor * np.cos(PSI)
        pts = np.stack([rho * np.cos(PHI), rho * np.sin(PHI), self.minor * np.sin(PSI)], axis=-1)
        return pts.reshape(-1, 3)

    def normal(self, p):
        rho = math.hypot(p[0], p[1])
        e_rho = np.array([p[0] / rho, p[1] / rho, 0.0])
        center = self.major * e_rho
        v = p - center
        return v / np.linalg.norm(v)

    def project(self, p):
        rho = math.hypot(p[0], p[1])
        e_rho = np.array([p[0] / rho, p[1] / rho, 0.0])
        center = self.major * e_rho
        v = p - center
        return center + self.minor * v / np.linalg.norm(v)

    def local_chart(self, p0, frame):
        e1, e2 = frame

        def chart(u):
            return self.project(p0 + u[0] * e1 + u[1] * e2)

        return chart


def _tangent_frame(normal, seed_vec=None):
    n = normal / np.linalg.norm(normal)
    ref = seed_vec if seed_vec is not None else (
        np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    )
    e1 = ref - np.dot(ref, n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def _surface_for_domain(domain):
    if isinstance(domain, Ball3D):
        return _SphereSurface(domain.radius)
    if isinstance(domain, SolidTorus3D):
        return _TorusSurface(domain.major_radius, domain.minor_radius)
    raise ValidationError("boundary one-form analysis supports ball3d and solid_torus3d domains")


def boundary_one_form_analysis(field, resolution=48, retries=3):
    """Locate the zeros of the boundary pullback of a field's reference
    one-form and test the non-degeneracy assumption |d omega|_sp > 1 there.

    Parameters
    ----------
    field : NonToroidalField or ToroidalField
        Supplies the smooth reference one-form A0 and the domain whose
        boundary is scanned (sphere or torus).
    resolution : int
        Angular grid resolution of the coarse scan.
    retries : int
        Rotated-chart retries per candidate before giving up.

    Returns
    -------
    OneFormBoundaryReport
        Refined zero locations with |d omega|_sp at each, and the flag that is
        true iff the norm exceeds 1 at every zero (vacuously true when the
        pullback never vanishes, e.g. the toroidal reference form).
    """
    if not hasattr(field, "base_one_form"):
        raise ValidationError("field must carry a base one-form (toroidal / nontoroidal kinds)")
    a0 = field.base_one_form
    surface = _surface_for_domain(field.domain)
    pts = surface.grid(resolution)

    def tangential_norm(p):
        a = np.asarray(a0(p), dtype=float)
        n = surface.normal(p)
        t = a - np.dot(a, n) * n
        return float(np.linalg.norm(t))

    tnorms = np.array([tangential_norm(p) for p in pts])
    scale = max(float(np.max(tnorms)), 1e-30)
    order = np.argsort(tnorms)
    zeros = []
    zero_tol = 1e-8 * scale
    candidate_tol = 0.25 * scale
    sep = 0.05 * max(getattr(surface, "radius", 0.0), getattr(surface, "major", 0.0), 1.0)

    for idx in order:
        if tnorms[idx] > candidate_tol:
            break
        p0 = pts[idx]
        if any(np.linalg.norm(p0 - z.point) < sep for z in zeros):
            continue
        refined = None
        for attempt in range(retries):
            seed = None
            if attempt:
                rng = np.random.default_rng(attempt)
                seed = rng.normal(size=3)
            frame = _tangent_frame(surface.normal(p0), seed_vec=seed)
            chart = surface.local_chart(p0, frame)
            res = minimize(
                lambda u: tangential_norm(chart(u)) ** 2,
                x0=np.zeros(2),
                method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 400},
            )
            q = chart(res.x)
            if tangential_norm(q) <= zero_tol:
                refined = q
                break
        if refined is None:
            # candidate did not converge to a genuine zero; skip it unless it
            # looked like one on the coarse grid
            if tnorms[idx] <= 1e-6 * scale:
                raise ChartRankError("zero refinement failed after rotated-chart retries")
            continue
        if any(np.linalg.norm(refined - z.point) < sep for z in zeros):
            continue
        n = surface.normal(refined)
        e1, e2 = _tangent_frame(n)
        A0f = PotentialField(potential=lambda x: np.asarray(a0(x), float), dim=3)
        dmat = exterior.exterior_derivative(A0f, refined).entries
        dnorm = abs(float(e1 @ dmat @ e2))
        zeros.append(OneFormZero(point=refined, derivative_norm_sp=dnorm))

    ok = all(z.derivative_norm_sp > 1.0 for z in zeros)
    return OneFormBoundaryReport(zeros=zeros, assumption_satisfied=ok, max_tangential_norm=scale)
