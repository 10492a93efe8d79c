"""Domains with an exact distance-to-boundary function.

Every domain here admits a closed-form distance D(x) to its boundary, which
is what the confinement criterion compares against the field's spectral norm.
Supported kinds: planar disk and annulus, 3-d ball, solid torus, convex
polytopes cut out by affine functionals, and punctured Euclidean space (the
boundary is the deleted point).
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, RangeError, ValidationError


@dataclass
class Ray:
    """A boundary anchor with sample points marching inward at given depths.

    For bounded domains ``anchor`` is a boundary point and ``inward`` the unit
    inward normal there; points[i] = anchor + depths[i] * inward.  For
    punctured space the anchor is a unit direction u and points[i] =
    depths[i] * u approach the deleted origin radially.
    """

    anchor: np.ndarray
    inward: np.ndarray
    depths: np.ndarray
    points: np.ndarray  # shape (len(depths), d)


class Domain(ABC):
    """Open connected region with exact boundary distance."""

    dim: int

    @abstractmethod
    def contains(self, x) -> np.ndarray:
        """Strict interior test, broadcasting over leading axes of x."""

    @abstractmethod
    def _distance_raw(self, x) -> np.ndarray:
        pass

    @abstractmethod
    def inradius(self) -> float:
        pass

    @abstractmethod
    def bounding_box(self):
        """(lo, hi) arrays enclosing the domain; DomainError if unbounded."""

    @abstractmethod
    def _anchors(self, n, rng):
        """n boundary anchors with inward unit normals: (anchors, inwards)."""

    @abstractmethod
    def to_json(self) -> dict:
        pass

    def distance(self, x):
        """Distance to the boundary.  Raises DomainError off the interior."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DomainError(f"point dimension {x.shape[-1]} != domain dimension {self.dim}")
        inside = self.contains(x)
        if not np.all(inside):
            raise DomainError("distance requested at a point outside the domain")
        d = self._distance_raw(x)
        return float(d) if np.ndim(d) == 0 else d

    def near_boundary_rays(self, n_points, depths, rng=None):
        """Sample rays marching inward from boundary anchors.

        Parameters
        ----------
        n_points : int
            Number of boundary anchors.
        depths : array_like
            Strictly positive depths below the inradius, any order.
        rng : numpy Generator, optional
            Only consulted by domain kinds without a canonical anchor layout.

        Returns
        -------
        list of Ray
        """
        depths = np.asarray(depths, dtype=float).reshape(-1)
        if depths.size == 0 or np.any(depths <= 0):
            raise RangeError("depths must be strictly positive")
        if np.any(depths >= self.inradius()):
            raise RangeError(
                f"depths must stay below the inradius {self.inradius():.6g}"
            )
        if n_points < 1:
            raise RangeError("need at least one anchor")
        anchors, inwards = self._anchors(int(n_points), rng)
        rays = []
        for a, nvec in zip(anchors, inwards):
            pts = a[None, :] + depths[:, None] * nvec[None, :]
            rays.append(Ray(anchor=a, inward=nvec, depths=depths.copy(), points=pts))
        return rays

    def sample_interior(self, n, rng, min_depth=0.0):
        """Rejection-sample n interior points (optionally at depth >= min_depth)."""
        lo, hi = self.bounding_box()
        out = np.empty((n, self.dim))
        got = 0
        tries = 0
        while got < n:
            tries += 1
            if tries > 10000:
                raise RangeError("interior sampling failed; domain too thin?")
            cand = rng.uniform(lo, hi, size=(max(2 * (n - got), 64), self.dim))
            keep = self.contains(cand)
            if min_depth > 0.0:
                d = self._distance_raw(cand)
                keep = keep & (d >= min_depth)
            cand = cand[keep]
            take = min(n - got, cand.shape[0])
            out[got : got + take] = cand[:take]
            got += take
        return out


def _unit_rows(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _circle_points(n, radius, phase=0.0):
    th = phase + 2 * np.pi * np.arange(n) / n
    return radius * np.stack([np.cos(th), np.sin(th)], axis=-1)


def _fibonacci_sphere(n):
    # Deterministic, nearly uniform unit vectors on S^2.
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    th = golden * i
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=-1)


class Disk2D(Domain):
    dim = 2

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValidationError("disk radius must be positive")
        self.radius = float(radius)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x, axis=-1) < self.radius

    def _distance_raw(self, x):
        return self.radius - np.linalg.norm(np.asarray(x, float), axis=-1)

    def inradius(self):
        return self.radius

    def bounding_box(self):
        r = self.radius
        return -r * np.ones(2), r * np.ones(2)

    def _anchors(self, n, rng):
        anchors = _circle_points(n, self.radius)
        return anchors, -anchors / self.radius

    def to_json(self):
        return {"kind": "disk2d", "radius": self.radius}


class Ball3D(Domain):
    dim = 3

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValidationError("ball radius must be positive")
        self.radius = float(radius)

    def contains(self, x):
        return np.linalg.norm(np.asarray(x, float), axis=-1) < self.radius

    def _distance_raw(self, x):
        return self.radius - np.linalg.norm(np.asarray(x, float), axis=-1)

    def inradius(self):
        return self.radius

    def bounding_box(self):
        r = self.radius
        return -r * np.ones(3), r * np.ones(3)

    def _anchors(self, n, rng):
        dirs = _fibonacci_sphere(n)
        return self.radius * dirs, -dirs

    def to_json(self):
        return {"kind": "ball3d", "radius": self.radius}


class Annulus2D(Domain):
    dim = 2

    def __init__(self, r_in, r_out):
        if not (0 < r_in < r_out):
            raise ValidationError("annulus needs 0 < r_in < r_out")
        self.r_in = float(r_in)
        self.r_out = float(r_out)

    def contains(self, x):
        r = np.linalg.norm(np.asarray(x, float), axis=-1)
        return (r > self.r_in) & (r < self.r_out)

    def _distance_raw(self, x):
        r = np.linalg.norm(np.asarray(x, float), axis=-1)
        return np.minimum(r - self.r_in, self.r_out - r)

    def inradius(self):
        return 0.5 * (self.r_out - self.r_in)

    def bounding_box(self):
        r = self.r_out
        return -r * np.ones(2), r * np.ones(2)

    def _anchors(self, n, rng):
        # Split anchors between the two boundary circles.
        n_out = (n + 1) // 2
        n_in = n - n_out
        a_out = _circle_points(n_out, self.r_out)
        pieces = [(a_out, -a_out / self.r_out)]
        if n_in > 0:
            a_in = _circle_points(n_in, self.r_in, phase=np.pi / max(n_in, 1))
            pieces.append((a_in, a_in / self.r_in))
        anchors = np.concatenate([p[0] for p in pieces])
        inwards = np.concatenate([p[1] for p in pieces])
        return anchors, inwards

    def to_json(self):
        return {"kind": "annulus2d", "r_in": self.r_in, "r_out": self.r_out}


class SolidTorus3D(Domain):
    """Solid torus: distance a - sqrt((rho - R)^2 + z^2) to the boundary,
    measured from the center circle of major radius R in the xy-plane."""

    dim = 3

    def __init__(self, major_radius, minor_radius):
        if not (0 < minor_radius < major_radius):
            raise ValidationError("solid torus needs 0 < minor_radius < major_radius")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)

    def _core_dist(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.linalg.norm(x[..., :2], axis=-1)
        return np.sqrt((rho - self.major_radius) ** 2 + x[..., 2] ** 2)

    def contains(self, x):
        return self._core_dist(x) < self.minor_radius

    def _distance_raw(self, x):
        return self.minor_radius - self._core_dist(x)

    def inradius(self):
        return self.minor_radius

    def bounding_box(self):
        R, a = self.major_radius, self.minor_radius
        return (
            np.array([-(R + a), -(R + a), -a]),
            np.array([R + a, R + a, a]),
        )

    def _anchors(self, n, rng):
        # Near-square grid in the toroidal and poloidal angles.
        n_phi = max(int(round(math.sqrt(n * self.major_radius / self.minor_radius))), 1)
        n_psi = max(int(math.ceil(n / n_phi)), 1)
        phis = 2 * np.pi * np.arange(n_phi) / n_phi
        psis = 2 * np.pi * np.arange(n_psi) / n_psi
        anchors, inwards = [], []
        for phi in phis:
            e_rho = np.array([np.cos(phi), np.sin(phi), 0.0])
            e_z = np.array([0.0, 0.0, 1.0])
            center = self.major_radius * e_rho
            for psi in psis:
                out = np.cos(psi) * e_rho + np.sin(psi) * e_z
                anchors.append(center + self.minor_radius * out)
                inwards.append(-out)
                if len(anchors) == n:
                    return np.array(anchors), np.array(inwards)
        return np.array(anchors), np.array(inwards)

    def to_json(self):
        return {
            "kind": "solid_torus3d",
            "major_radius": self.major_radius,
            "minor_radius": self.minor_radius,
        }


@dataclass
class AffineFunctional:
    """L(x) = normal . x + offset with |normal| = 1 (normalized on construction)."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(-1)
        ln = float(np.linalg.norm(n))
        if ln == 0.0:
            raise ValidationError("affine functional needs a nonzero normal")
        self.normal = n / ln
        self.offset = float(self.offset) / ln

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.normal + self.offset

    def to_json(self):
        return {"normal": self.normal.tolist(), "offset": self.offset}


class Polytope(Domain):
    """Bounded convex polytope { x : L_i(x) < 0 for all i }.

    The boundary distance is min_i |L_i(x)|, exact because the functionals are
    unit-normalized and the region is convex.
    """

    def __init__(self, functionals):
        if len(functionals) < 2:
            raise ValidationError("polytope needs at least two facets")
        self.functionals = list(functionals)
        self.dim = self.functionals[0].normal.shape[0]
        for f in self.functionals:
            if f.normal.shape[0] != self.dim:
                raise ValidationError("all facet normals must share one dimension")
        self._N = np.array([f.normal for f in self.functionals])
        self._off = np.array([f.offset for f in self.functionals])
        self._chebyshev = self._solve_chebyshev()
        if self._chebyshev[1] <= 0:
            raise ValidationError("polytope has empty interior")

    def _solve_chebyshev(self):
        # max r s.t. N x + off + r <= 0, plus a box on x to keep the LP bounded.
        k, d = self._N.shape
        c = np.zeros(d + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self._N, np.ones((k, 1))])
        b_ub = -self._off
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(-1e6, 1e6)] * d + [(0, 1e6)], method="highs")
        if not res.success:
            raise ValidationError(f"polytope interior solve failed: {res.message}")
        if res.x[-1] >= 1e5:
            raise ValidationError("polytope appears unbounded")
        return res.x[:-1].copy(), float(res.x[-1])

    def values(self, x):
        return np.asarray(x, dtype=float) @ self._N.T + self._off

    def contains(self, x):
        return np.all(self.values(x) < 0.0, axis=-1)

    def _distance_raw(self, x):
        return np.min(-self.values(x), axis=-1)

    def inradius(self):
        return self._chebyshev[1]

    def chebyshev_center(self):
        return self._chebyshev[0].copy()

    def bounding_box(self):
        # Bound each coordinate by two LPs.
        d = self.dim
        lo, hi = np.empty(d), np.empty(d)
        for i in range(d):
            c = np.zeros(d)
            c[i] = 1.0
            r = linprog(c, A_ub=self._N, b_ub=-self._off, bounds=[(-1e6, 1e6)] * d, method="highs")
            lo[i] = r.x[i]
            r = linprog(-c, A_ub=self._N, b_ub=-self._off, bounds=[(-1e6, 1e6)] * d, method="highs")
            hi[i] = r.x[i]
        return lo, hi

    def _facet_anchor(self, i, x):
        # Project x onto facet i's hyperplane; valid if it stays in the closure.
        f = self.functionals[i]
        y = x - f.value(x) * f.normal
        vals = self.values(y)
        return y if np.all(vals <= 1e-10) else None

    def _anchors(self, n, rng):
        if rng is None:
            rng = np.random.default_rng(0)
        anchors, inwards = [], []
        center = self.chebyshev_center()
        max_check = 0.5 * self.inradius()

        def try_add(y, i):
            nvec = -self.functionals[i].normal
            probe = y + max_check * nvec
            # Accept only anchors whose inward ray realizes the depth exactly.
            if self.contains(probe) and abs(self._distance_raw(probe) - max_check) < 1e-9:
                anchors.append(y)
                inwards.append(nvec)
                return True
            return False

        # Deterministic mid-facet anchors first.
        for i in range(len(self.functionals)):
            y = self._facet_anchor(i, center)
            if y is not None:
                try_add(y, i)
            if len(anchors) == n:
                return np.array(anchors), np.array(inwards)
        tries = 0
        while len(anchors) < n:
            tries += 1
            if tries > 200 * n:
                raise RangeError("could not place the requested number of facet anchors")
            x = self.sample_interior(1, rng)[0]
            i = int(np.argmin(-self.values(x)))
            y = self._facet_anchor(i, x)
            if y is not None:
                try_add(y, i)
        return np.array(anchors), np.array(inwards)

    def to_json(self):
        return {"kind": "polytope", "functionals": [f.to_json() for f in self.functionals]}


class PuncturedSpace(Domain):
    """R^d with the origin removed; the boundary is the deleted point, D(x) = |x|."""

    def __init__(self, dim=3):
        if dim < 2:
            raise ValidationError("punctured space needs dimension >= 2")
        self.dim = int(dim)

    def contains(self, x):
        return np.linalg.norm(np.asarray(x, float), axis=-1) > 0.0

    def _distance_raw(self, x):
        return np.linalg.norm(np.asarray(x, float), axis=-1)

    def inradius(self):
        return math.inf

    def bounding_box(self):
        raise DomainError("punctured space is unbounded")

    def _anchors(self, n, rng):
        # Anchors are unit directions along which samples approach the origin.
        if self.dim == 2:
            dirs = _circle_points(n, 1.0)
        elif self.dim == 3:
            dirs = _fibonacci_sphere(n)
        else:
            gen = rng if rng is not None else np.random.default_rng(0)
            dirs = _unit_rows(gen.normal(size=(n, self.dim)))
        return np.zeros((n, self.dim)), dirs

    def near_boundary_rays(self, n_points, depths, rng=None):
        depths = np.asarray(depths, dtype=float).reshape(-1)
        if depths.size == 0 or np.any(depths <= 0):
            raise RangeError("depths must be strictly positive")
        _, dirs = self._anchors(int(n_points), rng)
        rays = []
        for u in dirs:
            pts = depths[:, None] * u[None, :]
            rays.append(Ray(anchor=u, inward=u, depths=depths.copy(), points=pts))
        return rays

    def sample_interior(self, n, rng, min_depth=0.0):
        lo = max(min_depth, 1e-3)
        pts = rng.uniform(-2.0, 2.0, size=(n, self.dim))
        r = np.linalg.norm(pts, axis=-1)
        bad = r < lo
        while np.any(bad):
            pts[bad] = rng.uniform(-2.0, 2.0, size=(int(np.sum(bad)), self.dim))
            r = np.linalg.norm(pts, axis=-1)
            bad = r < lo
        return pts

    def to_json(self):
        return {"kind": "punctured_space", "dim": self.dim}


def axis_box(lo, hi):
    """Axis-aligned box as a Polytope (any dimension)."""
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    if lo.shape != hi.shape or np.any(lo >= hi):
        raise ValidationError("box needs lo < hi componentwise")
    d = lo.shape[0]
    fns = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        fns.append(AffineFunctional(normal=e, offset=-hi[i]))       # x_i < hi_i
        fns.append(AffineFunctional(normal=-e, offset=lo[i]))       # x_i > lo_i
    return Polytope(fns)


def polygon_from_vertices(vertices):
    """Convex polygon in the plane from counterclockwise vertices."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
        raise ValidationError("need at least three planar vertices")
    centroid = v.mean(axis=0)
    fns = []
    for i in range(v.shape[0]):
        p, q = v[i], v[(i + 1) % v.shape[0]]
        edge = q - p
        normal = np.array([edge[1], -edge[0]])  # outward for ccw order
        if np.dot(normal, centroid - p) > 0:
            normal = -normal
        fns.append(AffineFunctional(normal=normal, offset=-float(np.dot(normal, p))))
    return Polytope(fns)


def rotated_unit_square(angle=0.35):
    """The unit square moved by a generic rotation about its center.

    Generic orientation keeps every facet normal's first component nonzero,
    which the polytope field construction requires.
    """
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    center = np.array([0.5, 0.5])
    return polygon_from_vertices((corners - center) @ rot.T + center)


def lipschitz_check(dom: Domain, n_pairs=2000, seed=0):
    """Empirical Lipschitz ratio of D over sampled interior pairs (should be <= 1)."""
    rng = np.random.default_rng(seed)
    a = dom.sample_interior(n_pairs, rng)
    b = dom.sample_interior(n_pairs, rng)
    da = dom._distance_raw(a)
    db = dom._distance_raw(b)
    sep = np.linalg.norm(a - b, axis=-1)
    ok = sep > 1e-12
    return float(np.max(np.abs(da[ok] - db[ok]) / sep[ok]))


_DOMAIN_KINDS = {}


def domain_from_json(obj) -> Domain:
    """Rebuild a domain from its JSON dict; rejects unknown kinds and keys."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("domain JSON must be an object with a 'kind' key")
    kind = obj["kind"]
    extra = dict(obj)
    extra.pop("kind")
    if kind == "disk2d":
        known = {"radius"}
        _reject_unknown(extra, known, "disk2d")
        return Disk2D(radius=extra.get("radius", 1.0))
    if kind == "annulus2d":
        _reject_unknown(extra, {"r_in", "r_out"}, "annulus2d")
        return Annulus2D(r_in=extra["r_in"], r_out=extra["r_out"])
    if kind == "ball3d":
        _reject_unknown(extra, {"radius"}, "ball3d")
        return Ball3D(radius=extra.get("radius", 1.0))
    if kind == "solid_torus3d":
        _reject_unknown(extra, {"major_radius", "minor_radius"}, "solid_torus3d")
        return SolidTorus3D(major_radius=extra["major_radius"], minor_radius=extra["minor_radius"])
    if kind == "polytope":
        _reject_unknown(extra, {"functionals"}, "polytope")
        fns = [AffineFunctional(normal=f["normal"], offset=f["offset"]) for f in extra["functionals"]]
        return Polytope(fns)
    if kind == "punctured_space":
        _reject_unknown(extra, {"dim"}, "punctured_space")
        return PuncturedSpace(dim=extra.get("dim", 3))
    raise ValidationError(f"unknown domain kind {kind!r}")


def _reject_unknown(params, known, kind):
    unknown = set(params) - known
    if unknown:
        raise ValidationError(f"unknown keys for {kind}: {sorted(unknown)}")
