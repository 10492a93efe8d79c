import numpy as np
import pytest

from confinement_lab.domains import (
    AffineFunctional,
    Annulus2D,
    Ball3D,
    Disk2D,
    Polytope,
    PuncturedSpace,
    SolidTorus3D,
    axis_box,
    domain_from_json,
    lipschitz_check,
    polygon_from_vertices,
    rotated_unit_square,
)
from confinement_lab.errors import DomainError, RangeError, ValidationError


ALL_DOMAINS = [
    Disk2D(1.0),
    Annulus2D(0.5, 2.0),
    Ball3D(1.5),
    SolidTorus3D(3.0, 1.0),
    axis_box([0.0, 0.0], [1.0, 1.0]),
    rotated_unit_square(),
    PuncturedSpace(3),
]


class TestDistances:
    def test_disk(self):
        d = Disk2D(2.0)
        assert d.distance([0.0, 0.0]) == pytest.approx(2.0)
        assert d.distance([1.0, 0.0]) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            d.distance([2.5, 0.0])

    def test_annulus(self):
        a = Annulus2D(1.0, 3.0)
        assert a.distance([1.5, 0.0]) == pytest.approx(0.5)
        assert a.distance([2.8, 0.0]) == pytest.approx(0.2)
        assert a.inradius() == pytest.approx(1.0)
        with pytest.raises(DomainError):
            a.distance([0.5, 0.0])

    def test_ball(self):
        b = Ball3D(1.0)
        assert b.distance([0.25, 0.0, 0.0]) == pytest.approx(0.75)

    def test_torus(self):
        t = SolidTorus3D(3.0, 1.0)
        # On the center circle the distance equals the minor radius.
        assert t.distance([3.0, 0.0, 0.0]) == pytest.approx(1.0)
        assert t.distance([3.5, 0.0, 0.0]) == pytest.approx(0.5)
        assert t.distance([3.0, 0.0, 0.25]) == pytest.approx(0.75)
        assert not t.contains([0.0, 0.0, 0.0])

    def test_square_distance_is_min_facet_gap(self):
        sq = axis_box([0.0, 0.0], [1.0, 1.0])
        assert sq.distance([0.5, 0.5]) == pytest.approx(0.5)
        assert sq.distance([0.1, 0.6]) == pytest.approx(0.1)
        assert sq.inradius() == pytest.approx(0.5, abs=1e-9)

    def test_punctured(self):
        p = PuncturedSpace(3)
        assert p.distance([0.0, 0.0, 0.1]) == pytest.approx(0.1)
        with pytest.raises(DomainError):
            p.distance([0.0, 0.0, 0.0])

    def test_batched_distance(self):
        d = Disk2D(1.0)
        pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, -0.25]])
        assert np.allclose(d.distance(pts), [1.0, 0.5, 0.75])


class TestLipschitz:
    @pytest.mark.parametrize("dom", ALL_DOMAINS, ids=lambda d: type(d).__name__)
    def test_distance_is_1_lipschitz(self, dom):
        assert lipschitz_check(dom, n_pairs=1500, seed=42) <= 1.0 + 1e-9

    def test_distance_bounded_by_boundary_samples(self):
        dom = SolidTorus3D(2.0, 0.7)
        rng = np.random.default_rng(1)
        pts = dom.sample_interior(50, rng)
        rays = dom.near_boundary_rays(40, [1e-6])
        boundary = np.array([r.anchor for r in rays])
        for x in pts:
            d = dom.distance(x)
            gaps = np.linalg.norm(boundary - x, axis=-1)
            assert d <= np.min(gaps) + 1e-6


class TestRays:
    @pytest.mark.parametrize(
        "dom",
        [Disk2D(1.0), Annulus2D(0.5, 2.0), Ball3D(1.0), SolidTorus3D(3.0, 1.0), rotated_unit_square()],
        ids=lambda d: type(d).__name__,
    )
    def test_depths_realized_exactly(self, dom):
        depths = np.array([1e-1, 1e-2, 1e-3, 1e-4]) * dom.inradius()
        rays = dom.near_boundary_rays(16, depths)
        assert len(rays) == 16
        for ray in rays:
            got = dom.distance(ray.points)
            assert np.allclose(got, depths, rtol=1e-9, atol=1e-12)

    def test_punctured_example_ray(self):
        p = PuncturedSpace(3)
        rays = p.near_boundary_rays(64, [0.1])
        by_dir = {tuple(np.round(r.anchor, 6)): r for r in rays}
        # Direction anchors are unit vectors; each sample sits at depth * direction.
        for r in rays:
            assert np.linalg.norm(r.anchor) == pytest.approx(1.0)
            assert np.allclose(r.points[0], 0.1 * r.anchor)
            assert p.distance(r.points[0]) == pytest.approx(0.1)
        assert len(by_dir) == 64

    def test_depth_validation(self):
        d = Disk2D(1.0)
        with pytest.raises(RangeError):
            d.near_boundary_rays(4, [0.5, -0.1])
        with pytest.raises(RangeError):
            d.near_boundary_rays(4, [1.5])

    def test_square_mid_edge_anchor_present(self):
        sq = axis_box([0.0, 0.0], [1.0, 1.0])
        rays = sq.near_boundary_rays(4, [0.1])
        anchors = np.array([r.anchor for r in rays])
        mids = np.array([[1.0, 0.5], [0.0, 0.5], [0.5, 1.0], [0.5, 0.0]])
        for m in mids:
            assert np.min(np.linalg.norm(anchors - m, axis=-1)) < 1e-9


class TestPolytope:
    def test_functional_normalization(self):
        f = AffineFunctional(normal=[3.0, 4.0], offset=10.0)
        assert np.linalg.norm(f.normal) == pytest.approx(1.0)
        assert f.value([0.0, 0.0]) == pytest.approx(2.0)

    def test_empty_interior_rejected(self):
        with pytest.raises(ValidationError):
            Polytope([
                AffineFunctional(normal=[1.0, 0.0], offset=0.0),
                AffineFunctional(normal=[-1.0, 0.0], offset=0.5),
            ])

    def test_unbounded_rejected(self):
        with pytest.raises(ValidationError):
            Polytope([
                AffineFunctional(normal=[1.0, 0.0], offset=-1.0),
                AffineFunctional(normal=[0.0, 1.0], offset=-1.0),
            ])

    def test_triangle_from_vertices(self):
        tri = polygon_from_vertices([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
        assert tri.contains([0.5, 0.5])
        assert not tri.contains([1.5, 1.5])
        # Distance to the diagonal edge x + y = 2 from the origin corner region.
        assert tri.distance([0.2, 0.2]) == pytest.approx(0.2)

    def test_rotated_unit_square_generic_normals(self):
        sq = rotated_unit_square()
        for f in sq.functionals:
            assert abs(f.normal[0]) > 1e-3
        assert sq.inradius() == pytest.approx(0.5, abs=1e-9)

    def test_4d_box(self):
        box = axis_box([-1.0] * 4, [1.0] * 4)
        assert box.dim == 4
        assert box.distance([0.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0)
        assert box.distance([0.5, 0.0, 0.0, 0.0]) == pytest.approx(0.5)


class TestJson:
    @pytest.mark.parametrize("dom", ALL_DOMAINS, ids=lambda d: type(d).__name__)
    def test_roundtrip(self, dom):
        clone = domain_from_json(dom.to_json())
        rng = np.random.default_rng(9)
        pts = dom.sample_interior(20, rng)
        assert np.allclose(clone.distance(pts), dom.distance(pts))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            domain_from_json({"kind": "moebius"})

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            domain_from_json({"kind": "disk2d", "radius": 1.0, "color": "red"})
