"""Lattice operator assembly, gauge covariance, eigensolver, and probes."""

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from confinement_lab.domains import Disk2D, PuncturedSpace, axis_box, rotated_unit_square
from confinement_lab.errors import (
    AssemblyError,
    SingularityError,
    SolverError,
    ValidationError,
)
from confinement_lab.exterior import TwoForm, plane_two_form
from confinement_lab.fields import (
    ConstantField,
    DiskCounterexampleField,
    GaugeShiftField,
    Polynomial,
    PolytopeField,
)
from confinement_lab.lattice import (
    assemble,
    build_grid,
    calibrate_form_constant,
    commutator_bound_test,
    form_bound_slack,
    gershgorin_lower_bound,
    ground_state_deficit,
    hur_hypothesis_probe,
    lowest_pairs,
    min_eigenvalue_of,
    paired_component_expectation,
    plaquette_phases,
    weighted_norm_sq,
)

J01_SQ = 5.783185962946785   # squared first zero of J0: disk Dirichlet ground value
LANDAU_SIDE10 = 0.9922212013325
DISCRETE_LANDAU = 1.0 - 0.25**2 / 8.0


def unit_square():
    return axis_box([0.0, 0.0], [1.0, 1.0])


# ---------------------------------------------------------------------------
# grid construction


def test_grid_cell_centered_count():
    g = build_grid(unit_square(), 0.25)
    assert g.n_sites == 16
    assert np.allclose(g.sites.min(axis=0), [0.125, 0.125])
    assert np.allclose(g.sites.max(axis=0), [0.875, 0.875])


def test_grid_custom_offset():
    g = build_grid(unit_square(), 0.25, offset=[0.0, 0.0])
    rem = np.remainder(g.sites, 0.25)
    assert np.allclose(np.minimum(rem, 0.25 - rem), 0.0, atol=1e-12)


def test_grid_truncation_removes_rim():
    g = build_grid(Disk2D(1.0), 0.05, delta=0.2)
    d = Disk2D(1.0).distance(g.sites)
    assert np.all(d > 0.2)


def test_grid_validations():
    with pytest.raises(ValidationError):
        build_grid(unit_square(), 0.0)
    with pytest.raises(ValidationError):
        build_grid(unit_square(), 0.1, delta=-0.1)
    with pytest.raises(ValidationError):
        build_grid(unit_square(), 0.11, delta=0.2)
    with pytest.raises(ValidationError):
        build_grid(PuncturedSpace(3), 0.1)
    with pytest.raises(ValidationError):
        build_grid(Disk2D(0.04), 1.0)


# ---------------------------------------------------------------------------
# assembly algebra


def test_operator_hermitian_exactly():
    op = assemble(DiskCounterexampleField(0.3), Disk2D(1.0), 0.1)
    gap = op.matrix - op.matrix.conj().T
    assert gap.nnz == 0


def test_spike_quadratic_form_value():
    # spike at an interior site (all four neighbors retained): 2d * h^(d-2)
    op = assemble(ConstantField(plane_two_form(1.0)), unit_square(), 0.25)
    center = np.argmin(np.linalg.norm(op.grid.sites - 0.5, axis=1))
    u = np.zeros(op.n_sites, dtype=complex)
    u[center] = 1.0
    assert op.quadratic_form(u) == pytest.approx(4.0, abs=1e-14)


def test_dimension_four_assembly():
    m = np.zeros((4, 4))
    m[0, 1], m[2, 3] = 3.0, 1.0
    op = assemble(ConstantField(TwoForm(m - m.T)), axis_box([-1.0] * 4, [1.0] * 4), 0.5)
    assert op.n_sites == 256
    assert (op.matrix - op.matrix.conj().T).nnz == 0
    center = np.argmin(np.linalg.norm(op.grid.sites - 0.25, axis=1))
    u = np.zeros(256, dtype=complex)
    u[center] = 1.0
    assert op.quadratic_form(u) == pytest.approx(2.0, abs=1e-14)


def test_quadrature_name_validated():
    with pytest.raises(ValidationError):
        assemble(ConstantField(plane_two_form(1.0)), unit_square(), 0.25,
                 quadrature="simpson")


def test_singular_edge_reported():
    class StringLineField:
        kind = "string_line"

        def potential(self, x):
            x = np.asarray(x, dtype=float)
            if np.any(np.abs(x[..., 0]) < 1e-12):
                raise SingularityError("potential has a pole on the line x1 = 0")
            return np.stack([np.zeros_like(x[..., 0]), 1.0 / x[..., 0]], axis=-1)

    dom = axis_box([-1.0, -1.0], [1.0, 1.0])
    with pytest.raises(AssemblyError, match="axis 0"):
        assemble(StringLineField(), dom, 0.5)


def test_gauss3_matches_midpoint_for_affine_potential():
    dom = unit_square()
    f = ConstantField(plane_two_form(1.7))
    a = assemble(f, dom, 0.2, quadrature="midpoint").matrix
    b = assemble(f, dom, 0.2, quadrature="gauss3").matrix
    assert abs(a - b).max() < 1e-15


def test_gauss3_differs_on_curved_potential():
    f = DiskCounterexampleField(0.4)
    a = assemble(f, Disk2D(1.0), 0.1, quadrature="midpoint").matrix
    b = assemble(f, Disk2D(1.0), 0.1, quadrature="gauss3").matrix
    assert abs(a - b).max() > 1e-12


# ---------------------------------------------------------------------------
# plaquettes and gauge covariance


def test_plaquette_exact_for_constant_field():
    f = ConstantField(plane_two_form(1.3))
    base = np.array([[0.2, -0.4], [0.0, 0.0], [-1.1, 0.7]])
    ph = plaquette_phases(f, base, h=0.1)
    assert np.allclose(ph, np.exp(-1j * 0.01 * 1.3), atol=1e-14)


def test_plaquette_tracks_flux_on_smooth_field():
    f = DiskCounterexampleField(0.3)
    errs = []
    for h in (0.02, 0.01):
        base = np.array([[0.3, 0.1]])
        ph = plaquette_phases(f, base, h=h)
        center = base[0] + h / 2.0
        b = f.field_matrix_batch(center[None, :])[0, 0, 1]
        errs.append(abs(ph[0] - np.exp(-1j * h * h * b)))
    assert errs[1] < errs[0] / 4.0


def test_gauge_shift_spectrum_invariant():
    dom = Disk2D(1.0)
    base = ConstantField(plane_two_form(1.0))
    shifted = GaugeShiftField(base, Polynomial([(1.0, (2, 0)), (-3.0, (1, 1))]))
    va, _ = assemble(base, dom, 0.1).lowest_eigenvalues(k=5)
    vb, _ = assemble(shifted, dom, 0.1).lowest_eigenvalues(k=5)
    assert np.max(np.abs(va - vb)) < 1e-10


def test_gauge_shift_conjugates_quadratic_form():
    dom = Disk2D(1.0)
    F = Polynomial([(1.0, (2, 0)), (-3.0, (1, 1))])
    base = ConstantField(plane_two_form(1.0))
    op_a = assemble(base, dom, 0.1)
    op_b = assemble(GaugeShiftField(base, F), dom, 0.1)
    rng = np.random.default_rng(7)
    u = rng.normal(size=op_a.n_sites) + 1j * rng.normal(size=op_a.n_sites)
    phase = np.exp(1j * F.value(op_a.grid.sites))
    assert op_b.quadratic_form(phase * u) == pytest.approx(
        op_a.quadratic_form(u), rel=1e-10
    )


# ---------------------------------------------------------------------------
# eigensolver


def test_disk_laplacian_ground_value():
    op = assemble(ConstantField(plane_two_form(0.0)), Disk2D(1.0), 0.05)
    vals, _ = op.lowest_eigenvalues(k=1)
    assert vals[0] == pytest.approx(5.7793113211, abs=1e-5)
    assert abs(vals[0] - J01_SQ) < 0.01


def test_disk_laplacian_convergence_order():
    # wall-fitted scheme: error within 2% at h=0.1 and near-quadratic decay
    errs = []
    for h in (0.1, 0.05, 0.025):
        op = assemble(ConstantField(plane_two_form(0.0)), Disk2D(1.0), h)
        vals, _ = op.lowest_eigenvalues(k=1)
        errs.append(abs(vals[0] - J01_SQ))
    assert errs[0] / J01_SQ < 0.02
    assert errs[0] / errs[1] > 2.0 ** 1.8
    assert errs[1] / errs[2] > 2.0 ** 1.8


def test_landau_bottom_side10():
    op = assemble(ConstantField(plane_two_form(1.0)),
                  axis_box([-5.0, -5.0], [5.0, 5.0]), 0.25)
    vals, _ = op.lowest_eigenvalues(k=1)
    assert vals[0] == pytest.approx(LANDAU_SIDE10, abs=5e-6)
    assert vals[0] > DISCRETE_LANDAU


def test_dense_and_sparse_paths_agree():
    op = assemble(ConstantField(plane_two_form(1.0)),
                  axis_box([-2.5, -2.5], [2.5, 2.5]), 0.25)
    dense_vals, _ = op.lowest_eigenvalues(k=3)
    sparse_vals, _ = op.lowest_eigenvalues(k=3, dense_cutoff=10)
    assert np.max(np.abs(dense_vals - sparse_vals)) < 1e-7


def test_eigenvectors_orthonormal_and_sorted():
    op = assemble(ConstantField(plane_two_form(1.0)),
                  axis_box([-2.5, -2.5], [2.5, 2.5]), 0.25)
    vals, vecs = op.lowest_eigenvalues(k=4, dense_cutoff=10)
    assert np.all(np.diff(vals) >= -1e-12)
    gram = vecs.conj().T @ vecs
    assert np.max(np.abs(gram - np.eye(4))) < 1e-8


def test_lowest_pairs_maxiter_raises():
    op = assemble(ConstantField(plane_two_form(1.0)),
                  axis_box([-5.0, -5.0], [5.0, 5.0]), 0.25)
    with pytest.raises(SolverError):
        lowest_pairs(op.matrix, 1, rtol=1e-8, sigma=0.0, maxiter=2)


def test_k_range_validated():
    op = assemble(ConstantField(plane_two_form(1.0)), unit_square(), 0.25)
    with pytest.raises(ValidationError):
        op.lowest_eigenvalues(k=0)
    with pytest.raises(ValidationError):
        op.lowest_eigenvalues(k=16)


def test_indefinite_engine_matches_dense():
    op = assemble(ConstantField(plane_two_form(1.0)),
                  axis_box([-2.0, -2.0], [2.0, 2.0]), 0.25)
    w = 3.0 + np.sin(op.grid.sites[:, 0] * 5.0)
    A = (op.matrix - sp.diags(w)).tocsc()
    exact = np.linalg.eigvalsh(A.toarray())[0]
    assert exact < 0
    got = min_eigenvalue_of(A, rtol=1e-8, dense_cutoff=10)
    assert got == pytest.approx(exact, abs=1e-6)
    assert gershgorin_lower_bound(A) <= exact


def test_matrix_market_round_trip(tmp_path):
    op = assemble(ConstantField(plane_two_form(1.0)), unit_square(), 0.25)
    path = tmp_path / "op.mtx"
    op.to_matrix_market(path)
    back = scipy.io.mmread(str(path))
    assert abs(back.tocsr() - op.matrix).max() < 1e-15


# ---------------------------------------------------------------------------
# commutator-bound pieces


def test_paired_expectation_constant_field():
    box = axis_box([-4.0, -4.0], [4.0, 4.0])
    f = ConstantField(plane_two_form(2.0))
    op = assemble(f, box, 0.25)
    rng = np.random.default_rng(3)
    u = rng.normal(size=op.n_sites) + 1j * rng.normal(size=op.n_sites)
    assert paired_component_expectation(op, f, u) == pytest.approx(
        2.0 * op.norm_sq(u), rel=1e-12
    )
    assert weighted_norm_sq(op, f, u) == pytest.approx(
        5.0 * op.norm_sq(u), rel=1e-12
    )


def test_slack_decomposition():
    box = axis_box([-4.0, -4.0], [4.0, 4.0])
    f = ConstantField(plane_two_form(1.0))
    op = assemble(f, box, 0.25)
    u = np.ones(op.n_sites, dtype=complex)
    slack = form_bound_slack(op, f, u, K=0.1)
    manual = (op.quadratic_form(u)
              + 0.1 * op.grid.h * weighted_norm_sq(op, f, u)
              - paired_component_expectation(op, f, u))
    assert slack == pytest.approx(manual, rel=1e-12)


def test_calibrated_constant_and_slack_nonnegative():
    box = axis_box([-4.0, -4.0], [4.0, 4.0])
    cfg = calibrate_form_constant(box, 0.4,
                                  lambda b: ConstantField(plane_two_form(b)))
    assert cfg.K == pytest.approx(0.088443, abs=1e-4)
    assert cfg.calibration["rates"][3.0] > cfg.calibration["rates"][1.0]
    sq = rotated_unit_square()
    cases = [
        (ConstantField(plane_two_form(1.0)), box, 0.2, 0.0),
        (DiskCounterexampleField(0.3), Disk2D(1.0), 0.05, 0.2),
        (PolytopeField(sq), sq, 0.02, 0.0),
    ]
    for fld, dom, h, delta in cases:
        rows = commutator_bound_test(fld, dom, h, K=cfg.K, delta=delta,
                                     n_random=5)
        assert all(r["slack"] >= 0.0 for r in rows)


def test_ground_state_deficit_order():
    box = axis_box([-4.0, -4.0], [4.0, 4.0])
    f = ConstantField(plane_two_form(1.0))
    d_coarse = ground_state_deficit(f, box, 0.4)
    d_fine = ground_state_deficit(f, box, 0.2)
    assert d_coarse == pytest.approx(0.0182340, abs=1e-5)
    assert d_fine > 0
    assert d_coarse / d_fine > 2.0


# ---------------------------------------------------------------------------
# truncated-domain probe


def test_probe_columns_and_monotone_hardy():
    rows = hur_hypothesis_probe(DiskCounterexampleField(0.3), Disk2D(1.0),
                                deltas=(0.1, 0.05))
    assert [r["delta"] for r in rows] == [0.1, 0.05]
    assert rows[0]["h"] == pytest.approx(0.04)
    assert rows[1]["n_sites"] > rows[0]["n_sites"]
    assert rows[1]["lambda_min_hardy"] < rows[0]["lambda_min_hardy"]
    assert rows[0]["lambda_min_field"] > rows[0]["lambda_min_hardy"]
    assert rows[0]["hardy_scaled"] == pytest.approx(
        rows[0]["lambda_min_hardy"] * 0.01
    )


def test_probe_frozen_disk_values():
    rows = hur_hypothesis_probe(DiskCounterexampleField(0.3), Disk2D(1.0),
                                deltas=(0.1,))
    assert rows[0]["lambda_min_hardy"] == pytest.approx(3.18051, abs=2e-3)
    assert rows[0]["lambda_min_field"] == pytest.approx(5.72138, abs=2e-3)


def test_probe_custom_h_rule():
    rows = hur_hypothesis_probe(DiskCounterexampleField(0.3), Disk2D(1.0),
                                deltas=(0.1,), h_rule=lambda d: d / 4.0)
    assert rows[0]["h"] == pytest.approx(0.025)


def test_probe_eps_validated():
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValidationError):
            hur_hypothesis_probe(DiskCounterexampleField(0.3), Disk2D(1.0),
                                 eps=bad, deltas=(0.1,))
