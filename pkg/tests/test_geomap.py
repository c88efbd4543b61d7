import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkverify.covderiv import ALL_KINDS, CovKind, covariant_derivative, slot_orientations
from gkverify.errors import DefinitionError, MappingError
from gkverify.geomap import (
    MappingPair,
    MappingSpec,
    MappingVerifier,
    build_mapped_connection,
    deformation_tensor,
    extract_psi_xi,
    geodesic_form,
    load_pair,
    negate_field,
    render_pair,
)
from gkverify.kahler import KahlerVerifier
from gkverify.report import GATE_FAIL, INFO, PASS
from gkverify.sampling import sample_points
from gkverify.space import load_space
from gkverify.tensor import TensorField

from conftest import CATALOG, identity_metric, space_text


def load_catalog_pair(catalog, name):
    return load_pair((catalog / name).read_text(), name)


def points_for(pair, count=20, seed=3):
    source = pair.source
    return sample_points(source.dimension, source.domain, count, seed, source.excludes)


def xi_field(n, texts):
    return TensorField.from_texts(n, 1, 2, texts)


def psi_field(n, texts):
    return TensorField.from_texts(n, 0, 1, texts)


def curved_target():
    return load_space((CATALOG / "curved_gk1.space").read_text(), "curved_gk1.space")


def trace_free_xi(n, values):
    """Antisymmetric (1,2) components from one value per (i, j < k), with the trace xi^a_ja removed."""
    xi = np.zeros((n, n, n))
    slots = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for value, (i, (j, k)) in zip(values, itertools.product(range(n), slots)):
        xi[i, j, k], xi[i, k, j] = value, -value
    trace = np.einsum("aja->j", xi)
    delta = np.eye(n)
    return xi + (np.einsum("ij,k->ijk", delta, trace) - np.einsum("ik,j->ijk", delta, trace)) / (n - 1)


class TestDeformation:
    def test_identical_spaces(self, flat_gk1):
        pair = MappingPair(flat_gk1, flat_gk1)
        data = extract_psi_xi(pair, (0.1, 0.2, 0.3, 0.4))
        assert np.max(np.abs(data.P)) == 0.0
        assert np.max(np.abs(data.psi)) == 0.0
        residuals = MappingVerifier(pair).check_geodesic_form(points_for(pair))
        assert residuals[0].value == 0.0
        assert "trivial mapping: psi = 0" in residuals[0].notes

    def test_dimension_mismatch(self, flat_gk1, polar):
        with pytest.raises(MappingError):
            MappingPair(flat_gk1, polar)

    def test_psi_and_xi_round_trip(self, flat_gk1, rng):
        psi = psi_field(4, {(0,): "0.3*x2", (2,): "sin(x1)"})
        xi = xi_field(4, {(0, 1, 2): "x4", (0, 2, 1): "-x4", (3, 0, 1): "0.5", (3, 1, 0): "-0.5"})
        pair = MappingPair(flat_gk1, build_mapped_connection(flat_gk1, psi, xi))
        for point in rng.uniform(-1, 1, size=(5, 4)):
            data = extract_psi_xi(pair, point)
            np.testing.assert_allclose(data.psi, psi.evaluate(point).data, atol=1e-14)
            np.testing.assert_allclose(data.xi, xi.evaluate(point).data, atol=1e-14)
            np.testing.assert_allclose(data.P, geodesic_form(data.psi, data.xi), atol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(
        offsets=st.lists(st.floats(-1, 1, allow_subnormal=False), min_size=4, max_size=4),
        slopes=st.lists(st.floats(-1, 1, allow_subnormal=False), min_size=4, max_size=4),
        xi_values=st.lists(st.floats(-1, 1, allow_subnormal=False), min_size=24, max_size=24),
    )
    def test_random_deformations_round_trip(self, offsets, slopes, xi_values):
        base = curved_target()
        n = base.dimension
        psi = psi_field(n, {(i,): f"{a!r} + {b!r}*x{(i + 1) % n + 1}" for i, (a, b) in enumerate(zip(offsets, slopes))})
        xi = trace_free_xi(n, xi_values)
        texts = {index: repr(float(value)) for index, value in np.ndenumerate(xi) if value != 0.0}
        pair = MappingPair(base, build_mapped_connection(base, psi, xi_field(n, texts)))
        for point in ([0.3, -0.2, 0.7, -0.9], [-0.5, 0.1, 0.0, 0.4]):
            data = extract_psi_xi(pair, point)
            expected_psi = [a + b * point[(i + 1) % n] for i, (a, b) in enumerate(zip(offsets, slopes))]
            np.testing.assert_allclose(data.psi, expected_psi, atol=1e-12)
            np.testing.assert_allclose(data.xi, xi, atol=1e-12)

    def test_projective_deformation(self):
        flat = load_space(space_text(2, identity_metric(2), 'domain = [0, 1]\n'))
        psi = psi_field(2, {(0,): "-1 / (1 + x1)"})
        target = build_mapped_connection(flat, psi, xi_field(2, {}))
        point = (0.5, 0.2)
        gamma = target.connection_at(point).gamma
        assert gamma[0, 0, 0] == pytest.approx(2.0 * (-1.0 / 1.5))
        assert gamma[1, 0, 1] == pytest.approx(-1.0 / 1.5)
        assert gamma[0, 1, 1] == 0.0

    def test_non_antisymmetric_xi_rejected(self, flat_gk1):
        with pytest.raises(MappingError, match="antisymmetric"):
            build_mapped_connection(flat_gk1, psi_field(4, {}), xi_field(4, {(0, 1, 2): "1"}))

    def test_varying_xi_checked_at_sampled_points(self, flat_gk1):
        xi = xi_field(4, {(0, 1, 2): "x1", (0, 2, 1): "-x1", (1, 0, 3): "x2^2"})
        assert not xi.is_constant
        with pytest.raises(MappingError, match="antisymmetric"):
            build_mapped_connection(flat_gk1, psi_field(4, {}), xi)

    def test_xi_with_trace_warns(self, flat_gk1, caplog):
        xi = xi_field(4, {(0, 1, 0): "0.2", (0, 0, 1): "-0.2"})
        with caplog.at_level(logging.WARNING, logger="gkverify.geomap"):
            target = build_mapped_connection(flat_gk1, psi_field(4, {}), xi)
        assert "nonzero trace" in caplog.text
        assert target.has_explicit_connection

    def test_overlay_supplies_metric_and_structure(self, flat_gk1, polar):
        target = build_mapped_connection(flat_gk1, psi_field(4, {(1,): "1"}), xi_field(4, {}), overlay=flat_gk1)
        assert target.metric is flat_gk1.metric
        assert target.structure is flat_gk1.structure
        with pytest.raises(MappingError):
            build_mapped_connection(flat_gk1, psi_field(4, {}), xi_field(4, {}), overlay=polar)

    def test_negate_field(self):
        field = psi_field(2, {(0,): "x1^2", (1,): "0"})
        negated = negate_field(field)
        np.testing.assert_array_equal(negated.evaluate((2.0, 1.0)).data, [-4.0, 0.0])
        assert negated.components[1].is_zero


class TestGeodesicForm:
    def test_catalog_pair_is_geodesic(self, catalog):
        pair = load_catalog_pair(catalog, "pair_kind1.pair")
        residuals = MappingVerifier(pair).check_geodesic_form(points_for(pair))
        assert residuals[0].verdict == PASS
        assert residuals[0].notes == []
        assert residuals[1].verdict == INFO and residuals[1].value <= 1e-12
        data = extract_psi_xi(pair, (0.2, 0.1, -0.3, 0.5))
        np.testing.assert_allclose(data.psi, [0.25, 0.0, 0.0, 0.0], atol=1e-15)

    def test_non_geodesic_deformation(self, catalog):
        pair = load_catalog_pair(catalog, "non_geodesic.pair")
        data = extract_psi_xi(pair, (0.3, 0.3))
        assert np.max(np.abs(data.psi)) == 0.0
        residuals = MappingVerifier(pair).check_geodesic_form(points_for(pair))
        assert residuals[0].value == pytest.approx(1.0)
        assert not residuals[0].passed

    def test_connection_trace_agrees(self, catalog):
        pair = load_catalog_pair(catalog, "pair_xi.pair")
        for point in points_for(pair, 5):
            source = pair.source.connection_at(point).torsion
            target = pair.target.connection_at(point).torsion
            np.testing.assert_allclose(np.einsum("aia->i", source), np.einsum("aia->i", target), atol=1e-12)
            assert deformation_tensor(pair, point).shape == (4, 4, 4)


class TestMappingTheorems:
    @pytest.mark.parametrize("name", ["pair_kind1.pair", "pair_xi.pair"])
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_constructed_pairs_pass(self, catalog, name, kind):
        pair = load_catalog_pair(catalog, name)
        result = MappingVerifier(pair).check_mapping_theorem(kind, points_for(pair, 50))
        assert result.residual_a.value <= 1e-9
        assert result.residual_b.value <= 1e-9
        assert all(r.passed for r in result.side_conditions)
        assert not result.trivial

    def test_printed_psi_order_reported(self, catalog):
        pair = load_catalog_pair(catalog, "pair_kind1.pair")
        result = MappingVerifier(pair).check_mapping_theorem(CovKind.FIRST, points_for(pair))
        assert result.residual_a.verdict == PASS
        assert any("as printed" in note for note in result.residual_a.notes)

    def test_transposed_xi_slots_leave_a_commutator(self, catalog):
        pair = load_catalog_pair(catalog, "pair_xi.pair")
        points = points_for(pair)
        result = MappingVerifier(pair).check_mapping_theorem(CovKind.FIRST, points, transpose_xi=True)
        expected = 0.0
        for point in points:
            xi = extract_psi_xi(pair, point).xi
            g = pair.target.metric_at(point).g
            expected = max(expected, np.max(np.abs(2.0 * np.einsum("aik,aj->ijk", xi, g))))
        assert expected > 0.1
        assert result.residual_a.value == pytest.approx(expected, rel=1e-9)
        assert not result.residual_a.passed

    def test_identical_spaces_are_trivial(self, flat_gk1):
        pair = MappingPair(flat_gk1, flat_gk1)
        result = MappingVerifier(pair).check_mapping_theorem(CovKind.SECOND, [np.zeros(4), np.full(4, 0.5)])
        assert result.trivial
        assert result.residual_a.value == 0.0
        assert "trivial mapping: psi = 0" in result.residual_b.notes

    def test_side_conditions_catch_bad_structure(self, flat_gk1):
        text = space_text(4, identity_metric(4), 'F[1][2] = "-2"\nF[2][1] = "1"\n')
        target = load_space(text)
        residuals = MappingVerifier(MappingPair(flat_gk1, target)).check_side_conditions([np.zeros(4)])
        assert residuals[0].passed
        assert not residuals[1].passed
        assert not residuals[2].passed

    def test_target_without_metric(self, flat_gk1):
        target = build_mapped_connection(flat_gk1, psi_field(4, {(0,): "1"}), xi_field(4, {}))
        with pytest.raises(MappingError, match="no metric"):
            MappingVerifier(MappingPair(flat_gk1, target)).check_mapping_theorem(CovKind.FIRST, [np.zeros(4)])


class TestCurvedTarget:
    def test_target_is_gk1(self):
        target = curved_target()
        points = sample_points(4, target.domain, 20, 5)
        report = KahlerVerifier(target).run(points)
        assert report.passed
        assert report.by_name("kind-1 constancy").value <= 1e-12

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_target_connection_terms_do_not_vanish(self, catalog, kind):
        pair = load_catalog_pair(catalog, "pair_curved.pair")
        largest = 0.0
        for point in points_for(pair, 10):
            metric = pair.target.metric_at(point)
            gamma = pair.target.connection_at(point).gamma
            term = covariant_derivative(
                metric.g_antisym, np.zeros((4, 4, 4)), gamma, 0, slot_orientations(kind, 0, 2)
            )
            largest = max(largest, float(np.max(np.abs(term))))
        assert largest > 1e-2

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_mapping_conditions_hold(self, catalog, kind):
        pair = load_catalog_pair(catalog, "pair_curved.pair")
        result = MappingVerifier(pair).check_mapping_theorem(kind, points_for(pair, 30))
        assert result.residual_a.value <= 1e-9
        assert result.residual_b.value <= 1e-9
        assert all(r.passed for r in result.side_conditions)

    def test_transposed_xi_fails_on_curved_target(self, catalog):
        pair = load_catalog_pair(catalog, "pair_curved.pair")
        result = MappingVerifier(pair).check_mapping_theorem(CovKind.SECOND, points_for(pair), transpose_xi=True)
        assert not result.residual_a.passed
        assert not result.residual_b.passed

    def test_geodesic_form(self, catalog):
        pair = load_catalog_pair(catalog, "pair_curved.pair")
        form = MappingVerifier(pair).check_geodesic_form(points_for(pair))[0]
        assert form.verdict == PASS


class TestEquitorsion:
    def test_psi_only_pair_is_equitorsion(self, catalog):
        pair = load_catalog_pair(catalog, "pair_kind1.pair")
        verifier = MappingVerifier(pair)
        points = points_for(pair)
        assert verifier.check_equitorsion(points).value <= 1e-12
        for kind in ALL_KINDS:
            result = verifier.check_equitorsion_theorem(kind, points)
            assert result.residual_a.verdict == PASS, kind
            assert result.residual_b.verdict == PASS, kind

    def test_fourth_kind_printed_variant_reported(self, catalog):
        pair = load_catalog_pair(catalog, "pair_kind1.pair")
        result = MappingVerifier(pair).check_equitorsion_theorem(CovKind.FOURTH, points_for(pair))
        assert any("non-underlined" in note for note in result.residual_a.notes)

    def test_xi_pair_is_gated(self, catalog):
        pair = load_catalog_pair(catalog, "pair_xi.pair")
        verifier = MappingVerifier(pair)
        points = points_for(pair)
        gate = verifier.check_equitorsion(points)
        assert gate.value == pytest.approx(0.2)
        result = verifier.check_equitorsion_theorem(CovKind.THIRD, points)
        assert result.residual_a.verdict == GATE_FAIL
        assert result.residual_b.value is None
        assert any("not equitorsion" in note for note in result.residual_b.notes)

    @pytest.mark.parametrize("kind", [CovKind.FIRST, CovKind.SECOND])
    def test_equitorsion_theorem_reduces_general_one(self, kind):
        target_text = (CATALOG / "curved_gk1.space").read_text()
        spec = MappingSpec(psi_field(4, {(0,): "0.1*x2", (2,): "0.2", (3,): "0.05*x1"}), xi_field(4, {}), "backward")
        pair = load_pair(render_pair(spec, target_text=target_text))
        verifier = MappingVerifier(pair)
        points = points_for(pair)
        assert verifier.check_equitorsion(points).value <= 1e-12
        general = verifier.check_mapping_theorem(kind, points)
        equitorsion = verifier.check_equitorsion_theorem(kind, points)
        assert equitorsion.residual_b.verdict == PASS
        assert abs(general.residual_b.value - equitorsion.residual_b.value) <= 1e-12

    def test_gate_is_informational_in_suite(self, catalog):
        pair = load_catalog_pair(catalog, "pair_xi.pair")
        residuals = MappingVerifier(pair).run(points_for(pair, 10), kinds=(CovKind.FIRST,))
        gate = next(r for r in residuals if r.name == "equal torsion")
        assert gate.verdict == INFO
        assert not gate.counts
        assert gate.value == pytest.approx(0.2)
        gated = [r for r in residuals if r.name.startswith("equitorsion")]
        assert [r.verdict for r in gated] == [GATE_FAIL, GATE_FAIL]

    def test_full_suite(self, catalog):
        pair = load_catalog_pair(catalog, "pair_xi.pair")
        residuals = MappingVerifier(pair, workers=3).run(points_for(pair))
        counted = [r for r in residuals if r.counts]
        assert counted and all(r.passed for r in counted)
        assert sum(1 for r in residuals if r.verdict == GATE_FAIL) == 8


class TestPairFiles:
    def test_forward_pair(self, catalog):
        source = (catalog / "flat_gk1.space").read_text()
        text = f"[source]\n{source}\n[target]\n{source}\n[mapping]\npsi[2] = \"0.1\"\n"
        pair = load_pair(text)
        assert pair.mapping.direction == "forward"
        assert pair.target.metric is not None
        data = extract_psi_xi(pair, (0.0, 0.0, 0.0, 0.0))
        np.testing.assert_allclose(data.psi, [0.0, 0.1, 0.0, 0.0])

    def test_backward_keeps_source_domain(self, catalog):
        pair = load_catalog_pair(catalog, "pair_kind1.pair")
        assert pair.mapping.direction == "backward"
        assert pair.source.domain == (-1.0, 1.0)
        np.testing.assert_allclose(
            deformation_tensor(pair, np.zeros(4))[0, 0, 0], 0.5
        )

    def test_render_then_load(self, catalog):
        source = (catalog / "flat_gk1.space").read_text()
        spec = MappingSpec(psi_field(4, {(0,): "0.2*x3"}), xi_field(4, {(1, 2, 3): "0.1", (1, 3, 2): "-0.1"}), "backward")
        pair = load_pair(render_pair(spec, target_text=source))
        point = np.array([0.1, -0.2, 0.5, 0.3])
        data = extract_psi_xi(pair, point)
        np.testing.assert_allclose(data.psi, [0.1, 0.0, 0.0, 0.0], atol=1e-15)
        assert data.xi[1, 2, 3] == pytest.approx(0.1)

    @pytest.mark.parametrize(
        "text, message",
        [
            ("[elsewhere]\ndimension = 2\n", "outside"),
            ("[source]\ndimension = 2\ng[1][1] = \"1\"\ng[2][2] = \"1\"\n", "needs"),
            ("[target]\ndimension = 2\ng[1][1] = \"1\"\ng[2][2] = \"1\"\n[mapping]\ndirection = sideways\n", "direction"),
            ("[target]\ndimension = 2\ng[1][1] = \"1\"\ng[2][2] = \"1\"\n[mapping]\nxi[1][2] = \"1\"\n", "bad component"),
            ("[target]\ndimension = 2\ng[1][1] = \"1\"\ng[2][2] = \"1\"\n[mapping]\npsi[1] = \"1\"\n", "forward mapping"),
            ("[target]\ndimension = 2\ng[1][1] = \"1\"\ng[2][2] = \"1\"\n[mapping]\nchi[1] = \"1\"\n", "unknown mapping key"),
            ("[target]\ndimension = 2\ng[1][1] = \"1\"\ng[2][2] = \"1\"\n[mapping]\ndirection = backward\nxi[1][1][2] = \"1\"\n", "antisymmetric"),
        ],
    )
    def test_invalid_pairs(self, text, message):
        with pytest.raises(DefinitionError, match=message):
            load_pair(text)
