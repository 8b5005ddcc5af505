"""Spectral classification, Jacobian structure, and region scanning."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbfsir import (
    Classification,
    Constant,
    ModelParams,
    Rank1Local,
    ScalarScaled,
    classify_equilibrium,
    dominant_eigen,
    jacobian_at_equilibrium,
    preset,
    region_to_json,
    region_to_svg,
    scan_region,
)
from nbfsir.errors import NumericalError, UsageError
from nbfsir.interaction import ExpressionFunction

from conftest import lam_2x2


class TestDominantEigen:
    def test_matches_closed_form_on_random_2x2(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            a = rng.uniform(0.0, 3.0, size=(2, 2))
            x = rng.uniform(0.0, 1.0, size=2)
            m = np.diag(x) @ a
            assert dominant_eigen(m).value == pytest.approx(
                lam_2x2(a, x), abs=1e-9)

    def test_symmetric_uniform_mixing(self):
        # diag(0.5, 0.5) @ (1.5 * ones) has dominant root 1.5 and a
        # uniform left direction
        m = np.diag([0.5, 0.5]) @ (1.5 * np.ones((2, 2)))
        eig = dominant_eigen(m)
        assert eig.value == pytest.approx(1.5, abs=1e-12)
        assert eig.irreducible
        assert eig.left_vector == pytest.approx([0.5, 0.5], abs=1e-10)

    def test_asymmetric_example(self):
        m = np.diag([0.5, 0.5]) @ np.array([[3.0, 2.0], [1.0, 2.0]])
        eig = dominant_eigen(m)
        assert eig.value == pytest.approx(2.0, abs=1e-10)
        assert eig.left_vector == pytest.approx([0.5, 0.5], abs=1e-10)

    def test_zero_matrix(self):
        eig = dominant_eigen(np.zeros((3, 3)))
        assert eig.value == pytest.approx(0.0, abs=1e-12)
        assert not eig.irreducible
        assert eig.left_vector is None

    def test_reducible_matrix_has_no_perron_vector(self):
        eig = dominant_eigen(np.array([[2.0, 1.0], [0.0, 1.0]]))
        assert eig.value == pytest.approx(2.0, abs=1e-10)
        assert not eig.irreducible
        assert eig.left_vector is None

    def test_left_vector_is_a_left_eigenvector(self):
        rng = np.random.default_rng(9)
        m = rng.uniform(0.1, 2.0, size=(4, 4))
        eig = dominant_eigen(m)
        assert eig.left_vector is not None
        assert eig.left_vector.sum() == pytest.approx(1.0, abs=1e-12)
        residual = eig.left_vector @ m - eig.value * eig.left_vector
        assert np.max(np.abs(residual)) < 1e-9

    def test_rejects_non_square(self):
        with pytest.raises(UsageError, match="square"):
            dominant_eigen(np.ones((2, 3)))

    def test_rejects_negative_entries(self):
        with pytest.raises(UsageError, match="nonnegative"):
            dominant_eigen(np.array([[1.0, -0.5], [0.0, 1.0]]))

    def test_defective_spectrum_raises_with_best_estimate(self):
        # a nilpotent matrix makes the shifted iteration converge only
        # algebraically; the failure must carry a usable estimate
        with pytest.raises(NumericalError) as err:
            dominant_eigen(np.array([[0.0, 0.75], [0.0, 0.0]]))
        assert err.value.best_estimate is not None
        assert 0.0 <= err.value.best_estimate < 1e-3

    def test_single_and_batched_queries_agree(self):
        from nbfsir.stability import (_power_iteration_batch,
                                      _power_iteration_single)
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            m = rng.uniform(0.05, 3.0, size=(n, n))
            lam_s, _, ok_s = _power_iteration_single(m)
            lam_b, _, ok_b = _power_iteration_batch(m)
            assert ok_s and ok_b
            assert lam_s == pytest.approx(lam_b, abs=1e-9)

    def test_transient_rayleigh_plateau_does_not_stop_the_iteration(self):
        # For this matrix the first two Rayleigh quotients of the shifted
        # iteration are exactly equal (both 3.2) while the iterate is far
        # from the eigenvector, so a stop on quotient agreement alone
        # would report 1.0 instead of the true root 0.98097.  The
        # residual gate must carry the iteration past the plateau.
        m = np.diag([0.4, 0.16]) @ np.array([[1.0, 2.0], [3.0, 2.0]])
        expected = max(np.linalg.eigvals(m).real)
        got = dominant_eigen(m).value
        assert got == pytest.approx(expected, abs=1e-9)
        assert abs(got - 1.0) > 1e-3

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_monotone_in_the_entries(self, seed):
        """Growing any entry never shrinks the dominant eigenvalue."""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        c = rng.uniform(0.1, 3.0, size=(n, n))
        b = c * rng.uniform(0.1, 1.0, size=(n, n))
        assert dominant_eigen(b).value <= dominant_eigen(c).value + 1e-12


class TestClassifyEquilibrium:
    def test_rising_caution_model_interior_point(self):
        # lambda at x = (0.3, 0.3) is sum x_i (1 + x_i) = 0.78 < 1
        report = classify_equilibrium(preset("example3").params(),
                                      np.array([0.3, 0.3]))
        assert report.lambda_max == pytest.approx(0.78, abs=1e-9)
        assert report.classification is Classification.STABLE
        assert report.irreducible
        assert report.perron_vector.sum() == pytest.approx(1.0, abs=1e-12)

    def test_fatigue_model_full_susceptibility(self):
        # lambda at x = (1, 1) is sum x_i (2 - x_i) = 2 > 1
        report = classify_equilibrium(preset("example4").params(),
                                      np.array([1.0, 1.0]))
        assert report.lambda_max == pytest.approx(2.0, abs=1e-9)
        assert report.classification is Classification.UNSTABLE

    def test_empty_population_is_stable(self):
        report = classify_equilibrium(preset("example2a").params(),
                                      np.zeros(2))
        assert report.lambda_max == pytest.approx(0.0, abs=1e-12)
        assert report.classification is Classification.STABLE
        assert report.perron_vector is None

    def test_marginal_band(self):
        params = ModelParams(gamma=1.0, interaction=Constant(np.ones((2, 2))))
        # lambda = x1 + x2 exactly 1 on the diagonal
        report = classify_equilibrium(params, np.array([0.5, 0.5]))
        assert report.classification is Classification.MARGINAL
        wide = classify_equilibrium(params, np.array([0.5, 0.45]),
                                    marginal_band=0.1)
        assert wide.classification is Classification.MARGINAL

    def test_input_validation(self):
        params = preset("example2a").params()
        with pytest.raises(UsageError, match="shape"):
            classify_equilibrium(params, np.array([0.5]))
        with pytest.raises(UsageError, match=r"\[0,1\]"):
            classify_equilibrium(params, np.array([0.5, 1.2]))
        with pytest.raises(UsageError, match="marginal_band"):
            classify_equilibrium(params, np.array([0.5, 0.5]),
                                 marginal_band=-1.0)


def _leverrier_char_poly(m: np.ndarray) -> np.ndarray:
    """Characteristic polynomial coefficients by the Faddeev recursion.

    Returns [1, c1, ..., cn] with p(s) = s^n + c1 s^(n-1) + ... + cn,
    an eigenvalue route fully independent of iterative eigensolvers.
    """
    n = m.shape[0]
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    work = np.zeros_like(m)
    for k in range(1, n + 1):
        work = m @ work + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(m @ work) / k
    return coeffs


class TestJacobian:
    def test_uniform_mixing_blocks_are_exact(self):
        params = preset("example2a").params()
        x_star = np.array([0.2, 0.3])
        jac = jacobian_at_equilibrium(params, x_star)
        m = np.diag(x_star) @ (1.5 * np.ones((2, 2)))
        expected = np.zeros((4, 4))
        expected[:2, 2:] = -m
        expected[2:, 2:] = m - np.eye(2)
        assert np.allclose(jac, expected, rtol=0, atol=1e-14)

    def test_matches_finite_differences(self):
        spec = Rank1Local(
            tuple(ExpressionFunction("1 + u") for _ in range(2)),
            tuple(ExpressionFunction("1 / (1 + 1.5*u)") for _ in range(2)))
        params = ModelParams(gamma=0.8, interaction=spec)
        x_star = np.array([0.4, 0.7])
        jac = jacobian_at_equilibrium(params, x_star)

        from nbfsir import vector_field

        def flow(u: np.ndarray) -> np.ndarray:
            dx, dy = vector_field(params, u[:2], u[2:], check=False)
            return np.concatenate([dx, dy])

        u0 = np.concatenate([x_star, np.zeros(2)])
        h = 1e-6
        fd = np.empty((4, 4))
        for j in range(4):
            up, um = u0.copy(), u0.copy()
            up[j] += h
            um[j] -= h
            fd[:, j] = (flow(up) - flow(um)) / (2 * h)
        assert np.max(np.abs(jac - fd)) < 1e-6

    def test_spectrum_splits_into_zeros_and_shifted_block(self):
        rng = np.random.default_rng(77)
        for n in (2, 3):
            a = rng.uniform(0.2, 2.0, size=(n, n))
            x_star = rng.uniform(0.1, 0.9, size=n)
            gamma = 1.3
            params = ModelParams(gamma=gamma, interaction=Constant(a))
            jac = jacobian_at_equilibrium(params, x_star)
            # char poly of the 2n x 2n Jacobian, found independently of
            # any iterative eigensolver
            coeffs = _leverrier_char_poly(jac)
            # the n-fold zero eigenvalue appears as n vanishing trailing
            # coefficients (s^n divides the polynomial); splitting it off
            # before root-finding avoids the e^(1/n) cluster blow-up of
            # polishing a multiple root
            assert np.max(np.abs(coeffs[n + 1:])) < 1e-12
            quotient_roots = np.roots(coeffs[: n + 1])
            m = np.diag(x_star) @ a
            expected = np.linalg.eigvals(m - gamma * np.eye(n))
            got = np.sort_complex(quotient_roots)
            want = np.sort_complex(expected)
            assert np.max(np.abs(got - want)) < 1e-8


class TestScanRegion:
    def test_requires_two_nodes(self):
        params = ModelParams(gamma=1.0, interaction=Constant(np.eye(3)))
        with pytest.raises(UsageError, match="two-node"):
            scan_region(params)

    def test_requires_minimum_resolution(self):
        with pytest.raises(UsageError, match=">= 11"):
            scan_region(preset("example2a").params(), resolution=10)

    def test_rejects_bad_weights(self):
        params = preset("example2a").params()
        for weights in ([1.0], [1.0, -0.5], [0.0, 0.0], [np.nan, 1.0]):
            with pytest.raises(UsageError, match="weights"):
                scan_region(params, resolution=21, weights=weights)

    def test_uniform_mixing_boundary_is_the_straight_segment(self):
        scan = scan_region(preset("example2a").params(), resolution=51)
        pts = scan.boundary_points
        assert len(pts) >= 40
        residuals = [abs(p[0] + p[1] - 2.0 / 3.0) for p in pts]
        assert max(residuals) < 1e-6

    def test_classes_match_closed_form(self):
        cfg = preset("example2c")
        scan = scan_region(cfg.params(), resolution=21)
        a = cfg.interaction.matrix
        for i in (3, 10, 17):
            for j in (2, 9, 20):
                x = np.array([scan.axis[i], scan.axis[j]])
                lam = lam_2x2(a, x)
                assert scan.lambda_grid[i, j] == pytest.approx(lam, abs=1e-9)
                expected = (Classification.UNSTABLE if lam > 1.0 + 1e-9 else
                            Classification.STABLE if lam < 1.0 - 1e-9 else
                            Classification.MARGINAL)
                assert scan.classes[i, j] is expected

    def test_asymmetric_optimum_is_a_corner(self):
        scan = scan_region(preset("example2b").params(), resolution=101)
        assert scan.x_star_set.shape == (1, 2)
        assert scan.x_star_set[0] == pytest.approx([1.0, 0.0], abs=1e-9)

    def test_weighted_objective_moves_the_optimum(self):
        # on the boundary x1 + 2 x2 = 1, weighting the second node
        # relocates the argmax from (1, 0) to (0, 1/2)
        scan = scan_region(preset("example2b").params(), resolution=101,
                           weights=[0.1, 0.9])
        assert scan.x_star_set[0] == pytest.approx([0.0, 0.5], abs=1e-6)

    def test_all_stable_scan_reports_full_susceptibility(self):
        params = ModelParams(gamma=5.0,
                             interaction=Constant(np.full((2, 2), 0.5)))
        scan = scan_region(params, resolution=21)
        assert scan.boundary == ()
        assert np.array_equal(scan.x_star_set, [[1.0, 1.0]])
        assert all(c is Classification.STABLE for c in scan.classes.ravel())


@pytest.fixture(scope="module")
def scan_2b_21():
    return scan_region(preset("example2b").params(), resolution=21)


class TestRegionSerialization:

    def test_json_fields(self, scan_2b_21):
        scan = scan_2b_21
        doc = json.loads(region_to_json(scan))
        assert doc["resolution"] == 21
        assert doc["gamma"] == 1.0
        assert len(doc["classes"]) == 21 * 21
        assert set(doc["classes"]) <= {"S", "U", "M"}
        assert all(len(p) == 2 for p in doc["boundary"])
        assert doc["x_star_set"] == [[1.0, 0.0]]

    def test_classes_are_row_major(self, scan_2b_21):
        scan = scan_2b_21
        doc = json.loads(region_to_json(scan))
        flat = np.array(doc["classes"]).reshape(21, 21)
        i, j = 20, 3  # x1 = 1.0 row: high lambda, unstable
        assert flat[i, j] == scan.classes[i, j].value

    def test_svg_structure(self, scan_2b_21):
        scan = scan_2b_21
        svg = region_to_svg(scan)
        assert svg.startswith("<svg")
        assert 'viewBox="0 0 1000 1000"' in svg
        assert "<rect" in svg
        assert "<polyline" in svg
        assert "<circle" in svg
