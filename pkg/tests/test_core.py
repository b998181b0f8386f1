import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import BranchError, DomainError, SamplingError, SymmetryError
from hessian.core import (
    classify_branch,
    dynamic_constant,
    extreme_configuration,
    lin_trudinger_ratios,
    linearized_coefficients,
    min_ratio,
    sample_on_branch,
    sigma2_matrix,
    sigma_k,
    spectrum_sigma,
)
from schemas import Branch, Spectrum

eigenvalues = st.integers(min_value=2, max_value=6).flatmap(
    lambda n: st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=n, max_size=n)
)


@given(eigenvalues)
def test_sigma_k_matches_characteristic_polynomial(values):
    lam = np.asarray(values)
    coeffs = np.poly(lam)
    for k in range(lam.size + 1):
        expected = (-1) ** k * coeffs[k]
        assert sigma_k(lam, k) == pytest.approx(expected, rel=1e-9, abs=1e-6)


@given(eigenvalues)
def test_sigma_k_is_permutation_invariant(values):
    lam = np.asarray(values)
    assert sigma_k(lam[::-1], 2) == pytest.approx(sigma_k(lam, 2), rel=1e-12, abs=1e-9)


def test_sigma_k_rejects_out_of_range_order():
    with pytest.raises(DomainError):
        sigma_k(np.ones(3), 4)


@settings(max_examples=50)
@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=2**32 - 1))
def test_trace_identity_matches_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    H = B + B.T
    report = sigma2_matrix(H)
    assert report.sigma2 == pytest.approx(spectrum_sigma(np.linalg.eigvalsh(H), 2), rel=1e-9, abs=1e-9)
    assert report.trace == pytest.approx(np.trace(H))


def test_warren_hessian_at_origin_is_on_positive_branch():
    report = sigma2_matrix(np.diag([2.0, 2.0, -0.75]))
    assert report.sigma2 == pytest.approx(1.0)
    assert report.branch == Branch.POSITIVE
    assert report.concave_residual == pytest.approx(0.0, abs=1e-12)


def test_negated_hessian_is_on_negative_branch():
    report = sigma2_matrix(-np.diag([2.0, 2.0, -0.75]))
    assert report.branch == Branch.NEGATIVE


def test_off_level_set():
    assert sigma2_matrix(np.eye(3)).branch == Branch.OFF_LEVEL_SET


def test_classify_branch_is_vectorised():
    labels = classify_branch(np.array([1.0, 1.0, 2.0]), np.array([3.0, -3.0, 1.0]))
    assert labels.tolist() == [Branch.POSITIVE.value, Branch.NEGATIVE.value, Branch.OFF_LEVEL_SET.value]


def test_asymmetric_matrix_is_rejected():
    with pytest.raises(SymmetryError):
        sigma2_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_linearized_operators_are_elliptic_on_positive_branch():
    coeffs = linearized_coefficients(np.diag([2.0, 2.0, -0.75]))
    assert coeffs.F_posdef
    assert coeffs.Fc_posdef
    np.testing.assert_allclose(np.diag(coeffs.F), [1.25, 1.25, 4.0])


@pytest.mark.parametrize("n", [3, 4, 5, 8])
def test_extreme_configuration_lies_on_level_set(n):
    s = extreme_configuration(n, 3.0)
    assert spectrum_sigma(s, 2) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_extreme_ratio_approaches_lower_bound(n):
    ratios = [min_ratio(extreme_configuration(n, K), K).ratio for K in (10.0, 100.0, 1000.0)]
    assert all(r > -(n - 2) / n for r in ratios)
    assert abs(ratios[-1] + (n - 2) / n) < abs(ratios[0] + (n - 2) / n)
    assert ratios[-1] == pytest.approx(-(n - 2) / n, abs=1e-4)


def test_extreme_configuration_needs_three_dimensions():
    with pytest.raises(DomainError):
        extreme_configuration(2, 1.0)


def test_dynamic_constant_values():
    assert dynamic_constant(4) == pytest.approx(0.5)
    assert dynamic_constant(3) == pytest.approx((math.sqrt(28) - 2) / 6)


@pytest.mark.parametrize("n, K", [(3, 0.0), (4, 1.0), (5, 10.0)])
def test_sampled_spectra_respect_ratio_bound(n, K):
    lam = sample_on_branch(n, K, np.random.default_rng(7), 500)
    assert lam.shape == (500, n)
    np.testing.assert_allclose(sigma_k(lam, 2), 1.0, rtol=1e-9)
    assert np.all(lam.sum(axis=1) > 0)
    assert np.all(lam.min(axis=1) >= -K)
    assert np.all(lam.min(axis=1) / lam.sum(axis=1) > -(n - 2) / n)


def test_sampling_zero_count():
    assert sample_on_branch(3, 1.0, np.random.default_rng(0), 0).shape == (0, 3)


def test_sampling_failure_is_reported():
    with pytest.raises(SamplingError):
        sample_on_branch(3, 1.0, np.random.default_rng(0), 10, max_rounds=0)


def test_min_ratio_needs_positive_trace():
    with pytest.raises(BranchError):
        min_ratio(Spectrum.of([-2.0, -2.0, 0.75]))


def test_lin_trudinger_ratios_are_sorted_by_lambda_max():
    ratios = lin_trudinger_ratios([2.0, -0.75, 2.0])
    assert ratios.lambda_max == 2.0
    assert ratios.f1_times_l1 == pytest.approx(2.5)
    assert len(ratios.fk_over_l1) == 2
