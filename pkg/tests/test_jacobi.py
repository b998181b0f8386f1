import numpy as np
import pytest

from errors import ConstraintError, DegenerateEigenvalueError, DomainError, UnsupportedError
from hessian.core import dynamic_constant, extreme_configuration, sigma_k
from hessian.jacobi import (
    VIOLATION_TOL,
    certified_min_gap,
    certify_form,
    extreme_pool,
    jacobi_gap,
    jacobi_terms,
    manifold_scan,
    minimizer_tensor,
    sample_admissible,
    sharp_kappa,
    slice_gaps,
    trace_threshold,
)
from hessian.zoo import zoo_eval
from models import Tensor3, tensor_basis
from schemas import JacobiQuantity, QuantityKind, ScanConfig

LAM = [1.0, 1.0, 0.0]
LOG_TRACE = JacobiQuantity(kind=QuantityKind.LOG_TRACE)


@pytest.fixture
def example_tensor():
    return Tensor3.from_entries(3, {(0, 0, 2): 1.0, (1, 1, 2): 1.0, (2, 2, 2): -1.0})


def test_log_trace_terms_by_hand(example_tensor):
    lap_b, grad_sq = jacobi_terms(LAM, example_tensor, LOG_TRACE)
    assert lap_b == pytest.approx(2.5)
    assert grad_sq == pytest.approx(0.5)
    assert jacobi_gap(LAM, example_tensor, LOG_TRACE) == pytest.approx(2.0)


def test_almost_jacobi_in_three_dimensions_uses_one_third(example_tensor):
    q = JacobiQuantity(kind=QuantityKind.ALMOST_JACOBI)
    assert jacobi_gap(LAM, example_tensor, q) == pytest.approx(2.5 - 0.5 / 3)


def test_shifted_trace_by_hand(example_tensor):
    q = JacobiQuantity(kind=QuantityKind.SHIFTED_TRACE, K=1.0)
    lap_b, grad_sq = jacobi_terms(LAM, example_tensor, q)
    assert lap_b == pytest.approx(1.2 - 0.08)
    assert grad_sq == pytest.approx(0.08)
    assert jacobi_gap(LAM, example_tensor, q) == pytest.approx(1.2 - 0.08 - 0.08)


def test_zero_tensor_has_zero_gap():
    assert jacobi_gap(LAM, Tensor3.zeros(3), LOG_TRACE) == 0.0


@pytest.mark.parametrize("t", [0.5, 2.0, -3.0])
def test_gap_is_quadratic_in_the_tensor(example_tensor, t):
    base = jacobi_gap(LAM, example_tensor, LOG_TRACE)
    assert jacobi_gap(LAM, example_tensor.scaled(t), LOG_TRACE) == pytest.approx(t * t * base)


def test_constraint_violation_is_rejected():
    with pytest.raises(ConstraintError):
        jacobi_gap(LAM, Tensor3.from_entries(3, {(0, 0, 0): 1.0}), LOG_TRACE)


def test_off_branch_spectrum_is_rejected(example_tensor):
    with pytest.raises(DomainError):
        jacobi_gap([-1.0, -1.0, 0.0], example_tensor, LOG_TRACE)


def test_lambda_max_needs_a_simple_top_eigenvalue():
    q = JacobiQuantity(kind=QuantityKind.LOG_LAMBDA_MAX)
    with pytest.raises(DegenerateEigenvalueError):
        certified_min_gap(LAM, q)
    cert = certified_min_gap(LAM, q, jitter_seed=0)
    assert cert.jitter > 0


def test_certify_form_on_trivial_subspace():
    value, x, dim = certify_form(np.eye(4), np.eye(4))
    assert (value, dim) == (0.0, 0)
    assert not x.any()


@pytest.mark.parametrize(
    "kind, K",
    [(QuantityKind.LOG_TRACE, 1.0), (QuantityKind.SHIFTED_TRACE, 1.0), (QuantityKind.ALMOST_JACOBI, 0.0), (QuantityKind.LOG_LAMBDA_MAX, 1.0)],
)
def test_certificate_bounds_sampled_gaps(kind, K):
    q = JacobiQuantity(kind=kind, K=K)
    for spectrum, c in sample_admissible(3, 1.0, seed=4, count=40):
        cert = certified_min_gap(spectrum, q)
        unit = c.scaled(1.0 / c.norm())
        assert jacobi_gap(spectrum, unit, q) >= cert.min_gap - 1e-9


def test_minimizer_attains_the_certificate():
    lam = extreme_configuration(4, 3.0)
    cert = certified_min_gap(lam, LOG_TRACE)
    c = minimizer_tensor(cert)
    assert c.norm() == pytest.approx(1.0)
    assert cert.constraint_residual <= 1e-10
    assert jacobi_gap(lam, c, LOG_TRACE) == pytest.approx(cert.min_gap, abs=1e-9)
    assert cert.subspace_dim == tensor_basis(4).dim - 4


def test_sharp_kappa_by_hand(example_tensor):
    assert sharp_kappa(LAM, LOG_TRACE) == pytest.approx(5.0)
    q = JacobiQuantity(kind=QuantityKind.LOG_TRACE, kappa=5.0)
    assert jacobi_gap(LAM, example_tensor, q) == pytest.approx(0.0, abs=1e-12)
    assert certified_min_gap(LAM, q).min_gap == pytest.approx(0.0, abs=1e-12)


def test_sharp_kappa_is_unbounded_at_equal_eigenvalues():
    lam = np.full(3, 1.0 / np.sqrt(3.0))
    assert sharp_kappa(lam, LOG_TRACE) == float("inf")
    assert certified_min_gap(lam, LOG_TRACE).sharp_kappa is None


def test_slice_formula_needs_a_trace_quantity():
    with pytest.raises(UnsupportedError):
        sharp_kappa([2.0, 0.5, 0.0], JacobiQuantity(kind=QuantityKind.LOG_LAMBDA_MAX))


@pytest.mark.parametrize(
    "kind, n",
    [
        (QuantityKind.LOG_TRACE, 3),
        (QuantityKind.LOG_TRACE, 5),
        (QuantityKind.SHIFTED_TRACE, 4),
        (QuantityKind.ALMOST_JACOBI, 4),
        (QuantityKind.ALMOST_JACOBI, 5),
    ],
)
def test_slice_formula_agrees_with_the_certificate(kind, n):
    q = JacobiQuantity(kind=kind, K=1.0)
    for spectrum, _ in sample_admissible(n, 1.0, seed=11, count=25):
        cert = certified_min_gap(spectrum, q)
        assert cert.min_gap == pytest.approx(slice_gaps(spectrum, q).min(), abs=1e-10)


def test_extreme_configuration_breaks_log_trace_without_gradient_term():
    q = JacobiQuantity(kind=QuantityKind.LOG_TRACE, kappa=0.0)
    assert certified_min_gap(extreme_configuration(5, 3.0), q).min_gap < 0


def test_sampled_tensors_are_admissible():
    pairs = sample_admissible(4, 1.0, seed=7, count=5)
    assert len(pairs) == 5
    for spectrum, c in pairs:
        lam = spectrum.array()
        f = lam.sum() - lam
        assert np.abs(np.einsum("i,iik->k", f, c.full())).max() <= 1e-10 * max(1.0, c.norm())
    assert sample_admissible(3, 0.0, seed=7, count=0) == []


def test_sampled_ratio_stays_above_the_bound():
    pairs = sample_admissible(4, 10.0, seed=1, count=2000)
    ratios = [s.array().min() / s.array().sum() for s, _ in pairs]
    assert min(ratios) > -0.5


def test_scan_finds_violation_without_gradient_term():
    q = JacobiQuantity(kind=QuantityKind.LOG_TRACE, K=10.0, kappa=0.0)
    result = manifold_scan(5, q, 10.0, ScanConfig(budget=200, seed=3))
    assert result.worst.min_gap < 0
    assert result.violations > 0
    assert result.evaluations <= 200


def test_scan_finds_log_trace_violation_in_four_dimensions():
    q = JacobiQuantity(kind=QuantityKind.LOG_TRACE, K=10.0)
    result = manifold_scan(4, q, 10.0, ScanConfig(budget=200, seed=3))
    assert result.worst.min_gap < 0


def test_three_dimensional_log_trace_with_one_third():
    q = JacobiQuantity(kind=QuantityKind.LOG_TRACE, kappa=1.0 / 3.0)
    result = manifold_scan(3, q, 0.0, ScanConfig(budget=300, seed=5))
    assert result.worst.min_gap >= -1e-8


def test_almost_jacobi_holds_on_extreme_configurations_in_four_dimensions():
    q = JacobiQuantity(kind=QuantityKind.ALMOST_JACOBI, K=10.0)
    pool = extreme_pool(4, 10.0, 1e-6)
    assert pool.shape[0] > 5
    for lam in pool:
        assert certified_min_gap(lam, q).min_gap >= -1e-8


def test_almost_jacobi_fails_when_the_top_eigenvalue_dominates_in_four_dimensions():
    lam = [101.0, 10.0, -10.0, 1.0]
    assert sigma_k(np.array(lam), 2) == pytest.approx(1.0)
    cert = certified_min_gap(lam, JacobiQuantity(kind=QuantityKind.ALMOST_JACOBI))
    assert cert.kappa == pytest.approx(0.5 - 10.0 / 102.0)
    assert cert.sharp_kappa == pytest.approx(125256.0 / 92408.0 - 1.0, rel=1e-9)
    assert cert.min_gap == pytest.approx(-4.41e-6, rel=0.02)


def test_almost_jacobi_fails_on_a_dynamic_spectrum_in_five_dimensions():
    lam = np.array([101.0, 10.0, -10.0, 1.0, 0.0])
    assert sigma_k(lam, 2) == pytest.approx(1.0)
    assert dynamic_constant(5) + lam.min() / lam.sum() > 0
    cert = certified_min_gap(lam, JacobiQuantity(kind=QuantityKind.ALMOST_JACOBI))
    assert cert.sharp_kappa == pytest.approx(166872.0 / 123212.0 - 1.0, rel=1e-9)
    assert cert.sharp_kappa < cert.kappa
    assert cert.min_gap < -1e-6


def test_shifted_trace_fails_when_the_top_eigenvalue_dominates():
    # lambda_min sits on -K and lambda_max = 35
    lam = [35.0, 1.0 + 2.0 / 34.0, -1.0]
    assert sigma_k(np.array(lam), 2) == pytest.approx(1.0)
    cert = certified_min_gap(lam, JacobiQuantity(kind=QuantityKind.SHIFTED_TRACE, K=1.0))
    assert cert.min_gap == pytest.approx(-7.90e-6, rel=0.03)
    assert cert.sharp_kappa == pytest.approx(0.805, abs=2e-3)
    reduced = JacobiQuantity(kind=QuantityKind.SHIFTED_TRACE, K=1.0, kappa=1.0 / 3.0)
    assert certified_min_gap(lam, reduced).min_gap > 0


@pytest.mark.parametrize("n, K", [(3, 1.0), (3, 3.0), (4, 1.0), (5, 3.0)])
def test_shifted_trace_holds_with_a_reduced_coefficient(n, K):
    q = JacobiQuantity(kind=QuantityKind.SHIFTED_TRACE, K=K, kappa=0.25)
    result = manifold_scan(n, q, K, ScanConfig(budget=200, seed=1))
    assert result.worst.min_gap >= -1e-8


@pytest.mark.parametrize("n, dynamic_only", [(4, False), (5, True)])
def test_almost_jacobi_scan_agrees_with_the_slice_formula(n, dynamic_only):
    q = JacobiQuantity(kind=QuantityKind.ALMOST_JACOBI, K=10.0)
    result = manifold_scan(n, q, 10.0, ScanConfig(budget=200, seed=3, dynamic_only=dynamic_only))
    worst = result.worst
    assert worst.min_gap == pytest.approx(slice_gaps(worst.spectrum, q).min(), abs=1e-10)
    if worst.min_gap < -VIOLATION_TOL:
        assert worst.sharp_kappa < worst.kappa


def test_scan_is_reproducible():
    q = JacobiQuantity(kind=QuantityKind.LOG_TRACE, K=10.0, kappa=0.0)
    first = manifold_scan(5, q, 10.0, ScanConfig(budget=100, seed=9))
    second = manifold_scan(5, q, 10.0, ScanConfig(budget=100, seed=9))
    assert first.worst.min_gap == second.worst.min_gap
    assert first.worst.spectrum == second.worst.spectrum


def test_trace_threshold_with_empty_budget():
    result = trace_threshold(5, 10.0, budget=0, seed=0)
    assert result.threshold == float("inf")
    assert result.samples == 0


def test_trace_threshold_is_finite_for_semiconvex_solutions():
    result = trace_threshold(5, 10.0, budget=200, seed=2)
    assert np.isfinite(result.threshold) or result.failures > 0
    assert result.threshold > 0


def test_fourth_derivatives_eliminate_along_warren(warren3, rng):
    x = rng.uniform(-1, 1, size=(1000, 3))
    d = zoo_eval(warren3, x, order=4)
    lap = np.trace(d.hessian, axis1=-2, axis2=-1)
    F = lap[:, None, None] * np.eye(3) - d.hessian
    lhs = np.einsum("kij,kijmm->k", F, d.fourth)
    lap_k = np.einsum("kiij->kj", d.third)
    rhs = np.sum(d.third**2, axis=(1, 2, 3)) - np.sum(lap_k**2, axis=1)
    scale = 1.0 + np.abs(rhs)
    assert np.max(np.abs(lhs - rhs) / scale) <= 1e-8
