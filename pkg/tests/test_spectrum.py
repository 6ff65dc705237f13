import numpy as np
import pytest

from hypothesis import given, seed, settings, assume
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from oscaudit import DegenerateIsotropic
from oscaudit.linalg3 import SymMat3, axis_rotation, conjugate, jacobi_eigen, make_rng, random_symmetric
from oscaudit.spectrum import (Mode, CLAMP_SLACK, big_omega, delta_printed, delta_robust, eigenvalues_printed,
                               eigenvalues_robust, eigenvalues_robust_batch, compare_modes, spectrum_audit)

entries = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False, allow_infinity=False,
                    allow_subnormal=False)


def test_robust_example(example, example_eigenvalues):
    spectrum = eigenvalues_robust(example)
    assert spectrum.mode is Mode.ROBUST
    assert_allclose(spectrum.omega_sq, example_eigenvalues, rtol=0, atol=1e-10 * (1.0 + example.norm))
    assert not spectrum.degenerate and not spectrum.clamped


def test_big_omega_of_diagonal():
    g = SymMat3.from_parts((1.0, 2.0, 3.0), (0.0, 0.0, 0.0))
    assert big_omega(g.diagonal, g.couplings) == pytest.approx(3.0)
    assert delta_robust(g.matrix) == pytest.approx(0.0, abs=1e-12)
    assert_allclose(eigenvalues_robust(g).omega_sq, [1.0, 2.0, 3.0], atol=1e-12)


def test_omega_includes_couplings(example):
    # 1/2 (1 + 4 + 1) + 3 (1 + 4 + 9)
    assert big_omega(example.diagonal, example.couplings) == pytest.approx(45.0)


def test_printed_mode_reports_without_failing():
    g = SymMat3.from_parts((1.0, 2.0, 3.0), (0.0, 0.0, 0.0))
    comparison = compare_modes(g)
    assert comparison.printed.mode is Mode.AS_PRINTED
    assert np.isfinite(comparison.delta_gap)
    assert comparison.delta_gap == pytest.approx(abs(comparison.printed.delta - comparison.robust.delta))
    # Trace is preserved by any amplitude and any Delta
    assert sum(comparison.printed.omega_sq) == pytest.approx(6.0)
    assert max(comparison.robust_vs_jacobi) <= 1e-12


def test_printed_delta_odd_extension():
    g = SymMat3.from_parts((-4.0, 1.0, 1.0), (0.0, 0.0, 0.0))
    # 18 (-4) + 2 (-8 + 1 + 1) - 3 (-3)(-3)(2)
    assert delta_printed(g.diagonal, g.couplings) == pytest.approx(-72.0 - 12.0 - 54.0)
    assert 'negative_frequency_sq' in eigenvalues_printed(g).flags
    assert 'negative_frequency_sq' not in eigenvalues_robust(g).flags


def test_isotropic_is_flagged_in_both_modes():
    g = SymMat3.from_parts((2.0, 2.0, 2.0), (0.0, 0.0, 0.0))
    for spectrum in (eigenvalues_printed(g), eigenvalues_robust(g)):
        assert spectrum.degenerate
        assert DegenerateIsotropic.kind in spectrum.flags
        assert spectrum.omega_sq == (2.0, 2.0, 2.0)


def test_printed_amplitude_disagrees_with_oracle(example):
    comparison = compare_modes(example)
    assert max(comparison.printed_vs_jacobi) > 1.0
    assert max(comparison.robust_vs_jacobi) <= 1e-10 * (1.0 + example.norm)
    record = comparison.as_dict()
    assert record['printed']['mode'] == 'printed'
    assert set(record) >= {'jacobi', 'delta_printed', 'delta_robust', 'delta_gap'}


def test_batch_matches_scalar(rng):
    stack = rng.uniform(-5.0, 5.0, size=(20, 3, 3))
    stack = 0.5 * (stack + np.swapaxes(stack, 1, 2))
    values, ratio, degenerate = eigenvalues_robust_batch(stack)
    assert not degenerate.any()
    for matrix, row in zip(stack, values):
        assert_allclose(row, eigenvalues_robust(SymMat3.from_matrix(matrix)).omega_sq, atol=1e-12)


def test_audit_on_many_matrices():
    audit = spectrum_audit(make_rng(11), 100_000, 1000.0)
    assert audit['jacobi_converged'] == 100_000
    assert audit['robust_max_rel_dev'] <= 1e-10
    assert audit['robust_within_1e-10'] == 100_000
    assert audit['robust_trace_max_rel_dev'] <= 1e-12
    assert audit['printed_trace_max_rel_dev'] <= 1e-10
    assert audit['printed_clamp_excess'] <= audit['printed_clamped']
    assert audit['robust_max_ratio_excess'] <= CLAMP_SLACK
    assert audit['degenerate'] == 0


def test_audit_is_reproducible():
    assert spectrum_audit(make_rng(5), 500, 10.0) == spectrum_audit(make_rng(5), 500, 10.0)


@seed(17)
@settings(max_examples=200, deadline=None)
@given(a=arrays(np.float64, (3, 3), elements=entries))
def test_robust_against_oracle_hypothesis(a):
    g = SymMat3.from_matrix(0.5 * (a + a.T))
    scale = 1.0 + g.norm
    # Away from the triple eigenvalue, where arccos loses digits
    assume(big_omega(g.diagonal, g.couplings) > 1e-6 * scale ** 2)
    robust = eigenvalues_robust(g)
    assert_allclose(robust.omega_sq, jacobi_eigen(g).eigenvalues, rtol=0, atol=1e-7 * scale)
    assert sum(robust.omega_sq) == pytest.approx(g.trace, abs=1e-10 * scale)


def test_clamp_excess_flag():
    g = SymMat3.from_parts((2.0, 2.0, 2.01), (0.0, 0.0, 0.0))
    printed = eigenvalues_printed(g)
    assert 'clamped' in printed.flags and 'clamp_excess' in printed.flags
    robust = eigenvalues_robust(g)
    assert 'clamp_excess' not in robust.flags


@pytest.mark.parametrize('axis', [1, 2, 3])
def test_robust_invariant_under_axis_rotation(axis):
    rng = make_rng(23 + axis)
    stack = random_symmetric(rng, 200, 10.0)
    angles = rng.uniform(-np.pi, np.pi, size=200)
    for matrix, angle in zip(stack, angles):
        rotated = conjugate(matrix, axis_rotation(axis, float(angle)))
        g = SymMat3.from_matrix(matrix)
        h = SymMat3.from_matrix(0.5 * (rotated + rotated.T))
        assert_allclose(eigenvalues_robust(h).omega_sq, eigenvalues_robust(g).omega_sq,
                        rtol=0, atol=1e-10 * (1.0 + g.norm))
