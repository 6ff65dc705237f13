import numpy as np
import pytest

from numpy.testing import assert_allclose

from oscaudit import DegenerateCoupling
from oscaudit.linalg3 import SymMat3, make_rng
from oscaudit.modal import (coupling_discriminant, build_modal_basis, modal_transform,
                            robust_orthonormal_diagonalizer, spectrum_agreement, equal_row_sum, modal_audit)

SQRT3 = np.sqrt(3.0)


def test_discriminant(example):
    # K = (1, 2, 3): 1/2 ((1 - 3)^2 + (2 - 1)^2 + (3 - 2)^2)
    assert coupling_discriminant(example) == pytest.approx(SQRT3)


def test_equal_row_sum_basis(example):
    basis = build_modal_basis(example)
    assert basis.lambda0 == pytest.approx(10.0)
    assert basis.lambda_plus == pytest.approx(4.0 + SQRT3)
    assert basis.lambda_minus == pytest.approx(4.0 - SQRT3)
    assert basis.rowsum_spread == 0.0
    assert max(basis.eig_residuals) <= 1e-12
    for vector in (basis.v, basis.v_plus, basis.v_minus):
        assert np.linalg.norm(vector) == pytest.approx(1.0)
    assert abs(basis.v_plus @ basis.v_minus) <= 1e-14
    assert abs(basis.v @ basis.v_plus) <= 1e-14
    assert basis.completed == ''


def test_printed_normalizer_fits_one_vector(example):
    basis = build_modal_basis(example)
    # |w-|^2 = 2z(2z - s) while |w+|^2 = 2z(2z + s), s = K13 + K23 - 2 K12 = 3
    assert basis.norm_residuals[2] <= 1e-12
    assert basis.norm_residuals[1] > 1.0
    assert basis.flipped_residuals[0] <= 1e-12
    assert basis.preferred_sign == ('flipped', 'printed')


def test_unequal_row_sums_leave_residual():
    basis = build_modal_basis(SymMat3.from_parts((1.0, 2.0, 3.0), (0.1, 0.2, 0.3)))
    assert basis.rowsum_spread > 0.0
    assert basis.eig_residuals[0] > 1e-3


def test_equal_couplings_are_degenerate():
    with pytest.raises(DegenerateCoupling) as info:
        build_modal_basis(SymMat3.from_parts((2.0, 2.0, 2.0), (1.0, 1.0, 1.0)))
    assert info.value.details['z'] == 0.0


def test_vanishing_vector_is_completed():
    # K = (1, 0, 0) makes w+ vanish identically
    basis = build_modal_basis(SymMat3.from_parts((2.0, 2.0, 2.0), (1.0, 0.0, 0.0)))
    assert basis.completed == 'v_plus'
    u = np.vstack([basis.v, basis.v_plus, basis.v_minus])
    assert_allclose(u @ u.T, np.eye(3), atol=1e-14)


def test_transform_diagonalizes_equal_row_sums(example, example_eigenvalues):
    transform = modal_transform(example)
    assert transform.orthogonality_dev <= 1e-14
    assert transform.offdiag_norm <= 1e-9 * (1.0 + example.norm)
    assert_allclose(sorted(transform.diag), example_eigenvalues, atol=1e-12)
    assert_allclose(transform.row_norms, 1.0)
    assert transform.printed_orthogonality_dev > 1.0


def test_transform_of_generic_matrix_is_not_diagonal():
    transform = modal_transform(SymMat3.from_parts((1.0, 2.0, 3.0), (0.1, 0.2, 0.3)))
    assert transform.orthogonality_dev <= 1e-14
    assert transform.offdiag_norm > 1e-3


def test_oracle_diagonalizer(rng):
    for matrix in rng.uniform(-10.0, 10.0, size=(20, 3, 3)):
        g = SymMat3.from_matrix(0.5 * (matrix + matrix.T))
        transform = robust_orthonormal_diagonalizer(g)
        assert transform.orthogonality_dev <= 1e-13
        assert transform.offdiag_norm <= 1e-12 * (1.0 + g.norm)


def test_spectrum_agreement(example):
    record = spectrum_agreement(example)
    assert record['modal_vs_jacobi'] <= 1e-12
    assert record['robust_vs_jacobi'] <= 1e-10
    assert record['printed_vs_jacobi'] > 1.0
    assert record['modal_vs_printed'] == pytest.approx(record['printed_vs_jacobi'], abs=1e-9)


def test_spectrum_agreement_reports_degenerate_coupling():
    record = spectrum_agreement(SymMat3.from_parts((1.0, 2.0, 3.0), (0.5, 0.5, 0.5)))
    assert record['modal'] is None
    assert record['error']['kind'] == 'DegenerateCoupling'
    assert record['robust_vs_jacobi'] <= 1e-10


def test_equal_row_sum_family(rng):
    stack = equal_row_sum(rng, 50, 5.0, row_sum=7.0)
    assert_allclose(stack.sum(axis=2), 7.0, atol=1e-13)
    assert np.array_equal(stack, np.swapaxes(stack, 1, 2))


def test_modal_audit():
    audit = modal_audit(make_rng(8), 1000, 10.0)
    assert audit['skipped_small_z'] == 0
    assert audit['trace_max_rel_dev'] <= 1e-12
    assert audit['orthogonality_max'] <= 1e-10
    assert audit['equal_row_sum_eig_residual_max'] <= 1e-12
    assert audit['equal_row_sum_spectrum_max_dev'] <= 1e-12
    assert audit['generic_offdiag_median'] > 1e-3
