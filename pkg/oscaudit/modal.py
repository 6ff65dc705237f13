"""
Alternative diagonalization of Gamma through the eigenvectors v, v+, v-, the transformation U(t) with these
rows and the congruence U Gamma U^T, with residual diagnostics.
"""
import logging

from dataclasses import dataclass
from typing import Dict, Any, Tuple

import numpy as np
from numpy.typing import NDArray

from oscaudit import DegenerateCoupling
from oscaudit.linalg3 import SymMat3, Vec3, Mat3, jacobi_eigen, random_symmetric
from oscaudit.spectrum import eigenvalues_printed, eigenvalues_robust

logger = logging.getLogger(__name__)

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class ModalBasis:
    v: Vec3
    v_plus: Vec3
    v_minus: Vec3
    lambda0: float
    lambda_plus: float
    lambda_minus: float
    z: float
    a_plus: float
    a_minus: float
    norm_residuals: Tuple[float, float, float]
    eig_residuals: Tuple[float, float, float]
    rowsum_spread: float
    flipped_residuals: Tuple[float, float] = (float('nan'), float('nan'))
    preferred_sign: Tuple[str, str] = ('printed', 'printed')
    completed: str = ''

    @property
    def eigenvalues(self) -> Tuple[float, float, float]:
        return self.lambda0, self.lambda_plus, self.lambda_minus

    def as_dict(self) -> Dict[str, Any]:
        return {'v': self.v.tolist(), 'v_plus': self.v_plus.tolist(), 'v_minus': self.v_minus.tolist(),
                'lambda': self.lambda0, 'lambda_plus': self.lambda_plus, 'lambda_minus': self.lambda_minus,
                'z': self.z, 'a_plus': self.a_plus, 'a_minus': self.a_minus,
                'norm_residuals': list(self.norm_residuals), 'eig_residuals': list(self.eig_residuals),
                'rowsum_spread': self.rowsum_spread, 'flipped_residuals': list(self.flipped_residuals),
                'preferred_sign': list(self.preferred_sign), 'completed': self.completed}


@dataclass(frozen=True)
class ModalTransform:
    u: Mat3
    orthogonality_dev: float
    diag: Tuple[float, float, float]
    offdiag_norm: float
    row_norms: Tuple[float, float, float]
    printed_u: Mat3 = None
    printed_orthogonality_dev: float = float('nan')

    def as_dict(self) -> Dict[str, Any]:
        return {'u': self.u.tolist(), 'orthogonality_dev': self.orthogonality_dev, 'diag': list(self.diag),
                'offdiag_norm': self.offdiag_norm, 'row_norms': list(self.row_norms),
                'printed_u': None if self.printed_u is None else self.printed_u.tolist(),
                'printed_orthogonality_dev': self.printed_orthogonality_dev}


def _differences(g: SymMat3) -> Tuple[float, float, float]:
    """(K12 - K23, K13 - K12, K23 - K13), the last one written as minus the sum of the first two"""
    a = g.o12 - g.o23
    b = g.o13 - g.o12
    return a, b, -(a + b)


def coupling_discriminant(g: SymMat3) -> float:
    """
    Coupling discriminant z, evaluated through half the sum of squared pairwise coupling differences
    :param g: symmetric matrix
    :return: z >= 0
    """
    a, b, c = _differences(g)
    return float(np.sqrt(0.5 * (a * a + b * b + c * c)))


def _normalizer(z: float, bracket: float) -> float:
    radicand = 2.0 * z * (2.0 * z - bracket)
    return 1.0 / np.sqrt(radicand) if radicand > 0.0 else float('nan')


def _residual(matrix: Mat3, vector: Vec3, value: float) -> float:
    return float(np.linalg.norm(matrix @ vector - value * vector) / np.linalg.norm(vector))


def build_modal_basis(g: SymMat3) -> ModalBasis:
    """
    Modal eigenvectors and eigenvalues with normalization and eigen residuals
    :param g: symmetric matrix
    :return: ModalBasis, vectors unit-normalized
    """
    z = coupling_discriminant(g)
    if z <= 1e-12 * (1.0 + g.norm):
        raise DegenerateCoupling(f'coupling discriminant z = {z:.3e}, A+- divides by z', z=z)
    matrix = g.matrix
    a, b, c = _differences(g)
    w_plus = np.array([a - z, b + z, c])
    w_minus = np.array([a + z, b - z, c])

    # J13 + J23 - 2 J12 of the printed A+- read as couplings
    bracket = g.o13 + g.o23 - 2.0 * g.o12
    printed, flipped = _normalizer(z, bracket), _normalizer(z, -bracket)
    raw_plus, raw_minus = np.linalg.norm(w_plus), np.linalg.norm(w_minus)
    norm_plus, norm_minus = abs(printed * raw_plus - 1.0), abs(printed * raw_minus - 1.0)
    flip_plus, flip_minus = abs(flipped * raw_plus - 1.0), abs(flipped * raw_minus - 1.0)

    def preferred(printed_residual, flipped_residual):
        return 'flipped' if flipped_residual < printed_residual or np.isnan(printed_residual) else 'printed'

    v = np.ones(3) / SQRT3
    completed = ''
    # At most one of w+- vanishes: |w+|^2 + |w-|^2 = 8 z^2
    tiny = 1e-12 * z
    if raw_plus <= tiny:
        v_minus = w_minus / raw_minus
        v_plus = np.cross(v_minus, v)
        completed = 'v_plus'
    elif raw_minus <= tiny:
        v_plus = w_plus / raw_plus
        v_minus = np.cross(v, v_plus)
        completed = 'v_minus'
    else:
        v_plus, v_minus = w_plus / raw_plus, w_minus / raw_minus

    trace, coupling_sum = g.trace, g.o12 + g.o13 + g.o23
    lambda0 = (trace + 2.0 * coupling_sum) / 3.0
    lambda_plus = (trace - coupling_sum) / 3.0 + z
    lambda_minus = (trace - coupling_sum) / 3.0 - z
    row_sums = matrix.sum(axis=1)

    return ModalBasis(
        v, v_plus, v_minus, lambda0, lambda_plus, lambda_minus, z, printed, printed,
        (0.0, float(norm_plus), float(norm_minus)),
        (_residual(matrix, v, lambda0), _residual(matrix, v_plus, lambda_plus),
         _residual(matrix, v_minus, lambda_minus)),
        float(np.max(row_sums) - np.min(row_sums)),
        (float(flip_plus), float(flip_minus)),
        (preferred(norm_plus, flip_plus), preferred(norm_minus, flip_minus)),
        completed)


def _transform(matrix: Mat3, u: Mat3) -> Tuple[float, Tuple[float, float, float], float, Tuple[float, float, float]]:
    congruence = u @ matrix @ u.T
    off = congruence - np.diag(np.diagonal(congruence))
    return (float(np.linalg.norm(u @ u.T - np.eye(3))), tuple(float(d) for d in np.diagonal(congruence)),
            float(np.linalg.norm(off)), tuple(float(n) for n in np.linalg.norm(u, axis=1)))


def modal_transform(g: SymMat3) -> ModalTransform:
    """
    U with unit rows v, v+, v-, U Gamma U^T and diagnostics
    :param g: symmetric matrix
    :return: ModalTransform, printed_u holds the rows scaled with the printed A+-
    """
    basis = build_modal_basis(g)
    matrix = g.matrix
    u = np.vstack([basis.v, basis.v_plus, basis.v_minus])
    a, b, c = _differences(g)
    z = basis.z
    printed_u = np.array([np.ones(3) / SQRT3,
                          basis.a_plus * np.array([a - z, b + z, c]),
                          basis.a_minus * np.array([a + z, b - z, c])])
    orthogonality, diag, offdiag, rows = _transform(matrix, u)
    with np.errstate(invalid='ignore'):
        printed_dev = float(np.linalg.norm(printed_u @ printed_u.T - np.eye(3)))
    return ModalTransform(u, orthogonality, diag, offdiag, rows, printed_u, printed_dev)


def robust_orthonormal_diagonalizer(g: SymMat3) -> ModalTransform:
    """
    Reference transform from the Jacobi oracle, U = Q^T
    :param g: symmetric matrix
    :return: ModalTransform
    """
    u = jacobi_eigen(g).eigenvectors.T
    orthogonality, diag, offdiag, rows = _transform(g.matrix, u)
    return ModalTransform(u, orthogonality, diag, offdiag, rows)


def _multiset_distance(x, y) -> float:
    return float(np.max(np.abs(np.sort(np.asarray(x)) - np.sort(np.asarray(y)))))


def spectrum_agreement(g: SymMat3) -> Dict[str, Any]:
    """
    The modal eigenvalues against the trigonometric Omega_i^2 and the Jacobi spectrum
    :param g: symmetric matrix
    :return: multisets and their distances
    """
    oracle = jacobi_eigen(g).eigenvalues
    printed, robust = eigenvalues_printed(g), eigenvalues_robust(g)
    record = {'jacobi': oracle.tolist(), 'omega_sq_printed': list(printed.omega_sq),
              'omega_sq_robust': list(robust.omega_sq),
              'printed_vs_jacobi': _multiset_distance(printed.omega_sq, oracle),
              'robust_vs_jacobi': _multiset_distance(robust.omega_sq, oracle)}
    try:
        basis = build_modal_basis(g)
    except DegenerateCoupling as err:
        return record | {'modal': None, 'error': err.to_dict()}
    return record | {'modal': list(basis.eigenvalues),
                     'modal_vs_jacobi': _multiset_distance(basis.eigenvalues, oracle),
                     'modal_vs_printed': _multiset_distance(basis.eigenvalues, printed.omega_sq),
                     'modal_vs_robust': _multiset_distance(basis.eigenvalues, robust.omega_sq)}


def equal_row_sum(rng: np.random.Generator, n: int, scale: float, row_sum: float = 10.0) -> NDArray:
    """
    Random symmetric matrices whose rows all sum to row_sum
    :param rng: seeded generator
    :param n: number of matrices
    :param scale: couplings uniform in [-scale, scale]
    :param row_sum: common row sum
    :return: array (n, 3, 3)
    """
    stack = random_symmetric(rng, n, scale)
    off = stack.copy()
    off[:, [0, 1, 2], [0, 1, 2]] = 0.0
    stack[:, [0, 1, 2], [0, 1, 2]] = row_sum - off.sum(axis=2)
    return stack


def modal_audit(rng: np.random.Generator, samples: int, scale: float, min_z: float = 1e-6) -> Dict[str, Any]:
    """
    Trace identity and orthogonality on random matrices, eigen residuals on the equal-row-sum family
    :param rng: seeded generator
    :param samples: number of matrices of each family
    :param scale: entries uniform in [-scale, scale]
    :param min_z: discriminant below which a sample is skipped
    :return: summary dictionary
    """
    trace_dev, orthogonality, offdiag_generic, skipped = 0.0, 0.0, [], 0
    for matrix in random_symmetric(rng, samples, scale):
        g = SymMat3.from_matrix(matrix)
        if coupling_discriminant(g) <= min_z:
            skipped += 1
            continue
        basis = build_modal_basis(g)
        trace_dev = max(trace_dev, abs(sum(basis.eigenvalues) - g.trace) / (1.0 + g.norm))
        u = np.vstack([basis.v, basis.v_plus, basis.v_minus])
        orthogonality = max(orthogonality, float(np.max(np.abs(u @ u.T - np.eye(3)))))
        offdiag_generic.append(modal_transform(g).offdiag_norm / (1.0 + g.norm))

    eig_residual, spectrum_dev, printed_norm, flipped_norm = 0.0, 0.0, 0.0, 0.0
    for matrix in equal_row_sum(rng, samples, scale):
        g = SymMat3.from_matrix(matrix)
        if coupling_discriminant(g) <= min_z:
            continue
        basis = build_modal_basis(g)
        eig_residual = max(eig_residual, max(basis.eig_residuals) / (1.0 + g.norm))
        spectrum_dev = max(spectrum_dev, _multiset_distance(basis.eigenvalues, jacobi_eigen(g).eigenvalues)
                           / (1.0 + g.norm))
        printed_norm = max(printed_norm, np.nan_to_num(basis.norm_residuals[1], nan=np.inf))
        flipped_norm = max(flipped_norm, np.nan_to_num(basis.flipped_residuals[0], nan=np.inf))
    logger.info('modal audit over %d matrices per family', samples)
    return {
        'samples': samples,
        'skipped_small_z': skipped,
        'trace_max_rel_dev': trace_dev,
        'orthogonality_max': orthogonality,
        'generic_offdiag_median': float(np.median(offdiag_generic)) if offdiag_generic else None,
        'equal_row_sum_eig_residual_max': eig_residual,
        'equal_row_sum_spectrum_max_dev': spectrum_dev,
        'v_plus_printed_norm_residual_max': float(printed_norm),
        'v_plus_flipped_norm_residual_max': float(flipped_norm),
    }
