"""
Fixed-size 3-vector / 3x3-matrix helpers and the cyclic Jacobi eigensolver used as oracle by every other module.
"""
import logging

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from oscaudit import NonConvergence

logger = logging.getLogger(__name__)

Vec3 = NDArray[np.float64]
Mat3 = NDArray[np.float64]

# Fixed cyclic pivot order
PIVOTS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class SymMat3:
    """
    Real symmetric 3x3 matrix stored by its six independent entries
    """
    d1: float
    d2: float
    d3: float
    o12: float
    o13: float
    o23: float

    @classmethod
    def from_matrix(cls, m: Mat3, tol: float = 0.0) -> 'SymMat3':
        """
        Build from a full matrix
        :param m: 3x3 array
        :param tol: accepted asymmetry, 0 requires an exact mirror
        :return: SymMat3
        """
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f'expected a 3x3 matrix, got shape {m.shape}')
        if not np.all(np.isfinite(m)):
            raise ValueError('matrix entries must be finite')
        if np.max(np.abs(m - m.T)) > tol:
            raise ValueError('matrix is not symmetric')
        return cls(m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2], m[1, 2])

    @classmethod
    def from_parts(cls, diagonal: Tuple[float, float, float], couplings: Tuple[float, float, float]) -> 'SymMat3':
        """
        Build from the effective frequencies and couplings
        :param diagonal: (w1^2, w2^2, w3^2)
        :param couplings: (K12, K13, K23)
        :return: SymMat3
        """
        return cls(*(float(x) for x in diagonal), *(float(x) for x in couplings))

    @property
    def matrix(self) -> Mat3:
        return np.array([[self.d1, self.o12, self.o13],
                         [self.o12, self.d2, self.o23],
                         [self.o13, self.o23, self.d3]])

    @property
    def diagonal(self) -> Vec3:
        return np.array([self.d1, self.d2, self.d3])

    @property
    def couplings(self) -> Vec3:
        """(K12, K13, K23)"""
        return np.array([self.o12, self.o13, self.o23])

    @property
    def trace(self) -> float:
        return self.d1 + self.d2 + self.d3

    @property
    def norm(self) -> float:
        """Frobenius norm"""
        return float(np.linalg.norm(self.matrix))


@dataclass(frozen=True)
class JacobiResult:
    eigenvalues: Vec3
    eigenvectors: Mat3
    sweeps: int
    off_norm: float


def off_diagonal_norm(a: NDArray) -> NDArray:
    """
    Frobenius norm of the off-diagonal part (both triangles) of one or many 3x3 matrices
    :param a: array (..., 3, 3)
    :return: norms with shape a.shape[:-2]
    """
    return np.sqrt(2.0 * (a[..., 0, 1] ** 2 + a[..., 0, 2] ** 2 + a[..., 1, 2] ** 2))


def _rotate(a: NDArray, v: NDArray, p: int, q: int) -> None:
    """
    Annihilate a[:, p, q] of every matrix of the stack in place
    :param a: stack of symmetric matrices (n, 3, 3)
    :param v: accumulated rotations (n, 3, 3)
    :param p: pivot row
    :param q: pivot column
    :return: None
    """
    apq = a[:, p, q]
    nonzero = apq != 0.0
    theta = np.where(nonzero, (a[:, q, q] - a[:, p, p]) / (2.0 * np.where(nonzero, apq, 1.0)), 0.0)
    t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
    t = np.where(nonzero, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    rot = np.zeros_like(a)
    rot[:, 0, 0] = rot[:, 1, 1] = rot[:, 2, 2] = 1.0
    rot[:, p, p] = rot[:, q, q] = c
    rot[:, p, q], rot[:, q, p] = s, -s

    a[...] = np.swapaxes(rot, 1, 2) @ a @ rot
    a[...] = 0.5 * (a + np.swapaxes(a, 1, 2))
    a[:, p, q] = a[:, q, p] = 0.0
    v[...] = v @ rot


def jacobi_eigen_batch(stack: NDArray, tol: float = 1e-14,
                       max_sweeps: int = 50) -> Tuple[NDArray, NDArray, NDArray, NDArray, NDArray]:
    """
    Cyclic Jacobi eigendecomposition of a stack of symmetric 3x3 matrices
    :param stack: array (n, 3, 3)
    :param tol: convergence when off-diagonal norm <= tol * Frobenius norm
    :param max_sweeps: maximum number of sweeps
    :return: eigenvalues (n, 3) ascending, eigenvectors (n, 3, 3) in columns with det +1,
             sweeps (n,), off-diagonal norms (n,), converged flags (n,)
    """
    if tol <= 0 or max_sweeps < 1:
        raise ValueError('tol must be positive and max_sweeps at least 1')
    a = np.array(stack, dtype=float, copy=True).reshape(-1, 3, 3)
    if not np.all(np.isfinite(a)):
        raise ValueError('matrix entries must be finite')
    n = a.shape[0]
    v = np.broadcast_to(np.eye(3), a.shape).copy()
    scale = np.linalg.norm(a, axis=(1, 2))
    sweeps = np.zeros(n, dtype=int)

    for _ in range(max_sweeps):
        active = np.flatnonzero(off_diagonal_norm(a) > tol * scale)
        if active.size == 0:
            break
        sub_a, sub_v = a[active], v[active]
        for p, q in PIVOTS:
            _rotate(sub_a, sub_v, p, q)
        a[active], v[active] = sub_a, sub_v
        sweeps[active] += 1

    off = off_diagonal_norm(a)
    converged = off <= tol * scale

    # Ascending, ties keep the original column order
    diag = np.diagonal(a, axis1=1, axis2=2)
    order = np.argsort(diag, axis=1, kind='stable')
    values = np.take_along_axis(diag, order, axis=1)
    vectors = np.take_along_axis(v, order[:, None, :], axis=2)
    flip = np.linalg.det(vectors) < 0.0
    vectors[flip, :, 2] *= -1.0
    return values, vectors, sweeps, off, converged


def jacobi_eigen(g: SymMat3, tol: float = 1e-14, max_sweeps: int = 50) -> JacobiResult:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations
    :param g: symmetric matrix
    :param tol: relative tolerance on the off-diagonal Frobenius norm
    :param max_sweeps: maximum number of sweeps
    :return: JacobiResult
    """
    values, vectors, sweeps, off, converged = jacobi_eigen_batch(g.matrix[None], tol, max_sweeps)
    if not converged[0]:
        raise NonConvergence(f'off-diagonal norm {off[0]:.3e} after {max_sweeps} sweeps',
                             off_norm=float(off[0]), sweeps=int(sweeps[0]))
    return JacobiResult(values[0], vectors[0], int(sweeps[0]), float(off[0]))


def axis_rotation(axis: int, angle: float) -> Mat3:
    """
    Rotation about one coordinate axis, same sign convention as the printed Euler factors
    :param axis: 1, 2 or 3
    :param angle: radians
    :return: 3x3 rotation matrix
    """
    c, s = np.cos(angle), np.sin(angle)
    if axis == 1:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == 2:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == 3:
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f'axis must be 1, 2 or 3, not {axis}')


def orthogonality_residual(m: Mat3) -> Tuple[float, float]:
    """
    Distance of a matrix from SO(3)
    :param m: 3x3 matrix
    :return: (||m^T m - I||_F, det(m) - 1)
    """
    m = np.asarray(m, dtype=float)
    return float(np.linalg.norm(m.T @ m - np.eye(3))), float(np.linalg.det(m) - 1.0)


def conjugate(g: Mat3, r: Mat3) -> Mat3:
    """
    R^T G R for one or many matrices
    """
    return np.swapaxes(r, -1, -2) @ g @ r


def random_symmetric(rng: np.random.Generator, n: int, scale: float) -> NDArray:
    """
    Draw symmetric matrices with independent entries uniform in [-scale, scale]
    :param rng: numpy generator
    :param n: number of matrices
    :param scale: entry bound
    :return: array (n, 3, 3)
    """
    upper = rng.uniform(-scale, scale, size=(n, 6))
    stack = np.empty((n, 3, 3))
    stack[:, 0, 0], stack[:, 1, 1], stack[:, 2, 2] = upper[:, 0], upper[:, 1], upper[:, 2]
    stack[:, 0, 1] = stack[:, 1, 0] = upper[:, 3]
    stack[:, 0, 2] = stack[:, 2, 0] = upper[:, 4]
    stack[:, 1, 2] = stack[:, 2, 1] = upper[:, 5]
    return stack


def make_rng(seed: int) -> np.random.Generator:
    """
    Seeded platform independent generator
    :param seed: 64-bit unsigned seed
    :return: Generator over PCG64
    """
    return np.random.Generator(np.random.PCG64(seed))


PRNG_NAME = 'PCG64'
