"""
Euler-angle rotations in standard and printed form, the so(3) generator algebra, the adjoint matrix R-bar and the
off-diagonal minimizing Euler fit.
"""
import logging

from dataclasses import dataclass, field
from typing import Callable, Dict, Any, List, NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from oscaudit import NotOrthogonal
from oscaudit.linalg3 import (SymMat3, Mat3, axis_rotation, conjugate, jacobi_eigen,
                              orthogonality_residual, random_symmetric)

logger = logging.getLogger(__name__)

ADJOINT_CONVENTION = ('Lambda^-1 X_i Lambda = sum_k B_ik X_k with Lambda = exp(i phi J1) exp(i theta J2) '
                      'exp(i psi J3), (J_k)_mn = -i eps_kmn, hbar = 1')
GIMBAL_LOCK = 1e-9


class EulerAngles(NamedTuple):
    """Angles in radians; psi is the third angle printed as varphi"""
    phi: float
    theta: float
    psi: float


@dataclass(frozen=True)
class ExtractedAngles:
    angles: EulerAngles
    gimbal_lock: bool
    flipped_column: bool
    residual: float


@dataclass(frozen=True)
class FitSettings:
    starts: int = 8
    max_iterations: int = 4000
    xatol: float = 1e-12
    target_factor: float = 1e-24
    seed: int = 0

    @classmethod
    def from_config(cls, section: Dict[str, Any], seed: int = 0) -> 'FitSettings':
        return cls(int(section.get('starts', cls.starts)), int(section.get('max_iterations', cls.max_iterations)),
                   float(section.get('xatol', cls.xatol)), float(section.get('target_factor', cls.target_factor)),
                   seed)


@dataclass(frozen=True)
class FitResult:
    angles: EulerAngles
    off_norm: float
    diagonal: tuple
    iterations: int
    starts_used: int
    seed_objective: float = field(default=float('nan'))

    def as_dict(self) -> Dict[str, Any]:
        return {'angles': list(self.angles), 'off_norm': self.off_norm, 'diagonal': list(self.diagonal),
                'iterations': self.iterations, 'starts_used': self.starts_used,
                'seed_objective': self.seed_objective}


def compose_standard(a: EulerAngles) -> Mat3:
    """
    R = R_X1(phi) R_X2(theta) R_X3(psi) by matrix multiplication
    :param a: Euler angles
    :return: rotation matrix
    """
    return axis_rotation(1, a.phi) @ axis_rotation(2, a.theta) @ axis_rotation(3, a.psi)


def compose_standard_batch(angles: NDArray) -> NDArray:
    """
    compose_standard for a stack of angle triples
    :param angles: (n, 3)
    :return: (n, 3, 3)
    """
    c, s = np.cos(angles), np.sin(angles)
    n = angles.shape[0]
    rx, ry, rz = (np.zeros((n, 3, 3)) for _ in range(3))
    rx[:, 0, 0] = 1.0
    rx[:, 1, 1], rx[:, 1, 2], rx[:, 2, 1], rx[:, 2, 2] = c[:, 0], -s[:, 0], s[:, 0], c[:, 0]
    ry[:, 1, 1] = 1.0
    ry[:, 0, 0], ry[:, 0, 2], ry[:, 2, 0], ry[:, 2, 2] = c[:, 1], s[:, 1], -s[:, 1], c[:, 1]
    rz[:, 2, 2] = 1.0
    rz[:, 0, 0], rz[:, 0, 1], rz[:, 1, 0], rz[:, 1, 1] = c[:, 2], -s[:, 2], s[:, 2], c[:, 2]
    return rx @ ry @ rz


def compose_printed(a: EulerAngles) -> Mat3:
    """
    The composed rotation matrix entry by entry as printed, including the cos(theta) at [2, 0]
    :param a: Euler angles
    :return: 3x3 matrix, not necessarily orthogonal
    """
    cf, sf = np.cos(a.phi), np.sin(a.phi)
    ct, st = np.cos(a.theta), np.sin(a.theta)
    cp, sp = np.cos(a.psi), np.sin(a.psi)
    return np.array([
        [ct * cp, -ct * sp, st],
        [sf * st * cp + cf * sp, cf * cp - sf * sp * st, -sf * ct],
        [-ct * st * cp + sp * sf, sf * cp + sp * cf * st, cf * ct],
    ])


def rbar_printed(a: EulerAngles) -> Mat3:
    """
    The printed matrix R-bar of the rotated coordinates
    :param a: Euler angles
    :return: 3x3 matrix
    """
    cf, sf = np.cos(a.phi), np.sin(a.phi)
    ct, st = np.cos(a.theta), np.sin(a.theta)
    cp, sp = np.cos(a.psi), np.sin(a.psi)
    return np.array([
        [ct * cp, ct * sp, -st],
        [sf * st * cp - sp * cf, sf * st * sp + cp * cf, sf * ct],
        [st * cf * cp + sf * sp, st * cf * sp - sf * cp, cf * ct],
    ])


def levi_civita() -> NDArray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k], eps[i, k, j] = 1.0, -1.0
    return eps


def generators() -> NDArray:
    """
    Rotation generators of the defining representation, (J_k)_mn = -i eps_kmn
    :return: complex array (3, 3, 3), first index is k
    """
    return -1j * levi_civita()


def verify_generator_algebra() -> Dict[str, float]:
    """
    Check [J_i, J_j] = i eps_ijk J_k with hbar = 1
    :return: residuals of the commutation relations, hermiticity and the [J_1, J_2] = i J_3 spot check
    """
    j, eps = generators(), levi_civita()
    residual = 0.0
    for a in range(3):
        for b in range(3):
            commutator = j[a] @ j[b] - j[b] @ j[a]
            expected = 1j * np.einsum('k,kmn->mn', eps[a, b], j)
            residual = max(residual, float(np.linalg.norm(commutator - expected)))
    hermiticity = max(float(np.linalg.norm(jk - jk.conj().T)) for jk in j)
    spot = float(np.linalg.norm(j[0] @ j[1] - j[1] @ j[0] - 1j * j[2]))
    return {'commutator_residual': residual, 'hermiticity_residual': hermiticity, 'j1_j2_residual': spot}


def axis_exponential(axis: int, angle: float) -> Mat3:
    """
    exp(i angle J_axis) in closed form: I + sin(a) L + (1 - cos(a)) L^2 with L = i J_axis real
    :param axis: 1, 2 or 3
    :param angle: radians
    :return: 3x3 orthogonal matrix
    """
    generator = (1j * generators()[axis - 1]).real
    return np.eye(3) + np.sin(angle) * generator + (1.0 - np.cos(angle)) * generator @ generator


def adjoint_action(a: EulerAngles) -> Mat3:
    """
    Matrix B of Lambda^-1 X_i Lambda = sum_k B_ik X_k (see ADJOINT_CONVENTION)
    :param a: Euler angles
    :return: orthogonal matrix
    """
    return axis_exponential(1, a.phi) @ axis_exponential(2, a.theta) @ axis_exponential(3, a.psi)


def extract_angles(q: Mat3) -> ExtractedAngles:
    """
    Inverse of compose_standard, theta from the first row so that cos(theta) survives near +-pi/2
    :param q: orthogonal matrix
    :return: angles and diagnostics
    """
    q = np.array(q, dtype=float)
    norm_residual, _ = orthogonality_residual(q)
    if norm_residual > 1e-8:
        raise NotOrthogonal(f'||q^T q - I|| = {norm_residual:.3e}', residual=norm_residual)
    flipped = bool(np.linalg.det(q) < 0.0)
    if flipped:
        q[:, 2] *= -1.0

    # atan2 keeps cos(theta) when q[0, 2] rounds to +-1
    cos_theta = float(np.hypot(q[0, 0], q[0, 1]))
    theta = float(np.arctan2(q[0, 2], cos_theta))
    gimbal = cos_theta < GIMBAL_LOCK
    if gimbal:
        # Only phi + psi (or phi - psi) is identifiable
        psi = 0.0
        phi = float(np.arctan2(q[1, 0] * np.sign(q[0, 2]), q[1, 1]))
    else:
        phi = float(np.arctan2(-q[1, 2], q[2, 2]))
        psi = float(np.arctan2(-q[0, 1], q[0, 0]))
    angles = EulerAngles(phi, theta, psi)
    return ExtractedAngles(angles, gimbal, flipped, float(np.linalg.norm(compose_standard(angles) - q)))


def off_diagonal_objective(g: Mat3, angles: Sequence[float]) -> float:
    """
    Sum over i<j of (R^T G R)_ij^2 with R = compose_standard(angles)
    """
    rotated = conjugate(g, compose_standard(EulerAngles(*angles)))
    return float(rotated[0, 1] ** 2 + rotated[0, 2] ** 2 + rotated[1, 2] ** 2)


def minimize_multistart(objective: Callable[[NDArray], float], seeds: List[NDArray], rng: np.random.Generator,
                        settings: FitSettings, target: float):
    """
    Nelder-Mead descents from the seeds then from random starts, stopping early once the target is reached
    :param objective: function of the three angles
    :param seeds: deterministic first starts
    :param rng: generator for the random starts
    :param settings: fit settings
    :param target: objective value considered converged
    :return: best angles, best value, iterations of the best run, starts used
    """
    randoms = rng.uniform(-np.pi, np.pi, size=(max(settings.starts - len(seeds), 0), 3))
    starts = [np.asarray(s, dtype=float) for s in seeds] + list(randoms)
    best_x, best_f, best_nit, used = None, np.inf, 0, 0

    def stop(intermediate_result):
        if intermediate_result.fun <= target:
            raise StopIteration

    for start in starts:
        used += 1
        if (f0 := objective(start)) <= target:
            x, f, nit = start, f0, 0
        else:
            result = minimize(objective, start, method='Nelder-Mead', callback=stop,
                              options={'xatol': settings.xatol, 'fatol': np.inf,
                                       'maxiter': settings.max_iterations, 'maxfev': 4 * settings.max_iterations})
            x, f, nit = result.x, float(result.fun), int(result.nit)
            if f0 < f:
                x, f = start, f0
        # Strict comparison keeps the earliest start on ties
        if f < best_f:
            best_x, best_f, best_nit = np.asarray(x, dtype=float), f, nit
        if best_f <= target:
            break
    return best_x, best_f, best_nit, used


def euler_fit(g: SymMat3, settings: Optional[FitSettings] = None) -> FitResult:
    """
    Search Euler angles that diagonalize Gamma by congruence with compose_standard
    :param g: symmetric matrix
    :param settings: multi-start settings
    :return: best FitResult
    """
    settings = settings or FitSettings()
    matrix = g.matrix
    target = settings.target_factor * (1.0 + g.norm ** 2)
    seeds = []
    try:
        seeds.append(np.array(extract_angles(jacobi_eigen(g).eigenvectors).angles))
    except NotOrthogonal as err:
        logger.debug('oracle seed rejected: %s', err.message)

    def objective(x):
        return off_diagonal_objective(matrix, x)

    seed_f = objective(seeds[0]) if seeds else float('nan')
    rng = np.random.Generator(np.random.PCG64(settings.seed))
    x, f, nit, used = minimize_multistart(objective, seeds, rng, settings, target)
    angles = EulerAngles(*(float(v) for v in x))
    diagonal = np.diagonal(conjugate(matrix, compose_standard(angles)))
    return FitResult(angles, float(np.sqrt(f)), tuple(float(d) for d in diagonal), nit, used, seed_f)


def random_angles(rng: np.random.Generator, n: int) -> NDArray:
    return rng.uniform(-np.pi, np.pi, size=(n, 3))


def rotation_audit(rng: np.random.Generator, samples: int) -> Dict[str, Any]:
    """
    Orthogonality of compose_standard, adjoint_action and the printed matrices on random angles
    :param rng: seeded generator
    :param samples: number of angle triples
    :return: summary dictionary
    """
    angles = random_angles(rng, samples)
    standard = compose_standard_batch(angles)
    identity = np.eye(3)

    def worst(stack):
        gram = np.swapaxes(stack, 1, 2) @ stack - identity
        return float(np.max(np.linalg.norm(gram, axis=(1, 2)))), float(np.max(np.abs(np.linalg.det(stack) - 1.0)))

    adjoint = np.array([adjoint_action(EulerAngles(*a)) for a in angles])
    printed = np.array([compose_printed(EulerAngles(*a)) for a in angles])
    rbar = np.array([rbar_printed(EulerAngles(*a)) for a in angles])
    round_trip = max(extract_angles(r).residual for r in standard)
    return {
        'samples': samples,
        'standard_orthogonality': worst(standard),
        'adjoint_orthogonality': worst(adjoint),
        'printed_orthogonality': worst(printed),
        'printed_vs_standard_max': float(np.max(np.abs(printed - standard))),
        'rbar_vs_adjoint_max': float(np.max(np.abs(rbar - adjoint))),
        'rbar_vs_standard_transpose_max': float(np.max(np.abs(rbar - np.swapaxes(standard, 1, 2)))),
        'extract_round_trip_max': float(round_trip),
        'generator_algebra': verify_generator_algebra(),
        'adjoint_convention': ADJOINT_CONVENTION,
    }


def angle_comparison(a: EulerAngles) -> Dict[str, Any]:
    """
    Side by side view of the composition paths at one angle triple
    :param a: Euler angles
    :return: dictionary of matrices and deviations
    """
    standard, printed, rbar, adjoint = compose_standard(a), compose_printed(a), rbar_printed(a), adjoint_action(a)
    return {
        'angles': list(a),
        'standard': standard.tolist(),
        'printed': printed.tolist(),
        'rbar_printed': rbar.tolist(),
        'adjoint_action': adjoint.tolist(),
        'standard_orthogonality': list(orthogonality_residual(standard)),
        'printed_orthogonality': list(orthogonality_residual(printed)),
        'adjoint_orthogonality': list(orthogonality_residual(adjoint)),
        'printed_vs_standard_max': float(np.max(np.abs(printed - standard))),
        'rbar_vs_adjoint_max': float(np.max(np.abs(rbar - adjoint))),
        'rbar_vs_standard_transpose_max': float(np.max(np.abs(rbar - standard.T))),
        'adjoint_convention': ADJOINT_CONVENTION,
    }


def fit_one(matrix: NDArray, settings: FitSettings) -> FitResult:
    return euler_fit(SymMat3.from_matrix(matrix), settings)


def fit_audit(rng: np.random.Generator, samples: int, scale: float, settings: FitSettings,
              executor=None) -> Dict[str, Any]:
    """
    Fraction of random symmetric matrices that Euler rotations diagonalize
    :param rng: seeded generator for the matrices
    :param samples: number of matrices
    :param scale: entries uniform in [-scale, scale]
    :param settings: fit settings, the seed of sample i is settings.seed + i
    :param executor: optional concurrent.futures executor
    :return: summary dictionary
    """
    stack = random_symmetric(rng, samples, scale)
    per_sample = [FitSettings(settings.starts, settings.max_iterations, settings.xatol, settings.target_factor,
                              settings.seed + i) for i in range(samples)]
    mapper = executor.map if executor else map
    results = list(mapper(fit_one, stack, per_sample))
    norm = np.linalg.norm(stack, axis=(1, 2))
    relative = np.array([r.off_norm for r in results]) / norm
    success = relative <= 1e-8
    logger.info('euler fit over %d matrices', samples)
    return {
        'samples': samples,
        'diagonalized': int(np.count_nonzero(success)),
        'fraction': float(np.mean(success)),
        'max_relative_off_norm': float(np.max(relative)),
        'extra_starts': int(sum(r.starts_used > 1 for r in results)),
        'failures': [int(i) for i in np.flatnonzero(~success)],
    }
