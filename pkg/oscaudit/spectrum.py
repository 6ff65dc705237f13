"""
Closed-form trigonometric eigenvalues of Gamma(t).

Two readings are kept side by side: AS_PRINTED evaluates the trigonometric formulas exactly as printed,
ROBUST replaces the printed Delta by 27 det(G - qI) and uses the amplitude 2 sqrt(Omega) that makes the
trigonometric form the root of the characteristic cubic. Both are compared against the Jacobi oracle.
"""
import enum
import logging

from dataclasses import dataclass, field
from typing import Tuple, Dict, Any

import numpy as np
from numpy.typing import NDArray

from oscaudit import DegenerateIsotropic
from oscaudit.linalg3 import SymMat3, jacobi_eigen, jacobi_eigen_batch, random_symmetric

logger = logging.getLogger(__name__)

SHIFTS = np.array([0.0, 2.0 * np.pi, -2.0 * np.pi])
# Largest excursion of |Delta / (2 sqrt(Omega^3))| beyond 1 attributed to roundoff
CLAMP_SLACK = 1e-9


class Mode(enum.Enum):
    AS_PRINTED = 'printed'
    ROBUST = 'robust'


@dataclass(frozen=True)
class Spectrum:
    omega_sq: Tuple[float, float, float]
    big_omega: float
    delta: float
    phi_angle: float
    mode: Mode
    ratio: float = 0.0
    clamped: bool = False
    degenerate: bool = False
    flags: Tuple[str, ...] = ()

    def as_dict(self) -> Dict[str, Any]:
        return {'omega_sq': list(self.omega_sq), 'big_omega': self.big_omega, 'delta': self.delta,
                'phi': self.phi_angle, 'mode': self.mode.value, 'ratio': self.ratio, 'clamped': self.clamped,
                'degenerate': self.degenerate, 'flags': list(self.flags)}


def big_omega(diagonal: NDArray, couplings: NDArray) -> NDArray:
    """
    Omega, half the sum of squared diagonal differences plus three times the squared couplings
    :param diagonal: (..., 3) w1^2, w2^2, w3^2
    :param couplings: (..., 3) K12, K13, K23
    :return: Omega
    """
    w1, w2, w3 = np.moveaxis(diagonal, -1, 0)
    return 0.5 * ((w1 - w2) ** 2 + (w1 - w3) ** 2 + (w2 - w3) ** 2) + 3.0 * np.sum(couplings ** 2, axis=-1)


def delta_printed(diagonal: NDArray, couplings: NDArray) -> NDArray:
    """
    Delta as printed, with the cube terms 2(w1^3 + w3^3 + w2^3) read literally
    :param diagonal: (..., 3) w1^2, w2^2, w3^2
    :param couplings: (..., 3) K12, K13, K23
    :return: Delta
    """
    w1, w2, w3 = np.moveaxis(diagonal, -1, 0)
    k12, k13, k23 = np.moveaxis(couplings, -1, 0)
    # w_i^3 from w_i^2, odd extension for negative entries
    cube = np.sign(diagonal) * np.abs(diagonal) ** 1.5
    return (18.0 * (w1 * w2 * w3 + 3.0 * k12 * k13 * k23)
            + 2.0 * np.sum(cube, axis=-1)
            + 9.0 * (w1 + w2 + w3) * (k23 ** 2 + k13 ** 2 + k12 ** 2)
            - 3.0 * (w1 + w2) * (w1 + w3) * (w2 + w3)
            - 27.0 * (w1 * k23 ** 2 + w2 * k13 ** 2 + w3 * k12 ** 2))


def delta_robust(stack: NDArray) -> NDArray:
    """
    Determinant form of Delta: 27 det(G - tr(G)/3 I)
    :param stack: (..., 3, 3)
    :return: Delta
    """
    q = np.trace(stack, axis1=-2, axis2=-1) / 3.0
    return 27.0 * np.linalg.det(stack - q[..., None, None] * np.eye(3))


def _trigonometric(trace: NDArray, omega: NDArray, delta: NDArray, amplitude: NDArray):
    """
    Evaluate the trigonometric eigenvalues for given Omega, Delta and cosine amplitude
    :return: eigenvalues (..., 3) ascending, Phi, raw ratio, clamp flags
    """
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = delta / (2.0 * np.sqrt(omega ** 3))
    phi = np.arccos(np.clip(ratio, -1.0, 1.0))
    values = (trace[..., None] + 2.0 * amplitude[..., None] * np.cos((phi[..., None] + SHIFTS) / 3.0)) / 3.0
    return np.sort(values, axis=-1), phi, ratio, np.abs(ratio) > 1.0


def _degenerate_threshold(norm: NDArray) -> NDArray:
    return 1e-13 * (1.0 + norm ** 2)


def _spectrum(g: SymMat3, mode: Mode) -> Spectrum:
    diagonal, couplings = g.diagonal, g.couplings
    omega = float(big_omega(diagonal, couplings))
    flags = []
    if mode is Mode.AS_PRINTED:
        delta = float(delta_printed(diagonal, couplings))
        amplitude = omega
        if np.any(diagonal < 0.0):
            flags.append('negative_frequency_sq')
    else:
        delta = float(delta_robust(g.matrix))
        amplitude = np.sqrt(omega)

    if omega < _degenerate_threshold(g.norm):
        # cos(3 Phi) divides by sqrt(Omega^3)
        flags.append(DegenerateIsotropic.kind)
        q = g.trace / 3.0
        return Spectrum((q, q, q), omega, delta, 0.0, mode, 0.0, False, True, tuple(flags))

    values, phi, ratio, clamped = _trigonometric(np.array(g.trace), np.array(omega), np.array(delta),
                                                 np.array(amplitude))
    if clamped:
        flags.append('clamped')
        if abs(float(ratio)) - 1.0 > CLAMP_SLACK:
            # Beyond roundoff: printed formulas or a wrong Delta
            flags.append('clamp_excess')
    return Spectrum(tuple(float(x) for x in values), omega, delta, float(phi), mode, float(ratio), bool(clamped),
                    False, tuple(flags))


def eigenvalues_printed(g: SymMat3) -> Spectrum:
    """
    Eigenvalues of Gamma from the trigonometric formulas exactly as printed
    :param g: symmetric matrix
    :return: Spectrum tagged AS_PRINTED
    """
    return _spectrum(g, Mode.AS_PRINTED)


def eigenvalues_robust(g: SymMat3) -> Spectrum:
    """
    Eigenvalues of Gamma from the determinant form of Delta
    :param g: symmetric matrix
    :return: Spectrum tagged ROBUST
    """
    return _spectrum(g, Mode.ROBUST)


def eigenvalues_robust_batch(stack: NDArray) -> Tuple[NDArray, NDArray, NDArray]:
    """
    Robust eigenvalues of a stack of symmetric matrices
    :param stack: (n, 3, 3)
    :return: eigenvalues (n, 3) ascending, raw ratios (n,), degenerate flags (n,)
    """
    diagonal = np.diagonal(stack, axis1=1, axis2=2)
    couplings = np.stack([stack[:, 0, 1], stack[:, 0, 2], stack[:, 1, 2]], axis=-1)
    trace = diagonal.sum(axis=1)
    omega = big_omega(diagonal, couplings)
    degenerate = omega < _degenerate_threshold(np.linalg.norm(stack, axis=(1, 2)))
    values, _, ratio, _ = _trigonometric(trace, omega, delta_robust(stack), np.sqrt(omega))
    values[degenerate] = (trace[degenerate] / 3.0)[:, None]
    return values, ratio, degenerate


@dataclass(frozen=True)
class ModeComparison:
    printed: Spectrum
    robust: Spectrum
    jacobi: Tuple[float, float, float]
    printed_vs_jacobi: Tuple[float, float, float]
    robust_vs_jacobi: Tuple[float, float, float]
    printed_vs_robust: Tuple[float, float, float]
    delta_gap: float = field(default=0.0)

    def as_dict(self) -> Dict[str, Any]:
        return {'printed': self.printed.as_dict(), 'robust': self.robust.as_dict(), 'jacobi': list(self.jacobi),
                'printed_vs_jacobi': list(self.printed_vs_jacobi), 'robust_vs_jacobi': list(self.robust_vs_jacobi),
                'printed_vs_robust': list(self.printed_vs_robust), 'delta_printed': self.printed.delta,
                'delta_robust': self.robust.delta, 'delta_gap': self.delta_gap}


def compare_modes(g: SymMat3, tol: float = 1e-14, max_sweeps: int = 50) -> ModeComparison:
    """
    Three-way comparison printed / robust / Jacobi, no pass or fail
    :param g: symmetric matrix
    :param tol: Jacobi tolerance
    :param max_sweeps: Jacobi sweep limit
    :return: ModeComparison
    """
    printed, robust = eigenvalues_printed(g), eigenvalues_robust(g)
    oracle = jacobi_eigen(g, tol, max_sweeps).eigenvalues
    p, r = np.array(printed.omega_sq), np.array(robust.omega_sq)

    def diff(x, y):
        return tuple(float(d) for d in np.abs(x - y))

    return ModeComparison(printed, robust, tuple(float(x) for x in oracle), diff(p, oracle), diff(r, oracle),
                          diff(p, r), abs(printed.delta - robust.delta))


def spectrum_audit(rng: np.random.Generator, samples: int, scale: float, tol: float = 1e-14,
                   max_sweeps: int = 50) -> Dict[str, Any]:
    """
    Robust mode against the Jacobi oracle and trace identities of both modes on random matrices
    :param rng: seeded generator
    :param samples: number of matrices
    :param scale: entries uniform in [-scale, scale]
    :param tol: Jacobi tolerance
    :param max_sweeps: Jacobi sweep limit
    :return: summary dictionary
    """
    stack = random_symmetric(rng, samples, scale)
    norm = np.linalg.norm(stack, axis=(1, 2))
    oracle, _, _, _, converged = jacobi_eigen_batch(stack, tol, max_sweeps)
    robust, ratio, degenerate = eigenvalues_robust_batch(stack)
    trace = np.trace(stack, axis1=1, axis2=2)

    diagonal = np.diagonal(stack, axis1=1, axis2=2)
    couplings = np.stack([stack[:, 0, 1], stack[:, 0, 2], stack[:, 1, 2]], axis=-1)
    omega = big_omega(diagonal, couplings)
    printed, _, printed_ratio, printed_clamped = _trigonometric(trace, omega, delta_printed(diagonal, couplings),
                                                                omega)
    scale_ref = 1.0 + norm
    robust_dev = np.max(np.abs(robust - oracle), axis=1) / scale_ref
    printed_dev = np.max(np.abs(printed - oracle), axis=1) / scale_ref
    logger.info('spectrum audit over %d matrices', samples)
    return {
        'samples': samples,
        'jacobi_converged': int(np.count_nonzero(converged)),
        'robust_max_rel_dev': float(np.max(robust_dev)),
        'robust_within_1e-10': int(np.count_nonzero(robust_dev <= 1e-10)),
        'printed_max_rel_dev': float(np.max(printed_dev)),
        'printed_within_1e-10': int(np.count_nonzero(printed_dev <= 1e-10)),
        'robust_trace_max_rel_dev': float(np.max(np.abs(robust.sum(axis=1) - trace) / scale_ref)),
        'printed_trace_max_rel_dev': float(np.max(np.abs(printed.sum(axis=1) - trace) / scale_ref)),
        'robust_max_ratio_excess': float(np.max(np.abs(ratio[~degenerate]) - 1.0, initial=-1.0)),
        'printed_clamped': int(np.count_nonzero(printed_clamped)),
        'printed_clamp_excess': int(np.count_nonzero(np.abs(printed_ratio) - 1.0 > CLAMP_SLACK)),
        'degenerate': int(np.count_nonzero(degenerate)),
    }
