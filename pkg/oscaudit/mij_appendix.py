"""
The nine appendix coefficients M_ij of R^-1 Gamma R, evaluated as printed, and their audit against the true
conjugations R^T Gamma R and R Gamma R^T.
"""
import logging

from dataclasses import dataclass
from typing import Dict, Any, Optional

import numpy as np
from numpy.typing import NDArray

from oscaudit.euler import (EulerAngles, FitSettings, compose_standard, compose_standard_batch, euler_fit,
                            minimize_multistart, random_angles)
from oscaudit.linalg3 import SymMat3, Mat3, conjugate, random_symmetric

logger = logging.getLogger(__name__)

CONFIRMED, DEVIATING = 'confirmed', 'deviating'


def mij_terms(diagonal: NDArray, couplings: NDArray, angles: NDArray) -> NDArray:
    """
    Appendix formulas M_11 ... M_33 transcribed as printed; broadcasts over leading axes
    :param diagonal: (..., 3) w1^2, w2^2, w3^2
    :param couplings: (..., 3) K12, K13, K23
    :param angles: (..., 3) phi, theta, psi
    :return: (..., 3, 3)
    """
    w1, w2, w3 = np.moveaxis(np.asarray(diagonal, dtype=float), -1, 0)
    k12, k13, k23 = np.moveaxis(np.asarray(couplings, dtype=float), -1, 0)
    phi, theta, psi = np.moveaxis(np.asarray(angles, dtype=float), -1, 0)
    cf, sf, c2f = np.cos(phi), np.sin(phi), np.cos(2 * phi)
    ct, st, c2t = np.cos(theta), np.sin(theta), np.cos(2 * theta)
    cp, sp, c2p = np.cos(psi), np.sin(psi), np.cos(2 * psi)

    m11 = (ct ** 2 * cp ** 2 * w1 + (cf * sp + st * sf * cp) ** 2 * w2 + (sp * sf - cp * cf * st) ** 2 * w3
           + 2 * ct * cp * ((cf * sp + st * sf * cp) * k12 + (sp * sf - cp * cf * st) * k13)
           + 2 * (cf * sf * (sp ** 2 - cp ** 2 * st ** 2) - st * sf * cp * c2f) * k23)

    m12 = (-ct ** 2 * cp * sp * w1
           + (sp * cp * (cf ** 2 - st ** 2 * sf ** 2) + cf * sf * st * c2p) * w2
           + (cp * sp * (sf ** 2 - st ** 2 * cf ** 2) - cf * sf * st * c2p) * w3
           + ct * (cf * c2p - 2 * cp * sf * sp * st) * k12
           + ct * (sf * c2p + 2 * cp * cf * st * sp) * k13
           + (2 * (st ** 2 + 1) * cp * cf * sp * sf - st * c2f * c2p) * k23)

    m13 = (st * ct * cp * w1
           - sf * ct * (cf * sp + st * sf * cp) * w2
           + cf * ct * (sp * sf - cp * cf * st) * w3
           + (cf * sp * st - sf * cp * c2t) * k12
           + (sf * sp * st + cf * cp * c2t) * k13
           + (2 * st * sf * cp * cf * ct + sp * ct * c2f) * k23)

    m21 = (-ct ** 2 * sp * cp * w1
           + (cf * sf * st * c2p + sp * cp * (cf ** 2 - sf ** 2 * st ** 2)) * w2
           + (-cf * sf * st * c2p + sp * cp * (sf ** 2 - cf ** 2 * st ** 2)) * w3
           + ct * (cf * c2p - 2 * cp * sf * sp * st) * k12
           + ct * (sf * c2p + 2 * cp * st * cf * sp) * k13
           + (st * (sp ** 2 * c2f - cp ** 2 * c2f) + 2 * (1 + st ** 2) * cp * sp * cf * sf) * k23)

    m22 = (ct ** 2 * sp ** 2 * w1 + (cf * cp - sf * sp * st) ** 2 * w2 + (cp * sf + st * cf * sp) ** 2 * w3
           - 2 * ct * sp * (cf * cp - sf * sp * st) * k12
           - 2 * ct * sp * (cp * sf + st * cf * sp) * k13
           + 2 * (sf * cf * (cp ** 2 - sp ** 2 * st ** 2) + st * cp * sp * c2f) * k23)

    m23 = (-st * ct * sp * w1
           + sf * ct * (sf * sp * st - cf * cp) * w2
           + cf * ct * (cp * sf + st * cf * sp) * w3
           + (cf * cp * st + sp * sf * c2t) * k12
           + (cp * sf * st - sp * cf * c2t) * k13
           + ct * (cp * c2f - 2 * sf * st * cf * sp) * k23)

    m31 = (ct * st * cp * w1
           - ct * sf * (sf * st * cp + cf * sp) * w2
           + ct * cf * (sp * sf - cf * st * cp) * w3
           + (st * cf * sp - sf * cp * c2t) * k12
           + (cp * cf * c2t + st * sp * sf) * k13
           + ct * (2 * cf * sf * st * cp + sp * c2f) * k23)

    m32 = (-ct * st * sp * w1
           - ct * sf * (cf * cp - sf * sp * st) * w2
           + cf * ct * (sf * cp + sp * cf * st) * w3
           + (sf * sp * c2t + st * cf * cp) * k12
           + (-cf * sp * c2t + st * sf * cp) * k13
           + ct * (cp * c2f - 2 * cf * sf * sp * st) * k23)

    m33 = (st ** 2 * w1 + ct ** 2 * sf ** 2 * w2 + cf ** 2 * ct ** 2 * w3
           - 2 * ct * (st * sf * k12 - st * cf * k13 + ct * cf * sf * k23))

    rows = [np.stack([m11, m12, m13], axis=-1), np.stack([m21, m22, m23], axis=-1),
            np.stack([m31, m32, m33], axis=-1)]
    return np.stack(rows, axis=-2)


def mij_printed(g: SymMat3, a: EulerAngles) -> Mat3:
    """
    All nine appendix coefficients for one matrix and one angle triple
    :param g: symmetric matrix, diagonal read as w_i^2 and off-diagonal as K_ij
    :param a: Euler angles
    :return: 3x3 matrix of the printed M_ij
    """
    return mij_terms(g.diagonal, g.couplings, np.array(a))


@dataclass(frozen=True)
class MijReport:
    printed: Mat3
    product_rt_g_r: Mat3
    product_r_g_rt: Mat3
    per_entry_dev: Mat3
    symmetry_dev: float
    confirmed: NDArray

    def as_dict(self) -> Dict[str, Any]:
        return {'printed': self.printed.tolist(), 'rt_g_r': self.product_rt_g_r.tolist(),
                'r_g_rt': self.product_r_g_rt.tolist(), 'per_entry_dev': self.per_entry_dev.tolist(),
                'symmetry_dev': self.symmetry_dev, 'confirmed': self.confirmed.tolist()}


def mij_compare(g: SymMat3, a: EulerAngles, tol: float = 1e-12) -> MijReport:
    """
    Compare the printed coefficients with R^T Gamma R and R Gamma R^T, R = compose_standard(a)
    :param g: symmetric matrix
    :param a: Euler angles
    :param tol: an entry is confirmed when its deviation is <= tol * (1 + ||g||_F)
    :return: MijReport
    """
    r, matrix = compose_standard(a), g.matrix
    printed = mij_printed(g, a)
    rt_g_r, r_g_rt = conjugate(matrix, r), r @ matrix @ r.T
    deviation = np.minimum(np.abs(printed - rt_g_r), np.abs(printed - r_g_rt))
    symmetry = float(np.max(np.abs(printed - printed.T)))
    return MijReport(printed, rt_g_r, r_g_rt, deviation, symmetry, deviation <= tol * (1.0 + g.norm))


def mij_audit(rng: np.random.Generator, samples: int, scale: float, tol: float = 1e-12) -> Dict[str, Any]:
    """
    Per-entry confirmation table of the appendix over random matrices and angles
    :param rng: seeded generator
    :param samples: number of (g, angles) pairs
    :param scale: matrix entries uniform in [-scale, scale]
    :param tol: confirmation tolerance relative to 1 + ||g||_F
    :return: summary dictionary with the 3x3 table
    """
    stack = random_symmetric(rng, samples, scale)
    angles = random_angles(rng, samples)
    diagonal = np.diagonal(stack, axis1=1, axis2=2)
    couplings = np.stack([stack[:, 0, 1], stack[:, 0, 2], stack[:, 1, 2]], axis=-1)
    printed = mij_terms(diagonal, couplings, angles)
    r = compose_standard_batch(angles)
    rt_g_r = conjugate(stack, r)
    r_g_rt = r @ stack @ np.swapaxes(r, 1, 2)
    dev_rt = np.abs(printed - rt_g_r)
    dev_r = np.abs(printed - r_g_rt)
    deviation = np.minimum(dev_rt, dev_r)
    bound = (tol * (1.0 + np.linalg.norm(stack, axis=(1, 2))))[:, None, None]
    confirmed = deviation <= bound
    scaled = deviation / (1.0 + np.linalg.norm(stack, axis=(1, 2)))[:, None, None]

    table = []
    for i in range(3):
        for j in range(3):
            status = CONFIRMED if confirmed[:, i, j].all() else DEVIATING
            table.append({
                'entry': f'M{i + 1}{j + 1}',
                'status': status,
                'confirmed_samples': int(np.count_nonzero(confirmed[:, i, j])),
                'max_deviation': float(np.max(deviation[:, i, j])),
                'max_relative_deviation': float(np.max(scaled[:, i, j])),
                'matches_rt_g_r': int(np.count_nonzero(dev_rt[:, i, j] <= bound[:, 0, 0])),
                'matches_r_g_rt': int(np.count_nonzero(dev_r[:, i, j] <= bound[:, 0, 0])),
            })
    symmetry = np.max(np.abs(printed - np.swapaxes(printed, 1, 2)), axis=(1, 2))
    logger.info('appendix audit over %d samples', samples)
    return {
        'samples': samples,
        'table': table,
        'symmetry_dev_max': float(np.max(symmetry)),
        'symmetry_dev_median': float(np.median(symmetry)),
        'oracle_symmetry_max': float(np.max(np.abs(rt_g_r - np.swapaxes(rt_g_r, 1, 2)))),
    }


def mij_zero_constraint_probe(g: SymMat3, settings: Optional[FitSettings] = None) -> Dict[str, Any]:
    """
    Minimize the sum of squared printed off-diagonal M_ij over the angles
    :param g: symmetric matrix
    :param settings: multi-start settings shared with euler_fit
    :return: achieved minimum, angles and the euler_fit result on the true product
    """
    settings = settings or FitSettings()
    diagonal, couplings = g.diagonal, g.couplings
    off = ~np.eye(3, dtype=bool)

    def objective(x):
        return float(np.sum(mij_terms(diagonal, couplings, x)[off] ** 2))

    target = settings.target_factor * (1.0 + g.norm ** 2)
    rng = np.random.Generator(np.random.PCG64(settings.seed))
    x, f, nit, used = minimize_multistart(objective, [np.zeros(3)], rng, settings, target)
    fit = euler_fit(g, settings)
    return {
        'uncoupled': bool(not np.any(couplings)),
        'printed_minimum': f,
        'printed_off_norm': float(np.sqrt(f)),
        'angles': [float(v) for v in x],
        'iterations': nit,
        'starts_used': used,
        'euler_fit_off_norm': fit.off_norm,
        'euler_fit_angles': list(fit.angles),
    }
