"""
Time-dependent coupled oscillators: Gamma(t) from mass and stiffness profiles, classical
integration of x' = p, p' = -Gamma(t) x, and the comparison with the naive mode-by-mode integration that drops
the time derivative of the diagonalizing transformation.
"""
import abc
import logging

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Tuple, List, Dict, Any, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import NDArray
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import linear_sum_assignment

import oscaudit
from oscaudit import NonPositiveMass, StepTooLarge, EigenbasisDiscontinuity, UsageError, OscAuditError
from oscaudit.linalg3 import SymMat3, Vec3, jacobi_eigen_batch

logger = logging.getLogger(__name__)


class TimeProfile(abc.ABC):
    """
    Scalar function of time with analytic first and second derivatives, evaluated elementwise on arrays
    """
    family = ''

    def __init__(self, *params: float) -> None:
        self.params = tuple(float(p) for p in params)

    @abc.abstractmethod
    def value(self, t: NDArray | float) -> NDArray | float:
        pass

    @abc.abstractmethod
    def first(self, t: NDArray | float) -> NDArray | float:
        pass

    @abc.abstractmethod
    def second(self, t: NDArray | float) -> NDArray | float:
        pass

    @property
    def is_constant(self) -> bool:
        return False

    def to_config(self) -> Dict[str, Any]:
        return {'family': self.family, 'params': list(self.params)}

    def __repr__(self) -> str:
        return f'{self.__class__.__name__}{self.params}'


class Constant(TimeProfile):
    family = 'constant'

    def __init__(self, a: float) -> None:
        super().__init__(a)
        self.a = float(a)

    def value(self, t):
        return self.a + 0.0 * np.asarray(t, dtype=float)

    def first(self, t):
        return 0.0 * np.asarray(t, dtype=float)

    def second(self, t):
        return 0.0 * np.asarray(t, dtype=float)

    @property
    def is_constant(self) -> bool:
        return True


class PolynomialProfile(TimeProfile):
    """Coefficients in ascending powers of t"""
    family = 'polynomial'

    def __init__(self, *coefficients: float) -> None:
        if not coefficients:
            raise UsageError('polynomial profile needs at least one coefficient')
        super().__init__(*coefficients)
        self.poly = Polynomial(self.params)
        self.d1, self.d2 = self.poly.deriv(1), self.poly.deriv(2)

    def value(self, t):
        return self.poly(np.asarray(t, dtype=float))

    def first(self, t):
        return self.d1(np.asarray(t, dtype=float))

    def second(self, t):
        return self.d2(np.asarray(t, dtype=float))

    @property
    def is_constant(self) -> bool:
        return not np.any(self.poly.coef[1:])


class Exponential(TimeProfile):
    """a exp(gamma t)"""
    family = 'exponential'

    def __init__(self, a: float, gamma: float) -> None:
        super().__init__(a, gamma)
        self.a, self.gamma = float(a), float(gamma)

    def value(self, t):
        return self.a * np.exp(self.gamma * np.asarray(t, dtype=float))

    def first(self, t):
        return self.gamma * self.value(t)

    def second(self, t):
        return self.gamma ** 2 * self.value(t)

    @property
    def is_constant(self) -> bool:
        return self.gamma == 0.0 or self.a == 0.0


class Sinusoid(TimeProfile):
    """offset + amplitude sin(omega t + phase)"""
    family = 'sinusoid'

    def __init__(self, offset: float, amplitude: float, omega: float, phase: float = 0.0) -> None:
        super().__init__(offset, amplitude, omega, phase)
        self.offset, self.amplitude, self.omega, self.phase = self.params

    def _arg(self, t):
        return self.omega * np.asarray(t, dtype=float) + self.phase

    def value(self, t):
        return self.offset + self.amplitude * np.sin(self._arg(t))

    def first(self, t):
        return self.amplitude * self.omega * np.cos(self._arg(t))

    def second(self, t):
        return -self.amplitude * self.omega ** 2 * np.sin(self._arg(t))

    @property
    def is_constant(self) -> bool:
        return self.amplitude == 0.0 or self.omega == 0.0


FAMILIES = {cls.family: cls for cls in (Constant, PolynomialProfile, Exponential, Sinusoid)}


def profile_from_config(spec: Dict[str, Any] | float) -> TimeProfile:
    """
    Build a profile from its configuration record
    :param spec: {'family': name, 'params': [...]} or a bare number for a constant
    :return: TimeProfile
    """
    if isinstance(spec, (int, float)):
        return Constant(spec)
    try:
        cls, params = FAMILIES[spec['family']], spec.get('params', [])
    except (KeyError, TypeError):
        raise UsageError(f'invalid profile {spec!r}, family must be one of {", ".join(FAMILIES)}')
    try:
        return cls(*params)
    except TypeError:
        raise UsageError(f'wrong number of parameters for {spec["family"]} profile: {params}')


def _positive_mass(m: TimeProfile, t: NDArray | float) -> NDArray:
    mass = np.asarray(m.value(t), dtype=float)
    bad = np.atleast_1d(~(mass > 0.0))
    if np.any(bad):
        t_bad = float(np.atleast_1d(np.broadcast_to(np.asarray(t, dtype=float), mass.shape))[bad][0])
        raise NonPositiveMass(f'mass {m!r} is not positive at t = {t_bad:.6g}', t=t_bad)
    return mass


def effective_frequency_sq(m: TimeProfile, c: TimeProfile, t: NDArray | float) -> NDArray | float:
    """
    Effective frequency squared, 1/4 (m'^2/m^2 - 2 m''/m) + c/m, with analytic derivatives of the mass profile
    :param m: mass profile
    :param c: stiffness profile
    :param t: time or array of times
    :return: varpi^2 at t
    """
    mass = _positive_mass(m, t)
    ratio1, ratio2 = m.first(t) / mass, m.second(t) / mass
    return 0.25 * (ratio1 ** 2 - 2.0 * ratio2) + c.value(t) / mass


def coupling_k(m_a: TimeProfile, m_b: TimeProfile, c_ab: TimeProfile, t: NDArray | float) -> NDArray | float:
    """
    Coupling K_ab = c_ab / (2 sqrt(m_a m_b))
    :param m_a: first mass profile
    :param m_b: second mass profile
    :param c_ab: coupling stiffness profile
    :param t: time or array of times
    :return: K_ab at t
    """
    return c_ab.value(t) / (2.0 * np.sqrt(_positive_mass(m_a, t) * _positive_mass(m_b, t)))


@dataclass(frozen=True)
class OscillatorSystem:
    masses: Tuple[TimeProfile, TimeProfile, TimeProfile]
    stiffnesses: Tuple[TimeProfile, TimeProfile, TimeProfile]
    # c12, c13, c23
    couplings: Tuple[TimeProfile, TimeProfile, TimeProfile]
    t0: float = 0.0
    t1: float = 10.0
    dt: float = 1e-3
    stride: int = 1

    @classmethod
    def from_config(cls, record: Dict[str, Any]) -> 'OscillatorSystem':
        """
        Build from the configuration layout {oscillators, couplings, simulation}
        :param record: configuration dictionary
        :return: OscillatorSystem
        """
        try:
            oscillators = record['oscillators']
            if len(oscillators) != 3:
                raise UsageError(f'expected 3 oscillators, got {len(oscillators)}')
            masses = tuple(profile_from_config(item['mass']) for item in oscillators)
            stiffnesses = tuple(profile_from_config(item['stiffness']) for item in oscillators)
            couplings = record.get('couplings', {})
            pairs = tuple(profile_from_config(couplings.get(name, 0.0)) for name in ('c12', 'c13', 'c23'))
        except (KeyError, TypeError) as exc:
            raise UsageError(f'invalid oscillator system configuration, missing {exc}')
        simulation = record.get('simulation', {})
        system = cls(masses, stiffnesses, pairs, float(simulation.get('t0', 0.0)), float(simulation.get('t1', 10.0)),
                     float(simulation.get('dt', 1e-3)), int(simulation.get('stride', 1)))
        system.validate()
        return system

    def to_config(self) -> Dict[str, Any]:
        return {'oscillators': [{'mass': m.to_config(), 'stiffness': c.to_config()}
                                for m, c in zip(self.masses, self.stiffnesses)],
                'couplings': {name: c.to_config() for name, c in zip(('c12', 'c13', 'c23'), self.couplings)},
                'simulation': {'t0': self.t0, 't1': self.t1, 'dt': self.dt, 'stride': self.stride}}

    @property
    def steps(self) -> int:
        return max(1, int(round((self.t1 - self.t0) / self.dt)))

    @property
    def step(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def is_constant(self) -> bool:
        return all(p.is_constant for p in (*self.masses, *self.stiffnesses, *self.couplings))

    def half_step_times(self) -> NDArray:
        """Step boundaries and midpoints, t0 + k h / 2 for k = 0 .. 2n"""
        return self.t0 + 0.5 * self.step * np.arange(2 * self.steps + 1)

    def validate(self) -> None:
        """
        Check the interval and step, and mass positivity at every step boundary and midpoint
        :return: None
        """
        if not self.dt > 0.0 or not self.t1 > self.t0:
            raise UsageError(f'need dt > 0 and t1 > t0, got dt={self.dt} on [{self.t0}, {self.t1}]')
        if self.stride < 1:
            raise UsageError(f'stride must be at least 1, got {self.stride}')
        times = self.half_step_times()
        for m in self.masses:
            _positive_mass(m, times)


def gamma_stack(sys: OscillatorSystem, times: NDArray) -> NDArray:
    """
    Gamma at many times
    :param sys: oscillator system
    :param times: array (n,)
    :return: array (n, 3, 3)
    """
    times = np.asarray(times, dtype=float)
    stack = np.empty(times.shape + (3, 3))
    for i in range(3):
        stack[..., i, i] = effective_frequency_sq(sys.masses[i], sys.stiffnesses[i], times)
    for (i, j), c in zip(((0, 1), (0, 2), (1, 2)), sys.couplings):
        stack[..., i, j] = stack[..., j, i] = coupling_k(sys.masses[i], sys.masses[j], c, times)
    return stack


def gamma_at(sys: OscillatorSystem, t: float) -> SymMat3:
    """
    Gamma(t), effective frequencies on the diagonal and couplings off it
    :param sys: oscillator system
    :param t: time in [t0, t1]
    :return: SymMat3
    """
    return SymMat3.from_matrix(gamma_stack(sys, np.array([t]))[0])


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    x: Vec3
    p: Vec3
    energy: float
    work: float = 0.0


@dataclass
class Trajectory:
    """
    Sampled run, arrays indexed by output row
    """
    t: NDArray
    x: NDArray
    p: NDArray
    energy: NDArray
    work: NDArray
    discrepancy: Optional[NDArray] = None
    error: Optional[Dict[str, Any]] = None
    flags: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final(self) -> TrajectoryState:
        return TrajectoryState(float(self.t[-1]), self.x[-1], self.p[-1], float(self.energy[-1]),
                               float(self.work[-1]))

    def rows(self) -> List[Dict[str, float]]:
        """Output rows t, x1..x3, p1..p3, energy, work and D when available"""
        rows = []
        for k in range(len(self.t)):
            row = {'t': float(self.t[k])}
            row |= {f'x{i + 1}': float(self.x[k, i]) for i in range(3)}
            row |= {f'p{i + 1}': float(self.p[k, i]) for i in range(3)}
            row |= {'energy': float(self.energy[k]), 'work': float(self.work[k])}
            if self.discrepancy is not None:
                row['D'] = float(self.discrepancy[k])
            rows.append(row)
        return rows

    def summary(self) -> Dict[str, Any]:
        energy_drift = float(np.max(np.abs(self.energy - self.energy[0])) / max(abs(self.energy[0]), 1e-300))
        record = {'rows': len(self.t), 't_end': float(self.t[-1]), 'energy_start': float(self.energy[0]),
                  'energy_end': float(self.energy[-1]), 'energy_max_rel_drift': energy_drift,
                  'work_end': float(self.work[-1]),
                  'energy_minus_work_max': float(np.max(np.abs(self.energy - self.energy[0] - self.work))),
                  'flags': list(self.flags), 'error': self.error}
        if self.discrepancy is not None:
            record |= {'max_D': float(np.max(self.discrepancy)), 'final_D': float(self.discrepancy[-1])}
        return record


def output_indices(steps: int, stride: int) -> NDArray:
    """Every stride-th step, the last step always included"""
    indices = np.arange(0, steps + 1, stride)
    return indices if indices[-1] == steps else np.append(indices, steps)


def check_step(sys: OscillatorSystem, stack: NDArray, max_phase: float = 0.1) -> float:
    """
    Require dt max sqrt|Omega_i^2| <= max_phase over all evaluation times
    :param sys: oscillator system
    :param stack: Gamma at the half-step grid
    :param max_phase: largest accepted phase advance per step
    :return: largest phase advance
    """
    values = jacobi_eigen_batch(stack)[0]
    phase = float(sys.step * np.sqrt(np.max(np.abs(values))))
    if phase > max_phase:
        raise StepTooLarge(f'dt * max sqrt|Omega^2| = {phase:.4g} exceeds {max_phase}, reduce dt',
                           phase=phase, dt=sys.step)
    return phase


def _energy(x: NDArray, p: NDArray, stack: NDArray) -> NDArray:
    return 0.5 * np.einsum('ki,ki->k', p, p) + 0.5 * np.einsum('ki,kij,kj->k', x, stack, x)


def _work(sys: OscillatorSystem, x: NDArray, half: NDArray) -> NDArray:
    """Cumulative integral of 1/2 x^T dGamma/dt x over the step boundaries"""
    rate = np.gradient(half, 0.5 * sys.step, axis=0)[::2]
    power = 0.5 * np.einsum('ki,kij,kj->k', x, rate, x)
    return cumulative_trapezoid(power, dx=sys.step, initial=0.0)


def _rk4(x: NDArray, p: NDArray, h: float, force) -> Tuple[NDArray, NDArray]:
    """
    One Runge-Kutta step for x' = p, p' = force(stage, x), stage 0 start, 1 midpoint, 2 end
    """
    k1, l1 = p, force(0, x)
    k2, l2 = p + 0.5 * h * l1, force(1, x + 0.5 * h * k1)
    k3, l3 = p + 0.5 * h * l2, force(1, x + 0.5 * h * k2)
    k4, l4 = p + h * l3, force(2, x + h * k3)
    return x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6, p + h * (l1 + 2 * l2 + 2 * l3 + l4) / 6


def _trajectory(sys: OscillatorSystem, x: NDArray, p: NDArray, half: NDArray, count: int) -> Trajectory:
    """Sample the first count + 1 step boundaries at the output stride"""
    boundary = half[::2][:count + 1]
    work = _work(sys, x[:count + 1], half[:2 * count + 1]) if count else np.zeros(1)
    energy = _energy(x[:count + 1], p[:count + 1], boundary)
    rows = output_indices(count, sys.stride) if count else np.array([0])
    times = sys.t0 + sys.step * rows
    return Trajectory(times, x[rows], p[rows], energy[rows], work[rows])


def _direct(sys: OscillatorSystem, x0: Vec3, p0: Vec3, half: NDArray) -> Tuple[NDArray, NDArray]:
    n, h = sys.steps, sys.step
    xs, ps = np.empty((n + 1, 3)), np.empty((n + 1, 3))
    xs[0], ps[0] = x0, p0
    for k in range(n):
        stages = half[2 * k], half[2 * k + 1], half[2 * k + 2]
        xs[k + 1], ps[k + 1] = _rk4(xs[k], ps[k], h, lambda s, x: -stages[s] @ x)
    return xs, ps


def _initial(x0: Sequence[float], p0: Sequence[float]) -> Tuple[NDArray, NDArray]:
    x0, p0 = np.asarray(x0, dtype=float), np.asarray(p0, dtype=float)
    if x0.shape != (3,) or p0.shape != (3,) or not np.all(np.isfinite(np.concatenate([x0, p0]))):
        raise UsageError('initial X and P must be three finite numbers each')
    return x0, p0


def integrate_direct(sys: OscillatorSystem, x0: Sequence[float], p0: Sequence[float],
                     max_phase: float = 0.1) -> Trajectory:
    """
    Fixed-step RK4 integration of x' = p, p' = -Gamma(t) x
    :param sys: oscillator system
    :param x0: initial coordinates
    :param p0: initial momenta
    :param max_phase: step resolution limit
    :return: Trajectory sampled every stride steps
    """
    x0, p0 = _initial(x0, p0)
    sys.validate()
    half = gamma_stack(sys, sys.half_step_times())
    check_step(sys, half, max_phase)
    xs, ps = _direct(sys, x0, p0, half)
    logger.info('direct integration, %d steps of %.3g', sys.steps, sys.step)
    return _trajectory(sys, xs, ps, half, sys.steps)


def track_eigenbasis(stack: NDArray, min_overlap: float = 0.5) -> Tuple[NDArray, NDArray, int]:
    """
    Eigen-decompose every matrix and keep modes continuous from one time to the next by maximal-overlap
    permutation and sign matching
    :param stack: (m, 3, 3) symmetric matrices along the time grid
    :param min_overlap: smallest accepted |q_prev . q_new| of a matched pair
    :return: eigenvalues (m, 3), eigenvectors (m, 3, 3) in columns, index of the first discontinuity or m
    """
    values, vectors = jacobi_eigen_batch(stack)[:2]
    for k in range(1, len(stack)):
        overlap = vectors[k - 1].T @ vectors[k]
        rows, cols = linear_sum_assignment(np.abs(overlap), maximize=True)
        matched = overlap[rows, cols]
        if np.min(np.abs(matched)) < min_overlap:
            return values[:k], vectors[:k], k
        values[k] = values[k][cols]
        vectors[k] = vectors[k][:, cols] * np.where(matched < 0.0, -1.0, 1.0)
    return values, vectors, len(stack)


def integrate_naive_decoupled(sys: OscillatorSystem, x0: Sequence[float], p0: Sequence[float],
                              max_phase: float = 0.1, min_overlap: float = 0.5) -> Trajectory:
    """
    Integrate each instantaneous normal mode on its own, ignoring the time derivative of the eigenbasis, and
    compare with the direct integration
    :param sys: oscillator system
    :param x0: initial coordinates
    :param p0: initial momenta
    :param max_phase: step resolution limit
    :param min_overlap: eigenbasis continuity limit
    :return: Trajectory of the naive solution with D(t) = |x_naive - x_direct|; truncated at an eigenbasis
             discontinuity, the error recorded
    """
    x0, p0 = _initial(x0, p0)
    sys.validate()
    half = gamma_stack(sys, sys.half_step_times())
    check_step(sys, half, max_phase)
    xs, ps = _direct(sys, x0, p0, half)

    values, vectors, valid = track_eigenbasis(half, min_overlap)
    # Whole steps only: step k needs grid points 2k .. 2k + 2
    count = min(sys.steps, (valid - 1) // 2)
    error = None
    if valid < len(half):
        t_bad = float(sys.half_step_times()[valid])
        error = EigenbasisDiscontinuity(f'eigenbasis overlap below {min_overlap} at t = {t_bad:.6g}, '
                                        f'run truncated after {count} steps', t=t_bad, steps=count).to_dict()
        logger.warning('naive decoupling truncated at t = %.6g', t_bad)

    h = sys.step
    qs, pt = np.empty((count + 1, 3)), np.empty((count + 1, 3))
    qs[0], pt[0] = vectors[0].T @ x0, vectors[0].T @ p0
    for k in range(count):
        stages = values[2 * k], values[2 * k + 1], values[2 * k + 2]
        qs[k + 1], pt[k + 1] = _rk4(qs[k], pt[k], h, lambda s, q: -stages[s] * q)
    basis = vectors[0:2 * count + 1:2]
    x_naive = np.einsum('kij,kj->ki', basis, qs)
    p_naive = np.einsum('kij,kj->ki', basis, pt)

    trajectory = _trajectory(sys, x_naive, p_naive, half, count)
    rows = output_indices(count, sys.stride) if count else np.array([0])
    trajectory.discrepancy = np.linalg.norm(x_naive[rows] - xs[rows], axis=1)
    trajectory.error = error
    if error:
        trajectory.flags.append(EigenbasisDiscontinuity.kind)
    if sys.is_constant:
        trajectory.flags.append('constant_system')
    return trajectory


def reverse_state(state: TrajectoryState) -> TrajectoryState:
    """
    Momentum reversal, used to integrate a time-independent system back to its start
    :param state: trajectory state
    :return: state with p -> -p
    """
    return TrajectoryState(state.t, state.x.copy(), -state.p, state.energy, state.work)


def simulate(record: Dict[str, Any], compare: bool = False, max_phase: float = 0.1,
             min_overlap: float = 0.5) -> Trajectory:
    """
    Run one system described by a configuration record with its initial conditions
    :param record: {oscillators, couplings, simulation, initial: {X, P}}
    :param compare: run the naive decoupling and report D(t)
    :param max_phase: step resolution limit
    :param min_overlap: eigenbasis continuity limit
    :return: Trajectory
    """
    system = OscillatorSystem.from_config(record)
    initial = record.get('initial', {})
    x0, p0 = initial.get('X', [1.0, 0.0, 0.0]), initial.get('P', [0.0, 0.0, 0.0])
    if compare:
        return integrate_naive_decoupled(system, x0, p0, max_phase, min_overlap)
    return integrate_direct(system, x0, p0, max_phase)


def _sweep_one(record: Dict[str, Any], compare: bool, max_phase: float, min_overlap: float) -> Dict[str, Any]:
    try:
        return simulate(record, compare, max_phase, min_overlap).summary()
    except OscAuditError as err:
        return {'error': err.to_dict()}


def sweep(base: Dict[str, Any], overrides: List[Dict[str, Any]], compare: bool = True, max_phase: float = 0.1,
          min_overlap: float = 0.5, executor: Optional[Executor] = None) -> List[Dict[str, Any]]:
    """
    Independent runs of variants of one system, in the order of the overrides
    :param base: system record
    :param overrides: partial records deep-merged onto base, an optional 'label' names the run
    :param compare: run the naive decoupling
    :param max_phase: step resolution limit
    :param min_overlap: eigenbasis continuity limit
    :param executor: optional pool, runs share no state
    :return: one summary per override
    """
    records = [oscaudit.app.merge(base, {k: v for k, v in item.items() if k != 'label'}) for item in overrides]
    if executor is None:
        summaries = [_sweep_one(r, compare, max_phase, min_overlap) for r in records]
    else:
        summaries = list(executor.map(_sweep_one, records, [compare] * len(records), [max_phase] * len(records),
                                      [min_overlap] * len(records)))
    return [{'run': i, 'label': str(item.get('label', i))} | summary
            for i, (item, summary) in enumerate(zip(overrides, summaries))]
