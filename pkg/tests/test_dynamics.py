import numpy as np
import pytest

from concurrent.futures import ThreadPoolExecutor

from numpy.testing import assert_allclose

from oscaudit import NonPositiveMass, StepTooLarge, UsageError
from oscaudit.linalg3 import jacobi_eigen
from oscaudit.dynamics import (Constant, PolynomialProfile, Exponential, Sinusoid, profile_from_config,
                               effective_frequency_sq, coupling_k, OscillatorSystem, gamma_at, gamma_stack,
                               integrate_direct, integrate_naive_decoupled, reverse_state, output_indices,
                               simulate, sweep)

ONE = Constant(1.0)


def unit_mass_system(stiffness, couplings, t1=10.0, dt=1e-3, stride=1):
    """Unit masses: Gamma diagonal is the stiffness, K_ij is c_ij / 2"""
    return OscillatorSystem((ONE, ONE, ONE), tuple(Constant(c) for c in stiffness),
                            tuple(Constant(c) for c in couplings), 0.0, t1, dt, stride)


def example_system(t1=10.0, dt=1e-3, stride=1):
    return unit_mass_system((7.0, 6.0, 5.0), (2.0, 4.0, 6.0), t1, dt, stride)


def record(couplings=None, masses=None, t1=10.0, dt=1e-2):
    masses = masses or [1.0, 1.0, 1.0]
    return {'oscillators': [{'mass': m, 'stiffness': {'family': 'constant', 'params': [k]}}
                            for m, k in zip(masses, (1.0, 2.0, 3.0))],
            'couplings': couplings or {},
            'simulation': {'t0': 0.0, 't1': t1, 'dt': dt, 'stride': 10},
            'initial': {'X': [1.0, 0.5, -0.3], 'P': [0.0, 0.2, 0.0]}}


def test_constant_frequency():
    assert effective_frequency_sq(Constant(2.0), Constant(8.0), 3.0) == pytest.approx(4.0)


def test_exponential_mass():
    gamma, t = 0.3, 1.7
    expected = 5.0 * np.exp(-gamma * t) - gamma ** 2 / 4
    assert effective_frequency_sq(Exponential(1.0, gamma), Constant(5.0), t) == pytest.approx(expected)


def test_polynomial_mass():
    assert effective_frequency_sq(PolynomialProfile(1.0, 0.0, 1.0), ONE, 1.0) == pytest.approx(0.25)


class FiniteDifference:
    """Derivatives of a profile by central differences"""
    def __init__(self, profile, h=1e-6):
        self.profile, self.h = profile, h

    def value(self, t):
        return self.profile.value(t)

    def first(self, t):
        return (self.profile.value(t + self.h) - self.profile.value(t - self.h)) / (2 * self.h)

    def second(self, t):
        return (self.profile.first(t + self.h) - self.profile.first(t - self.h)) / (2 * self.h)


@pytest.mark.parametrize('mass', [Constant(2.0), PolynomialProfile(1.0, 0.5, 0.25), Exponential(1.5, -0.4),
                                  Sinusoid(3.0, 0.5, 2.0, 0.3)])
def test_frequency_against_finite_differences(mass):
    stiffness = Sinusoid(4.0, 1.0, 1.0)
    for t in (0.0, 0.7, 2.5):
        exact = effective_frequency_sq(mass, stiffness, t)
        approximate = effective_frequency_sq(FiniteDifference(mass), stiffness, t)
        assert approximate == pytest.approx(exact, rel=1e-5)


def test_profile_derivatives():
    profile = Sinusoid(1.0, 2.0, 3.0, 0.5)
    assert profile.first(0.0) == pytest.approx(6.0 * np.cos(0.5))
    assert profile.second(0.0) == pytest.approx(-18.0 * np.sin(0.5))
    poly = PolynomialProfile(1.0, 2.0, 3.0)
    assert poly.first(2.0) == pytest.approx(14.0)
    assert poly.second(2.0) == pytest.approx(6.0)


@pytest.mark.parametrize('ma, mb, c, expected', [(1.0, 1.0, 0.0, 0.0), (1.0, 1.0, 3.0, 1.5), (4.0, 1.0, 4.0, 1.0)])
def test_coupling_k(ma, mb, c, expected):
    assert coupling_k(Constant(ma), Constant(mb), Constant(c), 0.0) == pytest.approx(expected)


def test_non_positive_mass():
    with pytest.raises(NonPositiveMass):
        effective_frequency_sq(Constant(0.0), ONE, 0.0)
    with pytest.raises(NonPositiveMass):
        coupling_k(ONE, Constant(-1.0), ONE, 0.0)
    system = OscillatorSystem((PolynomialProfile(1.0, -1.0), ONE, ONE), (ONE, ONE, ONE), (ONE, ONE, ONE),
                              0.0, 2.0, 0.01)
    with pytest.raises(NonPositiveMass) as info:
        system.validate()
    assert info.value.details['t'] == pytest.approx(1.0)


def test_gamma_at():
    system = unit_mass_system((1.0, 2.0, 3.0), (1.0, 1.0, 1.0))
    assert_allclose(gamma_at(system, 0.5).matrix, [[1.0, 0.5, 0.5], [0.5, 2.0, 0.5], [0.5, 0.5, 3.0]])


def test_gamma_with_exponential_masses():
    masses = (Exponential(1.0, 0.2), Exponential(2.0, 0.2), ONE)
    system = OscillatorSystem(masses, (Constant(3.0), Constant(4.0), ONE), (Constant(2.0), ONE, ONE), 0.0, 1.0)
    g = gamma_at(system, 0.0)
    assert g.d1 == pytest.approx(3.0 - 0.01)
    assert g.d2 == pytest.approx(2.0 - 0.01)
    assert g.o12 == pytest.approx(2.0 / (2.0 * np.sqrt(2.0)))
    stack = gamma_stack(system, np.linspace(0.0, 1.0, 5))
    assert np.array_equal(stack, np.swapaxes(stack, 1, 2))


def test_decoupled_unit_oscillator():
    system = unit_mass_system((1.0, 1.0, 1.0), (0.0, 0.0, 0.0), t1=10.0, dt=1e-3)
    trajectory = integrate_direct(system, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert trajectory.t[-1] == pytest.approx(10.0)
    assert trajectory.x[-1, 0] == pytest.approx(np.cos(10.0), abs=1e-8)
    assert trajectory.p[-1, 0] == pytest.approx(-np.sin(10.0), abs=1e-8)


def test_energy_is_conserved_for_constant_gamma():
    trajectory = integrate_direct(example_system(), [1.0, 0.0, -1.0], [0.5, 0.0, 0.0])
    assert trajectory.summary()['energy_max_rel_drift'] <= 1e-8
    assert np.all(trajectory.work == 0.0)


def test_matches_modal_solution(example):
    x0, p0 = np.array([1.0, -0.5, 0.25]), np.array([0.0, 0.3, 0.0])
    trajectory = integrate_direct(example_system(), x0, p0)
    oracle = jacobi_eigen(example)
    q, omega = oracle.eigenvectors, np.sqrt(oracle.eigenvalues)
    a, b = q.T @ x0, q.T @ p0 / omega
    for k in (0, 2500, 10_000):
        t = trajectory.t[k]
        expected = q @ (a * np.cos(omega * t) + b * np.sin(omega * t))
        assert_allclose(trajectory.x[k], expected, atol=1e-6)


def test_fourth_order_convergence():
    x0, p0 = [1.0, 0.0, -1.0], [0.0, 0.5, 0.0]
    dt = 0.02
    reference = integrate_direct(example_system(2.0, dt / 16), x0, p0).final

    def error(step):
        final = integrate_direct(example_system(2.0, step), x0, p0).final
        return max(np.max(np.abs(final.x - reference.x)), np.max(np.abs(final.p - reference.p)))

    assert 12.0 <= error(dt) / error(dt / 2) <= 20.0


def test_time_reversal():
    system = example_system()
    x0, p0 = np.array([0.3, 1.0, -0.2]), np.array([0.1, 0.0, 0.4])
    state = reverse_state(integrate_direct(system, x0, p0).final)
    back = reverse_state(integrate_direct(system, state.x, state.p).final)
    assert_allclose(back.x, x0, atol=1e-7)
    assert_allclose(back.p, p0, atol=1e-7)


def test_step_too_large():
    with pytest.raises(StepTooLarge):
        integrate_direct(example_system(dt=0.1), [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])


def test_naive_decoupling_exact_for_constant_system():
    trajectory = integrate_naive_decoupled(example_system(), [1.0, 0.0, -1.0], [0.5, 0.0, 0.0])
    assert len(trajectory) == 10_001
    assert np.max(trajectory.discrepancy) <= 1e-8
    assert trajectory.error is None
    assert 'constant_system' in trajectory.flags


def test_slowly_varying_masses():
    masses = (Exponential(1.0, 0.01), Exponential(1.0, 0.01), Exponential(1.0, 0.01))
    system = OscillatorSystem(masses, (Constant(1.0), Constant(2.0), Constant(3.0)),
                              (Constant(0.4), Constant(0.2), Constant(0.6)), 0.0, 10.0, 1e-2, 10)
    trajectory = integrate_naive_decoupled(system, [1.0, 0.5, -0.3], [0.0, 0.2, 0.0])
    assert trajectory.discrepancy[0] <= 1e-12
    assert np.all(np.isfinite(trajectory.discrepancy))
    assert np.all(np.diff(trajectory.t) > 0.0)
    assert np.max(trajectory.discrepancy) > 0.0
    assert trajectory.error is None
    direct = integrate_direct(system, [1.0, 0.5, -0.3], [0.0, 0.2, 0.0])
    summary = direct.summary()
    assert summary['energy_minus_work_max'] <= 1e-4 * abs(summary['energy_start'])


def test_fast_coupling_modulation():
    couplings = (Sinusoid(0.0, 0.5, 2.0), Sinusoid(0.0, 0.5, 2.0, 1.0), Sinusoid(0.0, 0.5, 2.0, 2.0))
    system = OscillatorSystem((ONE, ONE, ONE), (Constant(1.0), Constant(2.0), Constant(3.0)), couplings,
                              0.0, 10.0, 1e-2, 10)
    trajectory = integrate_naive_decoupled(system, [1.0, 0.5, -0.3], [0.0, 0.2, 0.0])
    assert trajectory.error is None
    assert np.max(trajectory.discrepancy) > 1e-3


def test_output_stride():
    assert output_indices(10, 3).tolist() == [0, 3, 6, 9, 10]
    assert output_indices(10, 5).tolist() == [0, 5, 10]
    trajectory = integrate_direct(example_system(1.0, 1e-2, 25), [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert_allclose(trajectory.t, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_profile_configuration():
    assert isinstance(profile_from_config(2.5), Constant)
    profile = profile_from_config({'family': 'exponential', 'params': [1.0, 0.1]})
    assert profile.value(0.0) == pytest.approx(1.0)
    assert profile_from_config(profile.to_config()).params == profile.params
    with pytest.raises(UsageError):
        profile_from_config({'family': 'spline', 'params': []})
    with pytest.raises(UsageError):
        profile_from_config({'family': 'sinusoid', 'params': [1.0]})


def test_system_configuration_round_trip():
    system = OscillatorSystem.from_config(record({'c12': {'family': 'sinusoid', 'params': [0.0, 0.5, 2.0, 0.0]}}))
    again = OscillatorSystem.from_config(system.to_config())
    assert_allclose(gamma_at(again, 0.3).matrix, gamma_at(system, 0.3).matrix)
    assert not system.is_constant
    with pytest.raises(UsageError):
        OscillatorSystem.from_config({'oscillators': []})
    with pytest.raises(UsageError):
        OscillatorSystem.from_config(record(t1=-1.0))


def test_simulate_rows():
    trajectory = simulate(record(), compare=True)
    rows = trajectory.rows()
    assert len(rows) == 101
    assert set(rows[0]) == {'t', 'x1', 'x2', 'x3', 'p1', 'p2', 'p3', 'energy', 'work', 'D'}


def test_sweep_is_ordered_and_independent_of_workers():
    base = record(t1=2.0)
    overrides = [{'label': 'slow', 'couplings': {'c12': {'family': 'sinusoid', 'params': [0.0, 0.5, 0.1, 0.0]}}},
                 {'label': 'fast', 'couplings': {'c12': {'family': 'sinusoid', 'params': [0.0, 0.5, 3.0, 0.0]}}},
                 {'label': 'bad', 'oscillators': [{'mass': 0.0, 'stiffness': 1.0}] * 3}]
    serial = sweep(base, overrides)
    with ThreadPoolExecutor(max_workers=3) as executor:
        parallel = sweep(base, overrides, executor=executor)
    assert serial == parallel
    assert [run['label'] for run in serial] == ['slow', 'fast', 'bad']
    assert serial[2]['error']['kind'] == 'NonPositiveMass'
    assert serial[0]['max_D'] < serial[1]['max_D']
