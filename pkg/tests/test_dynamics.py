"""Rigid-body model checks against independent oracles.

The mass matrix, Coriolis vector and gravity forces are verified against a
symbolic Lagrangian derivation (positions -> kinetic/potential energy ->
generalized forces) built with sympy, and against finite differences of the
implemented mass matrix.
"""

import numpy as np
import pytest
import sympy as sp

from frictionid import presets
from frictionid.dynamics import (ArmParameters, DivergenceError, JointState,
                                 Plant, coriolis_vector, forward_dynamics,
                                 gravity_forces, inverse_dynamics, mass_matrix,
                                 potential_energy, simulate, total_energy,
                                 zero_order_hold, linear_interpolant)

from conftest import random_states


@pytest.fixture(scope="module")
def arm():
    return presets.canonical_arm()


@pytest.fixture(scope="module")
def lagrangian_oracle(arm):
    """Symbolic derivation of M, k, q_grav from first principles."""
    y1, y2, v1, v2 = sp.symbols("y1 y2 v1 v2")
    m1, m2 = arm.link_mass
    l1 = arm.link_length[0]
    c1, c2 = arm.link_com_distance
    i1, i2 = arm.link_inertia
    g = arm.gravity

    # COM positions, x horizontal, z up, angles from the hanging pose
    p1 = sp.Matrix([c1 * sp.sin(y1), -c1 * sp.cos(y1)])
    p2 = sp.Matrix([l1 * sp.sin(y1) + c2 * sp.sin(y1 + y2),
                    -l1 * sp.cos(y1) - c2 * sp.cos(y1 + y2)])
    q = sp.Matrix([y1, y2])
    qd = sp.Matrix([v1, v2])
    vel1 = p1.jacobian(q) * qd
    vel2 = p2.jacobian(q) * qd
    kinetic = (m1 * (vel1.T * vel1)[0] + m2 * (vel2.T * vel2)[0]
               + i1 * v1**2 + i2 * (v1 + v2)**2) / 2
    potential = g * (m1 * p1[1] + m2 * p2[1])

    mass = sp.hessian(kinetic, (v1, v2))
    # k = d/dt(dT/dqd) - dT/dq with the mass matrix term removed
    dT_dqd = sp.Matrix([sp.diff(kinetic, v) for v in (v1, v2)])
    mdot_qd = sum((sp.diff(dT_dqd, yi) * vi
                   for yi, vi in ((y1, v1), (y2, v2))), sp.zeros(2, 1))
    coriolis = mdot_qd - sp.Matrix([sp.diff(kinetic, yi) for yi in (y1, y2)])
    grav = -sp.Matrix([sp.diff(potential, yi) for yi in (y1, y2)])

    return (sp.lambdify((y1, y2, v1, v2), mass),
            sp.lambdify((y1, y2, v1, v2), coriolis),
            sp.lambdify((y1, y2, v1, v2), grav),
            sp.lambdify((y1, y2, v1, v2), potential))


def test_parameter_validation():
    with pytest.raises(ValueError):
        presets.canonical_arm().__class__(
            link_mass=(0.0, 1.0), link_length=(0.3, 0.3),
            link_com_distance=(0.15, 0.15), link_inertia=(0.05, 0.03),
            gear_ratio=(161.0, 161.0), motor_constant=0.123, gravity=9.81,
            torque_limit=(44.8, 44.8), velocity_limit=(2.6, 2.6))
    with pytest.raises(ValueError):
        JointState(np.array([np.nan, 0.0]), np.zeros(2))


def test_mass_matrix_hand_expansion(arm):
    # straight arm: M11 equals the full-extension expansion term by term
    m1, m2 = arm.link_mass
    l1 = arm.link_length[0]
    c1, c2 = arm.link_com_distance
    i1, i2 = arm.link_inertia
    expected = i1 + i2 + m1 * c1**2 + m2 * (l1**2 + c2**2 + 2 * l1 * c2)
    m = mass_matrix(arm, np.array([0.7, 0.0]))
    assert m[0, 0] == pytest.approx(expected, rel=1e-12)


def test_mass_matrix_coupling_at_right_angle(arm):
    m2 = arm.link_mass[1]
    c2 = arm.link_com_distance[1]
    i2 = arm.link_inertia[1]
    m = mass_matrix(arm, np.array([0.3, np.pi / 2]))
    assert m[0, 1] == pytest.approx(i2 + m2 * c2**2, abs=1e-12)


def test_mass_matrix_symmetric_positive_definite(arm):
    rng = np.random.default_rng(0)
    ys, _ = random_states(rng, 1000)
    for y in ys:
        m = mass_matrix(arm, y)
        assert np.array_equal(m, m.T)
        np.linalg.cholesky(m)  # raises if not PD


def test_mass_matrix_matches_lagrangian(arm, lagrangian_oracle):
    mass_fn = lagrangian_oracle[0]
    rng = np.random.default_rng(1)
    ys, _ = random_states(rng, 50)
    for y in ys:
        expected = np.asarray(mass_fn(y[0], y[1], 0.0, 0.0), dtype=float)
        np.testing.assert_allclose(mass_matrix(arm, y), expected, atol=1e-10)


def test_coriolis_zero_velocity_and_homogeneity(arm):
    rng = np.random.default_rng(2)
    ys, yds = random_states(rng, 100)
    for y, yd in zip(ys, yds):
        assert np.all(coriolis_vector(arm, y, np.zeros(2)) == 0.0)
        np.testing.assert_allclose(coriolis_vector(arm, y, 2.0 * yd),
                                   4.0 * coriolis_vector(arm, y, yd),
                                   rtol=1e-12, atol=1e-14)


def test_coriolis_finite_difference_oracle(arm):
    # k = Mdot*qd - 1/2 d/dy (qd' M qd), via central differences of M
    rng = np.random.default_rng(3)
    ys, yds = random_states(rng, 100)
    h = 1e-6
    for y, yd in zip(ys, yds):
        mdot = np.zeros((2, 2))
        quad_grad = np.zeros(2)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            m_plus = mass_matrix(arm, y + e)
            m_minus = mass_matrix(arm, y - e)
            dm = (m_plus - m_minus) / (2 * h)
            mdot += dm * yd[j]
            quad_grad[j] = (yd @ m_plus @ yd - yd @ m_minus @ yd) / (2 * h)
        expected = mdot @ yd - 0.5 * quad_grad
        np.testing.assert_allclose(coriolis_vector(arm, y, yd), expected,
                                   atol=1e-6)


def test_coriolis_matches_lagrangian(arm, lagrangian_oracle):
    coriolis_fn = lagrangian_oracle[1]
    rng = np.random.default_rng(4)
    ys, yds = random_states(rng, 50)
    for y, yd in zip(ys, yds):
        expected = np.asarray(coriolis_fn(y[0], y[1], yd[0], yd[1]),
                              dtype=float).ravel()
        np.testing.assert_allclose(coriolis_vector(arm, y, yd), expected,
                                   atol=1e-9)


def test_gravity_zero_when_links_on_axis(arm):
    # both links along the gravity axis: hanging and upright
    np.testing.assert_allclose(gravity_forces(arm, np.zeros(2)), 0.0, atol=1e-12)
    np.testing.assert_allclose(gravity_forces(arm, np.array([np.pi, 0.0])), 0.0,
                               atol=1e-12)


def test_gravity_mirror_symmetry(arm):
    rng = np.random.default_rng(5)
    ys, _ = random_states(rng, 100)
    for y in ys:
        np.testing.assert_allclose(gravity_forces(arm, -y),
                                   -gravity_forces(arm, y), atol=1e-12)


def test_gravity_horizontal_static_moment(arm):
    # arm horizontal: joint-1 torque is the static moment of both links
    m1, m2 = arm.link_mass
    l1 = arm.link_length[0]
    c1, c2 = arm.link_com_distance
    expected = -arm.gravity * (m1 * c1 + m2 * (l1 + c2))
    q = gravity_forces(arm, np.array([np.pi / 2, 0.0]))
    assert q[0] == pytest.approx(expected, rel=1e-12)


def test_gravity_matches_lagrangian(arm, lagrangian_oracle):
    grav_fn = lagrangian_oracle[2]
    rng = np.random.default_rng(6)
    ys, _ = random_states(rng, 50)
    for y in ys:
        expected = np.asarray(grav_fn(y[0], y[1], 0.0, 0.0), dtype=float).ravel()
        np.testing.assert_allclose(gravity_forces(arm, y), expected, atol=1e-10)


def test_forward_dynamics_equation_residual(canonical_plant):
    # random state/input: M a + k + tau - q_grav - B u == 0
    plant = canonical_plant
    rng = np.random.default_rng(7)
    ys, yds = random_states(rng, 100)
    us = rng.uniform(-0.2, 0.2, (100, 2))
    for y, yd, u in zip(ys, yds, us):
        acc = forward_dynamics(plant, y, yd, u)
        residual = (mass_matrix(plant.params, y) @ acc
                    + coriolis_vector(plant.params, y, yd)
                    + plant.friction_torque(yd)
                    - gravity_forces(plant.params, y)
                    - plant.params.gear_matrix @ u)
        np.testing.assert_allclose(residual, 0.0, atol=1e-10)


def test_forward_dynamics_balanced_input_gives_zero_acceleration(canonical_plant):
    plant = canonical_plant
    y = np.array([0.4, -0.8])
    yd = np.array([0.6, 0.9])
    u = np.linalg.solve(plant.params.gear_matrix,
                        coriolis_vector(plant.params, y, yd)
                        + plant.friction_torque(yd)
                        - gravity_forces(plant.params, y))
    np.testing.assert_allclose(forward_dynamics(plant, y, yd, u), 0.0,
                               atol=1e-12)


def test_upright_equilibrium_without_friction(arm):
    plant = Plant(arm, None)
    acc = forward_dynamics(plant, np.array([np.pi, 0.0]), np.zeros(2),
                           np.zeros(2))
    np.testing.assert_allclose(acc, 0.0, atol=1e-12)


def test_static_hold_torque_is_pure_gravity(canonical_plant):
    plant = canonical_plant
    y = np.array([0.5, -0.3])
    u = inverse_dynamics(plant, y, np.zeros(2), np.zeros(2))
    expected = -np.linalg.solve(plant.params.gear_matrix,
                                gravity_forces(plant.params, y))
    np.testing.assert_allclose(u, expected, atol=1e-14)


def test_inverse_forward_round_trip(canonical_plant):
    plant = canonical_plant
    rng = np.random.default_rng(8)
    ys, yds = random_states(rng, 100)
    accs = rng.uniform(-3.0, 3.0, (100, 2))
    for y, yd, acc in zip(ys, yds, accs):
        u = inverse_dynamics(plant, y, yd, acc)
        back = forward_dynamics(plant, y, yd, u)
        np.testing.assert_allclose(back, acc, rtol=1e-10, atol=1e-12)
        u2 = inverse_dynamics(plant, y, yd, back)
        np.testing.assert_allclose(u2, u, rtol=1e-10, atol=1e-14)


def test_inverse_dynamics_term_sum_oracle(canonical_plant):
    # torque at a sine peak-velocity sample equals the sum of the
    # independently computed terms
    plant = canonical_plant
    y = np.array([0.0, 0.0])
    yd = np.array([1.2, -1.2])
    acc = np.array([0.0, 0.0])
    u = inverse_dynamics(plant, y, yd, acc)
    per_term = (mass_matrix(plant.params, y) @ acc
                + coriolis_vector(plant.params, y, yd)
                + np.array([plant.friction[0].torque(yd[0]),
                            plant.friction[1].torque(yd[1])])
                - gravity_forces(plant.params, y))
    np.testing.assert_allclose(u, per_term / np.asarray(plant.params.gear_ratio),
                               rtol=1e-12)
    # at the hanging pose with high speed the friction term dominates
    assert np.all(np.abs(plant.friction_torque(yd))
                  >= 0.9 * np.abs(per_term))


def test_simulate_uniform_rotation_without_forces():
    # straight arm (y2 = 0, y2' = 0) spinning with no gravity, friction or
    # input: the Coriolis vector vanishes identically, so the motion is a
    # uniform rotation y1(t) = y1(0) + w t
    arm = presets.canonical_arm()
    no_gravity = ArmParameters(arm.link_mass, arm.link_length,
                               arm.link_com_distance, arm.link_inertia,
                               arm.gear_ratio, arm.motor_constant, 0.0,
                               arm.torque_limit, arm.velocity_limit)
    plant = Plant(no_gravity, None)
    omega = 0.8
    y0 = JointState(np.array([0.2, 0.0]), np.array([omega, 0.0]))
    result = simulate(plant, lambda t: np.zeros(2), y0, 1e-3, 2000)
    np.testing.assert_allclose(result.y[:, 0], 0.2 + omega * result.t,
                               atol=1e-10)
    np.testing.assert_allclose(result.y[:, 1], 0.0, atol=1e-10)
    np.testing.assert_allclose(result.ydot[:, 0], omega, atol=1e-10)


def test_energy_conservation_frictionless(arm):
    plant = Plant(arm, None)
    y0 = JointState(np.array([0.15, -0.1]), np.array([0.2, -0.15]))
    result = simulate(plant, lambda t: np.zeros(2), y0, 1e-3, 2000)
    e0 = total_energy(arm, result.y[0], result.ydot[0])
    energies = np.array([total_energy(arm, result.y[k], result.ydot[k])
                         for k in range(0, len(result), 20)])
    assert np.abs(energies - e0).max() < 1e-9


def test_rk4_convergence_order(arm):
    plant = Plant(arm, None)
    y0 = JointState(np.array([0.3, -0.2]), np.array([0.5, 0.4]))
    horizon = 0.512  # seconds

    def end_state(dt):
        res = simulate(plant, lambda t: np.zeros(2), y0, dt,
                       int(round(horizon / dt)))
        return np.concatenate([res.y[-1], res.ydot[-1]])

    reference = end_state(horizon / 4096)
    err_coarse = np.linalg.norm(end_state(horizon / 64) - reference)
    err_fine = np.linalg.norm(end_state(horizon / 128) - reference)
    ratio = err_coarse / err_fine
    assert 12.0 < ratio < 20.0  # ~16x for a 4th-order method


def test_simulate_divergence_reported():
    arm = presets.canonical_arm()
    plant = Plant(arm, None)
    y0 = JointState(np.zeros(2), np.zeros(2))
    with pytest.raises(DivergenceError) as excinfo:
        simulate(plant, lambda t: np.array([500.0, 500.0]), y0, 1e-2, 20000)
    assert excinfo.value.t > 0


def test_potential_energy_consistent_with_gravity(arm, lagrangian_oracle):
    potential_fn = lagrangian_oracle[3]
    rng = np.random.default_rng(9)
    ys, _ = random_states(rng, 20)
    for y in ys:
        assert potential_energy(arm, y) == pytest.approx(
            float(potential_fn(y[0], y[1], 0.0, 0.0)), abs=1e-10)


def test_control_signal_helpers():
    t = np.array([0.0, 0.1, 0.2])
    u = np.array([[0.0, 1.0], [1.0, 2.0], [2.0, 3.0]])
    hold = zero_order_hold(t, u)
    np.testing.assert_allclose(hold(0.05), [0.0, 1.0])
    np.testing.assert_allclose(hold(0.1), [1.0, 2.0])
    lin = linear_interpolant(t, u)
    np.testing.assert_allclose(lin(0.05), [0.5, 1.5])
