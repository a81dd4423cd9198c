"""Normalized gradient flow toward constant volume coefficients."""

import numpy as np
import pytest

from confvol.errors import InvalidRange, KOutOfRange, NoConvergence, StepRejected
from confvol.flow import discretize, flow_step, make_state, run_flow
from confvol.models import FlatTorus, RoundSphere, fourier_field


def test_torus_flow_converges():
    torus = FlatTorus((1.0, 1.0, 1.0))
    omega0 = fourier_field(torus, (1, 0, 0), amplitude=0.05)
    report = run_flow(torus, 1, omega0, tol=1e-6, max_steps=10000)
    assert report.converged
    assert report.final.sup_deviation < 1e-6
    assert report.volume_drift < 1e-10
    # the flat metric is the constant-v_1 critical point: v_1 -> 0
    assert abs(report.final_constant) < 1e-5
    # variance decreases monotonically on accepted steps
    assert np.all(np.diff(report.variance_history) <= 1e-14)


def test_zero_start_is_stationary():
    torus = FlatTorus((1.0, 1.0, 1.0))
    report = run_flow(torus, 1, np.zeros(8 ** 3), tol=1e-8, shape=(8, 8, 8))
    assert report.accepted == 0
    assert report.final.sup_deviation < 1e-12


def test_sphere_zonal_flow():
    sphere = RoundSphere(3, 1.0)
    disc = discretize(sphere, nodes=48, degree=16)
    # zonal degree-2 perturbation
    omega0 = 0.05 * disc.synth[:, 2]
    report = run_flow(sphere, 1, omega0, tol=1e-6, max_steps=10000)
    assert report.converged
    # constant target: v_1 of a unit 3-sphere is a binom(n,1) = 1.5
    assert report.final_constant == pytest.approx(1.5, abs=1e-4)


def test_sphere_flow_k2():
    sphere = RoundSphere(5, 1.0)
    disc = discretize(sphere, nodes=32, degree=8)
    omega0 = 0.02 * disc.synth[:, 2]
    report = run_flow(sphere, 2, omega0, tol=1e-5, max_steps=4000,
                      nodes=32, degree=8)
    assert report.converged
    # v_2 = a^2 binom(5, 2) = 2.5 at a = 1/2
    assert report.final_constant == pytest.approx(2.5, abs=1e-3)


def test_volume_renormalized_each_step():
    torus = FlatTorus((1.0, 1.0, 1.0))
    disc = discretize(torus, shape=(8, 8, 8))
    omega0 = fourier_field(torus, (1, 1, 0), amplitude=0.1)
    state = make_state(disc, omega0, 1)
    assert state.volume == pytest.approx(disc.base_volume, rel=1e-13)
    nxt = flow_step(state, 1, dt=1e-3)
    assert nxt.volume == pytest.approx(disc.base_volume, rel=1e-13)
    assert nxt.variance <= state.variance


def test_oversized_step_rejected():
    torus = FlatTorus((1.0, 1.0, 1.0))
    disc = discretize(torus, shape=(8, 8, 8))
    state = make_state(disc, fourier_field(torus, (1, 0, 0), amplitude=0.1), 1)
    with pytest.raises(StepRejected):
        flow_step(state, 1, dt=1.0)


def test_no_convergence_carries_report():
    torus = FlatTorus((1.0, 1.0, 1.0))
    omega0 = fourier_field(torus, (1, 0, 0), amplitude=0.05)
    with pytest.raises(NoConvergence) as exc:
        run_flow(torus, 1, omega0, tol=1e-6, max_steps=3)
    assert exc.value.report is not None
    assert exc.value.report.steps == 3


def test_guards():
    torus = FlatTorus((1.0, 1.0, 1.0))
    disc = discretize(torus)
    with pytest.raises(KOutOfRange):
        disc.vk(np.zeros(16 ** 3), 2)
    with pytest.raises(InvalidRange):
        make_state(discretize(FlatTorus((1.0, 1.0))), np.zeros(16 * 16), 1)
    from confvol.models import HyperbolicSpace

    with pytest.raises(InvalidRange):
        discretize(HyperbolicSpace(3, 1.0))
