import json
import math

import numpy as np
import pytest

from bqwaves.dynamics import (
    OrbitTrace,
    SimConfig,
    SimState,
    Stepper,
    default_dt,
    evolve,
    hamiltonian,
    load_config,
    make_initial_data,
    mass,
    orbital_distance,
    orbital_fit,
    periodic_grid,
    run,
    step,
    wave_on_grid,
)
from bqwaves.model import DomainError, ModelParams, WaveId
from bqwaves.profile import sample_profile

HJ = ModelParams(1.0, -1.0)
HJ_WAVE = WaveId("positive", 0.95)


@pytest.fixture(scope="module")
def hj_profile():
    return sample_profile(HJ, HJ_WAVE, n=513)


def _state(profile, n=512, **kw):
    return make_initial_data(profile, grid_n=n, domain_length=2 * profile.half_width, **kw)


def test_zero_fields_stay_zero():
    z = np.zeros(64)
    out = evolve(SimState(64, 10.0, 0.0, z, z.copy()), ModelParams(1.0, 1.0), 0.01, 50)
    assert np.all(out.v == 0) and np.all(out.u == 0)


def test_small_sinusoid_stays_bounded():
    n, L = 128, 20.0
    x = periodic_grid(n, L)
    v = 1e-3 * np.sin(2 * np.pi * x / L)
    out = evolve(SimState(n, L, 0.0, v, np.zeros(n)), HJ, 0.02, 2000)
    assert np.max(np.abs(out.v)) < 2e-3


def test_exact_wave_has_zero_orbital_distance(hj_profile):
    state = _state(hj_profile)
    assert orbital_distance(state, hj_profile) <= 1e-10
    shifted = state.rolled(17)
    fit = orbital_fit(shifted, *wave_on_grid(hj_profile, 512))
    assert fit.distance <= 1e-10
    assert abs(abs(fit.shift) - 17 * state.dx) < 1e-8


def test_translation_equivariance(hj_profile):
    state = _state(hj_profile, perturbation_kind="noise", amplitude=0.01)
    dt = 0.05
    a = evolve(state.rolled(9), HJ, dt, 40)
    b = evolve(state, HJ, dt, 40).rolled(9)
    assert np.max(np.abs(a.v - b.v)) <= 1e-10
    assert np.max(np.abs(a.u - b.u)) <= 1e-10


def test_hamiltonian_drift_over_many_steps(hj_profile):
    state = _state(hj_profile, perturbation_kind="rescale", amplitude=0.01)
    h0 = hamiltonian(state, HJ)
    out = evolve(state, HJ, default_dt(512, state.domain_length), 10_000)
    assert abs(hamiltonian(out, HJ) - h0) <= 1e-6 * max(1.0, abs(h0))
    assert mass(out) == pytest.approx(mass(state), abs=1e-10)


def test_fourth_order_in_time(hj_profile):
    state = _state(hj_profile, perturbation_kind="bump", amplitude=0.05)
    T = 2.0
    ref = evolve(state, HJ, T / 1600, 1600).v
    errs = [np.max(np.abs(evolve(state, HJ, T / n, n).v - ref)) for n in (50, 100)]
    assert 12.0 <= errs[0] / errs[1] <= 20.0


def test_single_step_matches_evolve(hj_profile):
    state = _state(hj_profile)
    stepper = Stepper(HJ, 512, state.domain_length, 0.05)
    once = step(state, 0.05, HJ, stepper)
    assert np.array_equal(once.v, evolve(state, HJ, 0.05, 1).v)
    assert once.t == pytest.approx(0.05)


def test_unperturbed_wave_travels_at_its_speed():
    trace = run(HJ, HJ_WAVE, SimConfig(grid_n=256, t_final=20.0, record_every=2.0))
    speed = np.polyfit(trace.times, trace.shift, 1)[0]
    assert abs(abs(speed) - HJ_WAVE.c) <= 0.01 * HJ_WAVE.c
    assert np.max(trace.orbital_distance) < 1e-6
    assert np.ptp(trace.hamiltonian) <= 1e-6


def test_noise_is_seeded(hj_profile):
    s1 = _state(hj_profile, perturbation_kind="noise", amplitude=0.01, seed=3)
    s2 = _state(hj_profile, perturbation_kind="noise", amplitude=0.01, seed=3)
    s3 = _state(hj_profile, perturbation_kind="noise", amplitude=0.01, seed=4)
    assert np.array_equal(s1.v, s2.v) and not np.array_equal(s1.v, s3.v)


def test_rescale_perturbation_moves_off_orbit(hj_profile):
    state = _state(hj_profile, perturbation_kind="rescale", amplitude=0.01)
    assert orbital_distance(state, hj_profile) > 0


def test_invalid_inputs():
    with pytest.raises(DomainError):
        SimState(100, 10.0, 0.0, np.zeros(100), np.zeros(100))
    with pytest.raises(DomainError):
        SimConfig.from_dict({"grid_n": 64, "bogus": 1})
    with pytest.raises(DomainError):
        make_initial_data(sample_profile(HJ, HJ_WAVE, n=65), "wiggle", 0.1, grid_n=64)


@pytest.mark.filterwarnings("ignore:p'\\(v\\) > 0")
def test_blowup_is_recorded():
    config = SimConfig(grid_n=256, t_final=30.0, perturbation={"kind": "rescale", "amplitude": 0.01})
    trace = run(ModelParams(1.0, 1.0), WaveId("positive", 0.05), config)
    assert trace.blew_up and 0 < trace.blowup_time < 30
    assert any("blew up" in w or "non-finite" in w for w in trace.warnings)
    assert len(trace.times) == len(trace.orbital_distance) >= 1


def test_config_files(tmp_path):
    body = {"a": 1, "b": -1, "polarity": "positive", "c": 0.95, "grid_n": 128, "t_final": 2.0,
            "perturbation": {"kind": "bump", "amplitude": 0.01}}
    jpath = tmp_path / "run.json"
    jpath.write_text(json.dumps(body))
    tpath = tmp_path / "run.toml"
    tpath.write_text(
        'a = 1\nb = -1\npolarity = "positive"\nc = 0.95\ngrid_n = 128\nt_final = 2.0\n'
        '[perturbation]\nkind = "bump"\namplitude = 0.01\n'
    )
    assert load_config(jpath) == load_config(tpath)
    cfg = SimConfig.from_dict(load_config(tpath))
    assert cfg.grid_n == 128 and cfg.perturbation == {"kind": "bump", "amplitude": 0.01, "seed": 0}


def test_trace_round_trip_and_csv():
    trace = run(HJ, HJ_WAVE, SimConfig(grid_n=128, t_final=3.0))
    assert np.allclose(trace.times, [0, 1, 2, 3], atol=1e-12)
    back = OrbitTrace.from_dict(json.loads(trace.to_json()))
    assert np.array_equal(back.orbital_distance, trace.orbital_distance)
    lines = trace.to_csv().splitlines()
    assert lines[0] == "t,distance,hamiltonian,mass" and len(lines) == 5


def test_runs_are_deterministic():
    cfg = SimConfig(grid_n=128, t_final=2.0, perturbation={"kind": "noise", "amplitude": 0.01, "seed": 7})
    t1, t2 = run(HJ, HJ_WAVE, cfg), run(HJ, HJ_WAVE, cfg)
    assert np.array_equal(t1.orbital_distance, t2.orbital_distance)
    assert math.isfinite(t1.hamiltonian[-1])
