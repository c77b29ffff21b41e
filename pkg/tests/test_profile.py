import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from bqwaves.model import (
    DomainError,
    ExistenceError,
    ModelParams,
    Polarity,
    SingularConfigurationError,
    WaveId,
    amplitude_bar,
    potential_Fv,
)
from bqwaves.profile import (
    WaveProfile,
    profile_abscissa,
    profile_on_grid,
    sample_profile,
    symmetric_grid,
)

P = ModelParams(0.25, 1.0)
W = WaveId(Polarity.POSITIVE, 2.0 / 3.0)


def _ode_oracle(params, c, xs):
    """Shoot V'' = -F_v(V) from the crest; independent of the quadrature inversion."""
    vbar = amplitude_bar(params, c)
    sol = solve_ivp(
        lambda x, y: [y[1], -potential_Fv(params, y[0], c)],
        (0.0, float(xs[-1])), [vbar, 0.0], t_eval=xs, rtol=1e-12, atol=1e-14, method="DOP853",
    )
    return sol.y[0]


def test_profile_matches_shooting_oracle():
    xs = np.array([0.25, 0.5, 1.0, 2.0, 3.0])
    vs, _ = profile_on_grid(P, W, xs)
    assert np.max(np.abs(vs - _ode_oracle(P, W.c, xs))) < 1e-9


def test_abscissa_frozen_value():
    # mpmath oracle (30 digits) for x(vbar/2), a=1/4, b=1, c=2/3
    x = profile_abscissa(P, W, 0.5 * amplitude_bar(P, W.c))
    assert x == pytest.approx(1.88200791363858566, rel=1e-10)


def test_crest_and_evenness():
    prof = sample_profile(P, W, 30.0, 401)
    mid = len(prof.xs) // 2
    assert prof.xs[mid] == 0.0
    assert prof.vs[mid] == pytest.approx(amplitude_bar(P, W.c), abs=1e-14)
    assert np.array_equal(prof.vs, prof.vs[::-1])
    assert np.array_equal(prof.dvs, -prof.dvs[::-1])


def test_monotone_decay_on_right_half():
    prof = sample_profile(P, W, 30.0, 401)
    right = prof.vs[len(prof.vs) // 2 :]
    assert np.all(np.diff(right) < 0)
    assert np.all(right > 0)


def test_first_integral_residual():
    prof = sample_profile(ModelParams(1.0, -1.0), WaveId("positive", 0.95), n=801)
    assert np.max(np.abs(prof.first_integral())) < 1e-8


def test_finite_difference_residual_second_order():
    params, wave = ModelParams(1.0, 1.0), WaveId("positive", 0.5)

    def residual(n):
        prof = sample_profile(params, wave, 24.0, n)
        dx = prof.xs[1] - prof.xs[0]
        v = prof.vs
        vxx = (v[2:] - 2 * v[1:-1] + v[:-2]) / dx**2
        return np.max(np.abs(vxx + potential_Fv(params, v[1:-1], wave.c)))

    ratio = residual(201) / residual(401)
    assert 3.5 < ratio < 4.5


def test_negative_wave_is_mirror_of_positive_wave():
    params = ModelParams(0.7, 2.0)
    xs = np.linspace(-5, 5, 41)
    neg, dneg = profile_on_grid(params, WaveId("negative", 0.4), xs)
    pos, dpos = profile_on_grid(params.mirrored(), WaveId("positive", 0.4), xs)
    assert np.array_equal(neg, -pos)
    assert np.array_equal(dneg, -dpos)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(0.1, 3.0),
    b=st.floats(-3.0, 3.0).filter(lambda x: abs(x) > 0.05),
    frac=st.floats(0.05, 0.95),
)
def test_peak_equals_amplitude(a, b, frac):
    params = ModelParams(a, b)
    c_lo = math.sqrt(max(0.0, 1.0 + 2 * a * a / (9 * b))) if b < 0 else 0.0
    c = c_lo + frac * (1.0 - c_lo)
    prof = sample_profile(params, WaveId("positive", c), n=129)
    assert np.max(np.abs(prof.vs)) == pytest.approx(amplitude_bar(params, c), abs=1e-10)
    assert np.max(np.abs(prof.first_integral())) < 1e-8


def test_abscissa_domain_errors():
    vbar = amplitude_bar(P, W.c)
    for v in (0.0, vbar, 1.5 * vbar, -0.1):
        with pytest.raises(DomainError):
            profile_abscissa(P, W, v)


def test_nonexistent_and_degenerate_waves_rejected():
    with pytest.raises(ExistenceError):
        sample_profile(ModelParams(1.0, -1.0), WaveId("positive", 0.5))
    # slow endpoints with c^2 exactly representable
    for a, b, c in [(1.5, -2.0 / 3.0, 0.5), (3.0, -2.0, 0.0)]:
        with pytest.raises(SingularConfigurationError):
            sample_profile(ModelParams(a, b), WaveId("positive", c))


def test_small_domain_warns():
    with pytest.warns(RuntimeWarning, match="domain too small"):
        prof = sample_profile(P, W, 3.0, 65)
    assert prof.warnings and prof.decay_tail > 1e-8


def test_symmetric_grid_exact():
    for n in (16, 17, 1025):
        xs = symmetric_grid(7.3, n)
        assert len(xs) == n
        assert np.array_equal(xs, -xs[::-1])
        assert xs[-1] == pytest.approx(7.3, rel=1e-15)


def test_serialisation_round_trips(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        prof = sample_profile(P, W, n=65)
    back = WaveProfile.from_dict(json.loads(prof.to_json()))
    assert np.array_equal(back.vs, prof.vs) and np.array_equal(back.xs, prof.xs)
    assert back.wave == prof.wave and back.params == prof.params
    rows = np.loadtxt(prof.to_csv().splitlines(), delimiter=",", skiprows=1)
    assert np.array_equal(rows[:, 1], prof.vs)
    assert prof.to_csv().splitlines()[0] == "x,V,dV"
