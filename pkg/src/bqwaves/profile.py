"""Solitary-wave profiles from the first integral  V'^2/2 + F(V, c) = 0.

The right half of the wave is described by its inverse x(V).  Two substitutions
keep every quadrature smooth:

* near the crest, t = sqrt(vbar - V) removes the square-root singularity;
* in the tail, sigma = log V turns the logarithmic divergence into a linear one.

Both rely on the factorisation  -2F(v) = v^2 (vbar - v) S(v)  with
S(v) = (b/2)(v - vlow), where vbar and vlow are the nonzero roots of F.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator

from .model import (
    DomainError,
    ModelParams,
    NumericalError,
    Polarity,
    SingularConfigurationError,
    WaveId,
    lower_root,
    potential_F,
    require_wave,
    reduced_coefficients,
    upper_root,
)

QUAD_RTOL = 1e-10
TAIL_THRESHOLD = 1e-8


def default_half_width(c: float) -> float:
    """Half-width at which the exp(-sqrt(1-c^2)|x|) tail has dropped below ~1e-10."""
    return 25.0 / math.sqrt(1.0 - c * c)


def _quad(f, lo, hi, rtol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
    if not math.isfinite(val) or err > max(1e-6 * abs(val), 1e-13):
        raise NumericalError(f"quadrature did not converge on [{lo}, {hi}]: value={val}, error={err}")
    return val


class HalfWave:
    """Inverse abscissa x(V) on the decaying right branch of a positive wave.

    Works with the reduced coefficients, so negative waves are handled by the
    caller through a sign flip.
    """

    def __init__(self, a: float, b: float, c: float, rtol: float = QUAD_RTOL, n_knots: int = 64):
        self.a, self.b, self.c = a, b, c
        self.s = 1.0 - c * c
        self.vbar = upper_root(a, b, c)
        self.vlow = lower_root(a, b, c)
        self.rtol = rtol
        if not self.S(self.vbar) > 0:
            raise SingularConfigurationError(
                f"degenerate wave: F_v(vbar, c) = 0 at a={a}, b={b}, c={c} (front, not a pulse)"
            )
        self.y_mid = 0.5 * self.vbar
        self.t_mid = math.sqrt(self.vbar - self.y_mid)
        self.sig_mid = math.log(self.y_mid)

        self.t_knots = np.linspace(0.0, self.t_mid, n_knots + 1)
        pieces = [self._upper_piece(t0, t1) for t0, t1 in zip(self.t_knots[:-1], self.t_knots[1:])]
        self.x_upper_knots = np.concatenate([[0.0], np.cumsum(pieces)])
        self.x_mid = float(self.x_upper_knots[-1])
        self._upper_guess = PchipInterpolator(self.x_upper_knots, self.t_knots)
        self.sig_knots = np.array([self.sig_mid])
        self.x_lower_knots = np.array([self.x_mid])
        self._lower_guess = None

    # integrands -----------------------------------------------------------
    def S(self, y):
        return 0.5 * self.b * (y - self.vlow)

    def R(self, y):
        return self.s - 2.0 * self.a / 3.0 * y - 0.5 * self.b * y * y

    def _dx_dt(self, t):
        y = self.vbar - t * t
        return 2.0 / (y * math.sqrt(self.S(y)))

    def _dx_dsig(self, sig):
        return 1.0 / math.sqrt(self.R(math.exp(sig)))

    def _upper_piece(self, t0, t1):
        return _quad(self._dx_dt, t0, t1, self.rtol)

    def _lower_piece(self, s0, s1):
        return _quad(self._dx_dsig, s0, s1, self.rtol)

    # forward map ---------------------------------------------------------
    def x_of_t(self, t: float) -> float:
        j = min(int(np.searchsorted(self.t_knots, t, side="right")) - 1, len(self.t_knots) - 2)
        j = max(j, 0)
        return float(self.x_upper_knots[j]) + self._upper_piece(self.t_knots[j], t)

    def x_of_sigma(self, sig: float) -> float:
        # sig_knots is decreasing, x_lower_knots increasing
        self.extend_tail(sig)
        j = int(np.searchsorted(-self.sig_knots, -sig, side="right")) - 1
        j = min(max(j, 0), len(self.sig_knots) - 1)
        return float(self.x_lower_knots[j]) + self._lower_piece(sig, self.sig_knots[j])

    def abscissa(self, y: float) -> float:
        if y >= self.y_mid:
            return self.x_of_t(math.sqrt(self.vbar - y))
        return self.x_of_sigma(math.log(y))

    def extend_tail(self, sig_min: float, step: float | None = None) -> None:
        if sig_min >= self.sig_knots[-1]:
            return
        step = step or 0.5
        sigs = list(self.sig_knots)
        xs = list(self.x_lower_knots)
        while sigs[-1] > sig_min:
            s0 = sigs[-1] - step
            xs.append(xs[-1] + self._lower_piece(s0, sigs[-1]))
            sigs.append(s0)
        self.sig_knots = np.array(sigs)
        self.x_lower_knots = np.array(xs)
        self._lower_guess = PchipInterpolator(self.x_lower_knots, self.sig_knots, extrapolate=True)

    def extend_to_x(self, x_max: float) -> None:
        while self.x_lower_knots[-1] < x_max:
            span = (x_max - self.x_lower_knots[-1]) * math.sqrt(self.s) * 1.1 + 1.0
            self.extend_tail(self.sig_knots[-1] - span)

    # inverse map ---------------------------------------------------------
    def value_at(self, x: float) -> tuple[float, float]:
        """(V, V') at x >= 0."""
        if x == 0.0:
            return self.vbar, 0.0
        if x <= self.x_mid:
            t = self._invert(x, float(self._upper_guess(x)), self.x_of_t, self._dx_dt, 0.0, self.t_mid)
            y = self.vbar - t * t
            dy = -y * t * math.sqrt(self.S(y))
            return y, dy
        self.extend_to_x(x)
        sig = self._invert(
            x, float(self._lower_guess(x)), self.x_of_sigma, lambda s: -self._dx_dsig(s),
            self.sig_knots[-1] - 1.0, self.sig_mid,
        )
        y = math.exp(sig)
        return y, -y * math.sqrt(self.R(y))

    @staticmethod
    def _invert(x, guess, fwd, deriv, lo, hi, maxiter=30):
        z = min(max(guess, lo), hi)
        for _ in range(maxiter):
            r = fwd(z) - x
            if abs(r) <= 4e-15 * max(1.0, abs(x)):
                return z
            z_new = min(max(z - r / deriv(z), lo), hi)
            if abs(z_new - z) <= 1e-15 * max(1.0, abs(z)):
                return z_new
            z = z_new
        raise NumericalError(f"profile inversion did not converge at x={x}")


def _half_wave(params: ModelParams, wave: WaveId, rtol: float = QUAD_RTOL) -> HalfWave:
    verdict = require_wave(params, wave)
    a, b = reduced_coefficients(params, wave)
    if verdict.degenerate:
        raise SingularConfigurationError(
            f"c^2 = {wave.c**2} sits on the slow end of the existence interval; the orbit is a front"
        )
    return HalfWave(a, b, wave.c, rtol)


def profile_abscissa(params: ModelParams, wave: WaveId, v: float, rtol: float = QUAD_RTOL) -> float:
    """x > 0 with |V(x)| = v on the decaying right branch."""
    hw = _half_wave(params, wave, rtol)
    if not 0.0 < v < hw.vbar:
        raise DomainError(f"v={v} outside the open interval (0, {hw.vbar})")
    return hw.abscissa(v)


def profile_on_grid(params: ModelParams, wave: WaveId, xs, rtol: float = QUAD_RTOL):
    """Exact (to quadrature tolerance) V and V' at arbitrary abscissae."""
    hw = _half_wave(params, wave, rtol)
    xs = np.asarray(xs, dtype=float)
    hw.extend_to_x(float(np.max(np.abs(xs))) if xs.size else 0.0)
    vs = np.empty_like(xs)
    dvs = np.empty_like(xs)
    cache: dict[float, tuple[float, float]] = {}
    for i, x in enumerate(xs):
        ax = abs(float(x))
        if ax not in cache:
            cache[ax] = hw.value_at(ax)
        y, dy = cache[ax]
        vs[i] = y
        dvs[i] = dy if x >= 0 else -dy
    sign = wave.polarity.sign
    return sign * vs, sign * dvs


def symmetric_grid(half_width: float, n: int) -> np.ndarray:
    """n uniform points on [-half_width, half_width], exactly symmetric about 0."""
    dx = 2.0 * half_width / (n - 1)
    if n % 2:
        pos = dx * np.arange(n // 2 + 1)
        return np.concatenate([-pos[:0:-1], pos])
    pos = dx * (np.arange(n // 2) + 0.5)
    return np.concatenate([-pos[::-1], pos])


@dataclass(frozen=True)
class WaveProfile:
    params: ModelParams
    wave: WaveId
    xs: np.ndarray
    vs: np.ndarray
    dvs: np.ndarray
    amplitude: float
    decay_tail: float
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def c(self) -> float:
        return self.wave.c

    @property
    def polarity(self) -> Polarity:
        return self.wave.polarity

    @property
    def half_width(self) -> float:
        return float(self.xs[-1])

    def first_integral(self) -> np.ndarray:
        return 0.5 * self.dvs**2 + potential_F(self.params, self.vs, self.c)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "wave": self.wave.to_dict(),
            "amplitude": self.amplitude,
            "decay_tail": self.decay_tail,
            "warnings": list(self.warnings),
            "xs": self.xs.tolist(),
            "vs": self.vs.tolist(),
            "dvs": self.dvs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaveProfile":
        return cls(
            ModelParams.from_dict(d["params"]),
            WaveId.from_dict(d["wave"]),
            np.asarray(d["xs"], dtype=float),
            np.asarray(d["vs"], dtype=float),
            np.asarray(d["dvs"], dtype=float),
            float(d["amplitude"]),
            float(d["decay_tail"]),
            tuple(d.get("warnings", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "V", "dV"])
        for x, v, dv in zip(self.xs, self.vs, self.dvs):
            w.writerow([f"{x:.17g}", f"{v:.17g}", f"{dv:.17g}"])
        return buf.getvalue()


def sample_profile(
    params: ModelParams,
    wave: WaveId,
    half_width: float | None = None,
    n: int = 1025,
    *,
    rtol: float = QUAD_RTOL,
    tail_threshold: float = TAIL_THRESHOLD,
) -> WaveProfile:
    if n < 16:
        raise DomainError(f"grid size n={n} must be at least 16")
    if half_width is None:
        half_width = default_half_width(wave.c)
    if not half_width > 0:
        raise DomainError(f"half_width={half_width} must be positive")
    xs = symmetric_grid(half_width, n)
    vs, dvs = profile_on_grid(params, wave, xs, rtol)
    amplitude = require_wave(params, wave).amplitude
    tail = float(max(abs(vs[0]), abs(vs[-1])))
    notes = []
    if tail > tail_threshold:
        msg = f"domain too small: |V| = {tail:.3g} at the grid ends (threshold {tail_threshold:.3g})"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    return WaveProfile(params, wave, xs, vs, dvs, float(amplitude), tail, tuple(notes))
