"""Moment of instability m(c) = int (V')^2 dx and three routes to m''(c).

1. ``moment_dd_integral``: quadrature of the differentiated moment integral.
2. ``moment_dd_fd``: Richardson-extrapolated central differences of ``moment``.
3. ``mu_closed_form``: the algebraic index mu(k, c), k = b/a^2.

For a > 0, m''(c) = mu(k, c) / a^2, so the routes agree in value once the
positive factor 1/a^2 is accounted for.

Negative waves are reduced to positive waves of the mirrored problem
(a -> -a), which is the same as replacing F(v, c) by G(v, c) = F(-v, c).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .model import (
    ModelParams,
    NumericalError,
    ParameterError,
    Polarity,
    PreconditionError,
    SingularConfigurationError,
    WaveId,
    is_heimburg_jackson,
    potential_F,
    potential_Fc,
    potential_Fv,
    reduced_coefficients,
    require_wave,
    slow_speed_bound,
    upper_root,
    lower_root,
)

MOMENT_RTOL = 1e-13
MARGINAL_TOL = 1e-9

CASE_TAGS = {1: "pos_b_pos_wave", 2: "pos_b_neg_wave", 3: "neg_b_pos_wave"}


class ConfigurationError(PreconditionError):
    """Closed-form sub-expression evaluated outside its domain (wrong case dispatch)."""


@dataclass(frozen=True)
class _Reduced:
    a: float
    b: float
    c: float
    vbar: float
    vlow: float

    @property
    def s(self) -> float:
        return 1.0 - self.c * self.c

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.a, self.b)

    def S(self, v):
        return 0.5 * self.b * (v - self.vlow)


def _reduce(params: ModelParams, wave: WaveId) -> _Reduced:
    require_wave(params, wave)
    a, b = reduced_coefficients(params, wave)
    return _Reduced(a, b, wave.c, upper_root(a, b, wave.c), lower_root(a, b, wave.c))


def _quad(f, lo, hi, rtol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=400)
    if not math.isfinite(val) or err > max(1e-8 * abs(val), 1e-14):
        raise NumericalError(
            f"quadrature failed to converge on [{lo}, {hi}]: value={val!r}, error estimate={err!r}"
        )
    return val


# -- m(c) ---------------------------------------------------------------------

def moment(params: ModelParams, wave: WaveId, rtol: float = MOMENT_RTOL) -> float:
    """m(c) = 4 int_0^sqrt(vbar) sqrt(-2F(vbar - w^2, c)) w dw."""
    r = _reduce(params, wave)
    p = r.params

    def integrand(w):
        return math.sqrt(max(-2.0 * potential_F(p, r.vbar - w * w, r.c), 0.0)) * w

    return 4.0 * _quad(integrand, 0.0, math.sqrt(r.vbar), rtol)


def moment_closed_form(params: ModelParams, wave: WaveId) -> float:
    """Elementary antiderivative of 2 int_0^vbar v sqrt(s - 2a v/3 - b v^2/2) dv, b > 0.

    Completing the square, the radicand is (b/2)(rho^2 - u^2) with u = v + u0,
    u0 = 2a/(3b), and rho^2 = u0^2 + 2s/b.
    """
    r = _reduce(params, wave)
    if r.b <= 0:
        raise ParameterError("closed-form moment is implemented for b > 0 only")
    gam = 0.5 * r.b
    s = r.s
    u0 = 2.0 * r.a / (3.0 * r.b)
    rho2 = u0 * u0 + s / gam
    rho = math.sqrt(rho2)
    q = math.sqrt(s / gam)
    return 2.0 * math.sqrt(gam) * (
        0.5 * u0 * rho2 * (math.asin(u0 / rho) - 0.5 * math.pi) + q**3 / 3.0 + 0.5 * u0 * u0 * q
    )


# -- m''(c) by quadrature ---------------------------------------------------

def vbar_prime(params: ModelParams, wave: WaveId) -> float:
    """d(amplitude magnitude)/dc = -F_c(vbar, c) / F_v(vbar, c) for the reduced problem."""
    r = _reduce(params, wave)
    return _vbar_prime(r)


def _vbar_prime(r: _Reduced) -> float:
    # F_v(vbar) = vbar^2 S(vbar) / 2 by the factorisation -2F = v^2 (vbar - v) S(v)
    fv = 0.5 * r.vbar**2 * r.S(r.vbar)
    if not fv > 0:
        raise SingularConfigurationError(
            f"F_v(vbar, c) = {fv!r} vanishes: degenerate slow endpoint at c={r.c}"
        )
    return -potential_Fc(r.params, r.vbar, r.c) / fv


def m_dd_integrand(params: ModelParams, wave: WaveId, v):
    """The integrand of m''(c) = 2 int_0^vbar (...) dv exactly as displayed, in F, F_v, F_c."""
    r = _reduce(params, wave)
    p, c = r.params, r.c
    vp = _vbar_prime(r)
    v = np.asarray(v, dtype=float)
    F = potential_F(p, v, c)
    num = v * (2.0 * F * (v + 2.0 * c * vp) - c * v * (potential_Fv(p, v, c) * vp + potential_Fc(p, v, c)))
    return num / (-2.0 * F) ** 1.5


def q_polynomial(r: _Reduced, vp: float) -> np.ndarray:
    """Coefficients (highest first) of Q(v) = b v^3/2 + 2a v^2/3 - v + c vbar' (c^2 - 1 + a v/3)."""
    a, b, c = r.a, r.b, r.c
    return np.array([0.5 * b, 2.0 * a / 3.0, a * c * vp / 3.0 - 1.0, c * vp * (c * c - 1.0)])


def _deflate(coeffs: np.ndarray, root: float) -> tuple[np.ndarray, float]:
    # synthetic division by (v - root)
    out = [coeffs[0]]
    for co in coeffs[1:]:
        out.append(co + root * out[-1])
    return np.array(out[:-1]), out[-1]


def moment_dd_integral(params: ModelParams, wave: WaveId, rtol: float = 1e-12) -> float:
    """m''(c) from the differentiated moment integral.

    The integrand reduces to Q(v) / R(v)^{3/2} with R = -2F/v^2.  Since
    Q(vbar) = 0 and R = (vbar - v) S(v), the w-substitution v = vbar - w^2 gives

        m'' = 4 int_0^sqrt(vbar) Q1(v) / S(v)^{3/2} dw,   Q = (vbar - v) Q1,

    which is bounded on the closed interval.
    """
    r = _reduce(params, wave)
    vp = _vbar_prime(r)
    quotient, _ = _deflate(q_polynomial(r, vp), r.vbar)
    q1 = -quotient

    def integrand(w):
        v = r.vbar - w * w
        return np.polyval(q1, v) / r.S(v) ** 1.5

    return 4.0 * _quad(integrand, 0.0, math.sqrt(r.vbar), rtol)


def reduced_integrand(params: ModelParams, wave: WaveId, w):
    """Integrand of ``moment_dd_integral`` in the variable w (for boundedness checks)."""
    r = _reduce(params, wave)
    quotient, _ = _deflate(q_polynomial(r, _vbar_prime(r)), r.vbar)
    v = r.vbar - np.asarray(w, dtype=float) ** 2
    return -np.polyval(quotient, v) / r.S(v) ** 1.5


# -- m''(c) by finite differences ---------------------------------------------

def fd_step(params: ModelParams, wave: WaveId, h0: float = 1e-3) -> float:
    c = abs(wave.c)
    h = min(h0, (1.0 - c) / 4.0)
    c_min = math.sqrt(slow_speed_bound(params)) if params.b < 0 else 0.0
    if c_min > 0:
        h = min(h, (c - c_min) / 4.0)
    if not h > 1e-7:
        raise NumericalError(f"finite-difference step {h!r} too small near an endpoint at c={wave.c}")
    return h


def moment_dd_fd(params: ModelParams, wave: WaveId, h: float | None = None) -> float:
    """Five-point central second difference of m(c), Richardson-extrapolated in h."""
    if h is None:
        h = fd_step(params, wave)
    c = wave.c
    cache: dict[float, float] = {}

    def m_at(x: float) -> float:
        key = round(x, 15)
        if key not in cache:
            cache[key] = moment(params, WaveId(wave.polarity, x))
        return cache[key]

    def d2(step: float) -> float:
        return (
            -m_at(c + 2 * step) + 16 * m_at(c + step) - 30 * m_at(c)
            + 16 * m_at(c - step) - m_at(c - 2 * step)
        ) / (12.0 * step * step)

    coarse, fine = d2(h), d2(0.5 * h)
    return (16.0 * fine - coarse) / 15.0


# -- closed-form index mu(k, c) ------------------------------------------------

def canonical_case(params: ModelParams, polarity: Polarity | str) -> tuple[ModelParams, Polarity, int]:
    """Mirror to a > 0 and return (params, polarity, case number 1-3)."""
    polarity = Polarity.parse(polarity)
    if params.a == 0:
        raise ParameterError("a=0 unsupported: k = b/a^2 undefined")
    params.require_cubic()
    if params.a < 0:
        params, polarity = params.mirrored(), polarity.flipped()
    if params.b > 0:
        case = 1 if polarity is Polarity.POSITIVE else 2
    elif polarity is Polarity.POSITIVE:
        case = 3
    else:
        raise ConfigurationError("no negative waves for a > 0, b < 0")
    return params, polarity, case


def h_term(k, c):
    s = 1.0 - c * c
    return 4.0 * (18.0 * k * c * c - 2.0 - 9.0 * k) * np.sqrt(s) / (k * (2.0 + 9.0 * k * s))


def g_term(k, c):
    return np.arcsin(2.0 / 3.0 / np.sqrt(4.0 / 9.0 + 2.0 * k * (1.0 - c * c)))


def g_tilde_term(k, c):
    s = 1.0 - c * c
    return -np.log(-np.sqrt(4.0 / 9.0 + 2.0 * k * s) / (-2.0 / 3.0 + np.sqrt(-2.0 * k * s)))


def mu_kc(k, c, case: int):
    """Vectorised mu(k, c) for case 1, 2 or 3, without domain checks."""
    k = np.asarray(k, dtype=float)
    c = np.asarray(c, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        if case == 1:
            return h_term(k, c) - 4.0 / (3.0 * k) * np.sqrt(2.0 / k) * (g_term(k, c) - 0.5 * np.pi)
        if case == 2:
            return h_term(k, c) - 4.0 / (3.0 * k) * np.sqrt(2.0 / k) * (g_term(k, c) + 0.5 * np.pi)
        if case == 3:
            return h_term(k, c) - 4.0 / (3.0 * k) * np.sqrt(-2.0 / k) * g_tilde_term(k, c)
    raise ValueError(f"unknown case {case}")


def mu_closed_form(params: ModelParams, wave: WaveId) -> float:
    require_wave(params, wave)
    canon, _, case = canonical_case(params, wave.polarity)
    k, c = canon.k, wave.c
    s = 1.0 - c * c
    radicand = 4.0 / 9.0 + 2.0 * k * s
    if case in (1, 2):
        if not radicand > 0:
            raise ConfigurationError(f"g: sqrt(4/9 + 2k(1-c^2)) has radicand {radicand!r} <= 0")
        arg = 2.0 / 3.0 / math.sqrt(radicand)
        if not -1.0 <= arg <= 1.0:
            raise ConfigurationError(f"g: arcsin argument {arg!r} outside [-1, 1]")
    else:
        if not -2.0 * k * s > 0:
            raise ConfigurationError(f"g~: -2k(1-c^2) = {-2.0 * k * s!r} must be positive")
        if radicand < 0:
            raise ConfigurationError(f"g~: sqrt(4/9 + 2k(1-c^2)) has radicand {radicand!r} < 0")
        den = -2.0 / 3.0 + math.sqrt(-2.0 * k * s)
        if den == 0:
            raise ConfigurationError("g~: logarithm denominator -2/3 + sqrt(-2k(1-c^2)) vanishes")
        log_arg = -math.sqrt(radicand) / den
        if not log_arg > 0:
            raise ConfigurationError(f"g~: logarithm argument {log_arg!r} is not positive")
    value = float(mu_kc(k, c, case))
    if not math.isfinite(value):
        raise NumericalError(f"mu evaluated to {value!r} at k={k}, c={c}")
    return value


# -- certificate for the Heimburg-Jackson regime ---------------------------------

@dataclass(frozen=True)
class QCertificate:
    q_at_vbar: float
    q_prime_max: float
    bound: float

    def to_dict(self) -> dict:
        return {"q_at_vbar": self.q_at_vbar, "q_prime_max": self.q_prime_max, "bound": self.bound}


def q_certificate(params: ModelParams, c: float, n_samples: int = 4001) -> QCertificate:
    """Q(vbar) and the sampled maximum of Q' for a Heimburg-Jackson pulse.

    Q' is a downward parabola, so the sample is centred on its vertex.
    """
    if not is_heimburg_jackson(params):
        raise PreconditionError(f"b={params.b} > -a^2/3: not in the Heimburg-Jackson regime")
    if not params.a > 0:
        raise PreconditionError("certificate requires a > 0")
    r = _reduce(params, WaveId(Polarity.POSITIVE, c))
    coeffs = q_polynomial(r, _vbar_prime(r))
    dcoeffs = np.polyder(coeffs)
    vertex = -dcoeffs[1] / (2.0 * dcoeffs[0])
    span = 4.0 * max(abs(vertex), r.vbar, 1.0)
    vs = np.concatenate([np.linspace(vertex - span, vertex + span, n_samples), [vertex]])
    return QCertificate(
        q_at_vbar=float(np.polyval(coeffs, r.vbar)),
        q_prime_max=float(np.max(np.polyval(dcoeffs, vs))),
        bound=-(1.0 + 8.0 / 27.0 * params.a**2 / params.b),
    )


def q_values(params: ModelParams, c: float, v) -> np.ndarray:
    r = _reduce(params, WaveId(Polarity.POSITIVE, c))
    return np.polyval(q_polynomial(r, _vbar_prime(r)), np.asarray(v, dtype=float))


# -- combined evaluation ---------------------------------------------------------

@dataclass(frozen=True)
class MomentEval:
    params: ModelParams
    wave: WaveId
    m: float
    m_dd_integral: float
    m_dd_fd: float
    mu_closed: float | None
    case_tag: str

    @property
    def c(self) -> float:
        return self.wave.c

    def signs_agree(self, tol: float = MARGINAL_TOL) -> bool:
        vals = [self.m_dd_integral, self.m_dd_fd]
        if self.mu_closed is not None:
            vals.append(self.mu_closed)
        if any(abs(x) <= tol for x in vals):
            return True
        return len({x > 0 for x in vals}) == 1

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "wave": self.wave.to_dict(),
            "m": self.m,
            "m_dd_integral": self.m_dd_integral,
            "m_dd_fd": self.m_dd_fd,
            "mu_closed": self.mu_closed,
            "case_tag": self.case_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MomentEval":
        return cls(
            ModelParams.from_dict(d["params"]),
            WaveId.from_dict(d["wave"]),
            float(d["m"]),
            float(d["m_dd_integral"]),
            float(d["m_dd_fd"]),
            None if d.get("mu_closed") is None else float(d["mu_closed"]),
            str(d["case_tag"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def case_tag(params: ModelParams, polarity: Polarity | str) -> str:
    polarity = Polarity.parse(polarity)
    if params.a == 0:
        return "pos_b_pos_wave" if polarity is Polarity.POSITIVE else "pos_b_neg_wave"
    _, _, case = canonical_case(params, polarity)
    return CASE_TAGS[case]


def evaluate_moment(params: ModelParams, wave: WaveId) -> MomentEval:
    mu = mu_closed_form(params, wave) if params.a != 0 else None
    return MomentEval(
        params,
        wave,
        moment(params, wave),
        moment_dd_integral(params, wave),
        moment_dd_fd(params, wave),
        mu,
        case_tag(params, wave.polarity),
    )
