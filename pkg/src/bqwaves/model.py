"""Parameters, potential and existence theory for the extended Boussinesq equation.

    v_tt + (p(v))_xx + v_xxxx = 0,    p(v) = -v + a v**2 + b v**3

Everything here is algebraic. Tolerances belong to the numerical modules.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class BQError(Exception):
    """Base class for all errors raised by the package."""


class PreconditionError(BQError, ValueError):
    """Inputs violate a documented precondition (CLI exit code 1)."""


class ParameterError(PreconditionError):
    pass


class SpeedOutOfRangeError(PreconditionError):
    pass


class ExistenceError(PreconditionError):
    pass


class DomainError(PreconditionError):
    pass


class SingularConfigurationError(PreconditionError):
    pass


class NumericalError(BQError, ArithmeticError):
    """A numerical procedure failed to deliver its accuracy (CLI exit code 2)."""


class Polarity(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def sign(self) -> int:
        return 1 if self is Polarity.POSITIVE else -1

    def flipped(self) -> "Polarity":
        return Polarity.NEGATIVE if self is Polarity.POSITIVE else Polarity.POSITIVE

    @classmethod
    def parse(cls, value: "Polarity | str") -> "Polarity":
        if isinstance(value, Polarity):
            return value
        key = str(value).strip().lower()
        aliases = {"pos": "positive", "+": "positive", "neg": "negative", "-": "negative"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ParameterError(f"unknown polarity {value!r}") from None


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ParameterError(f"non-finite parameters a={self.a}, b={self.b}")

    @property
    def k(self) -> float:
        """Scale-invariant ratio b/a**2."""
        if self.a == 0:
            raise ParameterError("k = b/a^2 is undefined for a=0 unsupported")
        return self.b / self.a**2

    def mirrored(self) -> "ModelParams":
        # v -> -v maps p(v) to -p(-v), i.e. a -> -a
        return ModelParams(-self.a, self.b)

    def require_cubic(self) -> None:
        if self.b == 0:
            raise ParameterError("b=0 unsupported (pure quadratic nonlinearity)")

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(float(d["a"]), float(d["b"]))


@dataclass(frozen=True)
class WaveId:
    polarity: Polarity
    c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "polarity", Polarity.parse(self.polarity))
        if not math.isfinite(self.c):
            raise ParameterError(f"non-finite speed c={self.c}")

    def to_dict(self) -> dict:
        return {"polarity": self.polarity.value, "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "WaveId":
        return cls(Polarity.parse(d["polarity"]), float(d["c"]))


@dataclass(frozen=True)
class ExistenceVerdict:
    exists: bool
    speed_interval: tuple[float, float] | None
    amplitude: float | None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "exists": self.exists,
            "speed_interval": list(self.speed_interval) if self.speed_interval else None,
            "amplitude": self.amplitude,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExistenceVerdict":
        iv = d.get("speed_interval")
        return cls(
            bool(d["exists"]),
            (float(iv[0]), float(iv[1])) if iv else None,
            None if d.get("amplitude") is None else float(d["amplitude"]),
            bool(d.get("degenerate", False)),
        )


# -- potential and nonlinearity ---------------------------------------------

def potential_F(params: ModelParams, v, c):
    return 0.5 * (c * c - 1.0) * v * v + params.a / 3.0 * v**3 + params.b / 4.0 * v**4


def potential_Fv(params: ModelParams, v, c):
    return (c * c - 1.0) * v + params.a * v * v + params.b * v**3


def potential_Fc(params: ModelParams, v, c):
    return c * v * v


def nonlinearity_p(params: ModelParams, v):
    return -v + params.a * v * v + params.b * v**3


def p_prime(params: ModelParams, v):
    return -1.0 + 2.0 * params.a * v + 3.0 * params.b * v * v


def p_second(params: ModelParams, v):
    return 2.0 * params.a + 6.0 * params.b * v


def p_antiderivative(params: ModelParams, v):
    """P with P' = p and P(0) = 0."""
    return -0.5 * v * v + params.a / 3.0 * v**3 + params.b / 4.0 * v**4


# -- amplitudes ---------------------------------------------------------------

def _discriminant(a: float, b: float, c: float) -> float:
    return a * a / 9.0 + 0.5 * b * (1.0 - c * c)


def upper_root(a: float, b: float, c: float) -> float:
    """(2/b)(-a/3 + sqrt(a^2/9 + b(1-c^2)/2)), evaluated without cancellation.

    Returns nan when the square root is not real.
    """
    s = 1.0 - c * c
    disc = _discriminant(a, b, c)
    if disc < 0:
        return math.nan
    r = math.sqrt(disc)
    den = a / 3.0 + r
    if den > 0:
        return s / den
    return 2.0 / b * (-a / 3.0 + r)


def lower_root(a: float, b: float, c: float) -> float:
    """(2/b)(-a/3 - sqrt(...)); exactly the negated upper root of the mirrored problem."""
    return -upper_root(-a, b, c)


def amplitude_bar(params: ModelParams, c: float) -> float:
    return upper_root(params.a, params.b, c)


def amplitude_under(params: ModelParams, c: float) -> float:
    return lower_root(params.a, params.b, c)


# -- existence ----------------------------------------------------------------

def slow_speed_bound(params: ModelParams) -> float:
    """Lower end of the admissible c**2 interval."""
    if params.b > 0:
        return 0.0
    return max(0.0, 1.0 + 2.0 * params.a**2 / (9.0 * params.b))


def classify_existence(params: ModelParams, polarity: Polarity | str, c: float) -> ExistenceVerdict:
    params.require_cubic()
    polarity = Polarity.parse(polarity)
    c2 = c * c
    if not c2 < 1.0:
        raise SpeedOutOfRangeError(f"speed out of range: c^2={c2} must be < 1")
    a, b = params.a, params.b
    if b > 0:
        interval: tuple[float, float] | None = (0.0, 1.0)
    elif (a > 0 and polarity is Polarity.POSITIVE) or (a < 0 and polarity is Polarity.NEGATIVE):
        interval = (slow_speed_bound(params), 1.0)
    else:
        interval = None
    if interval is None or not (interval[0] <= c2 < interval[1]):
        return ExistenceVerdict(False, interval, None)
    if polarity is Polarity.POSITIVE:
        amp = amplitude_bar(params, c)
    else:
        amp = amplitude_under(params, c)
    # double root vbar = vlow: the orbit is a front, not a pulse
    degenerate = b < 0 and _discriminant(a, b, c) <= 0
    return ExistenceVerdict(True, interval, amp, degenerate)


def require_wave(params: ModelParams, wave: WaveId) -> ExistenceVerdict:
    verdict = classify_existence(params, wave.polarity, wave.c)
    if not verdict.exists:
        raise ExistenceError(
            f"no {wave.polarity.value} solitary wave for a={params.a}, b={params.b}, c={wave.c}"
        )
    return verdict


def reduced_coefficients(params: ModelParams, wave: WaveId) -> tuple[float, float]:
    """(a_eff, b) such that the wave is the positive wave of p with a -> a_eff.

    Negative waves of (a, b) are the negated positive waves of (-a, b).
    """
    return (params.a, params.b) if wave.polarity is Polarity.POSITIVE else (-params.a, params.b)


# -- Heimburg-Jackson regime and wellposedness ---------------------------------

def is_heimburg_jackson(params: ModelParams) -> bool:
    return params.b <= -params.a**2 / 3.0


def wellposed_at_constants(params: ModelParams) -> bool:
    """True iff p'(v0) <= 0 for every constant state v0.

    p'(v) = 3b v^2 + 2a v - 1 is nonpositive on the whole line iff its leading
    coefficient is negative and its discriminant is not positive (or p' is the
    constant -1).
    """
    lead, lin = 3.0 * params.b, 2.0 * params.a
    if lead > 0:
        return False
    if lead == 0:
        return lin == 0
    # lin^2 + 4 lead <= 0 solved for b; lin^2/4 = a^2 exactly, so this rounds
    # like the b <= -a^2/3 test and the two agree on float boundary values
    return params.b <= -(lin * lin / 4.0) / 3.0
