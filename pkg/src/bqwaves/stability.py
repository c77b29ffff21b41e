"""Stability verdicts, threshold speeds and (k, c) sign maps."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect

from .model import (
    ModelParams,
    Polarity,
    PreconditionError,
    WaveId,
    classify_existence,
    slow_speed_bound,
)
from .moment import (
    MARGINAL_TOL,
    canonical_case,
    moment_dd_fd,
    moment_dd_integral,
    mu_closed_form,
    mu_kc,
)


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"
    NO_WAVE = "NoWave"


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    INTEGRAL = "integral"
    FINITE_DIFFERENCE = "finite_difference"

    @classmethod
    def parse(cls, value: "Method | str") -> "Method":
        if isinstance(value, Method):
            return value
        aliases = {"closed": "closed_form", "fd": "finite_difference"}
        try:
            return cls(aliases.get(value, value))
        except ValueError:
            raise PreconditionError(f"unknown method {value!r}") from None


_EVALUATORS = {
    Method.CLOSED_FORM: mu_closed_form,
    Method.INTEGRAL: moment_dd_integral,
    Method.FINITE_DIFFERENCE: moment_dd_fd,
}


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: Verdict
    mu: float | None
    method: Method
    wave: WaveId
    params: ModelParams

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "mu": self.mu,
            "method": self.method.value,
            "wave": self.wave.to_dict(),
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityVerdict":
        return cls(
            Verdict(d["verdict"]),
            None if d.get("mu") is None else float(d["mu"]),
            Method(d["method"]),
            WaveId.from_dict(d["wave"]),
            ModelParams.from_dict(d["params"]),
        )


def verdict_from_value(mu: float, tol: float = MARGINAL_TOL) -> Verdict:
    if mu > tol:
        return Verdict.STABLE
    if mu < -tol:
        return Verdict.UNSTABLE
    return Verdict.MARGINAL


def classify(
    params: ModelParams,
    wave: WaveId,
    method: Method | str = Method.CLOSED_FORM,
    tol: float = MARGINAL_TOL,
) -> StabilityVerdict:
    method = Method.parse(method)
    if not classify_existence(params, wave.polarity, wave.c).exists:
        return StabilityVerdict(Verdict.NO_WAVE, None, method, wave, params)
    mu = _EVALUATORS[method](params, wave)
    return StabilityVerdict(verdict_from_value(mu, tol), mu, method, wave, params)


# -- threshold speeds ---------------------------------------------------------------

class Threshold(NamedTuple):
    c_root: float
    direction: str  # "-to+" or "+to-", as c increases


def _direction(mu_left: float) -> str:
    return "-to+" if mu_left < 0 else "+to-"


def _bracket_roots(f, cs: np.ndarray, values: np.ndarray, xtol: float) -> list[Threshold]:
    out = []
    for i in range(len(cs) - 1):
        lo, hi = values[i], values[i + 1]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            continue
        if lo == 0.0:
            out.append(Threshold(float(cs[i]), _direction(values[i - 1] if i else hi * -1)))
            continue
        if lo * hi < 0:
            root = bisect(f, cs[i], cs[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
            out.append(Threshold(float(root), _direction(lo)))
    return out


def speed_window(params: ModelParams, margin: float = 1e-6) -> tuple[float, float]:
    """Open window of nonnegative speeds inside the existence interval."""
    c_lo = math.sqrt(slow_speed_bound(params))
    return (c_lo + margin if c_lo > 0 else 0.0), 1.0 - margin


def find_thresholds(
    params: ModelParams,
    polarity: Polarity | str,
    n_scan: int = 400,
    xtol: float = 1e-12,
) -> list[Threshold]:
    """All sign changes of mu in c >= 0, refined by bisection."""
    polarity = Polarity.parse(polarity)
    canon, _, case = canonical_case(params, polarity)
    k = canon.k
    c_lo, c_hi = speed_window(params)
    cs = np.linspace(c_lo, c_hi, n_scan)
    values = mu_kc(k, cs, case)

    def f(c):
        return float(mu_kc(k, c, case))

    return _bracket_roots(f, cs, values, xtol)


# -- (k, c) sign map ------------------------------------------------------------------

SIGN_NONE = "none"


class ContourPoint(NamedTuple):
    k: float
    c_root: float
    direction: str


@dataclass(frozen=True)
class RegionScan:
    polarity: Polarity
    k_grid: np.ndarray
    c_grid: np.ndarray
    sign_matrix: np.ndarray  # [i_c, j_k] in {"+", "-", "0", "none"}
    mu_matrix: np.ndarray  # nan where no wave exists
    contour: list[ContourPoint]

    def column(self, j: int) -> np.ndarray:
        return self.sign_matrix[:, j]

    def matrix_rows(self):
        for j, k in enumerate(self.k_grid):
            for i, c in enumerate(self.c_grid):
                yield float(k), float(c), str(self.sign_matrix[i, j]), float(self.mu_matrix[i, j])

    def to_matrix_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "c", "sign", "mu"])
        for k, c, sg, mu in self.matrix_rows():
            w.writerow([f"{k:.17g}", f"{c:.17g}", sg, "" if math.isnan(mu) else f"{mu:.17g}"])
        return buf.getvalue()

    def to_contour_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "c_root", "direction"])
        for p in self.contour:
            w.writerow([f"{p.k:.17g}", f"{p.c_root:.17g}", p.direction])
        return buf.getvalue()

    def to_dict(self) -> dict:
        mu = [[None if math.isnan(x) else float(x) for x in row] for row in self.mu_matrix]
        return {
            "polarity": self.polarity.value,
            "k_grid": self.k_grid.tolist(),
            "c_grid": self.c_grid.tolist(),
            "sign_matrix": self.sign_matrix.tolist(),
            "mu_matrix": mu,
            "contour": [p._asdict() for p in self.contour],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionScan":
        mu = np.array([[math.nan if x is None else x for x in row] for row in d["mu_matrix"]], dtype=float)
        return cls(
            Polarity.parse(d["polarity"]),
            np.asarray(d["k_grid"], dtype=float),
            np.asarray(d["c_grid"], dtype=float),
            np.asarray(d["sign_matrix"], dtype=object),
            mu,
            [ContourPoint(float(p["k"]), float(p["c_root"]), str(p["direction"])) for p in d["contour"]],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def num_threads() -> int:
    env = os.environ.get("BQ_NUM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise PreconditionError(f"BQ_NUM_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def _scan_column(polarity: Polarity, k: float, cs: np.ndarray, tol: float, xtol: float):
    n = len(cs)
    signs = np.full(n, SIGN_NONE, dtype=object)
    mus = np.full(n, math.nan)
    if k == 0:
        return signs, mus, []
    params = ModelParams(1.0, float(k))
    _, _, case = canonical_case(params, polarity)
    for i, c in enumerate(cs):
        ex = classify_existence(params, polarity, float(c))
        if not ex.exists or ex.degenerate:
            continue
        mu = float(mu_kc(k, c, case))
        if not math.isfinite(mu):
            continue
        mus[i] = mu
        signs[i] = "+" if mu > tol else "-" if mu < -tol else "0"
    roots = _bracket_roots(lambda c: float(mu_kc(k, c, case)), cs, mus, xtol)
    return signs, mus, [ContourPoint(float(k), r.c_root, r.direction) for r in roots]


def scan_region(
    polarity: Polarity | str,
    k_range: tuple[float, float],
    c_range: tuple[float, float] = (0.005, 0.9995),
    resolution: int | tuple[int, int] = 200,
    *,
    tol: float = MARGINAL_TOL,
    xtol: float = 1e-13,
    max_workers: int | None = None,
) -> RegionScan:
    """Sign map of mu over a (k, c) grid with a = 1 (mu depends on k = b/a^2 only).

    Zero contours are extracted column by column (fixed k) by bracketing and
    bisection in c; every crossing in a column is reported.
    """
    polarity = Polarity.parse(polarity)
    nk, nc = (resolution, resolution) if isinstance(resolution, int) else resolution
    k_grid = np.linspace(k_range[0], k_range[1], nk)
    c_grid = np.linspace(c_range[0], c_range[1], nc)
    workers = max_workers or num_threads()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda k: _scan_column(polarity, float(k), c_grid, tol, xtol), k_grid))
    signs = np.empty((nc, nk), dtype=object)
    mus = np.empty((nc, nk))
    contour: list[ContourPoint] = []
    for j, (sg, mu, pts) in enumerate(results):
        signs[:, j] = sg
        mus[:, j] = mu
        contour.extend(pts)
    return RegionScan(polarity, k_grid, c_grid, signs, mus, contour)
