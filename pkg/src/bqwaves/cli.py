"""Command-line front end.

Usage examples:
  bqwaves classify -a 1 -b -1 --pos -c 0.9
  bqwaves mu -a 1 -b 1 --neg -c 0.5
  bqwaves thresholds -a 1 -b 1 --pos
  bqwaves scan --neg --kmin 0.05 --kmax 10 --res 200 --out fig2_right
  bqwaves profile -a 0.25 -b 1 --pos -c 0.6667 --out profile.csv
  bqwaves simulate run.json --out trace.csv

Exit codes: 0 success (JSON on stdout), 1 domain/precondition error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dynamics import SimConfig, load_config, run
from .model import (
    ModelParams,
    NumericalError,
    Polarity,
    PreconditionError,
    WaveId,
    classify_existence,
)
from .moment import evaluate_moment
from .profile import sample_profile
from .stability import Method, Verdict, classify, find_thresholds, scan_region, verdict_from_value


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 rather than argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, allow_nan=False)


def _add_wave_args(p: argparse.ArgumentParser, speed: bool = True) -> None:
    p.add_argument("-a", type=float, required=True, help="quadratic coefficient")
    p.add_argument("-b", type=float, required=True, help="cubic coefficient")
    pol = p.add_mutually_exclusive_group(required=True)
    pol.add_argument("--pos", dest="polarity", action="store_const", const=Polarity.POSITIVE)
    pol.add_argument("--neg", dest="polarity", action="store_const", const=Polarity.NEGATIVE)
    if speed:
        p.add_argument("-c", type=float, required=True, help="wave speed, c^2 < 1")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bqwaves", description="Solitary-wave existence and stability for the extended Boussinesq equation.")
    ap.add_argument("--seed", type=int, default=0, help="seed for random perturbations (default 0)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="existence and stability verdict")
    _add_wave_args(p)
    p.add_argument("--method", choices=["closed", "integral", "fd", "all"], default="closed")

    p = sub.add_parser("mu", help="closed-form index and the two numerical m'' estimates")
    _add_wave_args(p)

    p = sub.add_parser("thresholds", help="speeds where the stability index changes sign")
    _add_wave_args(p, speed=False)
    p.add_argument("--n-scan", type=int, default=400)

    p = sub.add_parser("scan", help="sign map of mu over (k, c) with a = 1")
    pol = p.add_mutually_exclusive_group(required=True)
    pol.add_argument("--pos", dest="polarity", action="store_const", const=Polarity.POSITIVE)
    pol.add_argument("--neg", dest="polarity", action="store_const", const=Polarity.NEGATIVE)
    p.add_argument("--kmin", type=float, default=0.05)
    p.add_argument("--kmax", type=float, default=10.0)
    p.add_argument("--cmin", type=float, default=0.005)
    p.add_argument("--cmax", type=float, default=0.9995)
    p.add_argument("--res", type=int, default=200)
    p.add_argument("--out", help="prefix for <out>_matrix.csv, <out>_contour.csv and <out>.json")

    p = sub.add_parser("profile", help="sampled solitary-wave profile")
    _add_wave_args(p)
    p.add_argument("--half-width", type=float, default=None)
    p.add_argument("--n", type=int, default=1025)
    p.add_argument("--out", help="write CSV (x,V,dV) or JSON, chosen by extension")

    p = sub.add_parser("simulate", help="evolve a perturbed wave and track orbital distance")
    p.add_argument("config", help="JSON or TOML file with a, b, polarity, c and simulation keys")
    p.add_argument("--out", help="write CSV (t,distance,hamiltonian,mass) or JSON, chosen by extension")
    return ap


def _wave(args) -> tuple[ModelParams, WaveId]:
    return ModelParams(args.a, args.b), WaveId(args.polarity, args.c)


def cmd_classify(args) -> dict:
    params, wave = _wave(args)
    existence = classify_existence(params, wave.polarity, wave.c)
    payload = {"params": params.to_dict(), "wave": wave.to_dict(), "existence": existence.to_dict(), "exists": existence.exists}
    if args.method == "all":
        methods = [Method.CLOSED_FORM, Method.INTEGRAL, Method.FINITE_DIFFERENCE]
    else:
        methods = [Method.parse(args.method)]
    if params.a == 0:
        methods = [m for m in methods if m is not Method.CLOSED_FORM] or [Method.INTEGRAL]
    verdicts = [classify(params, wave, m) for m in methods]
    payload["verdict"] = verdicts[0].verdict.value
    payload["mu"] = verdicts[0].mu
    payload["method"] = verdicts[0].method.value
    if len(verdicts) > 1:
        payload["verdicts"] = {v.method.value: v.to_dict() for v in verdicts}
    return payload


def cmd_mu(args) -> dict:
    params, wave = _wave(args)
    existence = classify_existence(params, wave.polarity, wave.c)
    if not existence.exists:
        return {"params": params.to_dict(), "wave": wave.to_dict(), "exists": False, "verdict": Verdict.NO_WAVE.value}
    ev = evaluate_moment(params, wave)
    lead = ev.mu_closed if ev.mu_closed is not None else ev.m_dd_integral
    return {"exists": True, "verdict": verdict_from_value(lead).value, "signs_agree": ev.signs_agree(), **ev.to_dict()}


def cmd_thresholds(args) -> dict:
    params = ModelParams(args.a, args.b)
    roots = find_thresholds(params, args.polarity, n_scan=args.n_scan)
    return {
        "params": params.to_dict(),
        "polarity": args.polarity.value,
        "thresholds": [r._asdict() for r in roots],
    }


def cmd_scan(args) -> dict:
    scan = scan_region(args.polarity, (args.kmin, args.kmax), (args.cmin, args.cmax), args.res)
    if not args.out:
        return scan.to_dict()
    prefix = Path(args.out)
    files = {
        "matrix_csv": prefix.with_name(prefix.name + "_matrix.csv"),
        "contour_csv": prefix.with_name(prefix.name + "_contour.csv"),
        "json": prefix.with_name(prefix.name + ".json"),
    }
    files["matrix_csv"].write_text(scan.to_matrix_csv(), encoding="utf-8")
    files["contour_csv"].write_text(scan.to_contour_csv(), encoding="utf-8")
    files["json"].write_text(_dumps(scan.to_dict()), encoding="utf-8")
    return {
        "polarity": scan.polarity.value,
        "resolution": [len(scan.k_grid), len(scan.c_grid)],
        "contour_points": len(scan.contour),
        "files": {k: str(v) for k, v in files.items()},
    }


def _write(path: str, csv_text: str, json_text: str) -> None:
    target = Path(path)
    target.write_text(json_text if target.suffix.lower() == ".json" else csv_text, encoding="utf-8")


def cmd_profile(args) -> dict:
    params, wave = _wave(args)
    prof = sample_profile(params, wave, args.half_width, args.n)
    if not args.out:
        return prof.to_dict()
    _write(args.out, prof.to_csv(), _dumps(prof.to_dict()))
    summary = prof.to_dict()
    for key in ("xs", "vs", "dvs"):
        summary.pop(key)
    summary["out"] = args.out
    return summary


def cmd_simulate(args) -> dict:
    raw = load_config(args.config)
    try:
        params = ModelParams(float(raw["a"]), float(raw["b"]))
        wave = WaveId(Polarity.parse(raw.get("polarity", "positive")), float(raw["c"]))
    except KeyError as exc:
        raise PreconditionError(f"config is missing key {exc}") from None
    config = SimConfig.from_dict(raw)
    if "seed" not in (raw.get("perturbation") or {}):
        config.perturbation["seed"] = args.seed
    trace = run(params, wave, config)
    payload = {"params": params.to_dict(), "wave": wave.to_dict(), "config": config.to_dict(), "trace": trace.to_dict()}
    if args.out:
        _write(args.out, trace.to_csv(), _dumps(payload))
    return payload


COMMANDS = {
    "classify": cmd_classify,
    "mu": cmd_mu,
    "thresholds": cmd_thresholds,
    "scan": cmd_scan,
    "profile": cmd_profile,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        payload = COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(_dumps(payload))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
