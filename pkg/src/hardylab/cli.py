"""Config-driven command line front end.

Subcommands: ``check`` (admissibility conditions), ``verify`` (batch
inequality verification), ``scan`` (sharpness search), ``reproduce`` (named
scenario pipelines), ``list-presets``.  Exit codes are a stable contract:
0 success, 1 mathematical failure, 2 usage or config error, 3 numerically
indeterminate.

Configuration comes from an INI file with sections ``instance``,
``quadrature``, ``verification``, ``scan``, ``output``; environment
variables prefixed ``HARDYLAB_`` override the file, and command line flags
override both.  See ``docs/config.md``.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
import tempfile
from pathlib import Path

from .errors import (
    ExponentRangeError,
    HardyLabError,
    InadmissibleInstanceError,
    IntegrabilityProbeError,
    InvalidParamsError,
    ParseError,
    VacuousInstanceError,
)
from .expr import interval_from_text
from .instance import (
    HardyInstance,
    check_admissibility,
    check_nonneg,
    make_instance,
    preset,
    preset_names,
)
from .report import emit_csv, emit_json, make_record
from .sharpness import FamilySpec, default_box, scan
from .verify import FAIL, INDETERMINATE, PASS, batch_verify

EXIT_OK = 0
EXIT_MATH = 1
EXIT_USAGE = 2
EXIT_INDETERMINATE = 3

SECTIONS = ("instance", "quadrature", "verification", "scan", "output")

DEFAULTS = {
    "instance": {},
    "quadrature": {"tol": "1e-8", "tol_abs": "1e-12", "max_depth": "40"},
    "verification": {
        "family": "mixed",
        "count": "50",
        "seed": "7",
        "which": "both",
        "tol": "1e-8",
        "jobs": "1",
        "grid": "10000",
    },
    "scan": {
        "family": "hardy_cutoff",
        "budget": "500",
        "restarts": "3",
        "seed": "11",
        "tol": "1e-6",
    },
    "output": {"dir": "hardylab-out"},
}

_EXPR_KEYS = {"p", "u", "phi", "sigma", "a_expr", "A"}

SCENARIOS = {
    "cor51": {
        "instance": {"preset": "cor51", "M": "1", "p": "2", "sigma": "1", "beta": "2"},
        "verification": {"count": "12"},
    },
    "cor53": {
        "instance": {
            "preset": "cor53", "alpha": "2", "p": "x+3", "sigma": "2",
            "beta": "3", "domain": "0, 1",
        },
        "verification": {"count": "12", "family": "power_bump"},
    },
    "cor54": {
        "instance": {
            "preset": "cor54", "a": "1", "p": "2", "sigma": "2.5",
            "beta": "3.5", "domain": "0.1, 10",
        },
        "verification": {"count": "12"},
    },
    "cor55-triple1": {
        "instance": {
            "preset": "cor55", "p": "1+d/(abs(x)+1)", "sigma": "d",
            "beta": "2", "domain": "-5, 5", "d": "1",
        },
        "verification": {"count": "12"},
    },
    "cor55-triple2": {
        "instance": {
            "preset": "cor55", "p": "exp(x)", "sigma": "(x+1)*exp(x)-1+0.1",
            "beta": "22.3", "domain": "0, 2",
        },
        "verification": {"count": "12"},
    },
    "cor55-triple3": {
        "instance": {
            "preset": "cor55", "p": "2-exp(-x^2)",
            "sigma": repr(2 * math.exp(-1.5) + 1),
            "beta": repr(2 * math.exp(-1.5) + 2), "domain": "0, inf",
        },
        "verification": {"count": "12"},
    },
    "cor64-affine": {
        "instance": {"preset": "cor64", "a": "1", "p": "x+2", "beta": "5", "domain": "0, 1"},
        "verification": {"count": "12"},
    },
    "cor64-reciprocal": {
        "instance": {"preset": "cor64", "a": "1", "p": "2-1/(x+2)", "beta": "2.5", "domain": "0, inf"},
        "verification": {"count": "12"},
    },
    "cor64-rational": {
        "instance": {
            "preset": "cor64", "a": "1", "p": "1+(g+d1*x)/(g+d2*x)",
            "beta": "5", "domain": "0, inf", "g": "1", "d1": "2", "d2": "1",
        },
        "verification": {"count": "12"},
    },
    "constp-hardy": {
        "instance": {"preset": "constp", "alpha": "0.5", "p": "2", "beta": "1"},
        "verification": {"count": "8", "which": "hardy"},
        "scan": {"budget": "500", "max_ratio": "1.10"},
    },
}


# ---------------------------------------------------------------------------
# configuration


def load_config(path: str | None, overrides: dict | None = None) -> dict:
    """Layered config: defaults < file < HARDYLAB_* environment < CLI flags."""
    cfg = {section: dict(values) for section, values in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise InvalidParamsError(f"config file {path!r} not found")
        for section in parser.sections():
            if section not in SECTIONS:
                raise InvalidParamsError(f"unknown config section [{section}]")
            cfg.setdefault(section, {}).update(dict(parser[section]))
    for name, value in os.environ.items():
        if not name.startswith("HARDYLAB_"):
            continue
        rest = name[len("HARDYLAB_"):].lower()
        for section in SECTIONS:
            prefix = section + "_"
            if rest.startswith(prefix):
                cfg[section][rest[len(prefix):]] = value
                break
    for section, values in (overrides or {}).items():
        cfg[section].update({k: v for k, v in values.items() if v is not None})
    return cfg


def build_instance(cfg: dict) -> HardyInstance:
    section = dict(cfg.get("instance", {}))
    if not section:
        raise InvalidParamsError("config has no [instance] section")
    name = section.pop("preset", None)
    if name is None:
        raise InvalidParamsError("[instance] must set 'preset' (a preset name or 'raw')")
    if name == "raw":
        return _build_raw_instance(section)
    kwargs = {}
    for key, value in section.items():
        if key == "domain":
            kwargs[key] = interval_from_text(value)
        elif key in _EXPR_KEYS:
            kwargs[key] = value
        else:
            kwargs[key] = _maybe_number(value)
    return preset(name, **kwargs)


def _maybe_number(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        return text


def _build_raw_instance(section: dict) -> HardyInstance:
    missing = [k for k in ("p", "u", "sigma", "beta", "domain") if k not in section]
    if missing:
        raise InvalidParamsError(f"raw instance is missing keys {missing}")
    domain = interval_from_text(section.pop("domain"))
    p = section.pop("p")
    u = section.pop("u")
    sigma = section.pop("sigma")
    beta = float(section.pop("beta"))
    phi = section.pop("phi", None)
    if phi is not None and phi.strip().lower() == "auto":
        phi = None
    params = {k: float(v) for k, v in section.items()}
    return make_instance(domain, p, u, phi, sigma, beta, params=params)


def _quad_tol(cfg) -> float:
    return float(cfg["quadrature"]["tol"])


def _out_dir(cfg) -> Path:
    return Path(cfg["output"]["dir"])


def _write_atomic(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg: dict, label: str = "check") -> int:
    try:
        inst = build_instance(cfg)
    except (ExponentRangeError, IntegrabilityProbeError) as err:
        print(f"check: exponent rejected: {err}")
        return EXIT_MATH
    grid = int(cfg["verification"]["grid"])
    report = check_admissibility(inst, grid_size=grid)
    conditions = list(report.conditions)
    if inst.condition is not None:
        conditions.append(
            check_nonneg(inst.condition, inst.domain, grid, name=inst.condition_name)
        )
    payload = {"conditions": []}
    worst_exit = EXIT_OK
    for cond in conditions:
        line = f"condition {cond.name}: {cond.verdict} (worst margin {cond.worst_margin:.6g}"
        if cond.witness is not None:
            line += f" at x={cond.witness:.9g}"
        line += ")"
        print(line)
        payload["conditions"].append(
            {
                "name": cond.name,
                "verdict": cond.verdict,
                "worst_margin": cond.worst_margin,
                "witness": cond.witness,
            }
        )
        if cond.verdict == "violated":
            worst_exit = EXIT_MATH
        elif cond.verdict == "indeterminate" and worst_exit == EXIT_OK:
            worst_exit = EXIT_INDETERMINATE
    record = make_record("check", inst.describe(), payload, cfg)
    _write_atomic(_out_dir(cfg) / f"{label}.json", emit_json(record))
    return worst_exit


def cmd_verify(cfg: dict, label: str = "verify") -> int:
    inst = build_instance(cfg)
    v = cfg["verification"]
    count = int(v["count"])
    seed = int(v["seed"])
    family = v["family"]
    tol = float(v["tol"])
    jobs = int(v["jobs"])
    which = v["which"]
    kinds = ("caccioppoli", "hardy") if which == "both" else (which,)

    totals = {PASS: 0, FAIL: 0, INDETERMINATE: 0}
    payload = {"batches": {}, "count_per_batch": count, "seed": seed, "family": family}
    witnesses = []
    try:
        for kind in kinds:
            summary = batch_verify(inst, family, count, seed, which=kind, tol=tol, jobs=jobs)
            for key, value in summary.counts.items():
                totals[key] += value
            payload["batches"][kind] = {
                "counts": summary.counts,
                "worst_margin": summary.worst_margin,
                "evaluations": summary.evaluations,
            }
            witnesses.extend({"inequality": kind, **w} for w in summary.witnesses)
            print(
                f"{kind}: {summary.counts[PASS]} pass, {summary.counts[FAIL]} fail, "
                f"{summary.counts[INDETERMINATE]} indeterminate "
                f"(worst margin {summary.worst_margin:.6g})"
            )
    except InadmissibleInstanceError as err:
        print(f"verify: {err}")
        return EXIT_MATH
    payload["totals"] = totals
    record = make_record("verify", inst.describe(), payload, cfg)
    _write_atomic(_out_dir(cfg) / f"{label}.json", emit_json(record))
    if witnesses:
        replay = make_record(
            "witnesses",
            inst.describe(),
            {"seed": seed, "family": family, "witnesses": witnesses},
            cfg,
        )
        _write_atomic(_out_dir(cfg) / f"{label}-witnesses.json", emit_json(replay))
    total_cases = sum(totals.values())
    if totals[FAIL] > 0:
        return EXIT_MATH
    if total_cases and totals[INDETERMINATE] > 0.1 * total_cases:
        return EXIT_INDETERMINATE
    return EXIT_OK


def cmd_scan(cfg: dict, label: str = "scan") -> int:
    inst = build_instance(cfg)
    s = cfg["scan"]
    box = {}
    for key, value in s.items():
        if key.startswith("box_"):
            box[key[4:]] = tuple(float(part) for part in value.split(","))
    spec = FamilySpec(
        kind=s["family"],
        box=box or dict(default_box(s["family"])),
        restarts=int(s["restarts"]),
        seed=int(s["seed"]),
    )
    try:
        result = scan(inst, spec, budget=int(s["budget"]), tol=float(s["tol"]))
    except VacuousInstanceError as err:
        print(f"scan: vacuous instance: {err}")
        return EXIT_MATH
    names = list(spec.box.keys())
    print(
        f"scan: best ratio {result.best_ratio:.6g} after {result.evaluations} "
        f"evaluations (converged={result.converged})"
    )
    print(f"scan: best params {result.best_params}")
    payload = {
        "best_ratio": result.best_ratio,
        "best_params": result.best_params,
        "evaluations": result.evaluations,
        "converged": result.converged,
        "family": spec.kind,
        "box": {k: list(v) for k, v in spec.box.items()},
        "seed": spec.seed,
    }
    record = make_record("scan", inst.describe(), payload, cfg)
    _write_atomic(_out_dir(cfg) / f"{label}.json", emit_json(record))
    best = result.best_so_far()
    rows = [
        [entry.restart, entry.index, *[entry.params[n] for n in names], entry.ratio, best[i]]
        for i, entry in enumerate(result.trace)
    ]
    header = ["restart", "eval", *names, "ratio", "best_so_far"]
    _write_atomic(_out_dir(cfg) / f"{label}-trace.csv", emit_csv(rows, header))
    max_ratio = s.get("max_ratio")
    if max_ratio is not None and result.best_ratio > float(max_ratio):
        print(f"scan: best ratio exceeds the expected bound {max_ratio}")
        return EXIT_MATH
    return EXIT_OK


def cmd_reproduce(name: str, cfg: dict) -> int:
    if name not in SCENARIOS:
        print(f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}")
        return EXIT_USAGE
    scenario = SCENARIOS[name]
    merged = {section: dict(values) for section, values in cfg.items()}
    for section, values in scenario.items():
        merged.setdefault(section, {}).update(values)
    print(f"scenario {name}: check")
    code = cmd_check(merged, label=f"{name}-check")
    if code != EXIT_OK:
        return code
    print(f"scenario {name}: verify")
    code = cmd_verify(merged, label=f"{name}-verify")
    if code != EXIT_OK:
        return code
    if "scan" in scenario:
        print(f"scenario {name}: scan")
        code = cmd_scan(merged, label=f"{name}-scan")
        if code != EXIT_OK:
            return code
    print(f"scenario {name}: ok")
    return EXIT_OK


def cmd_list_presets(cfg: dict) -> int:
    print("presets:")
    for name in preset_names():
        print(f"  {name}")
    print("scenarios:")
    for name in sorted(SCENARIOS):
        print(f"  {name}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardylab",
        description="numerical laboratory for variable-exponent Hardy and "
        "Caccioppoli inequalities on intervals",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="INI config file")
    common.add_argument("--seed", type=int, default=None, help="override RNG seed")
    common.add_argument("--tol", type=float, default=None, help="override tolerances")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--jobs", type=int, default=None, help="worker threads for batches")
    sub.add_parser("check", parents=[common])
    sub.add_parser("verify", parents=[common])
    sub.add_parser("scan", parents=[common])
    rep = sub.add_parser("reproduce", parents=[common])
    rep.add_argument("scenario")
    sub.add_parser("list-presets", parents=[common])
    return parser


def _overrides(args) -> dict:
    seed = str(args.seed) if args.seed is not None else None
    tol = repr(args.tol) if args.tol is not None else None
    return {
        "quadrature": {"tol": tol},
        "verification": {"seed": seed, "tol": tol,
                         "jobs": str(args.jobs) if args.jobs is not None else None},
        "scan": {"seed": seed},
        "output": {"dir": args.out},
    }


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "reproduce":
            return cmd_reproduce(args.scenario, cfg)
        if args.command == "list-presets":
            return cmd_list_presets(cfg)
        return EXIT_USAGE
    except (ParseError, InvalidParamsError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except HardyLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
