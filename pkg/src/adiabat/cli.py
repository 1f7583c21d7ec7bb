"""
Batch front-end.

Every subcommand reads a TOML run configuration (optional), applies command
line overrides, echoes the fully resolved configuration next to its output
and writes CSV tables, a JSON summary and, unless disabled, PNG figures.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (a
``diagnostic.txt`` is written to the output directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import traceback
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError, NumericalError
from .evolve import evolve, evolve_factorized, perturbative_error
from .experiments import (
    LinearFit,
    ScheduleSpec,
    decade_slopes,
    degeneracy_runtime_scaling,
    envelope_exponential_fit,
    envelope_power_fit,
    error_vs_runtime,
    fit_power_law,
    scaling_sweep,
    table_one_dynamical,
    table_one_exponents,
    upper_envelope,
)
from .model import GapAnsatz, HamiltonianModel, ModelKind, build_model
from .schedule import Smoothness, frozen_schedule, runtime_from_h, sample
from .spectrum import coupling_profile, criterion_integral, eigensystem_at, gap, gap_eigensolver, gap_singularities

OUTPUT_ENV = "ADIABAT_OUTPUT_DIR"
DEFAULT_OUTPUT = "adiabat_out"

SUBCOMMANDS = ("gap", "spectrum", "schedule", "evolve", "sweep", "table1", "decay", "degeneracy", "criterion", "fit")

MODEL_ALIASES = {
    "grover": ModelKind.GROVER_LINEAR,
    "grover_linear": ModelKind.GROVER_LINEAR,
    "quadratic": ModelKind.GROVER_QUADRATIC,
    "grover_quadratic": ModelKind.GROVER_QUADRATIC,
    "product": ModelKind.QUBIT_PRODUCT,
    "qubits": ModelKind.QUBIT_PRODUCT,
    "qubit_product": ModelKind.QUBIT_PRODUCT,
    "ansatz": ModelKind.TWO_LEVEL_ANSATZ,
    "two_level_ansatz": ModelKind.TWO_LEVEL_ANSATZ,
}

SMOOTHNESS_ALIASES = {"raw": "raw", "c0": "C0", "c1": "C1", "cinf": "Cinf"}

# expected Table-1 exponents for b = 2 and their tolerances
TABLE_ONE_EXPECTED = {(2, -1): (2.0, 0.15), (4, -1): (1.5, 0.15)}
TABLE_ONE_DEFAULT = (1.0, 0.10)

# type tags: "int", "float", "str", "bool", "ints", "floats", "strs";
# a default of None marks an optional key that is omitted unless set
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "run": {"output_dir": ("str", None), "jobs": ("int", None), "plots": ("bool", True)},
    "model": {
        "kind": ("str", "grover_linear"),
        "n": ("int", 100),
        "marked": ("int", 0),
        "m": ("int", 8),
        "a": ("int", 1),
        "gap_min": ("float", 0.1),
        "s_min": ("float", 0.5),
    },
    "schedule": {
        "d": ("int", 0),
        "T": ("float", 100.0),
        "smoothness": ("str", "raw"),
        "match_fracs": ("floats", [0.1, 0.9]),
        "samples": ("int", 401),
    },
    "gap": {"points": ("int", 101)},
    "spectrum": {"points": ("int", 101)},
    "evolve": {
        "tol": ("float", 1e-9),
        "samples": ("int", 401),
        "frozen": ("bool", False),
        "hold_s": ("float", 0.0),
        "full": ("bool", False),
    },
    "sweep": {
        "sizes": ("ints", [128, 256, 512, 1024, 2048, 4096, 8192]),
        "target": ("float", 0.75),
        "T_cap": ("float", 1e7),
        "tol": ("float", 1e-9),
        "expected": ("float", None),
        "tolerance": ("float", None),
    },
    "table1": {
        "two_a": ("ints", [2, 4]),
        "d": ("ints", [-1, 0, 1, 2, 3]),
        "b": ("float", 2.0),
        "gap_min_lo": ("float", 1e-3),
        "gap_min_hi": ("float", 1e-1),
        "count": ("int", 9),
        "threshold": ("float", 10.0),
        "dynamical": ("bool", False),
        "dyn_gap_mins": ("floats", [0.005, 0.0091, 0.0166, 0.0302, 0.055, 0.1]),
        "dyn_target": ("float", 0.75),
        "tol": ("float", 1e-9),
    },
    "decay": {
        "T_min": ("float", 20.0),
        "T_max": ("float", 300.0),
        "count": ("int", 60),
        "spacing": ("str", "linear"),
        "tol": ("float", 1e-9),
        "perturbative": ("bool", False),
    },
    "degeneracy": {
        "M": ("ints", [16, 64, 256, 1024, 4096, 16384, 65536]),
        "classes": ("strs", ["C0", "C1", "Cinf"]),
        "target": ("float", 0.99),
        "method": ("str", "sustained"),
        "d": ("int", -1),
        "ratio": ("float", 1.005),
        "tol": ("float", 1e-9),
    },
    "criterion": {
        "a": ("int", 1),
        "b": ("float", 2.0),
        "gap_min": ("float", 0.1),
        "s_min": ("float", 0.5),
        "d": ("int", 0),
        "alpha": ("floats", [1e-3, 1e-2, 1e-1, 1.0]),
    },
    "fit": {
        "input": ("str", ""),
        "x": ("str", "x"),
        "y": ("str", "y"),
        "form": ("str", "power"),
        "envelope": ("bool", False),
        "window_lo": ("float", None),
        "window_hi": ("float", None),
        "expected": ("float", None),
        "tolerance": ("float", None),
    },
}


# ---------------------------------------------------------------- config


def _check_type(section: str, key: str, kind: str, value):
    where = f"{section}.{key}"
    scalar = {"int": int, "float": (int, float), "str": str, "bool": bool}
    if kind in scalar:
        if isinstance(value, bool) and kind != "bool":
            raise ConfigError(f"{where}: expected {kind}, got a boolean")
        if not isinstance(value, scalar[kind]):
            raise ConfigError(f"{where}: expected {kind}, got {type(value).__name__}")
        return float(value) if kind == "float" else value
    inner = {"ints": "int", "floats": "float", "strs": "str"}[kind]
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list of {inner}s")
    return [_check_type(section, key, inner, v) for v in value]


def _merge(config: dict, data: dict, origin: str):
    for section, body in data.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section '{section}' in {origin}")
        if not isinstance(body, dict):
            raise ConfigError(f"config section '{section}' in {origin} must be a table")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key '{section}.{key}' in {origin}")
            config[section][key] = _check_type(section, key, SCHEMA[section][key][0], value)


def default_config() -> dict:
    cfg = {}
    for section, keys in SCHEMA.items():
        cfg[section] = {k: (list(v) if isinstance(v, list) else v) for k, (_, v) in keys.items() if v is not None}
    cfg["run"]["output_dir"] = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
    cfg["run"]["jobs"] = os.cpu_count() or 1
    return cfg


def _normalize(cfg: dict) -> dict:
    kind = cfg["model"]["kind"].lower()
    if kind not in MODEL_ALIASES:
        raise ConfigError(f"model.kind: unknown model '{cfg['model']['kind']}'")
    cfg["model"]["kind"] = MODEL_ALIASES[kind].value
    sm = cfg["schedule"]["smoothness"]
    if sm.lower() not in SMOOTHNESS_ALIASES:
        raise ConfigError(f"schedule.smoothness: unknown class '{sm}'")
    cfg["schedule"]["smoothness"] = SMOOTHNESS_ALIASES[sm.lower()]
    classes = []
    for c in cfg["degeneracy"]["classes"]:
        if c.lower() not in SMOOTHNESS_ALIASES or c.lower() == "raw":
            raise ConfigError(f"degeneracy.classes: unknown class '{c}'")
        classes.append(SMOOTHNESS_ALIASES[c.lower()])
    cfg["degeneracy"]["classes"] = classes
    if len(cfg["schedule"]["match_fracs"]) != 2:
        raise ConfigError("schedule.match_fracs: expected two numbers")
    if cfg["decay"]["spacing"] not in ("linear", "log"):
        raise ConfigError("decay.spacing: expected 'linear' or 'log'")
    if cfg["degeneracy"]["method"] not in ("sustained", "search"):
        raise ConfigError("degeneracy.method: expected 'sustained' or 'search'")
    if cfg["fit"]["form"] not in ("power", "exponential", "linear"):
        raise ConfigError("fit.form: expected 'power', 'exponential' or 'linear'")
    if cfg["run"]["jobs"] < 1:
        raise ConfigError("run.jobs: must be at least 1")
    return cfg


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the TOML file, then ``overrides`` (same nested layout)."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        _merge(cfg, data, str(path))
    if overrides:
        _merge(cfg, overrides, "command line")
    return _normalize(cfg)


def dump_config(cfg: dict) -> str:
    return tomli_w.dumps(cfg)


def _parse_set(item: str) -> tuple[str, str, object]:
    if "=" not in item or "." not in item.split("=", 1)[0]:
        raise ConfigError(f"--set expects section.key=value, got '{item}'")
    lhs, rhs = item.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    try:
        value = tomli.loads(f"v = {rhs.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = rhs.strip()
    return section, key, value


FLAG_MAP = {
    "model": ("model", "kind"),
    "n": ("model", "n"),
    "m": ("model", "m"),
    "marked": ("model", "marked"),
    "a": ("model", "a"),
    "gap_min": ("model", "gap_min"),
    "s_min": ("model", "s_min"),
    "d": ("schedule", "d"),
    "T": ("schedule", "T"),
    "smoothness": ("schedule", "smoothness"),
    "output_dir": ("run", "output_dir"),
    "jobs": ("run", "jobs"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiabat", description="Adiabatic evolution experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--jobs", type=int)
        p.add_argument("--no-plots", action="store_true")
        p.add_argument("--model")
        p.add_argument("--n", type=int)
        p.add_argument("--m", type=int)
        p.add_argument("--marked", type=int)
        p.add_argument("--a", type=int)
        p.add_argument("--gap-min", dest="gap_min", type=float)
        p.add_argument("--s-min", dest="s_min", type=float)
        p.add_argument("--d", type=int)
        p.add_argument("--T", type=float)
        p.add_argument("--smoothness")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    return parser


def _overrides(args) -> dict:
    out: dict = {}
    for flag, (section, key) in FLAG_MAP.items():
        value = getattr(args, flag)
        if value is not None:
            out.setdefault(section, {})[key] = value
    if args.no_plots:
        out.setdefault("run", {})["plots"] = False
    for item in args.set:
        section, key, value = _parse_set(item)
        out.setdefault(section, {})[key] = value
    return out


# ---------------------------------------------------------------- output


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: Path, data: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(data), fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def _fit_dict(fit: LinearFit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept, "stderr": fit.stderr, "r_squared": fit.r_squared}


def _check(value: float, expected: float | None, tolerance: float | None) -> dict:
    if expected is None or tolerance is None:
        return {}
    return {"expected": expected, "tolerance": tolerance, "pass": bool(abs(value - expected) <= tolerance)}


# ---------------------------------------------------------------- subcommands


def _model(cfg) -> HamiltonianModel:
    return build_model(cfg["model"]["kind"], **{k: v for k, v in cfg["model"].items() if k != "kind"})


def _spec(cfg) -> ScheduleSpec:
    sc = cfg["schedule"]
    return ScheduleSpec(sc["d"], Smoothness(sc["smoothness"]), tuple(sc["match_fracs"]))


def cmd_gap(cfg, out: Path, plots: bool) -> dict:
    model = _model(cfg)
    s = np.linspace(0.0, 1.0, cfg["gap"]["points"])
    g = np.asarray(gap(model, s), float)
    ge = gap_eigensolver(model, s)
    write_csv(out / "gap.csv", ["s", "gap", "gap_eigensolver"], zip(s, g, ge))
    if plots:
        from . import plotting

        plotting.plot_gap(s, g, out / "gap.png")
    return {"model": model.describe(), "min_gap": float(g.min()), "max_deviation": float(np.max(np.abs(g - ge)))}


def cmd_spectrum(cfg, out: Path, plots: bool) -> dict:
    model = _model(cfg)
    s = np.linspace(0.0, 1.0, cfg["spectrum"]["points"])
    energies = np.array([eigensystem_at(model, float(x)).energies for x in s])
    g, f01 = coupling_profile(model, s)
    rows = zip(s, energies[:, 0], energies[:, 1], g, np.abs(f01))
    write_csv(out / "spectrum.csv", ["s", "E0", "E1", "gap", "absF01"], rows)
    if plots:
        from . import plotting

        plotting.plot_spectrum(s, energies[:, 0], energies[:, 1], g, out / "spectrum.png", np.abs(f01))
    return {"model": model.describe(), "min_gap": float(g.min()), "s_at_min_gap": float(s[np.argmin(g)])}


def cmd_schedule(cfg, out: Path, plots: bool) -> dict:
    model = _model(cfg)
    spec = _spec(cfg)
    T = cfg["schedule"]["T"]
    sched = spec.build(model, T)
    t = np.linspace(0.0, T, cfg["schedule"]["samples"])
    s, v = sample(sched, t)
    write_csv(out / "schedule.csv", ["t", "s", "dsdt"], zip(t, s, v))
    if plots:
        from . import plotting

        plotting.plot_schedule(t, s, v, out / "schedule.png")
    return {
        "T": T,
        "alpha": sched.alpha,
        "d": sched.d,
        "smoothness": sched.smoothness.value,
        "match_fracs": list(sched.match_fracs),
        "runtime_from_h": runtime_from_h(sched),
        "endpoint_velocity": [float(v[0]), float(v[-1])],
    }


def cmd_evolve(cfg, out: Path, plots: bool) -> dict:
    model = _model(cfg)
    ev = cfg["evolve"]
    T = cfg["schedule"]["T"]
    sched = frozen_schedule(T, ev["hold_s"]) if ev["frozen"] else _spec(cfg).build(model, T)
    if model.kind is ModelKind.QUBIT_PRODUCT and not ev["full"] and not ev["frozen"]:
        res = evolve_factorized(model, sched, tol=ev["tol"], samples=ev["samples"])
    else:
        res = evolve(model, sched, tol=ev["tol"], samples=ev["samples"], full=ev["full"])
    write_csv(out / "evolve.csv", ["t", "s", "p0", "p_excited"], zip(res.times, res.s, res.ground_occupation, res.excitation))
    print(
        f"final_error={_fmt(res.final_error)} max_intermediate_error={_fmt(res.max_intermediate_error)} "
        f"steps={res.accepted_steps}"
    )
    if plots:
        from . import plotting

        plotting.plot_occupation(res.times, res.ground_occupation, out / "evolve.png")
    return {
        "final_error": res.final_error,
        "max_intermediate_error": res.max_intermediate_error,
        "accepted_steps": res.accepted_steps,
        "rejected_steps": res.rejected_steps,
        "norm_drift": res.norm_drift,
        "model": model.describe(),
    }


def cmd_sweep(cfg, out: Path, plots: bool) -> dict:
    sw = cfg["sweep"]
    kind = ModelKind(cfg["model"]["kind"])
    if kind is ModelKind.TWO_LEVEL_ANSATZ:
        raise ConfigError("sweep needs a sized family (grover_linear, grover_quadratic or qubit_product)")
    spec = _spec(cfg)
    fit, results = scaling_sweep(kind, spec, sw["target"], sw["sizes"], tol=sw["tol"], T_cap=sw["T_cap"], jobs=cfg["run"]["jobs"])
    rows = [(n, r.T_star, r.bracket[0], r.bracket[1], r.fidelity, r.evals, r.success) for n, r in zip(sw["sizes"], results)]
    write_csv(out / "sweep.csv", ["size", "T_star", "T_low", "T_high", "fidelity", "evals", "success"], rows)
    summary = {"family": kind.value, "d": spec.d, "smoothness": spec.smoothness.value, "target": sw["target"], "fit": fit.as_dict()}
    summary.update(_check(fit.exponent, sw.get("expected"), sw.get("tolerance")))
    if plots and fit.points:
        from . import plotting

        x, y = zip(*fit.points)
        plotting.plot_scaling(x, y, fit.exponent, fit.intercept, out / "sweep.png")
    if not fit.success:
        raise NumericalError(f"scaling fit refused: {fit.message}")
    return summary


def cmd_table1(cfg, out: Path, plots: bool) -> dict:
    tb = cfg["table1"]
    gaps = np.geomspace(tb["gap_min_lo"], tb["gap_min_hi"], tb["count"])
    rows, fits, curves = [], {}, {}
    for two_a in tb["two_a"]:
        for d in tb["d"]:
            fit = table_one_exponents(two_a, tb["b"], d, gaps, tb["threshold"])
            label = f"2a={two_a},d={d}"
            entry = fit.as_dict()
            if tb["b"] == 2.0:
                entry.update(_check(fit.exponent, *TABLE_ONE_EXPECTED.get((two_a, d), TABLE_ONE_DEFAULT)))
            fits[label] = entry
            xs, ys = zip(*fit.points)
            curves[label] = (xs, ys)
            rows += [(two_a, d, 1.0 / x, y) for x, y in fit.points]
    write_csv(out / "table1.csv", ["two_a", "d", "gap_min", "T"], rows)
    summary = {"threshold": tb["threshold"], "b": tb["b"], "fits": fits}
    if tb["dynamical"]:
        dyn, results = table_one_dynamical(2, -1, tb["dyn_gap_mins"], tb["dyn_target"], tol=tb["tol"], jobs=cfg["run"]["jobs"])
        write_csv(
            out / "table1_dynamical.csv",
            ["gap_min", "T_star", "fidelity", "success"],
            [(g, r.T_star, r.fidelity, r.success) for g, r in zip(tb["dyn_gap_mins"], results)],
        )
        entry = dyn.as_dict()
        entry.update(_check(dyn.exponent, 2.0, 0.2))
        summary["dynamical"] = entry
    if plots:
        from . import plotting

        plotting.plot_table_one(curves, out / "table1.png")
    return summary


def _decay_grid(dc) -> np.ndarray:
    if dc["spacing"] == "log":
        return np.geomspace(dc["T_min"], dc["T_max"], dc["count"])
    return np.linspace(dc["T_min"], dc["T_max"], dc["count"])


def cmd_decay(cfg, out: Path, plots: bool) -> dict:
    dc = cfg["decay"]
    model = _model(cfg)
    spec = _spec(cfg)
    tab = error_vs_runtime(model, spec, _decay_grid(dc), tol=dc["tol"], jobs=cfg["run"]["jobs"])
    header = ["T", "final_error", "max_intermediate_error"]
    cols = [tab.T, tab.final_error, tab.max_intermediate_error]
    summary: dict = {"model": model.describe(), "d": spec.d, "smoothness": spec.smoothness.value, "max_norm_drift": float(tab.norm_drift.max())}
    try:
        summary["envelope_exponential"] = _fit_dict(envelope_exponential_fit(tab.T, tab.final_error))
    except NumericalError as exc:
        summary["envelope_exponential"] = {"error": str(exc)}
    lo, hi = float(tab.T[0]), float(tab.T[-1])
    if hi / lo >= 10.0:
        last = (hi / 10.0, hi)
        summary["last_decade"] = {
            "window": list(last),
            "final_envelope": _fit_dict(envelope_power_fit(tab.T, tab.final_error, last)),
            "max_intermediate": _fit_dict(LinearFit.from_data(*_log_window(tab.T, tab.max_intermediate_error, last))),
        }
    if hi / lo >= 1000.0:
        start = hi / 1000.0
        summary["decade_slopes"] = {"start": start, "slopes": decade_slopes(tab.T, tab.final_error, start)}
    good = tab.final_error <= 0.01
    if np.any(good):
        ratio = tab.max_intermediate_error[good] / np.maximum(tab.final_error[good], 1e-300)
        k = int(np.argmax(ratio))
        summary["contrast"] = {"T": float(tab.T[good][k]), "ratio": float(ratio[k])}
    if dc["perturbative"]:
        if model.dim != 2 or model.kind is ModelKind.QUBIT_PRODUCT:
            raise ConfigError("decay.perturbative needs a two-level model other than the qubit product")
        pert = np.array([abs(perturbative_error(model, spec.build(model, float(T)))) ** 2 for T in tab.T])
        header.append("perturbative")
        cols.append(pert)
        k = upper_envelope(tab.final_error)
        summary["perturbative_max_rel_dev"] = float(np.max(np.abs(pert[k] / tab.final_error[k] - 1.0)))
    write_csv(out / "decay.csv", header, zip(*cols))
    if plots:
        from . import plotting

        plotting.plot_decay(tab.T, tab.final_error, tab.max_intermediate_error, out / "decay.png",
                            log_x=dc["spacing"] == "log", extra=cols[3] if dc["perturbative"] else None)
    return summary


def _log_window(T, y, window):
    keep = (T >= window[0]) & (T <= window[1])
    return np.log(T[keep]), np.log(y[keep])


def cmd_degeneracy(cfg, out: Path, plots: bool) -> dict:
    dg = cfg["degeneracy"]
    rows, summary, curves = [], {"target": dg["target"], "method": dg["method"], "classes": {}}, {}
    for cls in dg["classes"]:
        res = degeneracy_runtime_scaling(
            dg["M"], cls, dg["target"], d=dg["d"], match_fracs=tuple(cfg["schedule"]["match_fracs"]),
            method=dg["method"], ratio=dg["ratio"], tol=dg["tol"], jobs=cfg["run"]["jobs"],
        )
        rows += [(cls, m, t, fo) for (m, t), fo in zip(res.points, res.first_order)]
        entry = {"power": res.power.as_dict(), "success": res.success, "preferred": res.preferred}
        if res.vs_log is not None:
            entry["vs_log"] = _fit_dict(res.vs_log)
            entry["vs_sqrt"] = _fit_dict(res.vs_sqrt)
        summary["classes"][cls] = entry
        curves[cls] = tuple(zip(*res.points)) if res.points else ((), ())
    write_csv(out / "degeneracy.csv", ["class", "M", "T_star", "T_first_order"], rows)
    if plots:
        from . import plotting

        plotting.plot_degeneracy(curves, out / "degeneracy.png")
    return summary


def cmd_criterion(cfg, out: Path, plots: bool) -> dict:
    cr = cfg["criterion"]
    ansatz = GapAnsatz(cr["a"], cr["b"], cr["gap_min"], cr["s_min"])
    rows = []
    for alpha in cr["alpha"]:
        val = criterion_integral(ansatz, cr["d"], alpha)
        rows.append((alpha, val.value, val.endpoint_sum, val.endpoint.real, val.endpoint.imag))
    write_csv(out / "criterion.csv", ["alpha", "value", "endpoint_sum", "endpoint_re", "endpoint_im"], rows)
    sing = gap_singularities(ansatz)
    return {
        "dominant_root": [sing.dominant.real, sing.dominant.imag],
        "lower_roots": [[r.real, r.imag] for r in sing.roots],
        "d": cr["d"],
    }


def cmd_fit(cfg, out: Path, plots: bool) -> dict:
    ft = cfg["fit"]
    if not ft["input"]:
        raise ConfigError("fit.input: a CSV file is required")
    try:
        with open(ft["input"], newline="", encoding="utf-8") as fh:
            table = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"fit.input: cannot read {ft['input']}: {exc}") from exc
    if not table or ft["x"] not in table[0] or ft["y"] not in table[0]:
        raise ConfigError(f"fit.x/fit.y: columns '{ft['x']}'/'{ft['y']}' not found in {ft['input']}")
    x = np.array([float(r[ft["x"]]) for r in table])
    y = np.array([float(r[ft["y"]]) for r in table])
    lo, hi = ft.get("window_lo", -np.inf), ft.get("window_hi", np.inf)
    keep = (x >= lo) & (x <= hi)
    x, y = x[keep], y[keep]
    if ft["envelope"]:
        k = upper_envelope(y)
        x, y = x[k], y[k]
    if ft["form"] == "power":
        pf = fit_power_law(x, y)
        if not pf.success:
            raise NumericalError(f"fit refused: {pf.message}")
        fit = LinearFit(pf.exponent, pf.intercept, pf.stderr, pf.r_squared)
        fitted = np.exp(fit.intercept) * x**fit.slope
    elif ft["form"] == "exponential":
        fit = LinearFit.from_data(x, np.log(y))
        fitted = np.exp(fit.intercept + fit.slope * x)
    else:
        fit = LinearFit.from_data(x, y)
        fitted = fit.intercept + fit.slope * x
    summary = {"form": ft["form"], "points": len(x), **_fit_dict(fit)}
    summary.update(_check(fit.slope, ft.get("expected"), ft.get("tolerance")))
    write_csv(out / "fit.csv", [ft["x"], ft["y"], "fitted"], zip(x, y, fitted))
    if plots:
        from . import plotting

        plotting.plot_fit(x, y, fitted, out / "fit.png", log_x=ft["form"] == "power", log_y=ft["form"] != "linear")
    return summary


HANDLERS = {
    "gap": cmd_gap,
    "spectrum": cmd_spectrum,
    "schedule": cmd_schedule,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "table1": cmd_table1,
    "decay": cmd_decay,
    "degeneracy": cmd_degeneracy,
    "criterion": cmd_criterion,
    "fit": cmd_fit,
}


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run one subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = None
    try:
        cfg = load_config(args.config, _overrides(args))
        out = Path(cfg["run"]["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}_config.toml").write_text(dump_config(cfg), encoding="utf-8")
        summary = HANDLERS[args.command](cfg, out, cfg["run"]["plots"])
        write_json(out / f"{args.command}_summary.json", summary)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if out is not None:
            (out / "diagnostic.txt").write_text(
                f"subcommand: {args.command}\n{exc}\n\n{traceback.format_exc()}", encoding="utf-8"
            )
        return 3
    except ValueError as exc:
        # invalid model or schedule parameters surface as ValueError
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
