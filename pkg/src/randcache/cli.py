"""Command-line driver: analysis sweeps, optimization, simulation and figure reproduction.

Config files are JSON::

    {
      "net": {"lambda_b": 1e-4, "lambda_u": 1e-3, "beta": 4, "N": 2, "tau": 1.0,
              "P_tx": 6.3, "sigma_n_dbm": -97.5},
      "content": {"F": 8, "gamma": 1.0, "C": 2, "B": 2},
      "cached": [5, 6, 7, 8],
      "placement": [0.8, 0.6, 0.4, 0.2],
      "schemes": ["exact_opt", "asym_opt", "MPC", "UC", "IID"],
      "sweep": {"param": "N", "values": [1, 2, 4, 8]},
      "engine": "exact",
      "sim": {"realizations": 10000, "seed": 0, "metric": "SIR", "threads": 1},
      "optimizer": {"max_iters": 10000},
      "output": "out.csv"
    }

``engine`` may be a single name or a comma-separated list.  Sweepable
parameters are the fields of ``net`` and ``content`` plus ``tau_db``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import analytic, montecarlo, optimize
from .analytic import NetworkParams, dbm_to_watts
from .content import CachePlacement, ContentParams, FileAllocation
from .montecarlo import SimConfig
from .optimize import OptimizerConfig
from .specfun import DomainError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
ENGINES = ("exact", "upper", "asymptotic", "montecarlo")
SCHEMES = ("exact_opt", "asym_opt", "MPC", "UC", "IID", "given")
FIGURES = ("2a", "2b", "3", "4", "5a", "5b", "6a", "6b")
SCALES = {"desk": 10_000, "full": 1_000_000}
NET_KEYS = {"lambda_b", "lambda_u", "beta", "N", "tau", "P_tx", "sigma_n2"}
CONTENT_KEYS = {"F", "gamma", "C", "B"}
SWEEPABLE = NET_KEYS | CONTENT_KEYS | {"tau_db"}
INT_PARAMS = {"N", "F", "C", "B"}


class ConfigError(DomainError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    net: NetworkParams
    content: ContentParams
    cached: Optional[tuple] = None
    placement: Optional[tuple] = None
    schemes: tuple = ("asym_opt",)
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    engines: tuple = ("exact",)
    sim: SimConfig = field(default_factory=lambda: SimConfig(SCALES["desk"]))
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output: Optional[str] = None


# ---------------------------------------------------------------- config


def _net_from(d: dict) -> NetworkParams:
    d = dict(d)
    if "sigma_n_dbm" in d:
        d["sigma_n2"] = dbm_to_watts(d.pop("sigma_n_dbm"))
    if "tau_db" in d:
        d["tau"] = 10.0 ** (d.pop("tau_db") / 10.0)
    unknown = set(d) - NET_KEYS
    if unknown:
        raise ConfigError(f"unknown net keys: {sorted(unknown)}")
    missing = {"lambda_b", "lambda_u", "beta", "N", "tau"} - set(d)
    if missing:
        raise ConfigError(f"missing net keys: {sorted(missing)}")
    return NetworkParams(**d)


def _content_from(d: dict) -> ContentParams:
    unknown = set(d) - CONTENT_KEYS
    if unknown:
        raise ConfigError(f"unknown content keys: {sorted(unknown)}")
    missing = CONTENT_KEYS - set(d)
    if missing:
        raise ConfigError(f"missing content keys: {sorted(missing)}")
    return ContentParams(**d)


def _dataclass_from(cls, d: dict, **extra):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**{**d, **extra})


def parse_engines(spec) -> tuple:
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    items = tuple(s.strip() for s in items if s.strip())
    bad = [e for e in items if e not in ENGINES]
    if bad or not items:
        raise ConfigError(f"unknown engine(s) {bad}; valid: {', '.join(ENGINES)}")
    return items


def load_config(raw: dict) -> ExperimentConfig:
    """Validate a JSON-like mapping and build an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {"net", "content", "cached", "placement", "schemes", "sweep", "engine", "sim", "optimizer", "output"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "net" not in raw or "content" not in raw:
        raise ConfigError("config needs 'net' and 'content' sections")
    try:
        net = _net_from(raw["net"])
        content = _content_from(raw["content"])
        sim_raw = dict(raw.get("sim", {}))
        sim_raw.setdefault("realizations", SCALES["desk"])
        sim = _dataclass_from(SimConfig, sim_raw)
        opt = _dataclass_from(OptimizerConfig, raw.get("optimizer", {}))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cached = tuple(raw["cached"]) if "cached" in raw else None
    placement = tuple(float(v) for v in raw["placement"]) if "placement" in raw else None
    if (cached is None) != (placement is None):
        raise ConfigError("'cached' and 'placement' must be given together")
    if cached is not None and len(cached) != len(placement):
        raise ConfigError("'cached' and 'placement' differ in length")
    schemes = tuple(raw.get("schemes", ("given",) if cached is not None else ("asym_opt",)))
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ConfigError(f"unknown scheme(s) {bad}; valid: {', '.join(SCHEMES)}")
    if "given" in schemes and cached is None:
        raise ConfigError("scheme 'given' needs 'cached' and 'placement'")
    sweep = raw.get("sweep")
    param, values = None, ()
    if sweep is not None:
        if not isinstance(sweep, dict) or "param" not in sweep or "values" not in sweep:
            raise ConfigError("sweep needs 'param' and 'values'")
        param = sweep["param"]
        if param not in SWEEPABLE:
            raise ConfigError(f"sweep parameter {param!r} does not exist; valid: {sorted(SWEEPABLE)}")
        values = tuple(sweep["values"])
    engines = parse_engines(raw.get("engine", "exact"))
    cfg = ExperimentConfig(net, content, cached, placement, schemes, param, values, engines, sim, opt, raw.get("output"))
    for v in values:
        point_params(cfg, v)  # fail early on an invalid sweep value
    return cfg


def point_params(cfg: ExperimentConfig, value) -> tuple[NetworkParams, ContentParams]:
    """Network and content parameters at one sweep value."""
    net, content = cfg.net, cfg.content
    if cfg.sweep_param is None:
        return net, content
    p = cfg.sweep_param
    if p in INT_PARAMS:
        if float(value) != int(value):
            raise ConfigError(f"sweep parameter {p} needs integer values, got {value}")
        value = int(value)
    try:
        if p == "tau_db":
            return net.replace(tau=10.0 ** (float(value) / 10.0)), content
        if p in NET_KEYS:
            return net.replace(**{p: value}), content
        return net, content.replace(**{p: value})
    except DomainError as exc:
        raise ConfigError(f"sweep value {p}={value}: {exc}") from exc


# ---------------------------------------------------------------- evaluation


def _given(cfg, content):
    alloc = FileAllocation.from_cached(cfg.cached, content.F)
    return alloc, CachePlacement.from_vector(list(cfg.cached), list(cfg.placement))


def evaluate(alloc, placement, net, content, engine, sim) -> dict:
    """STP, ASE and per-file STP terms under one engine."""
    if engine == "montecarlo":
        est = montecarlo.simulate_stp(alloc, placement, net, content, sim)
        factor = net.lambda_b * analytic.PER_KM2 * math.log2(1.0 + net.tau)
        per_file = [h / r if r else float("nan") for r, h in (est.per_file[f] for f in range(1, content.F + 1))]
        return {"stp": est.mean, "ase": est.mean * factor, "stp_stderr": est.stderr,
                "ase_stderr": est.stderr * factor, "per_file": per_file, "warning": est.warning}
    fn = {
        "exact": analytic.stp_total,
        "upper": analytic.stp_total_upper,
        "asymptotic": analytic.stp_total_upper_asymptotic,
    }[engine]
    res = fn(alloc, placement, net, content)
    return {"stp": res.total_stp, "ase": res.ase, "per_file": res.per_file(content.F)}


def solve(scheme, cfg, net, content):
    """Return ``(Solution, content used for evaluation)``."""
    if scheme == "given":
        alloc, placement = _given(cfg, content)
        return optimize.Solution(alloc, placement, float("nan"), scheme="given"), content
    if scheme == "exact_opt":
        return optimize.optimize_full(net, content, cfg.optimizer), content
    if scheme == "asym_opt":
        return optimize.optimize_asymptotic(net, content, cfg.optimizer), content
    sol = optimize.baseline_scheme(scheme, net, content)
    return sol, sol.content or content


def _points(cfg):
    return list(cfg.sweep_values) if cfg.sweep_param else [None]


def _sweep_header(cfg):
    return [cfg.sweep_param or "point"]


def _sweep_cell(cfg, v, i):
    return v if cfg.sweep_param else i


def cmd_analyze(cfg: ExperimentConfig):
    """One row per sweep value: STP, ASE and per-file STP for each engine."""
    if cfg.cached is None:
        raise ConfigError("analyze needs 'cached' and 'placement'")
    header = _sweep_header(cfg)
    for e in cfg.engines:
        header += [f"{e}_stp", f"{e}_ase"]
        if e == "montecarlo":
            header += [f"{e}_stp_stderr", f"{e}_ase_stderr"]
        header += [f"{e}_file_{f}" for f in range(1, cfg.content.F + 1)]
    rows = []
    for i, v in enumerate(_points(cfg)):
        net, content = point_params(cfg, v)
        alloc, placement = _given(cfg, content)
        row = [_sweep_cell(cfg, v, i)]
        for e in cfg.engines:
            r = evaluate(alloc, placement, net, content, e, cfg.sim)
            row += [r["stp"], r["ase"]]
            if e == "montecarlo":
                row += [r["stp_stderr"], r["ase_stderr"]]
            row += list(r["per_file"])
        rows.append(row)
    return header, rows


def cmd_optimize(cfg: ExperimentConfig):
    """One row per sweep value with the ASE of each scheme under each engine.

    Returns ``(header, rows, records)``; ``records`` describe every solution.
    """
    header = _sweep_header(cfg)
    for s in cfg.schemes:
        for e in cfg.engines:
            header.append(f"{s}_{e}_ase")
            if e == "montecarlo":
                header.append(f"{s}_{e}_ase_stderr")
    rows, records = [], []
    for i, v in enumerate(_points(cfg)):
        net, content = point_params(cfg, v)
        row = [_sweep_cell(cfg, v, i)]
        for s in cfg.schemes:
            sol, eval_content = solve(s, cfg, net, content)
            for e in cfg.engines:
                r = evaluate(sol.alloc, sol.placement, net, eval_content, e, cfg.sim)
                row.append(r["ase"])
                if e == "montecarlo":
                    row.append(r["ase_stderr"])
            records.append({
                "sweep": row[0], "scheme": s,
                "cached": list(sol.alloc.cached),
                "t": [sol.placement.t.get(f, 0.0) for f in sol.alloc.cached],
                "objective": sol.objective, "iterations": sol.iterations, "converged": sol.converged,
            })
        rows.append(row)
    return header, rows, records


def cmd_simulate(cfg: ExperimentConfig):
    """Monte Carlo next to the exact expression, with a 2-stderr agreement flag."""
    if cfg.cached is None:
        raise ConfigError("simulate needs 'cached' and 'placement'")
    header = _sweep_header(cfg) + [
        "montecarlo_stp", "montecarlo_stp_stderr", "montecarlo_ase", "montecarlo_ase_stderr",
        "exact_stp", "exact_ase", "within_2se",
    ]
    rows = []
    for i, v in enumerate(_points(cfg)):
        net, content = point_params(cfg, v)
        alloc, placement = _given(cfg, content)
        mc = evaluate(alloc, placement, net, content, "montecarlo", cfg.sim)
        ex = evaluate(alloc, placement, net, content, "exact", cfg.sim)
        ok = abs(mc["stp"] - ex["stp"]) < 2.0 * mc["stp_stderr"]
        rows.append([_sweep_cell(cfg, v, i), mc["stp"], mc["stp_stderr"], mc["ase"], mc["ase_stderr"],
                     ex["stp"], ex["ase"], int(ok)])
    return header, rows


# ---------------------------------------------------------------- figures


FIG2_CONTENT = {"F": 8, "gamma": 1.0, "C": 2, "B": 2}
FIG2_PLACEMENT = {"cached": [5, 6, 7, 8], "placement": [0.8, 0.6, 0.4, 0.2]}
FIG56_NET = {"lambda_b": 1e-4, "lambda_u": 5e-3, "beta": 4, "N": 8, "tau": 1.0}
FIG56_CONTENT = {"F": 500, "gamma": 0.6, "C": 30, "B": 20}
FIG4_N = (1, 4)
FIG3_N = (1, 4)


def figure_configs(fig_id: str, scale: str, seed: int = 0, threads: int = 1) -> list[tuple[str, dict]]:
    """``(label, raw config)`` pairs whose results make up one figure."""
    sim = {"realizations": SCALES[scale], "seed": seed, "threads": threads}
    base_net = {"lambda_b": 1e-4, "lambda_u": 1e-3, "beta": 4, "N": 1, "tau": 1.0}
    lambda_u_grid = [k * 1e-3 for k in range(1, 11)]
    if fig_id == "2a":
        return [("", {"net": base_net, "content": FIG2_CONTENT, **FIG2_PLACEMENT,
                      "sweep": {"param": "N", "values": list(range(1, 9))},
                      "engine": "exact,upper,montecarlo", "sim": {**sim, "metric": "SINR"}})]
    if fig_id == "2b":
        return [(f"N{n}_", {"net": {**base_net, "N": n}, "content": FIG2_CONTENT, **FIG2_PLACEMENT,
                            "sweep": {"param": "tau_db", "values": list(range(-10, 21, 5))},
                            "engine": "exact,upper,montecarlo", "sim": {**sim, "metric": "SINR"}})
                for n in (1, 2, 4, 8)]
    if fig_id == "3":
        return [(f"N{n}_", {"net": {**base_net, "N": n}, "content": FIG2_CONTENT, **FIG2_PLACEMENT,
                            "sweep": {"param": "lambda_u", "values": lambda_u_grid},
                            "engine": "exact,upper,asymptotic,montecarlo", "sim": {**sim, "metric": "SINR"}})
                for n in FIG3_N]
    if fig_id == "4":
        return [(f"N{n}_", {"net": {**base_net, "N": n}, "content": {"F": 6, "gamma": 0.6, "C": 2, "B": 2},
                            "schemes": ["exact_opt", "asym_opt"],
                            "sweep": {"param": "lambda_u", "values": lambda_u_grid}, "engine": "exact"})
                for n in FIG4_N]
    sweeps = {
        "5a": ("N", list(range(1, 11))),
        "5b": ("gamma", [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4]),
        "6a": ("C", list(range(10, 61, 10))),
        "6b": ("B", list(range(10, 61, 10))),
    }
    if fig_id in sweeps:
        param, values = sweeps[fig_id]
        engines = "exact" if scale == "desk" else "exact,montecarlo"
        return [("", {"net": FIG56_NET, "content": FIG56_CONTENT,
                      "schemes": ["asym_opt", "MPC", "IID", "UC"],
                      "sweep": {"param": param, "values": values}, "engine": engines,
                      "sim": {**sim, "metric": "SINR"}})]
    raise ConfigError(f"unknown figure id {fig_id!r}; valid: {', '.join(FIGURES)}")


def cmd_reproduce_figure(fig_id: str, scale: str = "desk", seed: int = 0, threads: int = 1):
    """Merge the per-series tables of a figure into one wide table."""
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; valid: {', '.join(SCALES)}")
    header, rows = None, None
    for label, raw in figure_configs(fig_id, scale, seed, threads):
        cfg = load_config(raw)
        h, r = cmd_optimize(cfg)[:2] if fig_id in ("4", "5a", "5b", "6a", "6b") else cmd_analyze(cfg)
        if fig_id in ("2a", "2b", "3"):
            keep = [j for j, name in enumerate(h) if j == 0 or "_file_" not in name]
            h = [h[j] for j in keep]
            r = [[row[j] for j in keep] for row in r]
        if header is None:
            header = [h[0]] + [label + c for c in h[1:]]
            rows = [list(row) for row in r]
        else:
            header += [label + c for c in h[1:]]
            for acc, row in zip(rows, r):
                acc.extend(row[1:])
    return header, rows


def gnuplot_script(csv_name: str, header: list[str], title: str) -> str:
    """gnuplot commands plotting every numeric column against the first."""
    series = [j for j, name in enumerate(header[1:], start=2) if "stderr" not in name]
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead outside",
        f"set title '{title}'",
        f"set xlabel '{header[0]}'",
        "set grid",
    ]
    if header[0] == "lambda_u":
        lines.append("set format x '%.0e'")
    plots = [f"'{csv_name}' using 1:{j} with linespoints" for j in series]
    lines.append("plot " + ", \\\n     ".join(plots))
    lines.append("pause -1")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- output


def format_cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(header, rows, out: Optional[str]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_cell(v) for v in row])
    text = buf.getvalue()
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _read_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _apply_overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    sim = dict(raw.get("sim", {}))
    if args.seed is not None:
        sim["seed"] = args.seed
    if args.threads is not None:
        sim["threads"] = args.threads
        raw["optimizer"] = {**raw.get("optimizer", {}), "threads": args.threads}
    if args.realizations is not None:
        sim["realizations"] = args.realizations
    elif args.scale is not None:
        sim["realizations"] = SCALES[args.scale]
    raw["sim"] = sim
    if args.engine is not None:
        raw["engine"] = args.engine
    if args.out is not None:
        raw["output"] = args.out
    return raw


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="64-bit Monte Carlo seed")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--out", metavar="PATH", help="output CSV ('-' for stdout)")
    common.add_argument("--engine", help=f"comma-separated subset of {', '.join(ENGINES)}")
    common.add_argument("--scale", choices=sorted(SCALES), help="realization budget preset")
    common.add_argument("--realizations", type=int, help="Monte Carlo realizations")

    p = argparse.ArgumentParser(prog="randcache", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="STP/ASE of a given placement")
    sub.add_parser("optimize", parents=[common], help="optimized and baseline schemes")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo vs exact")
    fig = sub.add_parser("reproduce-figure", parents=[common], help="regenerate a figure's data")
    fig.add_argument("figure", choices=FIGURES, help="figure id")
    return p


def _run(args) -> int:
    if args.command == "reproduce-figure":
        scale = args.scale or "desk"
        header, rows = cmd_reproduce_figure(args.figure, scale, args.seed or 0, args.threads or 1)
        out = args.out or f"fig{args.figure}.csv"
        write_csv(header, rows, out)
        if out != "-":
            script = Path(out).with_suffix(".gp")
            script.write_text(gnuplot_script(Path(out).name, header, f"figure {args.figure}"), encoding="utf-8")
        return EXIT_OK
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    if args.realizations is not None and args.realizations < 1:
        raise ConfigError("realizations must be >= 1")
    cfg = load_config(_apply_overrides(_read_config(args.config), args))
    if args.command == "analyze":
        header, rows = cmd_analyze(cfg)
    elif args.command == "simulate":
        header, rows = cmd_simulate(cfg)
    else:
        header, rows, records = cmd_optimize(cfg)
    write_csv(header, rows, cfg.output)
    if args.command == "optimize" and cfg.output and cfg.output != "-":
        Path(cfg.output).with_suffix(".json").write_text(json.dumps(records, indent=2), encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
