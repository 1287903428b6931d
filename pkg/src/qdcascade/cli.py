"""Command-line entry point: ``python -m qdcascade``.

Exit status is 0 on success. On failure a one-line JSON object with
``status``, ``reason`` and, where known, ``step`` is written to stderr and
the exit status is 2 (usage and configuration errors) or 1 (run failures).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .analysis.correlation import correlate
from .analysis.fitting import fit_lifetimes
from .analysis.tomography import corrected_g2, tomography_pipeline
from .analysis.tpi import analyze_tpi
from .config import PRESETS, ConfigError, RunConfig, build_config, parse_config, preset_fields
from .constants import G2_RESIDUAL
from .experiments import LineshapeModel, g1_curve, run_hbt, run_lifetime, run_power_series, run_tomography, run_tpi
from .io import FormatError, canonical_json, read_histogram, write_histogram, write_table, write_timetags
from .reproduce import HBT_BIN, RABI_GRID, TPI_BIN, StepError, reproduce_paper


class CliError(Exception):
    def __init__(self, reason: str, code: int = 1, step: str | None = None):
        super().__init__(reason)
        self.code = code
        self.step = step


def _config(args, experiment: str) -> RunConfig:
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = {}
    for key in ("seed", "workers", "periods", "channel", "basis"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "cross", False):
        overrides["co_polarized"] = False
        overrides["parallel"] = False
    if args.out:
        overrides["out"] = args.out
    if text:
        cfg = parse_config(text + f"\nexperiment = {experiment}\n" if "experiment" not in text else text, preset=args.preset)
        if cfg.experiment != experiment:
            raise ConfigError(f"config describes {cfg.experiment!r}, command asks for {experiment!r}", key="experiment")
        return _override(cfg, overrides)
    return build_config({"experiment": experiment, **overrides}, preset=args.preset)


def _override(cfg: RunConfig, o: dict) -> RunConfig:
    ec = cfg.experiment_config
    ec = replace(ec, **{k: o[k] for k in ("seed", "workers") if k in o})
    if "periods" in o:
        ec = ec.with_periods(o["periods"])
    rest = {k: o[k] for k in ("channel", "basis", "co_polarized", "parallel", "out") if k in o}
    return replace(cfg, experiment_config=ec, **rest)


def cmd_simulate(args) -> dict:
    cfg = _config(args, args.experiment)
    ec = cfg.experiment_config
    os.makedirs(cfg.out, exist_ok=True)
    written = []

    def dump_pair(streams, stem, bin_width, window):
        for s in streams:
            path = os.path.join(cfg.out, f"{stem}_det{s.meta['detector']}.csv")
            write_timetags(s, path)
            written.append(path)
        h = correlate(streams[0], streams[1], bin_width, window, period=ec.period)
        h.meta = {k: v for k, v in streams[0].meta.items() if k != "detector"}
        path = os.path.join(cfg.out, f"{stem}_hist.csv")
        write_histogram(h, path)
        written.append(path)

    exp = cfg.experiment
    if exp == "hbt":
        dump_pair(run_hbt(ec, cfg.channel), f"hbt_{cfg.channel}", cfg.bin_width, cfg.window)
    elif exp == "tomography":
        tag = "co" if cfg.co_polarized else "cross"
        dump_pair(run_tomography(ec, cfg.basis, cfg.co_polarized), f"tomo_{cfg.basis}_{tag}", cfg.bin_width, cfg.window)
    elif exp == "tpi":
        tag = "parallel" if cfg.parallel else "cross"
        dump_pair(run_tpi(ec, cfg.channel, cfg.parallel), f"tpi_{cfg.channel}_{tag}", TPI_BIN, 3 * ec.period + 2000)
    elif exp == "lifetime":
        h = run_lifetime(ec, cfg.channel)
        h.meta["dark_rate"] = ec.detectors[0].dark_rate
        h.meta["jitter_sigma"] = ec.detectors[0].jitter_sigma
        path = os.path.join(cfg.out, f"lifetime_{cfg.channel}_hist.csv")
        write_histogram(h, path)
        written.append(path)
    elif exp == "power":
        s = run_power_series(ec, RABI_GRID, cfg.pulses_per_point)
        path = os.path.join(cfg.out, "power_series.csv")
        write_table(path, {"theta_rad": s.theta, "I_XX": s.i_xx, "I_X": s.i_x}, {"pulses_per_point": s.pulses_per_point})
        written.append(path)
    elif exp == "coherence":
        cols = {}
        for ch, kind, t2 in (("X", "gaussian", ec.source.t2_x), ("XX", "exponential", ec.source.t2_xx)):
            tau, y = g1_curve(LineshapeModel(kind, t2), np.linspace(0, 3 * t2, 41))
            cols[f"tau_{ch}"], cols[f"g1_{ch}"] = tau, y
        path = os.path.join(cfg.out, "coherence.csv")
        write_table(path, cols)
        written.append(path)
    else:
        raise CliError("use the 'reproduce' command for the full run", code=2, step="simulate")
    return {"experiment": exp, "files": written, "seed": ec.seed, "config_sha256": cfg.digest()}


def _dark(args, h) -> float:
    if args.dark_rate is not None:
        return args.dark_rate
    if "dark_rate" in h.meta:
        return float(h.meta["dark_rate"])
    raise CliError("dark rate unknown: pass --dark-rate", code=2, step="analyze")


def cmd_analyze(args) -> dict:
    hs = [read_histogram(p) for p in args.files]
    kind = args.kind or hs[0].meta.get("experiment")
    if kind == "hbt":
        out = {}
        for path, h in zip(args.files, hs):
            raw, cor, err = corrected_g2(h, _dark(args, h))
            out[os.path.basename(path)] = {"g2_raw": raw, "g2_corrected": cor, "g2_corrected_error": err}
        return out
    if kind == "tomography":
        by_key = {(h.meta["basis"], bool(h.meta["co_polarized"])): h for h in hs}
        r = tomography_pipeline(by_key, _dark(args, hs[0]))
        return {"contrasts": r.contrasts, "contrast_errors": r.contrast_errors, "fidelity": r.fidelity, "fidelity_error": r.fidelity_error}
    if kind == "tpi":
        par = [h for h in hs if h.meta.get("parallel")]
        crs = [h for h in hs if not h.meta.get("parallel")]
        if len(par) != 1 or len(crs) != 1:
            raise CliError("tpi analysis needs one parallel and one cross-polarized histogram", code=2, step="analyze")
        ch = par[0].meta.get("channel", "XX")
        reps = analyze_tpi(par[0], crs[0], ch, _dark(args, par[0]), args.mode_overlap, G2_RESIDUAL[ch])
        return {m: {"raw": v.raw, "apd_corrected": v.apd_corrected, "fully_corrected": v.fully_corrected, "raw_error": v.raw_error}
                for m, v in reps.items()}
    if kind == "lifetime":
        by_ch = {h.meta.get("channel"): h for h in hs}
        sigma = float(hs[0].meta.get("jitter_sigma", 0.0)) if args.irf_sigma is None else args.irf_sigma
        fit = fit_lifetimes(by_ch.get("XX"), by_ch.get("X"), irf_sigma=sigma)
        return {"model": fit.model, "params": fit.params, "errors": fit.errors}
    raise CliError(f"cannot analyze experiment kind {kind!r}", code=2, step="analyze")


def cmd_reproduce(args) -> dict:
    report = reproduce_paper(args.seed or 0, args.out or "reproduce_out", args.workers or 1, args.scale,
                             progress=lambda s: print(f"running {s}", file=sys.stderr))
    failed = [f"{r['id']} {r['name']}" for r in report.acceptance if r["binding"] and not r["passed"]]
    if failed:
        raise CliError(f"acceptance rows failed: {'; '.join(failed)}", code=1, step="acceptance")
    return {"status_rows": len(report.acceptance), "out": args.out or "reproduce_out", "config_sha256": report.provenance["config_sha256"]}


def cmd_preset(args) -> dict:
    if args.action == "list":
        return {name: desc for name, (_, desc) in PRESETS.items()}
    if not args.name:
        raise CliError("preset show needs a name", code=2)
    try:
        return preset_fields(args.name)
    except ConfigError as exc:
        raise CliError(str(exc), code=2) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdcascade", description="Quantum-dot cascade photon source simulator.")
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    common.add_argument("--preset", default=None, choices=sorted(PRESETS))
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one virtual experiment and write time tags and a histogram")
    s.add_argument("experiment", choices=["hbt", "tomography", "tpi", "lifetime", "power", "coherence"])
    s.add_argument("--config", help="key=value run description")
    s.add_argument("--periods", type=int)
    s.add_argument("--channel", choices=["X", "XX"])
    s.add_argument("--basis", choices=["linear", "diagonal", "circular"])
    s.add_argument("--cross", action="store_true", help="cross-polarized setting (tomography, tpi)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", parents=[common], help="analyze histogram files written by 'simulate'")
    a.add_argument("files", nargs="+")
    a.add_argument("--kind", choices=["hbt", "tomography", "tpi", "lifetime"])
    a.add_argument("--dark-rate", type=float, help="dark count rate per detector, counts/s")
    a.add_argument("--mode-overlap", type=float, default=0.95)
    a.add_argument("--irf-sigma", type=float)
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("reproduce", parents=[common], help="run every measurement and write report.json")
    r.add_argument("--scale", type=float, default=1.0, help="multiplier on simulated periods")
    r.set_defaults(func=cmd_reproduce)

    pr = sub.add_parser("preset", help="list or show parameter presets")
    pr.add_argument("action", choices=["list", "show"])
    pr.add_argument("name", nargs="?")
    pr.set_defaults(func=cmd_preset)
    return p


def _fail(reason: str, code: int, step: str | None) -> int:
    msg = {"status": "error", "reason": reason}
    if step:
        msg["step"] = step
    print(json.dumps(msg, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "preset", None) is None and args.command in ("simulate",):
        args.preset = "desk"
    try:
        result = args.func(args)
    except CliError as exc:
        return _fail(str(exc), exc.code, exc.step)
    except ConfigError as exc:
        return _fail(str(exc), 2, "config")
    except FormatError as exc:
        return _fail(str(exc), 2, "read")
    except StepError as exc:
        return _fail(str(exc), 1, exc.step)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}", 1, args.command)
    sys.stdout.write(canonical_json({"status": "ok", "result": result}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
