"""Command-line entry point: ``boostripple <command> [options]``.

Errors exit with status 1 (2 for usage errors) and a single
``error: <message>`` line on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis
from .observer import design
from .plant import BoostParams, ConstantCurrent, Plant, PlantState
from .simulation import (FEEDBACK_MODES, PRESETS, ConfigError, ScenarioConfig, load_config, run)
from .tuner import SearchFailure, TuneSpec, coordinate_search


class CliError(Exception):
    pass


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _scenario(args) -> ScenarioConfig:
    if args.config and args.preset:
        raise CliError("use either --config or --preset, not both")
    if args.config:
        return load_config(args.config)
    return PRESETS[args.preset or "paper-default"]()


def cmd_design_observer(args) -> int:
    if not 0 < args.rho < 1:
        raise CliError("rho must be in (0,1)")
    beta = 2 * math.pi * args.freq
    T = 1.0 / args.sample_rate
    try:
        cfg = design(beta, T, args.rho)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _dump({
        "beta": beta,
        "T": T,
        "rho": args.rho,
        "S_d": cfg.S_d.tolist(),
        "L_d": cfg.L_d.tolist(),
        "placement_residuals": cfg.placement_residuals().tolist(),
    }, args.output)
    return 0


def summarize(trace: analysis.Trace, window=None) -> dict:
    """Metrics reported after a simulation run (recomputable from the CSV)."""
    window = window or trace.default_window()
    m = trace.mask(window)
    v = analysis.ripple_metrics(trace, "v_dc", window)
    i = analysis.ripple_metrics(trace, "i_L", window)
    return {
        "samples": len(trace),
        "final_mean_v_dc": float(np.mean(trace["v_dc"][m])),
        "v_dc": v.to_json(),
        "i_L": i.to_json(),
    }


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    if args.duration is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, duration=args.duration))
    trace_path = args.trace or cfg.outputs.trace
    metrics_path = args.metrics or cfg.outputs.metrics
    res = run(cfg, feedback=args.feedback)
    if trace_path:
        res.trace.to_csv(trace_path)
    if res.diverged:
        raise CliError(f"{res.reason} at t={res.trace.t[-1] if len(res.trace) else 0.0:.6g} s"
                       + (f"; partial trace written to {trace_path}" if trace_path else ""))
    summary = {"feedback": args.feedback, **summarize(res.trace)}
    if metrics_path:
        _dump(summary, metrics_path)
    print(json.dumps(summary if not metrics_path else {
        "feedback": args.feedback,
        "final_mean_v_dc": summary["final_mean_v_dc"],
        "v_dc_p2p_lowpass": summary["v_dc"]["p2p_lowpass"],
        "i_L_p2p_raw": summary["i_L"]["p2p_raw"],
    }, indent=2))
    return 0


def _window(text: str | None):
    if text is None:
        return None
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise CliError(f"--window must look like a:b, got {text!r}") from exc
    return (a, b)


def cmd_analyze(args) -> int:
    trace = analysis.Trace.from_csv(args.trace)
    window = _window(args.window)
    if args.column not in trace.columns:
        raise CliError(f"column {args.column!r} not in trace")
    metrics = analysis.ripple_metrics(trace, args.column, window, args.fundamental, args.f_pwm)
    if args.baseline:
        base = analysis.ripple_metrics(analysis.Trace.from_csv(args.baseline), args.column,
                                       window, args.fundamental, args.f_pwm)
        field = "p2p_lowpass" if args.column == "v_dc" else "p2p_raw"
        metrics.reduction_vs_baseline = analysis.reduction_ratio(getattr(base, field),
                                                                 getattr(metrics, field))
    _dump(metrics.to_json(), args.output)
    return 0


def simulated_switching_ripple(v_in: float, duty: float, f_s: float, L: float,
                               i_out: float = 1.0, C: float = 470e-6, esr: float = 0.0) -> float:
    """Inductor current swing over one open-loop period started at the ideal operating point."""
    p = BoostParams(v_in=v_in, L=L, C=C, esr=esr, f_pwm=f_s, substeps_per_period=16)
    v_out = v_in / (1.0 - duty)
    i_avg = i_out / (1.0 - duty)
    start = i_avg - 0.5 * v_in * duty / (f_s * L)
    plant = Plant(p, ConstantCurrent(i_out), PlantState(i_L=max(start, 0.0), v_C=v_out))
    m = plant.step(duty)
    return float(m[3] - m[4])


def cmd_calc_ripple(args) -> int:
    try:
        # no on-time means no capacitor discharge interval; the sizing formula needs duty > 0
        c_min = (None if args.duty == 0 else
                 analysis.min_output_capacitance(args.iout, args.duty, args.fs, args.dv))
        report = {
            "c_out_min": c_min,
            "dv_esr": analysis.esr_ripple(args.esr, args.iout, args.duty,
                                          analysis.inductor_ripple_max(args.vin, args.duty, args.fs, args.L)),
            "di_est": list(analysis.inductor_ripple_estimate(args.iout, args.vout, args.vin)),
            "di_max": analysis.inductor_ripple_max(args.vin, args.duty, args.fs, args.L),
        }
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    sim = simulated_switching_ripple(args.vin, args.duty, args.fs, args.L, args.iout, args.C)
    report["di_max_simulated"] = sim
    ref = report["di_max"]
    report["di_max_check"] = abs(sim - ref) <= 0.05 * ref if ref > 0 else sim < 1e-12
    _dump(report, args.output)
    return 0


def cmd_tune(args) -> int:
    cfg = _scenario(args)
    spec = TuneSpec(scenario=cfg, target=args.target, grid_points=args.grid_points,
                    passes=args.passes, workers=args.workers)
    try:
        result = coordinate_search(spec)
    except SearchFailure as exc:
        raise CliError(str(exc)) from exc
    _dump(result.to_json(), args.output)
    if args.log:
        Path(args.log).write_text(json.dumps(result.log, indent=1) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boostripple", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-observer", help="discretize the harmonic model and place observer poles")
    p.add_argument("--freq", type=float, default=400.0, help="fundamental ripple frequency [Hz]")
    p.add_argument("--sample-rate", type=float, default=18000.0, help="[Hz]")
    p.add_argument("--rho", type=float, default=0.99)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_design_observer)

    def scenario_args(p):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--preset", choices=sorted(PRESETS))

    p = sub.add_parser("simulate", help="closed-loop simulation, CSV trace + summary")
    scenario_args(p)
    p.add_argument("--feedback", choices=FEEDBACK_MODES, default="voltage+current")
    p.add_argument("--duration", type=float)
    p.add_argument("--trace", help="CSV output (overrides outputs.trace)")
    p.add_argument("--metrics", help="metrics JSON output (overrides outputs.metrics)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="ripple metrics of a trace column")
    p.add_argument("--trace", required=True)
    p.add_argument("--column", default="v_dc")
    p.add_argument("--window", help="a:b in seconds (default: last 40%%)")
    p.add_argument("--fundamental", type=float, help="[Hz]; default from the beta column")
    p.add_argument("--f-pwm", type=float, default=analysis.DEFAULT_F_PWM)
    p.add_argument("--baseline", help="trace to compute the reduction against")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calc-ripple", help="capacitor / inductor ripple design formulas")
    p.add_argument("--vin", type=float, default=13.9)
    p.add_argument("--vout", type=float, default=24.0)
    p.add_argument("--iout", type=float, default=2.65)
    p.add_argument("--duty", type=float, default=0.55)
    p.add_argument("--fs", type=float, default=18000.0)
    p.add_argument("--L", type=float, default=0.00033)
    p.add_argument("--C", type=float, default=470e-6)
    p.add_argument("--esr", type=float, default=0.1)
    p.add_argument("--dv", type=float, default=0.24)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_calc_ripple)

    p = sub.add_parser("tune", help="coordinate search for harmonic feedback gains")
    scenario_args(p)
    p.add_argument("--target", choices=("voltage", "current"), default="voltage")
    p.add_argument("--grid-points", type=int, default=21)
    p.add_argument("--passes", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", "-o")
    p.add_argument("--log", help="write the evaluation log here")
    p.set_defaults(func=cmd_tune)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, ValueError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
