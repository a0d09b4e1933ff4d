"""Command-line interface: ``missile-afl {run,batch,identify,analyze,compare}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import AutopilotError, ConfigError
from .linear import linearize, transmission_zeros, trim
from .outer_loop import identify_inner_model, synthesize_gains
from .sim import (
    ScenarioConfig,
    SimTrace,
    compute_metrics,
    resolve_scenario,
    run_scenario,
)

log = logging.getLogger("missile_afl")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_UNSETTLED = 0, 2, 3, 4

# Applied by --uncertainty on when the scenario carries no perturbation of its own.
STANDARD_UNCERTAINTY = {
    "enabled": True,
    "delta_pert": 0.3,
    "dCZ": {"bias": 0.02, "amplitude": 0.1, "alpha_ref": 0.1},
    "dCM": {"bias": 0.05, "amplitude": 0.2, "alpha_ref": 0.1},
}


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    over = {}
    if getattr(args, "dt", None) is not None:
        over["sim.dt"] = args.dt
    if getattr(args, "duration", None) is not None:
        over["sim.duration"] = args.duration
    if getattr(args, "seed", None) is not None:
        over["sim.seed"] = args.seed
    if getattr(args, "log_fl_terms", False):
        over["sim.log_fl_terms"] = True
    if getattr(args, "adaptive", None) is not None:
        over["controller.adaptive.enabled"] = args.adaptive
    if over:
        cfg = cfg.replace(**over)
    unc = getattr(args, "uncertainty", None)
    if unc is True:
        u = cfg.uncertainty
        if u.delta_pert == 0.0 and not u.per_coefficient and u.dCZ.amplitude == u.dCZ.bias == 0.0 and u.dCM.amplitude == u.dCM.bias == 0.0:
            cfg = cfg.replace(uncertainty=STANDARD_UNCERTAINTY)
        else:
            cfg = cfg.replace(**{"uncertainty.enabled": True})
    elif unc is False:
        cfg = cfg.replace(**{"uncertainty.enabled": False})
    return cfg


def _channel(cfg: ScenarioConfig) -> str:
    return "a_z" if cfg.controller.outer.enabled else "abar_z"


def _run_one(cfg: ScenarioConfig, out: Path | None) -> dict:
    trace = run_scenario(cfg)
    metrics = compute_metrics(trace, _channel(cfg)).as_dict()
    row = {"name": cfg.name, "channel": _channel(cfg), **metrics}
    row["max_abs_delta_deg"] = float(np.degrees(np.max(np.abs(trace["delta"]))))
    row["rate_sat_steps"] = int(np.sum(trace["rate_sat"]))
    row["pos_sat_steps"] = int(np.sum(trace["pos_sat"]))
    if out is not None:
        row["csv"] = str(trace.to_csv(out / f"{cfg.name}.csv"))
    return row


def _print_metrics(row: dict) -> None:
    keys = ("rise_time", "settling_time", "overshoot", "steady_state_error", "undershoot_depth", "settled")
    print(f"{row['name']} [{row['channel']}]")
    for k in keys:
        print(f"  {k:20s} {row[k]}")
    print(f"  {'max |delta| (deg)':20s} {row['max_abs_delta_deg']:.3f}")
    print(f"  {'rate-limited steps':20s} {row['rate_sat_steps']}")
    if "csv" in row:
        print(f"  trace -> {row['csv']}")


def cmd_run(args) -> int:
    cfg = _apply_overrides(resolve_scenario(args.scenario), args)
    out = Path(args.out) if args.out else None
    row = _run_one(cfg, out)
    _print_metrics(row)
    if out is not None:
        (out / f"{cfg.name}.metrics.json").write_text(json.dumps(row, indent=2, default=str))
    if args.strict and not row["settled"]:
        log.warning("%s: response did not settle", cfg.name)
        return EXIT_UNSETTLED
    return EXIT_OK


def _batch_worker(job):
    path, overrides, out = job
    cfg = resolve_scenario(path)
    if overrides:
        cfg = cfg.replace(**overrides)
    return _run_one(cfg, out)


def cmd_batch(args) -> int:
    directory = Path(args.directory)
    files = sorted(directory.glob("*.yaml")) + sorted(directory.glob("*.yml"))
    if not files:
        raise ConfigError(f"no scenario files in {directory}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    overrides = {}
    if args.dt is not None:
        overrides["sim.dt"] = args.dt
    if args.duration is not None:
        overrides["sim.duration"] = args.duration
    jobs = [(str(f), overrides, out) for f in files]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(_batch_worker, jobs))
    fields = list(rows[0])
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    for row in rows:
        print(f"[{'OK' if row['settled'] else 'UNSETTLED'}] {row['name']:24s} sse={row['steady_state_error']:.3e} "
              f"ts={row['settling_time']:.3f}s os={row['overshoot']:.1f}%")
    print(f"summary -> {out / 'summary.csv'}")
    if args.strict and not all(r["settled"] for r in rows):
        return EXIT_UNSETTLED
    return EXIT_OK


def cmd_identify(args) -> int:
    trace = SimTrace.from_csv(args.csv)
    model = identify_inner_model(trace.t, trace["abar_z"], trace["a_z"], step_time=args.step_time)
    print(f"tau = {model.tau:.6f} s")
    print(f"K   = {model.K:.6f}")
    if args.omega_r is not None and args.zeta_r is not None:
        kp, ki = synthesize_gains(args.omega_r, args.zeta_r, model.K, model.tau)
        print(f"kp  = {kp:.6f}")
        print(f"ki  = {ki:.6f}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = resolve_scenario(args.scenario)
    rows = []
    for a_deg in args.alpha_deg:
        tr = trim(cfg.vehicle, math.radians(a_deg))
        print(f"trim alpha={a_deg:g} deg  q={tr.q:.6g} rad/s  delta={math.degrees(tr.delta):.4f} deg")
        for output in ("original", "approximate"):
            model = linearize(cfg.vehicle, output, tr)
            zeros = transmission_zeros(model)
            with np.printoptions(precision=6, suppress=True):
                print(f"  [{output}] A={model.A.tolist()} B={model.B.ravel().tolist()} "
                      f"C={model.C.ravel().tolist()} D={model.D.item():.6g}")
                print(f"  [{output}] zeros={zeros}  rhp={bool(np.any(zeros.real > 0))}")
            rows.append({
                "alpha_deg": a_deg,
                "output": output,
                "delta_trim_deg": math.degrees(tr.delta),
                "zeros": " ".join(f"{z.real:.9g}{z.imag:+.9g}j" for z in zeros),
                "rhp_zero": bool(np.any(zeros.real > 0)),
            })
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _apply_overrides(resolve_scenario(args.scenario), args)
    out = Path(args.out) if args.out else None
    results = {}
    for label, on in (("FL", False), ("TDAFL", True)):
        c = cfg.replace(**{"controller.adaptive.enabled": on, "name": f"{cfg.name}_{label.lower()}"})
        results[label] = _run_one(c, out)
    keys = ("rise_time", "settling_time", "overshoot", "steady_state_error", "settled")
    print(f"{'metric':20s} {'FL':>14s} {'TDAFL':>14s}")
    fmt = lambda v: f"{v:>14.6g}" if isinstance(v, float) else f"{v!s:>14}"  # noqa: E731
    for k in keys:
        print(f"{k:20s} {fmt(results['FL'][k])} {fmt(results['TDAFL'][k])}")
    fl, td = results["FL"]["steady_state_error"], results["TDAFL"]["steady_state_error"]
    ratio = fl / td if td > 0 else math.inf
    print(f"steady-state error ratio FL/TDAFL = {ratio:.3g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="missile-afl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_flags(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario YAML file or built-in name")
        sp.add_argument("--out", help="output directory for CSV traces")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--duration", type=float)
        sp.add_argument("--adaptive", type=_on_off, metavar="on|off")
        sp.add_argument("--uncertainty", type=_on_off, metavar="on|off")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--log-fl-terms", action="store_true")
        sp.add_argument("--strict", action="store_true", help="exit 4 if a response does not settle")

    sp = sub.add_parser("run", help="run one scenario, write a CSV trace and print step metrics")
    sim_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("batch", help="run every scenario in a directory concurrently")
    sp.add_argument("directory")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--duration", type=float)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("identify", help="fit the first-order inner-loop model to an inner-loop-only trace")
    sp.add_argument("csv")
    sp.add_argument("--step-time", type=float, default=0.0)
    sp.add_argument("--omega-r", type=float, help="also synthesize PI gains for this reference frequency")
    sp.add_argument("--zeta-r", type=float)
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("analyze", help="trim, linearise and print transmission zeros")
    sp.add_argument("--scenario", default="exp_a_nominal")
    sp.add_argument("--alpha-deg", type=float, nargs="+", default=[2.0, 5.0, 10.0])
    sp.add_argument("--csv", help="write the trim sweep to this CSV file")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("compare", help="paired FL vs TDAFL runs of one scenario")
    sim_flags(sp)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config fault: %s", exc)
        return EXIT_CONFIG
    except AutopilotError as exc:
        log.error("runtime fault: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
