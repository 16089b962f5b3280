"""Command-line interface.

Exit codes: 0 success; 1 usage, validation, or I/O problem; 2 numerical
failure during integration; 3 a well-posed query with an empty answer
(no crossing found, no fixed points, degenerate equilibrium analysis).

``MOBISIM_THREADS`` caps the worker threads used by ``figure`` and
``sweep`` (default: the machine's CPU count).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import (
    DEFAULT_FIT_PARAMS,
    DEFAULT_REL_STEP,
    EVENT_DIRECTIONS,
    EVENT_VARIABLES,
    METRICS,
    CalibrationProblem,
    EventSpec,
    SweepSpec,
    calibrate,
    find_events,
    sensitivity,
    sweep,
)
from .errors import (
    DegenerateModelError,
    MobisimError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .integrate import ADAPTIVE_RK45, FIXED_RK4
from .model import equilibria
from .scenarios import (
    SETTABLE_KEYS,
    all_presets,
    parse_scenario,
    preset,
    preset_names,
    run_scenario,
    scenario_to_dict,
    serialize_scenario,
    with_setting,
)
from .svgplot import PlotSpec, Series, render_svg
from .trajio import (
    build_manifest,
    format_float,
    read_trajectory,
    trajectory_to_csv,
    trajectory_to_json,
    write_manifest,
    write_text_atomic,
)

THREADS_ENV = "MOBISIM_THREADS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_NO_RESULT = 3


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(
            f"{THREADS_ENV} must be an integer >= 1, got {raw!r}"
        ) from None
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be an integer >= 1, got {raw!r}")
    return value


def _add_scenario_arguments(p, required_source=True):
    if required_source is not None:
        source = p.add_mutually_exclusive_group(required=required_source)
        source.add_argument("--preset", choices=preset_names(), help="built-in scenario")
        source.add_argument("--config", metavar="FILE", help="scenario JSON file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help=f"override one setting ({', '.join(SETTABLE_KEYS)}); repeatable",
    )
    p.add_argument("--method", choices=(FIXED_RK4, ADAPTIVE_RK45), help="integration method")
    p.add_argument("--step", type=float, metavar="H", help="fixed-step size")
    p.add_argument("--rtol", type=float, help="adaptive relative tolerance")
    p.add_argument("--atol", type=float, help="adaptive absolute tolerance")
    p.add_argument("--max-steps", dest="max_steps", type=int, help="integration step budget")


def _apply_overrides(spec, args):
    for item in args.overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            value = float(raw)
        except ValueError:
            raise ValidationError(
                f"--set {key.strip()}: numeric value required, got {raw!r}"
            ) from None
        spec = with_setting(spec, key.strip(), value)
    updates = {}
    for name in ("method", "step", "rtol", "atol", "max_steps"):
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if updates:
        spec = replace(spec, integrator=replace(spec.integrator, **updates))
    return spec


def _resolve_scenario(args):
    if getattr(args, "config", None):
        text = Path(args.config).read_text(encoding="utf-8")
        spec = parse_scenario(text)
    else:
        spec = preset(args.preset)
    return _apply_overrides(spec, args)


def _write_artifact(path: Path, text: str, inputs_doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    write_text_atomic(path, text)
    manifest = build_manifest(inputs_doc, path.name, text.encode("utf-8"))
    write_manifest(Path(str(path) + ".manifest.json"), manifest)


def _format_complex(z: complex) -> str:
    if z.imag == 0.0:
        return format_float(z.real)
    sign = "+" if z.imag >= 0.0 else "-"
    return f"{format_float(z.real)}{sign}{format_float(abs(z.imag))}j"


def cmd_scenarios(args) -> int:
    specs = all_presets()
    if args.json:
        print(json.dumps([scenario_to_dict(s) for s in specs], indent=2))
        return EXIT_OK
    for s in specs:
        p = s.params
        print(f"{s.name}: {s.description}")
        print(
            f"  k1={format_float(p.k1)} k2={format_float(p.k2)} "
            f"k3={format_float(p.k3)} k4={format_float(p.k4)} "
            f"a_max={format_float(p.a_max)}"
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _resolve_scenario(args)
    traj = run_scenario(spec)
    fmt = args.format or ("json" if args.out.lower().endswith(".json") else "csv")
    text = trajectory_to_csv(traj) if fmt == "csv" else trajectory_to_json(traj)
    out = Path(args.out)
    _write_artifact(out, text, scenario_to_dict(spec))
    final = traj.final_state()
    print(
        f"wrote {out} ({len(traj)} samples); final congestion="
        f"{format_float(final.congestion)} adoption={format_float(final.adoption)}"
    )
    return EXIT_OK


def cmd_equilibria(args) -> int:
    spec = _resolve_scenario(args)
    points = equilibria(spec.params)
    if not points:
        print("no fixed points with non-negative congestion and adoption", file=sys.stderr)
        return EXIT_NO_RESULT
    if args.json:
        doc = [
            {
                "congestion": fp.state.congestion,
                "adoption": fp.state.adoption,
                "classification": fp.classification,
                "eigenvalues": [{"real": ev.real, "imag": ev.imag} for ev in fp.eigenvalues],
                "residual": fp.residual,
            }
            for fp in points
        ]
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    for fp in points:
        print(
            f"fixed point: congestion={format_float(fp.state.congestion)} "
            f"adoption={format_float(fp.state.adoption)}"
        )
        print(f"  classification: {fp.classification}")
        print(f"  eigenvalues: {', '.join(_format_complex(ev) for ev in fp.eigenvalues)}")
        print(f"  residual: {format_float(fp.residual)}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    spec = _resolve_scenario(args)
    traj = run_scenario(spec)
    event = EventSpec(variable=args.variable, level=args.level, direction=args.direction)
    hits = find_events(traj, event)
    if not hits:
        kind = "crossing" if args.direction == "any" else f"{args.direction} crossing"
        print(
            f"no {kind} of {args.variable}={format_float(args.level)} in the horizon",
            file=sys.stderr,
        )
        return EXIT_NO_RESULT
    if args.json:
        doc = [
            {
                "time": h.time,
                "congestion": h.state.congestion,
                "adoption": h.state.adoption,
                "direction": h.direction,
            }
            for h in hits
        ]
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    for h in hits:
        print(
            f"t={format_float(h.time)} direction={h.direction} "
            f"congestion={format_float(h.state.congestion)} "
            f"adoption={format_float(h.state.adoption)}"
        )
    return EXIT_OK


def _parse_values(args) -> tuple:
    if args.values is not None:
        try:
            return tuple(float(cell) for cell in args.values.split(","))
        except ValueError:
            raise ValidationError(
                f"--values expects comma-separated numbers, got {args.values!r}"
            ) from None
    lo_hi_n = args.range.split(":")
    if len(lo_hi_n) != 3:
        raise ValidationError(f"--range expects LO:HI:COUNT, got {args.range!r}")
    try:
        lo = float(lo_hi_n[0])
        hi = float(lo_hi_n[1])
        count = int(lo_hi_n[2])
    except ValueError:
        raise ValidationError(f"--range expects LO:HI:COUNT, got {args.range!r}") from None
    if count < 2:
        raise ValidationError(f"--range needs COUNT >= 2, got {count}")
    step = (hi - lo) / (count - 1)
    values = [lo + i * step for i in range(count)]
    values[-1] = hi
    return tuple(values)


def cmd_sweep(args) -> int:
    spec = _resolve_scenario(args)
    values = _parse_values(args)
    metrics = tuple(name.strip() for name in args.metrics.split(","))
    cap = _thread_count()
    workers = min(args.workers, cap) if args.workers is not None else cap
    rows = sweep(
        SweepSpec(scenario=spec, key=args.param, values=values),
        metrics=metrics,
        workers=workers,
    )
    lines = [",".join((args.param,) + metrics)]
    for row in rows:
        lines.append(
            ",".join([format_float(row.value)] + [format_float(row.metrics[m]) for m in metrics])
        )
    text = "\n".join(lines) + "\n"
    out = Path(args.out)
    _write_artifact(out, text, scenario_to_dict(spec))
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    spec = _resolve_scenario(args)
    params = tuple(name.strip() for name in args.params.split(","))
    rows = sensitivity(spec, metric=args.metric, params=params, rel_step=args.rel_step)
    if args.json:
        doc = [
            {
                "param": r.param,
                "base_value": r.base_value,
                "step": r.step,
                "derivative": r.derivative,
                "elasticity": r.elasticity,
            }
            for r in rows
        ]
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    print(f"metric: {args.metric}")
    for r in rows:
        elasticity = "n/a" if r.elasticity is None else format_float(r.elasticity)
        print(
            f"{r.param}: base={format_float(r.base_value)} "
            f"derivative={format_float(r.derivative)} elasticity={elasticity}"
        )
    return EXIT_OK


def cmd_calibrate(args) -> int:
    spec = _resolve_scenario(args)
    fmt = "json" if args.observations.lower().endswith(".json") else "csv"
    observed = read_trajectory(args.observations, fmt)
    fit = tuple(name.strip() for name in args.fit.split(","))
    problem = CalibrationProblem(
        times=observed.times,
        congestion=observed.congestion,
        adoption=observed.adoption,
        initial=observed.state(0),
        guess=spec.params,
        fit=fit,
        step=spec.integrator.step,
        max_steps=spec.integrator.max_steps,
    )
    result = calibrate(problem)
    fitted = replace(spec, params=result.params)
    if args.out:
        out = Path(args.out)
        _write_artifact(out, serialize_scenario(fitted), scenario_to_dict(spec))
    p = result.params
    if args.json:
        doc = {
            "params": {
                "k1": p.k1,
                "k2": p.k2,
                "k3": p.k3,
                "k4": p.k4,
                "a_max": p.a_max,
            },
            "objective": result.objective,
            "iterations": result.iterations,
            "evaluations": result.evaluations,
            "converged": result.converged,
        }
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    print(
        f"fitted: k1={format_float(p.k1)} k2={format_float(p.k2)} "
        f"k3={format_float(p.k3)} k4={format_float(p.k4)} a_max={format_float(p.a_max)}"
    )
    print(
        f"objective={format_float(result.objective)} iterations={result.iterations} "
        f"evaluations={result.evaluations} converged={'true' if result.converged else 'false'}"
    )
    return EXIT_OK


def cmd_figure(args) -> int:
    specs = [_apply_overrides(s, args) for s in all_presets()]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = min(_thread_count(), len(specs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajectories = list(pool.map(run_scenario, specs))
    else:
        trajectories = [run_scenario(s) for s in specs]

    for spec, traj in zip(specs, trajectories):
        _write_artifact(out_dir / f"{spec.name}.csv", trajectory_to_csv(traj), scenario_to_dict(spec))

    figure_doc = {"scenarios": [scenario_to_dict(s) for s in specs]}
    congestion_plot = PlotSpec(
        title="Urban congestion under four AI-adoption scenarios",
        x_label="time",
        y_label="congestion index",
        series=tuple(
            Series(label=spec.name, x=traj.times, y=traj.congestion)
            for spec, traj in zip(specs, trajectories)
        ),
    )
    _write_artifact(out_dir / "overlay.svg", render_svg(congestion_plot), figure_doc)
    adoption_plot = PlotSpec(
        title="AI adoption under four scenarios",
        x_label="time",
        y_label="adoption level",
        series=tuple(
            Series(label=spec.name, x=traj.times, y=traj.adoption)
            for spec, traj in zip(specs, trajectories)
        ),
    )
    _write_artifact(out_dir / "adoption.svg", render_svg(adoption_plot), figure_doc)

    summary = {
        "scenarios": [
            {
                "name": spec.name,
                "description": spec.description,
                "params": {
                    "k1": spec.params.k1,
                    "k2": spec.params.k2,
                    "k3": spec.params.k3,
                    "k4": spec.params.k4,
                    "a_max": spec.params.a_max,
                },
                "final": {
                    "congestion": traj.final_state().congestion,
                    "adoption": traj.final_state().adoption,
                },
            }
            for spec, traj in zip(specs, trajectories)
        ]
    }
    _write_artifact(
        out_dir / "summary.json", json.dumps(summary, indent=2) + "\n", figure_doc
    )
    print(
        f"wrote {len(specs)} trajectories, overlay.svg, adoption.svg, "
        f"summary.json to {out_dir}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mobisim", description="Coupled congestion/adoption simulator")
    parser.add_argument("--version", action="version", version=f"mobisim {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = commands.add_parser(
        "scenarios", parents=[], help="list the built-in scenarios", description="List presets."
    )
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_scenarios)

    p = commands.add_parser("simulate", help="integrate one scenario and write the trajectory")
    _add_scenario_arguments(p)
    p.add_argument("--out", required=True, metavar="FILE", help="output path")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default: by suffix)")
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser("figure", help="run all presets; write CSVs, SVG overlays, summary")
    _add_scenario_arguments(p, required_source=None)
    p.add_argument("--out-dir", dest="out_dir", required=True, metavar="DIR")
    p.set_defaults(func=cmd_figure)

    p = commands.add_parser("equilibria", help="fixed points, stability, and eigenvalues")
    _add_scenario_arguments(p)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_equilibria)

    p = commands.add_parser("threshold", help="find level crossings of one variable")
    _add_scenario_arguments(p)
    p.add_argument("--variable", required=True, choices=EVENT_VARIABLES)
    p.add_argument("--level", required=True, type=float)
    p.add_argument("--direction", default="any", choices=EVENT_DIRECTIONS)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_threshold)

    p = commands.add_parser("sweep", help="vary one setting and tabulate metrics")
    _add_scenario_arguments(p)
    p.add_argument("--param", required=True, metavar="KEY", help="setting to vary")
    values = p.add_mutually_exclusive_group(required=True)
    values.add_argument("--values", metavar="V1,V2,...", help="explicit values")
    values.add_argument("--range", metavar="LO:HI:COUNT", help="evenly spaced values")
    p.add_argument(
        "--metrics",
        default="final_congestion,final_adoption",
        metavar="M1,M2,...",
        help=f"metrics to record ({', '.join(METRICS)})",
    )
    p.add_argument("--workers", type=int, help="thread count (capped by MOBISIM_THREADS)")
    p.add_argument("--out", required=True, metavar="FILE", help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = commands.add_parser("sensitivity", help="finite-difference metric sensitivities")
    _add_scenario_arguments(p)
    p.add_argument("--metric", default="final_congestion", choices=METRICS)
    p.add_argument(
        "--params", default=",".join(DEFAULT_FIT_PARAMS), metavar="P1,P2,...",
        help="parameters to probe",
    )
    p.add_argument("--rel-step", dest="rel_step", type=float, default=DEFAULT_REL_STEP)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_sensitivity)

    p = commands.add_parser("calibrate", help="fit parameters to an observed trajectory")
    _add_scenario_arguments(p)
    p.add_argument(
        "--observations", required=True, metavar="FILE", help="observed trajectory (csv or json)"
    )
    p.add_argument(
        "--fit", default=",".join(DEFAULT_FIT_PARAMS), metavar="P1,P2,...",
        help="parameters to fit",
    )
    p.add_argument("--out", metavar="FILE", help="write the fitted scenario JSON here")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, int):
            return exc.code
        return EXIT_OK if exc.code is None else EXIT_USAGE
    try:
        return args.func(args)
    except DegenerateModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_RESULT
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MobisimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
