"""Configuration-driven experiment runner.

Exit codes: 0 success, 2 configuration/input error, 3 assumption violation,
4 realizability failure, 5 excitation failure, 1 unexpected error. Log
verbosity comes from the DVRFT_LOG environment variable (DEBUG, INFO, ...).
"""

from __future__ import annotations

import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import click
import numpy as np

from . import evaluation as ev
from . import io as dio
from .config import ConfigError, ControllerClassSpec, ExperimentConfig
from .identification import RankDeficiencyError, build_regressors, excitation_check
from .ideal import build_ideal_controller, check_realizability, to_distributed_controller
from .network import (
    NetworkSpec,
    frequency_grid,
    load_spec,
    normalize_interconnection,
    simulate_reference,
    validate_network,
)
from .virtual import virtual_references_distributed

EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_REALIZABILITY = 4
EXIT_EXCITATION = 5

log = logging.getLogger("dvrft")


def _setup_logging():
    level = os.environ.get("DVRFT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _resolve_spec(path: str) -> NetworkSpec:
    p = Path(path)
    if p.exists():
        return load_spec(p)
    bundled = resources.files("dvrft").joinpath("data", p.name)
    if bundled.is_file():
        log.info("using bundled spec %s", p.name)
        return load_spec(json.loads(bundled.read_text()))
    raise ConfigError(f"network spec not found: {path}")


def _load_spec_or_exit(path: str) -> NetworkSpec:
    try:
        return _resolve_spec(path)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _class_specs(names, drop_edges):
    drop = tuple(tuple(int(v) for v in e.split(",")) for e in drop_edges)
    out = []
    for name in names:
        kind = name
        out.append(ControllerClassSpec(label=name, kind=kind, drop_edges=drop if kind == "reduced" else ()))
    return tuple(out)


def _fmt_tf(a) -> str:
    def poly(c):
        deg = len(c) - 1
        parts = []
        for k, v in enumerate(c):
            if v == 0 and len(c) > 1:
                continue
            p = deg - k
            if p == 0:
                term = f"{v:.12g}"
            else:
                coef = "" if v == 1 else ("-" if v == -1 else f"{v:.12g} ")
                term = f"{coef}q" if p == 1 else f"{coef}q^{p}"
            parts.append(term)
        return " + ".join(parts).replace("+ -", "- ") or "0"

    if a.den_degree == 0:
        return poly(a.num)
    return f"({poly(a.num)}) / ({poly(a.den)})"


@click.group()
@click.version_option(package_name="dvrft")
def main():
    """Data-driven synthesis of distributed model-reference controllers."""
    _setup_logging()


@main.command()
@click.argument("spec_path")
@click.option("--grid", "grid_points", default=512, show_default=True, help="Frequency grid size.")
def validate(spec_path, grid_points):
    """Check the standing assumptions of a network spec."""
    spec = _load_spec_or_exit(spec_path)
    report = validate_network(spec, frequency_grid(grid_points))
    click.echo(f"interconnection margin: {report.plant_margin:.6g}")
    click.echo(f"reference interconnection margin: {report.reference_margin:.6g}")
    click.echo(f"reference/output separation margin: {report.mismatch_margin:.6g}")
    if not report.ok:
        for msg in report.violations():
            click.echo(f"VIOLATION: {msg}", err=True)
        sys.exit(EXIT_ASSUMPTION)
    click.echo("assumptions satisfied")


@main.command()
@click.argument("spec_path")
@click.option("--out", "out_path", type=click.Path(), help="Write the controller as JSON.")
def ideal(spec_path, out_path):
    """Build the exact-matching controller and report realizability."""
    spec = _load_spec_or_exit(spec_path)
    report = check_realizability(spec)
    try:
        nodes = build_ideal_controller(spec)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_REALIZABILITY)
    for n in nodes:
        label = spec.labels[n.node]
        click.echo(f"node {label}:")
        click.echo(f"  C[{label},{label}] = {_fmt_tf(n.c_ee)}")
        for j, a in sorted(n.c_es.items()):
            click.echo(f"  C[{label},{spec.labels[j]}] = {_fmt_tf(a)}")
        for j, a in sorted(n.c_ek.items()):
            click.echo(f"  C_Q[{label},{spec.labels[j]}] = {_fmt_tf(a)}")
        for j, a in sorted(n.k_o.items()):
            click.echo(f"  K[{label},{spec.labels[j]}] = {_fmt_tf(a)}")
        for j, a in sorted(n.k_p.items()):
            click.echo(f"  K_P[{label},{spec.labels[j]}] = {_fmt_tf(a)}")
    if out_path:
        ctrl = to_distributed_controller(nodes, spec)
        dio.save_controller(ctrl, out_path, labels=spec.labels)
        click.echo(f"wrote {out_path}")
    if not report.ok:
        for msg in report.messages():
            click.echo(f"REALIZABILITY: {msg}", err=True)
        sys.exit(EXIT_REALIZABILITY)


@main.command()
@click.argument("spec_path")
@click.option("--data", "data_path", required=True, type=click.Path(), help="Measurement CSV (t,u_1..,y_1..).")
@click.option("--class", "class_name", default="full", show_default=True,
              type=click.Choice(["full", "reduced", "decentralized"]))
@click.option("--drop-edge", "drop_edges", multiple=True, help="Edge i,j removed for the reduced class.")
@click.option("--trim", type=int, default=None, help="Regressor rows dropped at the horizon start.")
@click.option("--out", "out_path", type=click.Path(), help="Controller JSON output path.")
@click.option("--dump-virtual", "virtual_path", type=click.Path(), help="Write the virtual signals as CSV.")
@click.option("--allow-rank-deficient", is_flag=True, help="Accept the minimum-norm solution.")
def synthesize(spec_path, data_path, class_name, drop_edges, trim, out_path, virtual_path, allow_rank_deficient):
    """Identify a distributed controller from measured data."""
    spec = _load_spec_or_exit(spec_path)
    try:
        u, y = dio.read_data_csv(data_path)
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    report = validate_network(spec)
    if not report.ok:
        for msg in report.violations():
            click.echo(f"VIOLATION: {msg}", err=True)
        sys.exit(EXIT_ASSUMPTION)
    realizability = check_realizability(normalize_interconnection(spec))
    if not realizability.ok:
        for msg in realizability.messages():
            click.echo(f"REALIZABILITY: {msg}", err=True)
        sys.exit(EXIT_REALIZABILITY)
    class_spec = _class_specs([class_name], drop_edges)[0]
    try:
        ctrl, param, results, vd = ev.synthesize_controller(
            spec, u, y, class_spec=class_spec, trim=trim,
            allow_rank_deficient=allow_rank_deficient,
        )
    except RankDeficiencyError as exc:
        click.echo(f"excitation failure: {exc}", err=True)
        sys.exit(EXIT_EXCITATION)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    diagnostics = {
        "excitation": excitation_check(u=u, regressors=build_regressors(param, vd, u, trim=trim)).covariance_eigmin,
        "results": [r.to_dict() for r in results],
        "virtual_horizon": vd.horizon,
    }
    for r in results:
        click.echo(
            f"node {spec.labels[r.node]}: criterion={r.criterion:.6g} "
            f"gram_cond={r.gram_condition:.3g} rank={r.rank}"
        )
    if virtual_path:
        dio.write_virtual_csv(virtual_path, vd)
        click.echo(f"wrote {virtual_path}")
    out_path = out_path or "controller.json"
    dio.save_controller(ctrl, out_path, labels=spec.labels, diagnostics=diagnostics)
    click.echo(f"wrote {out_path}")


@main.command()
@click.argument("spec_path")
@click.option("--controller", "controller_path", type=click.Path(), help="Controller JSON; defaults to the ideal controller.")
@click.option("--generate-data", "data_out", type=click.Path(), help="Only simulate an open-loop experiment and write it as CSV.")
@click.option("-N", "--samples", "n_samples", default=100, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--sigma-u", default=1.0, show_default=True)
@click.option("--sigma-v", default=0.1, show_default=True)
@click.option("--steps", default=100, show_default=True, help="Step-response horizon.")
@click.option("--grid", "grid_points", default=512, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=".", show_default=True)
def evaluate(spec_path, controller_path, data_out, n_samples, seed, sigma_u, sigma_v, steps, grid_points, out_dir):
    """Closed-loop evaluation (or open-loop data generation with --generate-data)."""
    spec = _load_spec_or_exit(spec_path)
    if data_out:
        rng = np.random.default_rng(seed)
        u, _, y_meas = ev.generate_experiment_data(
            normalize_interconnection(spec), n_samples, sigma_u, sigma_v, rng
        )
        dio.write_data_csv(data_out, u, y_meas)
        click.echo(f"wrote {data_out}")
        return
    if controller_path:
        try:
            ctrl = dio.load_controller(controller_path)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
    else:
        ctrl = to_distributed_controller(build_ideal_controller(spec), spec)
    rng = np.random.default_rng(seed)
    amplitudes = rng.uniform(0.0, 1.0, spec.n_nodes)
    amplitudes = np.where(amplitudes == 0.0, 1.0, amplitudes)
    refs = ev.step_references(spec.n_nodes, steps, amplitudes)
    loop = ev.assemble_closed_loop(spec, ctrl)
    y, _ = ev.simulate_closed_loop(loop, refs)
    y_desired = simulate_reference(spec, refs)
    jmr = ev.estimate_jmr(y, y_desired)
    metric = ev.performance_metric(spec, ctrl, frequency_grid(grid_points), closed_loop=loop)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "traces.csv"
    dio.write_traces_csv(trace_path, refs, y, y_desired)
    click.echo(f"J_MR = {jmr:.6g}")
    click.echo(f"performance metric = {metric:.6g}")
    click.echo(f"wrote {trace_path}")


@main.command()
@click.argument("spec_path")
@click.option("--runs", default=100, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("-N", "--samples", "n_samples", default=100, show_default=True)
@click.option("--sigma-u", default=1.0, show_default=True)
@click.option("--sigma-v", default=0.1, show_default=True)
@click.option("--grid", "grid_points", default=512, show_default=True)
@click.option("--class", "class_names", multiple=True,
              type=click.Choice(["full", "reduced", "decentralized"]),
              help="Controller classes; defaults to all three.")
@click.option("--drop-edge", "drop_edges", multiple=True, help="Edge i,j removed for the reduced class.")
@click.option("--out", "out_dir", type=click.Path(), default="results", show_default=True)
@click.option("--jobs", default=1, show_default=True, help="Parallel replicate workers.")
def montecarlo(spec_path, runs, seed, n_samples, sigma_u, sigma_v, grid_points, class_names, drop_edges, out_dir, jobs):
    """Monte Carlo study over repeated identification experiments."""
    spec = _load_spec_or_exit(spec_path)
    names = list(class_names) or ["full", "reduced", "decentralized"]
    try:
        config = ExperimentConfig(
            spec_path=spec_path,
            n_samples=n_samples,
            sigma_u=sigma_u,
            sigma_v=sigma_v,
            seed=seed,
            replicates=runs,
            classes=_class_specs(names, drop_edges),
            grid_points=grid_points,
            n_jobs=jobs,
            out_dir=str(out_dir),
        )
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    result = _run_montecarlo(spec, config)
    _echo_summaries(result.summaries)


def _run_montecarlo(spec, config):
    try:
        result = ev.monte_carlo(spec, config)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_REALIZABILITY if "realizable" in str(exc) else EXIT_CONFIG
        sys.exit(code)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dio.write_replicates_csv(out_dir / "replicates.csv", result.records)
    dio.write_summary_csv(out_dir / "summary.csv", result.summaries)
    click.echo(f"wrote {out_dir / 'replicates.csv'} and {out_dir / 'summary.csv'}")
    return result


def _echo_summaries(summaries):
    click.echo(f"{'class':>16} {'median':>12} {'q1':>12} {'q3':>12} {'failures':>9}")
    for s in summaries:
        click.echo(f"{s.label:>16} {s.median:>12.5g} {s.q1:>12.5g} {s.q3:>12.5g} {s.failures:>9d}")


@main.command()
@click.argument("config_path", type=click.Path())
def run(config_path):
    """One-shot pipeline: validate, build ideal, generate data, synthesize, evaluate."""
    try:
        config = ExperimentConfig.from_json_file(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if not config.spec_path:
        click.echo("error: configuration must name a network spec", err=True)
        sys.exit(EXIT_CONFIG)
    spec = _load_spec_or_exit(config.spec_path)

    report = validate_network(spec, frequency_grid(config.grid_points))
    if not report.ok:
        for msg in report.violations():
            click.echo(f"VIOLATION: {msg}", err=True)
        sys.exit(EXIT_ASSUMPTION)
    work = normalize_interconnection(spec)
    realizability = check_realizability(work)
    if not realizability.ok:
        for msg in realizability.messages():
            click.echo(f"REALIZABILITY: {msg}", err=True)
        sys.exit(EXIT_REALIZABILITY)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(config.seed)
    u, _, y_meas = ev.generate_experiment_data(
        work, config.n_samples, config.sigma_u, config.sigma_v, rng
    )
    dio.write_data_csv(out_dir / "data.csv", u, y_meas)

    # fail fast (as a config error) when the horizon cannot support the inversion
    try:
        virtual_references_distributed(work, y_meas, cancel_tol=config.cancel_tol)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    amp_rng = np.random.default_rng(config.seed)
    amplitudes = amp_rng.uniform(0.0, 1.0, spec.n_nodes)
    amplitudes = np.where(amplitudes == 0.0, 1.0, amplitudes)
    refs = ev.step_references(spec.n_nodes, config.eval_horizon, amplitudes)
    y_desired = simulate_reference(spec, refs)
    grid = frequency_grid(config.grid_points)

    click.echo(f"{'class':>16} {'J_MR':>12} {'metric':>12}")
    for class_spec in config.classes:
        try:
            ctrl, param, results, _ = ev.synthesize_controller(
                spec, u, y_meas, class_spec=class_spec, trim=config.trim,
                cancel_tol=config.cancel_tol,
            )
        except RankDeficiencyError as exc:
            click.echo(f"excitation failure ({class_spec.label}): {exc}", err=True)
            sys.exit(EXIT_EXCITATION)
        loop = ev.assemble_closed_loop(spec, ctrl)
        y_cl, _ = ev.simulate_closed_loop(loop, refs)
        jmr = ev.estimate_jmr(y_cl, y_desired)
        metric = ev.performance_metric(spec, ctrl, grid, closed_loop=loop)
        diagnostics = {"results": [r.to_dict() for r in results], "jmr": jmr, "metric": metric}
        dio.save_controller(
            ctrl, out_dir / f"controller_{class_spec.label}.json",
            labels=spec.labels, diagnostics=diagnostics,
        )
        dio.write_traces_csv(out_dir / f"traces_{class_spec.label}.csv", refs, y_cl, y_desired)
        click.echo(f"{class_spec.label:>16} {jmr:>12.5g} {metric:>12.5g}")

    if config.replicates > 1:
        result = _run_montecarlo(spec, config)
        _echo_summaries(result.summaries)
    click.echo(f"artifacts in {out_dir}")


if __name__ == "__main__":
    main()
