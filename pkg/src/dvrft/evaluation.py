"""Closed-loop assembly, model-reference performance, and the Monte Carlo study."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import ControllerClassSpec, ExperimentConfig
from .controller import DistributedController
from .diagram import AssembledSystem, DiagramBuilder, ex_scale, ex_sum
from .identification import (
    build_regressors,
    controller_class,
    controller_from_parameters,
    identify_node,
    precompute_link_rows,
)
from .ideal import build_ideal_controller, check_realizability
from .network import (
    NetworkSpec,
    frequency_grid,
    normalize_interconnection,
    reference_transfer_grid,
    plant_system,
    plant_transfer_grid,
    reference_system,
)
from .virtual import virtual_references_distributed

__all__ = [
    "DivergenceWarning",
    "ClosedLoopSystem",
    "PerformanceRecord",
    "ClassSummary",
    "MonteCarloResult",
    "assemble_closed_loop",
    "simulate_closed_loop",
    "controller_transfer_grid",
    "closed_loop_transfer_oracle",
    "estimate_jmr",
    "performance_metric",
    "generate_experiment_data",
    "step_references",
    "synthesize_controller",
    "monte_carlo",
]

DIVERGENCE_LIMIT = 1e9


class DivergenceWarning(RuntimeWarning):
    """Closed-loop simulation exceeded the overflow guard."""


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Global realization of plant + distributed controller, inputs r, outputs (y, u)."""

    system: AssembledSystem
    n_nodes: int

    @property
    def well_posedness_condition(self) -> float:
        return self.system.feedthrough_cond

    def transfer_grid(self, omegas) -> np.ndarray:
        """Reference-to-output transfer matrices on the grid; (K, L, L)."""
        return self.system.transfer_grid(omegas)[:, : self.n_nodes, :]

    def transfer_at(self, omega: float) -> np.ndarray:
        return self.transfer_grid([omega])[0]


def assemble_closed_loop(spec: NetworkSpec, ctrl: DistributedController) -> ClosedLoopSystem:
    """Close the loop: e_i = r_i - y_i, controller link channels paired across edges."""
    L = spec.n_nodes
    if ctrl.n_nodes != L:
        raise ValueError("controller and network node counts differ")
    b = DiagramBuilder(L)

    # plant blocks
    y_terms = {i: [] for i in range(L)}
    for i in range(L):
        g = spec.subsystems[i].plant
        if not g.is_zero:
            y_terms[i].append(b.add_block(f"plant[{i}]", g))
        for j in spec.graph.neighbors(i):
            w = spec.subsystems[i].coupling[j]
            if not w.is_zero:
                y_terms[i].append(b.add_block(f"coupling[{i}<{j}]", w))
    meas = {}
    for i, j in spec.graph.directed_edges:
        if not spec.subsystems[j].coupling[i].is_zero:
            meas[(i, j)] = b.add_block(f"meas[{i}>{j}]", spec.measurement(i, j))

    # controller blocks
    u_terms = {i: [] for i in range(L)}
    out_w = {}
    out_q = {}
    for node in ctrl.nodes:
        i = node.node
        if not node.err_gain.is_zero:
            u_terms[i].append(b.add_block(f"ctl_err[{i}]", node.err_gain))
        for j, a in node.link_w.items():
            if not a.is_zero:
                u_terms[i].append(b.add_block(f"ctl_w[{i}<{j}]", a))
        for j, a in node.link_q.items():
            if not a.is_zero:
                u_terms[i].append(b.add_block(f"ctl_q[{i}<{j}]", a))
        for j, a in node.out_w_err.items():
            if not a.is_zero:
                out_w.setdefault((i, j), []).append(b.add_block(f"ctl_ow_e[{i}>{j}]", a))
        for (j, h), a in node.out_w_q.items():
            if not a.is_zero:
                out_w.setdefault((i, j), []).append(b.add_block(f"ctl_ow_q[{i}>{j}|{h}]", a))
        for j, a in node.out_q_err.items():
            if not a.is_zero:
                out_q.setdefault((i, j), []).append(b.add_block(f"ctl_oq_e[{i}>{j}]", a))
        for (j, h), a in node.out_q_q.items():
            if not a.is_zero:
                out_q.setdefault((i, j), []).append(b.add_block(f"ctl_oq_q[{i}>{j}|{h}]", a))

    y_expr = {i: ex_sum(*y_terms[i]) for i in range(L)}
    u_expr = {i: ex_sum(*u_terms[i]) for i in range(L)}
    e_expr = {i: ex_sum(b.ext(i), ex_scale(y_expr[i], -1.0)) for i in range(L)}
    zeta_w = {k: ex_sum(*v) for k, v in out_w.items()}
    zeta_q = {k: ex_sum(*v) for k, v in out_q.items()}

    # plant wiring
    for i in range(L):
        if not spec.subsystems[i].plant.is_zero:
            b.connect(f"plant[{i}]", u_expr[i])
        for j in spec.graph.neighbors(i):
            if not spec.subsystems[i].coupling[j].is_zero:
                b.connect(f"coupling[{i}<{j}]", meas[(j, i)])
    for i, j in meas:
        b.connect(f"meas[{i}>{j}]", y_expr[i])

    # controller wiring: incoming channel (i, j) is the paired outgoing (j, i)
    for node in ctrl.nodes:
        i = node.node
        if not node.err_gain.is_zero:
            b.connect(f"ctl_err[{i}]", e_expr[i])
        for j, a in node.link_w.items():
            if not a.is_zero:
                b.connect(f"ctl_w[{i}<{j}]", zeta_w.get((j, i), {}))
        for j, a in node.link_q.items():
            if not a.is_zero:
                b.connect(f"ctl_q[{i}<{j}]", zeta_q.get((j, i), {}))
        for j, a in node.out_w_err.items():
            if not a.is_zero:
                b.connect(f"ctl_ow_e[{i}>{j}]", e_expr[i])
        for (j, h), a in node.out_w_q.items():
            if not a.is_zero:
                b.connect(f"ctl_ow_q[{i}>{j}|{h}]", zeta_q.get((h, i), {}))
        for j, a in node.out_q_err.items():
            if not a.is_zero:
                b.connect(f"ctl_oq_e[{i}>{j}]", e_expr[i])
        for (j, h), a in node.out_q_q.items():
            if not a.is_zero:
                b.connect(f"ctl_oq_q[{i}>{j}|{h}]", zeta_q.get((h, i), {}))

    for i in range(L):
        b.add_output(y_expr[i])
    for i in range(L):
        b.add_output(u_expr[i])
    return ClosedLoopSystem(system=b.build(), n_nodes=L)


def simulate_closed_loop(cls: ClosedLoopSystem, r, noise=None):
    """Zero-IC closed-loop response; returns (outputs, control inputs)."""
    r = np.asarray(r, dtype=float)
    out = cls.system.simulate(r)
    y = out[:, : cls.n_nodes]
    u = out[:, cls.n_nodes :]
    peak = float(np.max(np.abs(y))) if y.size else 0.0
    if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
        warnings.warn(f"closed-loop output diverged (peak {peak:.3g})", DivergenceWarning)
    if noise is not None:
        y = y + np.asarray(noise, dtype=float)
    return y, u


def controller_transfer_grid(ctrl: DistributedController, n_nodes: int, omegas) -> np.ndarray:
    """Aggregated error-to-input controller transfer with link channels eliminated.

    Frequency-domain oracle independent of the state-space assembly. Link
    variables are stacked per directed edge and channel; the pairing makes the
    incoming variable of (i, j) equal the outgoing variable of (j, i).
    """
    omegas = np.asarray(omegas, dtype=float)
    z = np.exp(1j * omegas)
    K = len(z)
    directed = []
    for i, j in ctrl.edges:
        directed += [(i, j), (j, i)]
    directed.sort()
    lw = {e: k for k, e in enumerate(directed)}
    lq = {e: k + len(directed) for k, e in enumerate(directed)}
    m = 2 * len(directed)

    k_err = np.zeros((K, m, n_nodes), dtype=complex)
    k_link = np.zeros((K, m, m), dtype=complex)
    c_err = np.zeros((K, n_nodes, n_nodes), dtype=complex)
    c_link = np.zeros((K, n_nodes, m), dtype=complex)
    for node in ctrl.nodes:
        i = node.node
        if not node.err_gain.is_zero:
            c_err[:, i, i] = node.err_gain(z)
        for j, a in node.link_w.items():
            if not a.is_zero:
                c_link[:, i, lw[(j, i)]] = a(z)  # input of (i, j) = output of (j, i)
        for j, a in node.link_q.items():
            if not a.is_zero:
                c_link[:, i, lq[(j, i)]] = a(z)
        for j, a in node.out_w_err.items():
            if not a.is_zero:
                k_err[:, lw[(i, j)], i] = a(z)
        for (j, h), a in node.out_w_q.items():
            if not a.is_zero:
                k_link[:, lw[(i, j)], lq[(h, i)]] = a(z)
        for j, a in node.out_q_err.items():
            if not a.is_zero:
                k_err[:, lq[(i, j)], i] = a(z)
        for (j, h), a in node.out_q_q.items():
            if not a.is_zero:
                k_link[:, lq[(i, j)], lq[(h, i)]] = a(z)

    if m:
        link = np.linalg.solve(np.eye(m) - k_link, k_err)
        return c_err + c_link @ link
    return c_err


def closed_loop_transfer_oracle(spec: NetworkSpec, ctrl: DistributedController, omegas) -> np.ndarray:
    """Frequency composition (I + P C)^{-1} P C of the plant and controller oracles."""
    P = plant_transfer_grid(spec, omegas)
    C = controller_transfer_grid(ctrl, spec.n_nodes, omegas)
    PC = P @ C
    eye = np.eye(spec.n_nodes)
    return np.linalg.solve(eye + PC, PC)


def estimate_jmr(y, y_d) -> float:
    """Finite-sample model-reference criterion: mean over time of the summed squared error."""
    y = np.asarray(y, dtype=float)
    y_d = np.asarray(y_d, dtype=float)
    if y.shape != y_d.shape:
        raise ValueError(f"horizon mismatch: {y.shape} vs {y_d.shape}")
    return float(np.sum((y_d - y) ** 2) / y.shape[0])


def performance_metric(
    spec: NetworkSpec,
    ctrl: DistributedController,
    omegas=None,
    closed_loop: ClosedLoopSystem | None = None,
) -> float:
    """Largest spectral-norm gap between achieved and desired transfers on the grid."""
    if omegas is None:
        omegas = frequency_grid()
    omegas = np.asarray(omegas, dtype=float)
    if closed_loop is None:
        closed_loop = assemble_closed_loop(spec, ctrl)
    achieved = closed_loop.transfer_grid(omegas)
    desired = reference_transfer_grid(spec, omegas)
    diff = achieved - desired
    finite = np.all(np.isfinite(diff.reshape(len(omegas), -1)), axis=1)
    if not np.all(finite):
        warnings.warn("skipping grid points at poles of the closed-loop transfer")
        diff = diff[finite]
        if not len(diff):
            raise ValueError("no evaluable grid points")
    return float(np.max(np.linalg.svd(diff, compute_uv=False)[:, 0]))


# -- experiment harness ---------------------------------------------------------


def generate_experiment_data(
    spec: NetworkSpec,
    n_samples: int,
    sigma_u: float,
    sigma_v: float,
    rng: np.random.Generator,
    plant: AssembledSystem | None = None,
):
    """White-input open-loop experiment; returns (u, y, y_measured).

    Output noise is white Gaussian, mutually uncorrelated, added after the
    simulation; sigma_v may be a scalar or one value per node.
    """
    L = spec.n_nodes
    u = sigma_u * rng.standard_normal((n_samples, L))
    if plant is None:
        plant = plant_system(spec)
    y = plant.simulate(u)
    sigma_v = np.broadcast_to(np.asarray(sigma_v, dtype=float), (L,))
    noise = rng.standard_normal((n_samples, L)) * sigma_v
    return u, y, y + noise


def step_references(n_nodes: int, n_samples: int, amplitudes) -> np.ndarray:
    amplitudes = np.asarray(amplitudes, dtype=float)
    if amplitudes.shape != (n_nodes,):
        raise ValueError(f"need one step amplitude per node, got {amplitudes.shape}")
    return np.ones((n_samples, 1)) * amplitudes[None, :]


def synthesize_controller(
    spec: NetworkSpec,
    u,
    y,
    class_spec: ControllerClassSpec | None = None,
    ideal_nodes=None,
    trim=None,
    cancel_tol: float = 1e-9,
    allow_rank_deficient: bool = False,
):
    """Virtual signals + identification for one controller class.

    Returns (controller, parametrization, identification results, virtual data).
    The spec's measurement channels are folded into the couplings first; the
    reference model part is untouched.
    """
    work = normalize_interconnection(spec)
    if ideal_nodes is None:
        ideal_nodes = build_ideal_controller(work, cancel_tol=cancel_tol)
    if class_spec is None:
        class_spec = ControllerClassSpec("full", "full")
    drop = _edges_to_indices(class_spec.drop_edges, spec) if class_spec.drop_edges else None
    custom = _edges_to_indices(class_spec.edges, spec) if class_spec.edges else None
    param = controller_class(
        ideal_nodes, work.graph, kind=class_spec.kind, drop_edges=drop, edges=custom
    )
    vd = virtual_references_distributed(work, y, cancel_tol=cancel_tol)
    regressors = build_regressors(param, vd, u, trim=trim)
    results = [identify_node(r, allow_rank_deficient=allow_rank_deficient) for r in regressors]
    ctrl = controller_from_parameters(
        param, [r.rho for r in results], work, cancel_tol=cancel_tol
    )
    return ctrl, param, results, vd


def _edges_to_indices(edges, spec: NetworkSpec):
    index = {label: k for k, label in enumerate(spec.labels)}
    out = []
    for a, b in edges:
        if a in index and b in index:
            out.append((index[a], index[b]))
        elif (isinstance(a, int) and 0 <= a < spec.n_nodes and isinstance(b, int)
              and 0 <= b < spec.n_nodes and (min(a, b), max(a, b)) in spec.graph.edges):
            out.append((a, b))
        else:
            raise ValueError(f"edge [{a}, {b}] does not name spec nodes")
    return tuple(out)


@dataclass(frozen=True)
class PerformanceRecord:
    seed: int
    label: str
    metric: float
    jmr: float
    diverged: bool = False
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


@dataclass(frozen=True)
class ClassSummary:
    label: str
    count: int
    failures: int
    median: float
    q1: float
    q3: float
    minimum: float
    maximum: float

    @staticmethod
    def from_samples(label: str, samples, failures: int) -> "ClassSummary":
        arr = np.asarray(samples, dtype=float)
        if arr.size == 0:
            nan = float("nan")
            return ClassSummary(label, 0, failures, nan, nan, nan, nan, nan)
        return ClassSummary(
            label=label,
            count=int(arr.size),
            failures=failures,
            median=float(np.median(arr)),
            q1=float(np.percentile(arr, 25)),
            q3=float(np.percentile(arr, 75)),
            minimum=float(np.min(arr)),
            maximum=float(np.max(arr)),
        )


@dataclass(frozen=True)
class MonteCarloResult:
    records: tuple
    summaries: tuple

    def summary_for(self, label: str) -> ClassSummary:
        for s in self.summaries:
            if s.label == label:
                return s
        raise KeyError(label)


def _run_replicate(spec, work, params, link_rows, config, seed, plant, ref_sys, amplitudes, omegas):
    rng = np.random.default_rng(seed)
    u, _, y_meas = generate_experiment_data(
        work, config.n_samples, config.sigma_u, config.sigma_v, rng, plant=plant
    )
    records = []
    try:
        vd = virtual_references_distributed(work, y_meas, cancel_tol=config.cancel_tol)
    except Exception as exc:  # noqa: BLE001 - replicate failures are recorded, not fatal
        return [
            PerformanceRecord(seed, cs.label, float("nan"), float("nan"), error=str(exc))
            for cs in config.classes
        ]
    refs = step_references(spec.n_nodes, config.eval_horizon, amplitudes)
    y_desired = ref_sys.simulate(refs)
    for class_spec, param, rows in zip(config.classes, params, link_rows):
        try:
            regressors = build_regressors(param, vd, u, trim=config.trim)
            results = [identify_node(r) for r in regressors]
            ctrl = controller_from_parameters(
                param, [r.rho for r in results], work, cancel_tol=config.cancel_tol, link_rows=rows
            )
            cls = assemble_closed_loop(spec, ctrl)
            metric = performance_metric(spec, ctrl, omegas, closed_loop=cls)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DivergenceWarning)
                y_cl, _ = simulate_closed_loop(cls, refs)
            diverged = bool(np.max(np.abs(y_cl)) > DIVERGENCE_LIMIT) if y_cl.size else False
            jmr = estimate_jmr(y_cl, y_desired) if not diverged else float("inf")
            records.append(PerformanceRecord(seed, class_spec.label, metric, jmr, diverged))
        except Exception as exc:  # noqa: BLE001
            records.append(
                PerformanceRecord(seed, class_spec.label, float("nan"), float("nan"), error=str(exc))
            )
    return records


def monte_carlo(spec: NetworkSpec, config: ExperimentConfig) -> MonteCarloResult:
    """Repeated data-generation / synthesis / evaluation study.

    Replicate k draws its own generator seeded with (master seed + k); the
    step-reference amplitudes are drawn once from the master seed.
    """
    work = normalize_interconnection(spec)
    report = check_realizability(work)
    if not report.ok:
        raise ValueError("ideal controller not realizable: " + "; ".join(report.messages()))
    ideal_nodes = build_ideal_controller(work, cancel_tol=config.cancel_tol)
    params = []
    for class_spec in config.classes:
        drop = _edges_to_indices(class_spec.drop_edges, spec) if class_spec.drop_edges else None
        custom = _edges_to_indices(class_spec.edges, spec) if class_spec.edges else None
        params.append(
            controller_class(
                ideal_nodes, work.graph, kind=class_spec.kind, drop_edges=drop, edges=custom
            )
        )
    link_rows = [precompute_link_rows(p, work, cancel_tol=config.cancel_tol) for p in params]
    plant = plant_system(work)
    ref_sys = reference_system(spec)
    master = np.random.default_rng(config.seed)
    amplitudes = master.uniform(0.0, 1.0, spec.n_nodes)
    amplitudes = np.where(amplitudes == 0.0, 1.0, amplitudes)  # (0, 1]
    omegas = frequency_grid(config.grid_points)

    seeds = [config.seed + k for k in range(config.replicates)]
    args = (spec, work, params, link_rows, config)
    if config.n_jobs != 1:
        from joblib import Parallel, delayed

        chunks = Parallel(n_jobs=config.n_jobs)(
            delayed(_run_replicate)(*args, seed, plant, ref_sys, amplitudes, omegas)
            for seed in seeds
        )
    else:
        chunks = [
            _run_replicate(*args, seed, plant, ref_sys, amplitudes, omegas) for seed in seeds
        ]
    records = tuple(rec for chunk in chunks for rec in chunk)

    summaries = []
    for class_spec in config.classes:
        ok = [r.metric for r in records if r.label == class_spec.label and not r.failed]
        failures = sum(1 for r in records if r.label == class_spec.label and r.failed)
        summaries.append(ClassSummary.from_samples(class_spec.label, ok, failures))
    return MonteCarloResult(records=records, summaries=tuple(summaries))
