"""Exact-matching distributed controller construction and realizability checks.

Eliminating the node output, reference, and desired output from the coupled
plant/reference-model equations leaves a local controller whose entries are
rational functions of the node's transfer functions. Interconnecting those
local controllers reproduces the reference model exactly when the stated
pole/zero and causality conditions hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import DistributedController, NodeController, reference_link_rows
from .lti import DEFAULT_CANCEL_TOL, TF_ZERO, RationalTF, poly_trim
from .network import NetworkSpec, ReferenceNodeSpec, SubsystemSpec

__all__ = [
    "IdealControllerNode",
    "RealizabilityReport",
    "NotRepresentableError",
    "build_ideal_node",
    "build_ideal_controller",
    "to_distributed_controller",
    "check_realizability",
    "map_to_parameters",
]

ROOT_MATCH_TOL = 1e-7


class NotRepresentableError(ValueError):
    """The ideal entries do not lie in the span of the controller parametrization."""

    def __init__(self, node: int, residual: float, tol: float):
        self.node = node
        self.residual = residual
        super().__init__(
            f"node {node}: ideal controller outside the parametrized class "
            f"(coefficient residual {residual:.3g} > {tol:.3g})"
        )


@dataclass(frozen=True)
class IdealControllerNode:
    """Entries of one local ideal controller.

    c_ee drives u_i from e_i, c_es / c_ek from the incoming link channels;
    k_* are the link-output rows (kept even though they are known from the
    reference model and never identified).
    """

    node: int
    c_ee: RationalTF
    c_es: dict = field(default_factory=dict)
    c_ek: dict = field(default_factory=dict)
    k_o: dict = field(default_factory=dict)
    k_oq: dict = field(default_factory=dict)
    k_p: dict = field(default_factory=dict)
    k_pq: dict = field(default_factory=dict)


def build_ideal_node(
    sub: SubsystemSpec,
    ref: ReferenceNodeSpec,
    neighbors,
    node: int = 0,
    cancel_tol: float = DEFAULT_CANCEL_TOL,
) -> IdealControllerNode:
    """Construct the local ideal controller entries by transfer-function algebra."""
    g = sub.plant
    if g.is_zero:
        raise ValueError(f"node {node}: plant transfer is zero, no control authority")
    one_minus_t = (1 - ref.desired).simplify(cancel_tol)
    if one_minus_t.is_zero:
        raise ValueError(f"node {node}: desired transfer equal to one (reference = output)")

    g_omt = (g * one_minus_t).simplify(cancel_tol)
    c_ee = (ref.desired / g_omt).simplify(cancel_tol)

    c_es, c_ek = {}, {}
    for j in neighbors:
        w = sub.coupling[j]
        if not w.is_zero:
            c_es[j] = (-(w / g)).simplify(cancel_tol)
        q = ref.coupling_in.get(j, TF_ZERO)
        if not q.is_zero:
            c_ek[j] = (q / g_omt).simplify(cancel_tol)

    out_w_err, out_w_q, out_q_err, out_q_q = reference_link_rows(
        ref, neighbors, measurement=sub.measurement, cancel_tol=cancel_tol
    )
    return IdealControllerNode(
        node=node,
        c_ee=c_ee,
        c_es=c_es,
        c_ek=c_ek,
        k_o=out_w_err,
        k_oq=out_w_q,
        k_p=out_q_err,
        k_pq=out_q_q,
    )


def build_ideal_controller(spec: NetworkSpec, cancel_tol: float = DEFAULT_CANCEL_TOL):
    return [
        build_ideal_node(
            spec.subsystems[i],
            spec.reference[i],
            spec.graph.neighbors(i),
            node=i,
            cancel_tol=cancel_tol,
        )
        for i in range(spec.n_nodes)
    ]


def to_distributed_controller(nodes, spec: NetworkSpec) -> DistributedController:
    """Wire ideal nodes into a distributed controller over the plant edges."""
    ctrl_nodes = []
    for n in nodes:
        ctrl_nodes.append(
            NodeController(
                node=n.node,
                err_gain=n.c_ee,
                link_w=dict(n.c_es),
                link_q=dict(n.c_ek),
                out_w_err=dict(n.k_o),
                out_w_q=dict(n.k_oq),
                out_q_err=dict(n.k_p),
                out_q_q=dict(n.k_pq),
            )
        )
    return DistributedController(tuple(ctrl_nodes), spec.graph.edges)


# -- realizability -------------------------------------------------------------


@dataclass
class RealizabilityReport:
    """Stability and causality conditions for the ideal controller entries."""

    nmp_zero_violations: list = field(default_factory=list)
    unstable_coupling_pole_violations: list = field(default_factory=list)
    unstable_measurement_pole_violations: list = field(default_factory=list)
    causality_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (
            self.nmp_zero_violations
            or self.unstable_coupling_pole_violations
            or self.unstable_measurement_pole_violations
            or self.causality_violations
        )

    def messages(self) -> list:
        out = []
        for node, root in self.nmp_zero_violations:
            out.append(
                f"node {node}: non-minimum-phase plant zero {root:.6g} not shared by the "
                "reference/coupling transfers"
            )
        for node, j, root in self.unstable_coupling_pole_violations:
            out.append(f"node {node}: unstable coupling pole {root:.6g} (edge to {j}) not a plant pole")
        for node, j, root in self.unstable_measurement_pole_violations:
            out.append(f"node {node}: unstable measurement pole {root:.6g} (edge to {j}) not a desired-transfer zero")
        for entry, rd in self.causality_violations:
            out.append(f"{entry}: relative degree {rd} below the plant's")
        return out

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "nmp_zero_violations": [[n, repr(r)] for n, r in self.nmp_zero_violations],
            "unstable_coupling_pole_violations": [
                [n, j, repr(r)] for n, j, r in self.unstable_coupling_pole_violations
            ],
            "unstable_measurement_pole_violations": [
                [n, j, repr(r)] for n, j, r in self.unstable_measurement_pole_violations
            ],
            "causality_violations": [[e, d] for e, d in self.causality_violations],
        }


def _unstable(roots, tol: float):
    # boundary roots count as unstable (conservative)
    return [r for r in roots if abs(r) >= 1.0 - tol]


def _contains_root(roots, target, tol: float) -> bool:
    return any(abs(r - target) <= tol for r in roots)


def check_realizability(spec: NetworkSpec, root_tol: float = ROOT_MATCH_TOL) -> RealizabilityReport:
    """Check the three pole/zero conditions and entry causality per node."""
    report = RealizabilityReport()
    for i in range(spec.n_nodes):
        sub, ref = spec.subsystems[i], spec.reference[i]
        g = sub.plant
        nbrs = spec.graph.neighbors(i)

        for root in _unstable(g.zeros(), root_tol):
            targets = [ref.desired.zeros()]
            targets += [sub.coupling[j].zeros() for j in nbrs if not sub.coupling[j].is_zero]
            targets += [
                ref.coupling_in[j].zeros()
                for j in nbrs
                if not ref.coupling_in.get(j, TF_ZERO).is_zero
            ]
            if not all(_contains_root(t, root, root_tol) for t in targets):
                report.nmp_zero_violations.append((i, root))

        for j in nbrs:
            w = sub.coupling[j]
            if not w.is_zero:
                for root in _unstable(w.poles(), root_tol):
                    if not _contains_root(g.poles(), root, root_tol):
                        report.unstable_coupling_pole_violations.append((i, j, root))
            f = sub.measurement.get(j)
            if f is not None and not f.is_zero:
                for root in _unstable(f.poles(), root_tol):
                    if not _contains_root(ref.desired.zeros(), root, root_tol):
                        report.unstable_measurement_pole_violations.append((i, j, root))

        g_rd = g.relative_degree
        checks = [(f"node {i}: desired transfer", ref.desired)]
        checks += [(f"node {i}: coupling to {j}", sub.coupling[j]) for j in nbrs]
        checks += [
            (f"node {i}: reference coupling from {j}", ref.coupling_in[j])
            for j in nbrs
            if j in ref.coupling_in
        ]
        for label, entry in checks:
            rd = entry.relative_degree
            if rd is not math.inf and rd < g_rd:
                report.causality_violations.append((label, rd))
    return report


# -- parameter mapping ---------------------------------------------------------


def _common_denominator(dens, tol: float = 1e-9) -> np.ndarray:
    """Product of the distinct denominators (a valid, if not minimal, common den)."""
    distinct = []
    for d in dens:
        d = poly_trim(d)
        if not any(
            len(d) == len(e) and np.allclose(d, e, rtol=tol, atol=tol) for e in distinct
        ):
            distinct.append(d)
    out = np.ones(1)
    for d in distinct:
        out = np.polymul(out, d)
    return out


def _times_cofactor(num, den, common) -> np.ndarray:
    """num * (common / den); raises if den does not divide common."""
    quot, rem = np.polydiv(common, den)
    if np.max(np.abs(rem)) > 1e-8 * max(1.0, np.max(np.abs(common))):
        raise ValueError("denominator does not divide the common denominator")
    return np.polymul(num, quot)


def map_to_parameters(ideal: IdealControllerNode, node_param, tol: float = 1e-8) -> np.ndarray:
    """Coefficients rho with parametrized entries equal to the ideal ones.

    Matches numerator coefficients after bringing every target entry over a
    common denominator; raises NotRepresentableError when the residual exceeds
    tol (the parametrized class does not contain the ideal controller).
    """
    ideal_entries = {("e",): ideal.c_ee}
    for j, a in ideal.c_es.items():
        ideal_entries[("w", j)] = a
    for j, a in ideal.c_ek.items():
        ideal_entries[("q", j)] = a

    targets = sorted(set(node_param.targets()) | set(ideal_entries), key=repr)
    rows, rhs = [], []
    scale = 1.0
    for target in targets:
        basis = node_param.basis_for(target)
        entry = ideal_entries.get(target, TF_ZERO)
        dens = [b.den for b in basis] + ([entry.den] if not entry.is_zero else [])
        if not dens:
            continue
        common = _common_denominator(dens)
        cols = [_times_cofactor(b.num, b.den, common) for b in basis]
        target_poly = (
            _times_cofactor(entry.num, entry.den, common) if not entry.is_zero else np.zeros(1)
        )
        width = max([len(c) for c in cols] + [len(target_poly)])
        block = np.zeros((width, node_param.n_parameters))
        for coeffs, term_index in zip(cols, node_param.term_indices(target)):
            block[width - len(coeffs):, term_index] = coeffs
        b_vec = np.zeros(width)
        b_vec[width - len(target_poly):] = target_poly
        rows.append(block)
        rhs.append(b_vec)
        scale = max(scale, np.max(np.abs(b_vec)) if b_vec.size else 0.0)

    if not rows:
        return np.zeros(node_param.n_parameters)
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    rho, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.max(np.abs(A @ rho - b))) / scale
    if residual > tol:
        raise NotRepresentableError(ideal.node, residual, tol)
    return rho
