"""Interconnected plant and structured reference model over an undirected graph.

The plant couples node outputs through measurement channels (s_ij = o_ji with
o_ij produced from y_i); the reference model shares the same edge set. Both
are simulated by assembling one global state-space from the scalar entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagram import AssembledSystem, DiagramBuilder, ex_sum
from .lti import TF_ONE, TF_ZERO, RationalTF, tf

__all__ = [
    "Graph",
    "SubsystemSpec",
    "ReferenceNodeSpec",
    "NetworkSpec",
    "ValidationReport",
    "frequency_grid",
    "validate_network",
    "plant_transfer_eval",
    "reference_transfer_eval",
    "plant_transfer_grid",
    "reference_transfer_grid",
    "plant_system",
    "reference_system",
    "simulate_plant",
    "simulate_reference",
    "normalize_interconnection",
    "spec_from_dict",
    "spec_to_dict",
    "load_spec",
    "save_spec",
]

ASSUMPTION_MARGIN = 1e-8


@dataclass(frozen=True)
class Graph:
    """Undirected interconnection graph on nodes 0..n_nodes-1."""

    n_nodes: int
    edges: tuple

    def __post_init__(self):
        norm = []
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range")
            norm.append((min(i, j), max(i, j)))
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def neighbors(self, i: int) -> tuple:
        out = [j for a, j in self.edges if a == i] + [a for a, j in self.edges if j == i]
        return tuple(sorted(out))

    @property
    def directed_edges(self) -> tuple:
        return tuple(sorted([(i, j) for i, j in self.edges] + [(j, i) for i, j in self.edges]))


@dataclass(frozen=True)
class SubsystemSpec:
    """Per-node plant: y_i = plant * u_i + sum_j coupling[j] * s_ij, o_ij = measurement[j] * y_i."""

    plant: RationalTF
    coupling: dict = field(default_factory=dict)
    measurement: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ReferenceNodeSpec:
    """Per-node reference model: y_i^d = desired * r_i + sum_j coupling_in[j] * k_ij."""

    desired: RationalTF
    coupling_in: dict = field(default_factory=dict)
    coupling_out: dict = field(default_factory=dict)

    @property
    def is_decoupled(self) -> bool:
        return all(q.is_zero for q in self.coupling_in.values()) and all(
            p.is_zero for p in self.coupling_out.values()
        )


@dataclass(frozen=True)
class NetworkSpec:
    graph: Graph
    subsystems: tuple
    reference: tuple
    labels: tuple = ()

    def __post_init__(self):
        L = self.graph.n_nodes
        if len(self.subsystems) != L or len(self.reference) != L:
            raise ValueError("per-node entries must match the node count")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(1, L + 1)))
        subsystems = []
        for i in range(L):
            nbrs = set(self.graph.neighbors(i))
            sub, ref = self.subsystems[i], self.reference[i]
            if set(sub.coupling) != nbrs:
                raise ValueError(f"node {i}: coupling keys {set(sub.coupling)} != neighbors {nbrs}")
            if set(sub.measurement) - nbrs:
                raise ValueError(f"node {i}: measurement keys must be neighbors")
            if set(ref.coupling_in) - nbrs or set(ref.coupling_out) - nbrs:
                raise ValueError(f"node {i}: reference coupling only on plant edges")
            measurement = {j: sub.measurement.get(j, TF_ONE) for j in nbrs}
            subsystems.append(
                SubsystemSpec(plant=sub.plant, coupling=dict(sub.coupling), measurement=measurement)
            )
        object.__setattr__(self, "subsystems", tuple(subsystems))

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    def measurement(self, i: int, j: int) -> RationalTF:
        return self.subsystems[i].measurement.get(j, TF_ONE)

    def reference_in(self, i: int, j: int) -> RationalTF:
        return self.reference[i].coupling_in.get(j, TF_ZERO)

    def reference_out(self, i: int, j: int) -> RationalTF:
        return self.reference[i].coupling_out.get(j, TF_ZERO)

    @property
    def is_decoupled_reference(self) -> bool:
        return all(r.is_decoupled for r in self.reference)


def frequency_grid(n: int = 512) -> np.ndarray:
    """Midpoint grid on (0, pi); excludes DC, where unit-gain reference models are singular."""
    return (np.arange(n) + 0.5) * np.pi / n


def _coupling_matrix(spec: NetworkSpec, z: np.ndarray, incoming, outgoing) -> np.ndarray:
    """(K, L, L) matrix with entries incoming(i,j)(z) * outgoing(j,i)(z) on edges."""
    L = spec.n_nodes
    out = np.zeros((len(z), L, L), dtype=complex)
    for i, j in spec.graph.directed_edges:
        a = incoming(i, j)
        b = outgoing(j, i)
        if a.is_zero or b.is_zero:
            continue
        out[:, i, j] = a(z) * b(z)
    return out


def plant_transfer_grid(spec: NetworkSpec, omegas) -> np.ndarray:
    """(I - W Delta F)^{-1} G on the unit circle; (K, L, L)."""
    z = np.exp(1j * np.asarray(omegas, dtype=float))
    L = spec.n_nodes
    wdf = _coupling_matrix(
        spec, z, lambda i, j: spec.subsystems[i].coupling[j], spec.measurement
    )
    lhs = np.eye(L) - wdf
    rhs = np.zeros((len(z), L, L), dtype=complex)
    for i in range(L):
        rhs[:, i, i] = spec.subsystems[i].plant(z)
    return np.linalg.solve(lhs, rhs)


def reference_transfer_grid(spec: NetworkSpec, omegas) -> np.ndarray:
    """(I - Q Delta P)^{-1} T on the unit circle; (K, L, L)."""
    z = np.exp(1j * np.asarray(omegas, dtype=float))
    L = spec.n_nodes
    qdp = _coupling_matrix(spec, z, spec.reference_in, spec.reference_out)
    lhs = np.eye(L) - qdp
    rhs = np.zeros((len(z), L, L), dtype=complex)
    for i in range(L):
        rhs[:, i, i] = spec.reference[i].desired(z)
    return np.linalg.solve(lhs, rhs)


def plant_transfer_eval(spec: NetworkSpec, omega: float) -> np.ndarray:
    return plant_transfer_grid(spec, [omega])[0]


def reference_transfer_eval(spec: NetworkSpec, omega: float) -> np.ndarray:
    return reference_transfer_grid(spec, [omega])[0]


@dataclass(frozen=True)
class ValidationReport:
    """Minimum determinant margins |det|^{1/L} over the frequency grid."""

    plant_margin: float
    reference_margin: float
    mismatch_margin: float
    threshold: float = ASSUMPTION_MARGIN

    @property
    def plant_ok(self) -> bool:
        return self.plant_margin >= self.threshold

    @property
    def reference_ok(self) -> bool:
        return self.reference_margin >= self.threshold

    @property
    def mismatch_ok(self) -> bool:
        return self.mismatch_margin >= self.threshold

    @property
    def ok(self) -> bool:
        return self.plant_ok and self.reference_ok and self.mismatch_ok

    def violations(self) -> list:
        out = []
        if not self.plant_ok:
            out.append(
                f"interconnection operator near singular (margin {self.plant_margin:.3g})"
            )
        if not self.reference_ok:
            out.append(
                f"reference interconnection near singular (margin {self.reference_margin:.3g})"
            )
        if not self.mismatch_ok:
            out.append(
                "reference model does not separate output from reference "
                f"(margin {self.mismatch_margin:.3g})"
            )
        return out


def validate_network(spec: NetworkSpec, omegas=None, threshold: float = ASSUMPTION_MARGIN) -> ValidationReport:
    """Check the standing well-posedness assumptions on a frequency grid."""
    if omegas is None:
        omegas = frequency_grid()
    z = np.exp(1j * np.asarray(omegas, dtype=float))
    L = spec.n_nodes

    wdf = _coupling_matrix(spec, z, lambda i, j: spec.subsystems[i].coupling[j], spec.measurement)
    qdp = _coupling_matrix(spec, z, spec.reference_in, spec.reference_out)
    eye = np.eye(L)

    det_plant = np.abs(np.linalg.det(eye - wdf))
    det_ref = np.abs(np.linalg.det(eye - qdp))
    tmat = np.zeros((len(z), L, L), dtype=complex)
    for i in range(L):
        tmat[:, i, i] = spec.reference[i].desired(z)
    mismatch = np.linalg.solve(eye - qdp, tmat) - eye
    det_mismatch = np.abs(np.linalg.det(mismatch))

    scale = 1.0 / L
    return ValidationReport(
        plant_margin=float(np.min(det_plant**scale)),
        reference_margin=float(np.min(det_ref**scale)),
        mismatch_margin=float(np.min(det_mismatch**scale)),
        threshold=threshold,
    )


def plant_system(spec: NetworkSpec) -> AssembledSystem:
    """Global state-space of the interconnected plant, inputs u, outputs y."""
    L = spec.n_nodes
    b = DiagramBuilder(L)
    y_terms = {i: [] for i in range(L)}

    for i in range(L):
        g = spec.subsystems[i].plant
        if not g.is_zero:
            y_terms[i].append(b.add_block(f"plant[{i}]", g))
        for j in spec.graph.neighbors(i):
            w = spec.subsystems[i].coupling[j]
            if not w.is_zero:
                y_terms[i].append(b.add_block(f"coupling[{i}<{j}]", w))

    # measurement block meas[i>j] produces o_ij = F_ij * y_i, consumed by node j
    meas = {}
    for i, j in spec.graph.directed_edges:
        if not spec.subsystems[j].coupling[i].is_zero:
            meas[(i, j)] = b.add_block(f"meas[{i}>{j}]", spec.measurement(i, j))

    y_expr = {i: ex_sum(*y_terms[i]) for i in range(L)}
    for i in range(L):
        if not spec.subsystems[i].plant.is_zero:
            b.connect(f"plant[{i}]", b.ext(i))
        for j in spec.graph.neighbors(i):
            if not spec.subsystems[i].coupling[j].is_zero:
                b.connect(f"coupling[{i}<{j}]", meas[(j, i)])
    for i, j in meas:
        b.connect(f"meas[{i}>{j}]", y_expr[i])
    for i in range(L):
        b.add_output(y_expr[i])
    return b.build()


def reference_system(spec: NetworkSpec) -> AssembledSystem:
    """Global state-space of the structured reference model, inputs r, outputs y_d."""
    L = spec.n_nodes
    b = DiagramBuilder(L)
    y_terms = {i: [] for i in range(L)}
    for i in range(L):
        t = spec.reference[i].desired
        if not t.is_zero:
            y_terms[i].append(b.add_block(f"desired[{i}]", t))
        for j in spec.graph.neighbors(i):
            q = spec.reference_in(i, j)
            if not q.is_zero:
                y_terms[i].append(b.add_block(f"ref_in[{i}<{j}]", q))
    out_expr = {}
    for i, j in spec.graph.directed_edges:
        p = spec.reference_out(i, j)
        if not p.is_zero:
            out_expr[(i, j)] = b.add_block(f"ref_out[{i}>{j}]", p)
    y_expr = {i: ex_sum(*y_terms[i]) for i in range(L)}
    for i in range(L):
        if not spec.reference[i].desired.is_zero:
            b.connect(f"desired[{i}]", b.ext(i))
        for j in spec.graph.neighbors(i):
            if not spec.reference_in(i, j).is_zero:
                if (j, i) in out_expr:
                    b.connect(f"ref_in[{i}<{j}]", out_expr[(j, i)])
                else:
                    b.connect(f"ref_in[{i}<{j}]", {})
    for (i, j), _ in out_expr.items():
        b.connect(f"ref_out[{i}>{j}]", y_expr[i])
    for i in range(L):
        b.add_output(y_expr[i])
    return b.build()


def simulate_plant(spec: NetworkSpec, u, noise=None) -> np.ndarray:
    """Zero-IC response of the interconnected plant; optional additive output noise."""
    u = np.asarray(u, dtype=float)
    y = plant_system(spec).simulate(u)
    if noise is not None:
        y = y + np.asarray(noise, dtype=float)
    return y


def simulate_reference(spec: NetworkSpec, r) -> np.ndarray:
    """Zero-IC response of the structured reference model to references r."""
    return reference_system(spec).simulate(np.asarray(r, dtype=float))


def normalize_interconnection(spec: NetworkSpec) -> NetworkSpec:
    """Fold measurement channels into the couplings: coupling[i<j] <- W_ij * F_ji, F <- 1.

    Leaves the transfer u -> y unchanged; the data-driven pipeline assumes
    unit measurement channels.
    """
    subs = []
    for i in range(spec.n_nodes):
        sub = spec.subsystems[i]
        coupling = {}
        for j in spec.graph.neighbors(i):
            coupling[j] = (sub.coupling[j] * spec.measurement(j, i)).simplify()
        subs.append(
            SubsystemSpec(
                plant=sub.plant,
                coupling=coupling,
                measurement={j: TF_ONE for j in spec.graph.neighbors(i)},
            )
        )
    return NetworkSpec(spec.graph, tuple(subs), spec.reference, spec.labels)


# -- JSON schema -------------------------------------------------------------


def _tf_to_dict(a: RationalTF) -> dict:
    return {"num": [float(c) for c in a.num], "den": [float(c) for c in a.den]}


def _tf_from_obj(obj) -> RationalTF:
    if isinstance(obj, (int, float)):
        return tf([float(obj)])
    if isinstance(obj, (list, tuple)):
        return tf(obj)
    return tf(obj["num"], obj.get("den", [1.0]))


def spec_to_dict(spec: NetworkSpec) -> dict:
    nodes = []
    for i in range(spec.n_nodes):
        sub, ref = spec.subsystems[i], spec.reference[i]
        entry = {
            "id": spec.labels[i],
            "G": _tf_to_dict(sub.plant),
            "W": {str(spec.labels[j]): _tf_to_dict(w) for j, w in sorted(sub.coupling.items())},
            "T": _tf_to_dict(ref.desired),
        }
        f_entries = {
            str(spec.labels[j]): _tf_to_dict(f)
            for j, f in sorted(sub.measurement.items())
            if not f.close_to(TF_ONE)
        }
        if f_entries:
            entry["F"] = f_entries
        q_entries = {
            str(spec.labels[j]): _tf_to_dict(q)
            for j, q in sorted(ref.coupling_in.items())
            if not q.is_zero
        }
        if q_entries:
            entry["Q"] = q_entries
        p_entries = {
            str(spec.labels[j]): _tf_to_dict(p)
            for j, p in sorted(ref.coupling_out.items())
            if not p.is_zero
        }
        if p_entries:
            entry["P"] = p_entries
        nodes.append(entry)
    edges = [[spec.labels[i], spec.labels[j]] for i, j in spec.graph.edges]
    return {"nodes": nodes, "edges": edges}


def spec_from_dict(data: dict) -> NetworkSpec:
    nodes = data["nodes"]
    labels = [n["id"] for n in nodes]
    index = {label: k for k, label in enumerate(labels)}
    if len(index) != len(labels):
        raise ValueError("duplicate node ids")
    edges = []
    for a, bnode in data.get("edges", []):
        if a not in index or bnode not in index:
            raise ValueError(f"edge [{a}, {bnode}] references unknown node id")
        edges.append((index[a], index[bnode]))
    graph = Graph(len(labels), tuple(edges))

    subsystems, reference = [], []
    for k, node in enumerate(nodes):
        nbrs = graph.neighbors(k)
        by_id = lambda table: {index[_coerce_id(key, labels)]: _tf_from_obj(v) for key, v in (table or {}).items()}
        coupling = by_id(node.get("W"))
        if set(coupling) != set(nbrs):
            raise ValueError(
                f"node {node['id']}: W entries must match its edges {sorted(nbrs)}"
            )
        measurement = by_id(node.get("F"))
        for j in nbrs:
            measurement.setdefault(j, TF_ONE)
        q = by_id(node.get("Q"))
        p = by_id(node.get("P"))
        subsystems.append(
            SubsystemSpec(plant=_tf_from_obj(node["G"]), coupling=coupling, measurement=measurement)
        )
        reference.append(
            ReferenceNodeSpec(desired=_tf_from_obj(node["T"]), coupling_in=q, coupling_out=p)
        )
    return NetworkSpec(graph, tuple(subsystems), tuple(reference), tuple(labels))


def _coerce_id(key, labels):
    """JSON object keys are strings; match them back to the declared node ids."""
    for label in labels:
        if key == label or key == str(label):
            return label
    raise ValueError(f"unknown neighbor id {key!r}")


def load_spec(source) -> NetworkSpec:
    if isinstance(source, NetworkSpec):
        return source
    if isinstance(source, dict):
        return spec_from_dict(source)
    text = Path(source).read_text()
    return spec_from_dict(json.loads(text))


def save_spec(spec: NetworkSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")
