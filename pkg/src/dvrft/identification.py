"""Per-node least-squares identification of the distributed controller.

Each node's predictor is linear in its parameters: the error entry acts on the
virtual tracking error and the link entries on the received virtual link
signals. The regressor columns are basis transfer functions filtered against
those signals; the solve is an orthogonal-factorization least squares, one
node at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import DistributedController, NodeController, reference_link_rows
from .lti import DEFAULT_CANCEL_TOL, TF_ZERO, RationalTF, filter_signal, tf
from .network import NetworkSpec, frequency_grid
from .virtual import VirtualData

__all__ = [
    "ERROR_TARGET",
    "NodeParametrization",
    "ControllerParametrization",
    "RankDeficiencyError",
    "NodeRegressor",
    "IdentificationResult",
    "ExcitationDiagnostics",
    "mirror_ideal_parametrization",
    "default_reduced_edges",
    "controller_class",
    "build_regressors",
    "identify_node",
    "identify_all",
    "precompute_link_rows",
    "controller_from_parameters",
    "excitation_check",
    "check_minimum_equivalence",
]

ERROR_TARGET = ("e",)

GRAM_CONDITION_LIMIT = 1e10
COVARIANCE_EIG_FLOOR = 1e-6


class RankDeficiencyError(RuntimeError):
    """Regressor matrix is rank deficient: the data does not excite every direction."""


@dataclass(frozen=True)
class NodeParametrization:
    """Ordered (target, basis transfer) terms for one node; linear in the parameters.

    Targets are ("e",) for the error entry, ("w", j) and ("q", j) for the two
    link channels from neighbor j.
    """

    node: int
    terms: tuple

    @property
    def n_parameters(self) -> int:
        return len(self.terms)

    def targets(self):
        seen = []
        for target, _ in self.terms:
            if target not in seen:
                seen.append(target)
        return seen

    def basis_for(self, target):
        return [basis for t, basis in self.terms if t == target]

    def term_indices(self, target):
        return [k for k, (t, _) in enumerate(self.terms) if t == target]

    def entry(self, rho, target) -> RationalTF:
        # group by shared denominator so the common case is one numerator sum
        groups = {}
        for k, (t, basis) in enumerate(self.terms):
            if t == target:
                groups.setdefault(tuple(basis.den), []).append((float(rho[k]), basis.num))
        out = TF_ZERO
        for den, entries in groups.items():
            width = max(len(num) for _, num in entries)
            acc = np.zeros(width)
            for coef, num in entries:
                acc[width - len(num):] += coef * num
            out = out + RationalTF(acc, np.asarray(den))
        return out

    def link_neighbors(self):
        return sorted({t[1] for t, _ in self.terms if t[0] in ("w", "q")})


@dataclass(frozen=True)
class ControllerParametrization:
    nodes: tuple
    edges: tuple  # controller communication edges (i, j), i < j

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, i: int) -> tuple:
        return tuple(sorted([j for a, j in self.edges if a == i] + [a for a, j in self.edges if j == i]))


def _monomial_basis(entry: RationalTF):
    """q^k / den for k = deg(num) .. 0; mirrors the entry's structure."""
    degree = entry.num_degree
    den = entry.den
    out = []
    for k in range(degree, -1, -1):
        num = np.zeros(k + 1)
        num[0] = 1.0
        out.append(tf(num, den))
    return out


def mirror_ideal_parametrization(ideal_nodes, graph, controller_edges=None) -> ControllerParametrization:
    """Linear parametrization whose span contains the given ideal entries.

    Each entry contributes monomial numerators over the ideal entry's
    denominator; entries on edges outside controller_edges are structurally
    zero (reduced-link and decentralized classes).
    """
    if controller_edges is None:
        controller_edges = graph.edges
    controller_edges = tuple(sorted((min(i, j), max(i, j)) for i, j in controller_edges))
    for e in controller_edges:
        if e not in graph.edges:
            raise ValueError(f"controller edge {e} is not a plant edge")

    nodes = []
    for n in ideal_nodes:
        allowed = {j for a, j in controller_edges if a == n.node} | {
            a for a, j in controller_edges if j == n.node
        }
        terms = [(ERROR_TARGET, b) for b in _monomial_basis(n.c_ee)]
        for j in sorted(allowed):
            if j in n.c_es and not n.c_es[j].is_zero:
                terms += [(("w", j), b) for b in _monomial_basis(n.c_es[j])]
            if j in n.c_ek and not n.c_ek[j].is_zero:
                terms += [(("q", j), b) for b in _monomial_basis(n.c_ek[j])]
        nodes.append(NodeParametrization(node=n.node, terms=tuple(terms)))
    return ControllerParametrization(tuple(nodes), controller_edges)


def default_reduced_edges(graph, count: int = 4):
    """Deterministic choice of communication links to drop, keeping the graph connected."""
    kept = set(graph.edges)
    dropped = []
    # prefer removing edges at low-degree (corner) nodes first, ties by edge order
    degree = {i: len(graph.neighbors(i)) for i in range(graph.n_nodes)}
    candidates = sorted(graph.edges, key=lambda e: (degree[e[0]] + degree[e[1]], e))
    for e in candidates:
        if len(dropped) == count:
            break
        trial = kept - {e}
        if _connected(graph.n_nodes, trial):
            kept = trial
            dropped.append(e)
    if len(dropped) < count:
        raise ValueError(f"cannot drop {count} edges and stay connected")
    return tuple(dropped)


def _connected(n_nodes: int, edges) -> bool:
    if n_nodes <= 1:
        return True
    adj = {i: set() for i in range(n_nodes)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n_nodes


def controller_class(
    ideal_nodes, graph, kind: str = "full", drop_edges=None, edges=None
) -> ControllerParametrization:
    """Build the full / reduced / decentralized / custom controller class."""
    if kind == "full":
        return mirror_ideal_parametrization(ideal_nodes, graph)
    if kind == "reduced":
        if drop_edges is None:
            drop_edges = default_reduced_edges(graph)
        dropped = {(min(i, j), max(i, j)) for i, j in drop_edges}
        kept = tuple(e for e in graph.edges if e not in dropped)
        return mirror_ideal_parametrization(ideal_nodes, graph, kept)
    if kind == "decentralized":
        return mirror_ideal_parametrization(ideal_nodes, graph, ())
    if kind == "custom":
        if edges is None:
            raise ValueError("custom controller class requires an edge list")
        return mirror_ideal_parametrization(ideal_nodes, graph, tuple(edges))
    raise ValueError(f"unknown controller class kind {kind!r}")


# -- regression ----------------------------------------------------------------


@dataclass(frozen=True)
class NodeRegressor:
    node: int
    phi: np.ndarray
    target: np.ndarray
    column_targets: tuple


def default_trim(param: ControllerParametrization) -> int:
    degree = 0
    for node in param.nodes:
        for _, basis in node.terms:
            degree = max(degree, basis.den_degree)
    return degree


def build_regressors(param: ControllerParametrization, vd: VirtualData, u, trim=None):
    """Filtered-signal regressor matrix and measured-input target per node."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != param.n_nodes:
        raise ValueError(f"inputs must be (N, {param.n_nodes}), got {u.shape}")
    if u.shape[0] < vd.horizon:
        raise ValueError("input horizon shorter than the virtual-signal horizon")
    if trim is None:
        trim = default_trim(param)
    if trim >= vd.horizon:
        raise ValueError(f"trim {trim} consumes the whole horizon {vd.horizon}")

    out = []
    for node in param.nodes:
        i = node.node
        columns = []
        for target, basis in node.terms:
            if target == ERROR_TARGET:
                sig = vd.errors[:, i]
            elif target[0] == "w":
                sig = vd.controller_links[(target[1], i)]
            elif target[0] == "q":
                sig = vd.reference_links[(target[1], i)]
            else:
                raise ValueError(f"unknown regressor target {target!r}")
            columns.append(filter_signal(basis, sig))
        phi = (
            np.column_stack(columns)[trim:]
            if columns
            else np.zeros((vd.horizon - trim, 0))
        )
        out.append(
            NodeRegressor(
                node=i,
                phi=phi,
                target=u[:vd.horizon, i][trim:],
                column_targets=tuple(t for t, _ in node.terms),
            )
        )
    return out


@dataclass(frozen=True)
class IdentificationResult:
    node: int
    rho: np.ndarray
    criterion: float          # finite-sample sum of squared prediction errors
    gram_condition: float
    residual_norm: float
    rank: int

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "rho": [float(v) for v in self.rho],
            "criterion": self.criterion,
            "gram_condition": self.gram_condition,
            "residual_norm": self.residual_norm,
            "rank": self.rank,
        }


def identify_node(reg: NodeRegressor, allow_rank_deficient: bool = False) -> IdentificationResult:
    """Least-squares parameter estimate for one node."""
    phi, target = reg.phi, reg.target
    n_par = phi.shape[1]
    if n_par == 0:
        return IdentificationResult(reg.node, np.zeros(0), float(target @ target), 1.0, float(np.linalg.norm(target)), 0)
    rho, _, rank, svals = np.linalg.lstsq(phi, target, rcond=None)
    if rank < n_par and not allow_rank_deficient:
        raise RankDeficiencyError(
            f"node {reg.node}: regressor rank {rank} < {n_par} parameters "
            "(insufficient excitation or redundant link channels)"
        )
    gram_condition = float((svals[0] / svals[-1]) ** 2) if svals[-1] > 0 else np.inf
    residual = target - phi @ rho
    return IdentificationResult(
        node=reg.node,
        rho=rho,
        criterion=float(residual @ residual),
        gram_condition=gram_condition,
        residual_norm=float(np.linalg.norm(residual)),
        rank=int(rank),
    )


def identify_all(
    param: ControllerParametrization,
    vd: VirtualData,
    u,
    trim=None,
    allow_rank_deficient: bool = False,
):
    regressors = build_regressors(param, vd, u, trim=trim)
    return [identify_node(r, allow_rank_deficient=allow_rank_deficient) for r in regressors]


def precompute_link_rows(param: ControllerParametrization, spec: NetworkSpec, cancel_tol: float = DEFAULT_CANCEL_TOL):
    """Reference-model link rows per node, restricted to the class's edges."""
    return [
        reference_link_rows(
            spec.reference[node.node], param.neighbors(node.node), measurement=None, cancel_tol=cancel_tol
        )
        for node in param.nodes
    ]


def controller_from_parameters(
    param: ControllerParametrization,
    rhos,
    spec: NetworkSpec,
    cancel_tol: float = DEFAULT_CANCEL_TOL,
    link_rows=None,
) -> DistributedController:
    """Assemble identified entries plus the known reference-model link rows."""
    if link_rows is None:
        link_rows = precompute_link_rows(param, spec, cancel_tol=cancel_tol)
    nodes = []
    for node_param, rho, rows in zip(param.nodes, rhos, link_rows):
        i = node_param.node
        nbrs = param.neighbors(i)
        link_w, link_q = {}, {}
        for j in nbrs:
            w = node_param.entry(rho, ("w", j))
            if not w.is_zero:
                link_w[j] = w
            q = node_param.entry(rho, ("q", j))
            if not q.is_zero:
                link_q[j] = q
        out_w_err, out_w_q, out_q_err, out_q_q = rows
        nodes.append(
            NodeController(
                node=i,
                err_gain=node_param.entry(rho, ERROR_TARGET),
                link_w=link_w,
                link_q=link_q,
                out_w_err=out_w_err,
                out_w_q=out_w_q,
                out_q_err=out_q_err,
                out_q_q=out_q_q,
            )
        )
    return DistributedController(tuple(nodes), param.edges)


# -- diagnostics ---------------------------------------------------------------


@dataclass(frozen=True)
class ExcitationDiagnostics:
    covariance_eigmin: float
    gram_conditions: dict
    warnings: tuple

    @property
    def ok(self) -> bool:
        return not self.warnings


def excitation_check(
    u=None,
    regressors=None,
    lag_window: int = 1,
    eig_floor: float = COVARIANCE_EIG_FLOOR,
    cond_limit: float = GRAM_CONDITION_LIMIT,
) -> ExcitationDiagnostics:
    """Finite-sample proxies for the persistency-of-excitation conditions."""
    notes = []
    eigmin = np.inf
    if u is not None:
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        n, L = u.shape
        if n <= lag_window * L:
            raise ValueError("not enough samples for the covariance window")
        stacked = np.column_stack([u[k:n - lag_window + 1 + k] for k in range(lag_window)])
        cov = np.cov(stacked.T)
        eigmin = float(np.min(np.linalg.eigvalsh(np.atleast_2d(cov))))
        if eigmin < eig_floor:
            notes.append(
                f"input covariance nearly singular (smallest eigenvalue {eigmin:.3g})"
            )
    gram = {}
    if regressors is not None:
        for reg in regressors:
            if reg.phi.shape[1] == 0:
                continue
            svals = np.linalg.svd(reg.phi, compute_uv=False)
            cond = float((svals[0] / svals[-1]) ** 2) if svals[-1] > 0 else np.inf
            gram[reg.node] = cond
            if cond > cond_limit:
                notes.append(f"node {reg.node}: regressor Gram condition {cond:.3g}")
    return ExcitationDiagnostics(
        covariance_eigmin=eigmin, gram_conditions=gram, warnings=tuple(notes)
    )


def check_minimum_equivalence(
    rho_a,
    rho_b,
    param: ControllerParametrization,
    spec: NetworkSpec,
    omegas=None,
    tol: float = 1e-7,
):
    """Whether two parameter vectors induce the same closed-loop behavior.

    The error entries must agree, and on every directed edge the w-channel
    difference must cancel the q-channel difference composed with the sender's
    outgoing reference coupling.
    """
    if omegas is None:
        omegas = frequency_grid(64)
    z = np.exp(1j * np.asarray(omegas, dtype=float))
    max_dev = 0.0
    for node_param, ra, rb in zip(param.nodes, rho_a, rho_b):
        i = node_param.node
        diff_e = node_param.entry(ra, ERROR_TARGET) - node_param.entry(rb, ERROR_TARGET)
        if not diff_e.is_zero:
            max_dev = max(max_dev, float(np.max(np.abs(diff_e(z)))))
        for j in param.neighbors(i):
            diff_w = node_param.entry(ra, ("w", j)) - node_param.entry(rb, ("w", j))
            diff_q = node_param.entry(ra, ("q", j)) - node_param.entry(rb, ("q", j))
            p_ji = spec.reference_out(j, i)
            combo = np.zeros(len(z), dtype=complex)
            if not diff_w.is_zero:
                combo = combo + diff_w(z)
            if not diff_q.is_zero and not p_ji.is_zero:
                # a q-channel difference is invisible when the sender's outgoing
                # coupling is zero (its regressor is identically zero)
                combo = combo + diff_q(z) * p_ji(z)
            max_dev = max(max_dev, float(np.max(np.abs(combo))))
    return max_dev <= tol, max_dev
