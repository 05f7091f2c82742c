"""Distributed controller container: per-node entries plus edge-paired link channels.

Node i computes u_i from its tracking error e_i and from link inputs received
over controller edges. Each directed edge carries two channels: a measurement
channel (w) and a reference-coupling channel (q); the pairing rule is that the
input of (i, j) equals the output of (j, i) on the same channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lti import TF_ONE, TF_ZERO, RationalTF
from .network import ReferenceNodeSpec

__all__ = ["NodeController", "DistributedController", "zero_controller", "reference_link_rows"]


@dataclass(frozen=True)
class NodeController:
    """Transfer entries of one local controller."""

    node: int
    err_gain: RationalTF = TF_ZERO
    link_w: dict = field(default_factory=dict)  # j -> TF on incoming w-channel
    link_q: dict = field(default_factory=dict)  # j -> TF on incoming q-channel
    out_w_err: dict = field(default_factory=dict)  # j -> TF, e_i -> outgoing w to j
    out_w_q: dict = field(default_factory=dict)  # (j, h) -> TF, incoming q from h -> outgoing w to j
    out_q_err: dict = field(default_factory=dict)
    out_q_q: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DistributedController:
    nodes: tuple
    edges: tuple  # controller communication edges, (i, j) with i < j

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges)))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, i: int) -> tuple:
        return tuple(sorted([j for a, j in self.edges if a == i] + [a for a, j in self.edges if j == i]))


def zero_controller(n_nodes: int) -> DistributedController:
    """u_i = 0 for every node, no communication."""
    return DistributedController(tuple(NodeController(node=i) for i in range(n_nodes)), ())


def reference_link_rows(
    ref: ReferenceNodeSpec,
    neighbors,
    measurement=None,
    cancel_tol: float = 1e-9,
):
    """Fixed (non-identified) link-output rows derived from the reference model.

    Outgoing w-channel: (T/(1-T)) F_ij on the error plus F_ij Q_ih/(1-T) on
    incoming q-channels; outgoing q-channel: the same with P_ij instead of F_ij.
    """
    one_minus_t = (1 - ref.desired).simplify(cancel_tol)
    if one_minus_t.is_zero:
        raise ValueError("reference transfer equal to one: link rows are undefined")
    err_core = (ref.desired / one_minus_t).simplify(cancel_tol)

    out_w_err, out_w_q, out_q_err, out_q_q = {}, {}, {}, {}
    for j in neighbors:
        f_ij = TF_ONE if measurement is None else measurement.get(j, TF_ONE)
        p_ij = ref.coupling_out.get(j, TF_ZERO)
        w_row = (err_core * f_ij).simplify(cancel_tol)
        if not w_row.is_zero:
            out_w_err[j] = w_row
        if not p_ij.is_zero:
            q_row = (err_core * p_ij).simplify(cancel_tol)
            if not q_row.is_zero:
                out_q_err[j] = q_row
        for h in neighbors:
            q_ih = ref.coupling_in.get(h, TF_ZERO)
            if q_ih.is_zero:
                continue
            w_link = (f_ij * q_ih / one_minus_t).simplify(cancel_tol)
            if not w_link.is_zero:
                out_w_q[(j, h)] = w_link
            if not p_ij.is_zero:
                q_link = (p_ij * q_ih / one_minus_t).simplify(cancel_tol)
                if not q_link.is_zero:
                    out_q_q[(j, h)] = q_link
    return out_w_err, out_w_q, out_q_err, out_q_q
