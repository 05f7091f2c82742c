"""Virtual references, tracking errors, and interconnection signals from measured data.

Given measured outputs, the virtual reference is the fictitious reference that
would have produced them through the structured reference model. The
computation runs either node-locally with one neighbor exchange (the
distributed algorithm) or by applying the assembled global operator (the
centralized cross-check). Inverting the per-node desired transfer consumes
look-ahead samples, so every horizon is shortened by the largest relative
degree involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import DEFAULT_CANCEL_TOL, filter_signal, inverse_filter
from .network import NetworkSpec

__all__ = [
    "VirtualData",
    "virtual_references_distributed",
    "virtual_references_centralized",
    "virtual_controller_interconnections",
]


@dataclass(frozen=True)
class VirtualData:
    """Virtual signals on the common (shortened) horizon.

    reference_links[(i, j)] is generated at node i for neighbor j;
    controller_links[(j, i)] is the link input node i's predictor uses for
    neighbor j.
    """

    references: np.ndarray
    errors: np.ndarray
    reference_links: dict
    controller_links: dict
    horizon: int


def _check_outputs(spec: NetworkSpec, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != spec.n_nodes:
        raise ValueError(f"outputs must be (N, {spec.n_nodes}), got {y.shape}")
    return y


def _inversion_loss(spec: NetworkSpec) -> int:
    loss = 0
    for ref in spec.reference:
        if ref.desired.is_zero:
            raise ValueError("desired transfer with zero numerator cannot be inverted")
        loss = max(loss, ref.desired.relative_degree)
    return loss


def virtual_references_distributed(
    spec: NetworkSpec, y, cancel_tol: float = DEFAULT_CANCEL_TOL
) -> VirtualData:
    """Two-pass node-local virtual reference computation.

    Pass 1 filters each node's output through its outgoing reference
    couplings; pass 2 receives the neighbors' link signals, removes their
    contribution, and inverts the desired transfer.
    """
    y = _check_outputs(spec, y)
    n_samples = y.shape[0]
    loss = _inversion_loss(spec)
    if n_samples <= loss:
        raise ValueError(f"horizon {n_samples} too short for inversion loss {loss}")
    horizon = n_samples - loss

    reference_links = {}
    for i, j in spec.graph.directed_edges:
        p = spec.reference_out(i, j)
        reference_links[(i, j)] = (
            np.zeros(n_samples) if p.is_zero else filter_signal(p, y[:, i])
        )

    references = np.empty((horizon, spec.n_nodes))
    for i in range(spec.n_nodes):
        inner = y[:, i].copy()
        for j in spec.graph.neighbors(i):
            q = spec.reference_in(i, j)
            if not q.is_zero:
                inner -= filter_signal(q, reference_links[(j, i)])
        references[:, i] = inverse_filter(spec.reference[i].desired, inner)[:horizon]

    errors = references - y[:horizon]
    reference_links = {k: v[:horizon] for k, v in reference_links.items()}
    controller_links = virtual_controller_interconnections(
        spec, errors, reference_links, cancel_tol=cancel_tol
    )
    return VirtualData(
        references=references,
        errors=errors,
        reference_links=reference_links,
        controller_links=controller_links,
        horizon=horizon,
    )


def virtual_references_centralized(
    spec: NetworkSpec, y, cancel_tol: float = DEFAULT_CANCEL_TOL
) -> np.ndarray:
    """Central-governor solve of the full-network virtual reference relation.

    Applies the global operator (I - Q Delta P) to the gathered outputs with
    the per-edge couplings composed into single filters, then inverts each
    desired transfer in the time domain. Cross-validates the distributed
    algorithm.
    """
    y = _check_outputs(spec, y)
    loss = _inversion_loss(spec)
    horizon = y.shape[0] - loss
    if horizon < 1:
        raise ValueError("horizon too short")
    out = np.empty((horizon, spec.n_nodes))
    for i in range(spec.n_nodes):
        inner = y[:, i].copy()
        for j in spec.graph.neighbors(i):
            q = spec.reference_in(i, j)
            p = spec.reference_out(j, i)
            if q.is_zero or p.is_zero:
                continue
            composed = (q * p).simplify(cancel_tol)
            inner -= filter_signal(composed, y[:, j])
        out[:, i] = inverse_filter(spec.reference[i].desired, inner)[:horizon]
    return out


def virtual_controller_interconnections(
    spec: NetworkSpec,
    errors,
    reference_links,
    cancel_tol: float = DEFAULT_CANCEL_TOL,
) -> dict:
    """Link inputs of the virtual experiment, keyed (sender, receiver).

    The sender j contributes (T_j/(1-T_j)) e_j plus its incoming reference
    couplings filtered through 1/(1-T_j); with a decoupled reference model
    this is exactly the known link row applied to the virtual error.
    """
    errors = np.asarray(errors, dtype=float)
    out = {}
    for j in range(spec.n_nodes):
        ref = spec.reference[j]
        one_minus_t = (1 - ref.desired).simplify(cancel_tol)
        if one_minus_t.is_zero:
            raise ValueError(f"node {j}: desired transfer equal to one")
        base = filter_signal((ref.desired / one_minus_t).simplify(cancel_tol), errors[:, j])
        for h in spec.graph.neighbors(j):
            q = spec.reference_in(j, h)
            if q.is_zero:
                continue
            gain = (q / one_minus_t).simplify(cancel_tol)
            base = base + filter_signal(gain, np.asarray(reference_links[(h, j)], dtype=float))
        for i in spec.graph.neighbors(j):
            out[(j, i)] = base
    return out
