"""Shared specs and generators for the test suite."""

import numpy as np
import pytest

from dvrft.lti import tf
from dvrft.network import (
    Graph,
    NetworkSpec,
    ReferenceNodeSpec,
    SubsystemSpec,
    plant_system,
    reference_system,
    validate_network,
)
from dvrft.ideal import check_realizability

NINE_NODE_A = {1: 0.6, 2: 0.2, 3: 0.7, 4: 0.3, 5: 0.1, 6: 0.4, 7: 0.8, 8: 0.5, 9: 0.9}
GRID_EDGES = ((0, 1), (1, 2), (3, 4), (4, 5), (6, 7), (7, 8), (0, 3), (1, 4), (2, 5), (3, 6), (4, 7), (5, 8))


def make_example1(c=(1.0, 1.0), d=(0.1, 0.1), a=(0.5, 0.7), gamma=(0.6, 0.6)) -> NetworkSpec:
    """Two coupled first-order processes with a decoupled first-order target."""
    graph = Graph(2, ((0, 1),))
    subsystems = tuple(
        SubsystemSpec(
            plant=tf([c[i]], [1.0, -a[i]]),
            coupling={1 - i: tf([d[i]], [1.0, -a[i]])},
        )
        for i in range(2)
    )
    reference = tuple(
        ReferenceNodeSpec(desired=tf([1.0 - gamma[i]], [1.0, -gamma[i]])) for i in range(2)
    )
    return NetworkSpec(graph, subsystems, reference)


def make_nine_node() -> NetworkSpec:
    """3x3 grid of first-order subsystems with 0.1 couplings and a common target."""
    subsystems = []
    graph = Graph(9, GRID_EDGES)
    for i in range(9):
        a = NINE_NODE_A[i + 1]
        subsystems.append(
            SubsystemSpec(
                plant=tf([1.0], [1.0, -a]),
                coupling={j: tf([0.1], [1.0, -a]) for j in graph.neighbors(i)},
            )
        )
    reference = tuple(ReferenceNodeSpec(desired=tf([0.4], [1.0, -0.6])) for _ in range(9))
    return NetworkSpec(graph, tuple(subsystems), reference)


def make_coupled_pair() -> NetworkSpec:
    """Two nodes with a coupled reference model (nonzero Q and P channels)."""
    graph = Graph(2, ((0, 1),))
    subsystems = (
        SubsystemSpec(plant=tf([1.0], [1.0, -0.5]), coupling={1: tf([0.1], [1.0, -0.5])}),
        SubsystemSpec(plant=tf([1.0], [1.0, -0.7]), coupling={0: tf([0.1], [1.0, -0.7])}),
    )
    desired = tf([0.4], [1.0, -0.6])
    reference = (
        ReferenceNodeSpec(
            desired=desired,
            coupling_in={1: tf([0.2], [1.0, -0.6])},
            coupling_out={1: tf([0.5])},
        ),
        ReferenceNodeSpec(
            desired=desired,
            coupling_in={0: tf([0.1], [1.0, -0.6])},
            coupling_out={0: tf([0.3])},
        ),
    )
    return NetworkSpec(graph, subsystems, reference)


def random_coupled_spec(rng: np.random.Generator, n_nodes: int = 3, max_tries: int = 50) -> NetworkSpec:
    """Random stable spec with coupled reference model; resamples until valid."""
    for _ in range(max_tries):
        edges = [(k, k + 1) for k in range(n_nodes - 1)]
        if n_nodes >= 3 and rng.random() < 0.5:
            edges.append((0, n_nodes - 1))
        graph = Graph(n_nodes, tuple(edges))
        subsystems, reference = [], []
        for i in range(n_nodes):
            a = rng.uniform(0.2, 0.8)
            c = rng.uniform(0.5, 1.5)
            coupling = {
                j: tf([rng.uniform(-0.15, 0.15)], [1.0, -a]) for j in graph.neighbors(i)
            }
            gamma = rng.uniform(0.3, 0.8)
            q_in = {j: tf([rng.uniform(-0.2, 0.2)], [1.0, -gamma]) for j in graph.neighbors(i)}
            p_out = {j: tf([rng.uniform(-0.6, 0.6)]) for j in graph.neighbors(i)}
            subsystems.append(SubsystemSpec(plant=tf([c], [1.0, -a]), coupling=coupling))
            reference.append(
                ReferenceNodeSpec(desired=tf([1.0 - gamma], [1.0, -gamma]), coupling_in=q_in, coupling_out=p_out)
            )
        spec = NetworkSpec(graph, tuple(subsystems), tuple(reference))
        if (
            plant_system(spec).spectral_radius() < 0.95
            and reference_system(spec).spectral_radius() < 0.95
            and validate_network(spec).ok
            and check_realizability(spec).ok
        ):
            return spec
    raise RuntimeError("could not draw a valid random spec")


@pytest.fixture
def example1_spec():
    return make_example1()


@pytest.fixture
def nine_node_spec():
    return make_nine_node()


@pytest.fixture
def coupled_pair_spec():
    return make_coupled_pair()
