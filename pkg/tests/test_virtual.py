"""Virtual reference generation: distributed algorithm vs centralized solve."""

import numpy as np
import pytest

from dvrft.diagram import DiagramBuilder, ex_sum
from dvrft.ideal import build_ideal_controller
from dvrft.io import write_virtual_csv
from dvrft.lti import filter_signal, inverse_filter, tf
from dvrft.network import simulate_plant, simulate_reference
from dvrft.virtual import (
    virtual_controller_interconnections,
    virtual_references_centralized,
    virtual_references_distributed,
)

from conftest import make_example1, random_coupled_spec


class TestDistributed:
    def test_round_trip_through_reference_model(self, nine_node_spec):
        rng = np.random.default_rng(21)
        u = rng.standard_normal((100, 9))
        y = simulate_plant(nine_node_spec, u)
        vd = virtual_references_distributed(nine_node_spec, y)
        assert vd.horizon == 99
        y_back = simulate_reference(nine_node_spec, vd.references)
        np.testing.assert_allclose(y_back, y[: vd.horizon], atol=1e-9)
        np.testing.assert_allclose(vd.errors, vd.references - y[: vd.horizon], atol=0)

    def test_zero_outputs_give_zero_virtual_signals(self, coupled_pair_spec):
        vd = virtual_references_distributed(coupled_pair_spec, np.zeros((40, 2)))
        assert np.all(vd.references == 0.0)
        assert np.all(vd.errors == 0.0)
        assert all(np.all(sig == 0.0) for sig in vd.reference_links.values())
        assert all(np.all(sig == 0.0) for sig in vd.controller_links.values())

    def test_matches_centralized_on_coupled_reference(self, coupled_pair_spec):
        rng = np.random.default_rng(22)
        u = rng.standard_normal((80, 2))
        y = simulate_plant(coupled_pair_spec, u)
        vd = virtual_references_distributed(coupled_pair_spec, y)
        central = virtual_references_centralized(coupled_pair_spec, y)
        np.testing.assert_allclose(vd.references, central, atol=1e-9)

    def test_matches_centralized_on_noisy_data(self, coupled_pair_spec):
        rng = np.random.default_rng(23)
        u = rng.standard_normal((80, 2))
        y = simulate_plant(coupled_pair_spec, u) + 0.1 * rng.standard_normal((80, 2))
        vd = virtual_references_distributed(coupled_pair_spec, y)
        central = virtual_references_centralized(coupled_pair_spec, y)
        np.testing.assert_allclose(vd.references, central, atol=1e-9)

    def test_horizon_too_short_rejected(self, coupled_pair_spec):
        with pytest.raises(ValueError):
            virtual_references_distributed(coupled_pair_spec, np.zeros((1, 2)))

    def test_zero_desired_transfer_rejected(self):
        from dvrft.network import Graph, NetworkSpec, ReferenceNodeSpec, SubsystemSpec

        spec = NetworkSpec(
            Graph(1, ()),
            (SubsystemSpec(plant=tf([1.0], [1.0, -0.5])),),
            (ReferenceNodeSpec(desired=tf([0.0], [1.0, -0.6])),),
        )
        with pytest.raises(ValueError):
            virtual_references_distributed(spec, np.zeros((20, 1)))


class TestCentralized:
    def test_decoupled_equals_per_node_inversion(self, nine_node_spec):
        rng = np.random.default_rng(24)
        y = simulate_plant(nine_node_spec, rng.standard_normal((60, 9)))
        central = virtual_references_centralized(nine_node_spec, y)
        for i in range(9):
            direct = inverse_filter(nine_node_spec.reference[i].desired, y[:, i])
            np.testing.assert_allclose(central[:, i], direct[: central.shape[0]], atol=1e-12)

    def test_known_reference_recovered(self, coupled_pair_spec):
        rng = np.random.default_rng(25)
        r = rng.standard_normal((70, 2))
        y_d = simulate_reference(coupled_pair_spec, r)
        central = virtual_references_centralized(coupled_pair_spec, y_d)
        np.testing.assert_allclose(central, r[: central.shape[0]], atol=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_three_node_agreement(self, seed):
        rng = np.random.default_rng(100 + seed)
        spec = random_coupled_spec(rng)
        u = rng.standard_normal((90, spec.n_nodes))
        y = simulate_plant(spec, u)
        vd = virtual_references_distributed(spec, y)
        central = virtual_references_centralized(spec, y)
        np.testing.assert_allclose(vd.references, central, atol=1e-9)


class TestControllerInterconnections:
    def test_decoupled_is_known_row_on_error(self, nine_node_spec):
        rng = np.random.default_rng(26)
        errors = rng.standard_normal((50, 9))
        links = {e: np.zeros(50) for e in nine_node_spec.graph.directed_edges}
        out = virtual_controller_interconnections(nine_node_spec, errors, links)
        gain = tf([0.4], [1.0, -1.0])  # T/(1-T) for T = 0.4/(q-0.6)
        for (j, i), sig in out.items():
            np.testing.assert_allclose(sig, filter_signal(gain, errors[:, j]), atol=1e-12)

    def test_zero_inputs_give_zero(self, coupled_pair_spec):
        links = {e: np.zeros(30) for e in coupled_pair_spec.graph.directed_edges}
        out = virtual_controller_interconnections(coupled_pair_spec, np.zeros((30, 2)), links)
        assert all(np.all(sig == 0.0) for sig in out.values())

    def test_two_process_spec_matches_known_integrator_row(self):
        spec = make_example1(gamma=(0.3, 0.8))
        rng = np.random.default_rng(27)
        errors = rng.standard_normal((40, 2))
        links = {e: np.zeros(40) for e in spec.graph.directed_edges}
        out = virtual_controller_interconnections(spec, errors, links)
        for (j, i), sig in out.items():
            gamma = (0.3, 0.8)[j]
            expected = filter_signal(tf([1.0 - gamma], [1.0, -1.0]), errors[:, j])
            np.testing.assert_allclose(sig, expected, atol=1e-12)


def _simulate_ideal_controller_links(spec, errors):
    """Drive the ideal controller nodes with given errors; return its link outputs."""
    nodes = build_ideal_controller(spec)
    L = spec.n_nodes
    b = DiagramBuilder(L)
    out_w, out_q = {}, {}
    for n in nodes:
        for j, a in n.k_o.items():
            if not a.is_zero:
                out_w.setdefault((n.node, j), []).append(b.add_block(f"ow[{n.node}>{j}]", a))
        for (j, h), a in n.k_oq.items():
            if not a.is_zero:
                out_w.setdefault((n.node, j), []).append(b.add_block(f"owq[{n.node}>{j}|{h}]", a))
        for j, a in n.k_p.items():
            if not a.is_zero:
                out_q.setdefault((n.node, j), []).append(b.add_block(f"oq[{n.node}>{j}]", a))
        for (j, h), a in n.k_pq.items():
            if not a.is_zero:
                out_q.setdefault((n.node, j), []).append(b.add_block(f"oqq[{n.node}>{j}|{h}]", a))
    zeta_w = {k: ex_sum(*v) for k, v in out_w.items()}
    zeta_q = {k: ex_sum(*v) for k, v in out_q.items()}
    for n in nodes:
        i = n.node
        for j, a in n.k_o.items():
            if not a.is_zero:
                b.connect(f"ow[{i}>{j}]", b.ext(i))
        for (j, h), a in n.k_oq.items():
            if not a.is_zero:
                b.connect(f"owq[{i}>{j}|{h}]", zeta_q.get((h, i), {}))
        for j, a in n.k_p.items():
            if not a.is_zero:
                b.connect(f"oq[{i}>{j}]", b.ext(i))
        for (j, h), a in n.k_pq.items():
            if not a.is_zero:
                b.connect(f"oqq[{i}>{j}|{h}]", zeta_q.get((h, i), {}))
    keys = sorted(set(zeta_w) | set(zeta_q))
    for key in keys:
        b.add_output(zeta_w.get(key, {}))
    for key in keys:
        b.add_output(zeta_q.get(key, {}))
    sim = b.build().simulate(errors)
    w_out = {key: sim[:, k] for k, key in enumerate(keys)}
    q_out = {key: sim[:, len(keys) + k] for k, key in enumerate(keys)}
    return w_out, q_out


class TestIdealControllerConsistency:
    def test_virtual_links_equal_controller_links(self, coupled_pair_spec):
        # the virtual link signals equal the ideal controller's own interconnection
        # variables when it is driven by the virtual errors
        rng = np.random.default_rng(28)
        u = rng.standard_normal((90, 2))
        y = simulate_plant(coupled_pair_spec, u)
        vd = virtual_references_distributed(coupled_pair_spec, y)
        w_out, q_out = _simulate_ideal_controller_links(coupled_pair_spec, vd.errors)
        for key in w_out:
            np.testing.assert_allclose(vd.controller_links[key], w_out[key], atol=1e-9)
        for key in q_out:
            np.testing.assert_allclose(vd.reference_links[key], q_out[key], atol=1e-9)


class TestExport:
    def test_csv_naming_convention(self, tmp_path, coupled_pair_spec):
        rng = np.random.default_rng(29)
        y = simulate_plant(coupled_pair_spec, rng.standard_normal((30, 2)))
        vd = virtual_references_distributed(coupled_pair_spec, y)
        path = tmp_path / "virtual.csv"
        write_virtual_csv(path, vd)
        header = path.read_text().splitlines()[0].split(",")
        assert "r_bar_1" in header and "e_bar_2" in header
        assert "p_bar_1_2" in header and "o_bar_c_2_1" in header
        assert len(path.read_text().splitlines()) == vd.horizon + 1
