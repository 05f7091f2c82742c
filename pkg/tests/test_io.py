"""Data CSV and controller JSON round trips."""

import numpy as np
import pytest

from dvrft.io import (
    load_controller,
    read_data_csv,
    save_controller,
    write_data_csv,
    write_replicates_csv,
    write_summary_csv,
)
from dvrft.evaluation import ClassSummary, PerformanceRecord, performance_metric
from dvrft.ideal import build_ideal_controller, to_distributed_controller



def test_data_csv_round_trip(tmp_path):
    rng = np.random.default_rng(70)
    u = rng.standard_normal((40, 3))
    y = rng.standard_normal((40, 3))
    path = tmp_path / "data.csv"
    write_data_csv(path, u, y)
    u2, y2 = read_data_csv(path)
    np.testing.assert_array_equal(u, u2)
    np.testing.assert_array_equal(y, y2)
    header = path.read_text().splitlines()[0]
    assert header == "t,u_1,u_2,u_3,y_1,y_2,y_3"


def test_controller_json_round_trip(tmp_path, coupled_pair_spec):
    ctrl = to_distributed_controller(build_ideal_controller(coupled_pair_spec), coupled_pair_spec)
    path = tmp_path / "ctrl.json"
    save_controller(ctrl, path, labels=coupled_pair_spec.labels, diagnostics={"note": 1})
    loaded = load_controller(path)
    assert loaded.edges == ctrl.edges
    for a, b in zip(loaded.nodes, ctrl.nodes):
        assert a.err_gain.close_to(b.err_gain, 1e-12)
        for j in b.link_w:
            assert a.link_w[j].close_to(b.link_w[j], 1e-12)
        for key in b.out_w_q:
            assert a.out_w_q[key].close_to(b.out_w_q[key], 1e-12)
    # the loaded controller is functionally identical
    assert performance_metric(coupled_pair_spec, loaded) <= 1e-8


def test_results_csv_shapes(tmp_path):
    records = [
        PerformanceRecord(seed=1, label="full", metric=0.1, jmr=0.01),
        PerformanceRecord(seed=2, label="full", metric=float("nan"), jmr=float("nan"), error="x"),
    ]
    summaries = [ClassSummary.from_samples("full", [0.1], failures=1)]
    write_replicates_csv(tmp_path / "r.csv", records)
    write_summary_csv(tmp_path / "s.csv", summaries)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "seed,class,metric,jmr,diverged,error"
    assert len(lines) == 3
    assert (tmp_path / "s.csv").read_text().splitlines()[1].startswith("full,1,1,")


def test_data_csv_rejects_mismatched_shapes(tmp_path):
    with pytest.raises(ValueError):
        write_data_csv(tmp_path / "bad.csv", np.zeros((5, 2)), np.zeros((5, 3)))
