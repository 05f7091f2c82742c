"""CSV and JSON artifacts: measurement data, controllers, study results, traces."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .controller import DistributedController, NodeController
from .lti import RationalTF
from .virtual import VirtualData

__all__ = [
    "write_data_csv",
    "read_data_csv",
    "controller_to_dict",
    "controller_from_dict",
    "save_controller",
    "load_controller",
    "write_replicates_csv",
    "write_summary_csv",
    "write_traces_csv",
    "write_virtual_csv",
]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_data_csv(path, u, y) -> None:
    """Measurement data: header t,u_1..u_L,y_1..y_L, one sample per row."""
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if u.shape != y.shape:
        raise ValueError("input and output data must share shape")
    L = u.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"u_{i + 1}" for i in range(L)] + [f"y_{i + 1}" for i in range(L)])
        for t in range(u.shape[0]):
            writer.writerow([t + 1] + [_fmt(v) for v in u[t]] + [_fmt(v) for v in y[t]])


def read_data_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        u_cols = [k for k, name in enumerate(header) if name.startswith("u_")]
        y_cols = [k for k, name in enumerate(header) if name.startswith("y_")]
        if not u_cols or len(u_cols) != len(y_cols):
            raise ValueError(f"{path}: expected columns t,u_1..u_L,y_1..y_L")
        rows = [row for row in reader if row]
    u = np.array([[float(row[k]) for k in u_cols] for row in rows])
    y = np.array([[float(row[k]) for k in y_cols] for row in rows])
    return u, y


def _tf_dict(a: RationalTF) -> dict:
    return {"num": [float(c) for c in a.num], "den": [float(c) for c in a.den]}


def _tf_load(obj) -> RationalTF:
    return RationalTF(np.asarray(obj["num"], dtype=float), np.asarray(obj.get("den", [1.0]), dtype=float))


def controller_to_dict(ctrl: DistributedController, labels=None, diagnostics=None) -> dict:
    if labels is None:
        labels = list(range(1, ctrl.n_nodes + 1))
    name = {i: labels[i] for i in range(ctrl.n_nodes)}
    nodes = []
    for n in ctrl.nodes:
        entry = {"id": name[n.node], "C_e": _tf_dict(n.err_gain)}
        for field_name, key in [
            ("link_w", "C_W"),
            ("link_q", "C_Q"),
            ("out_w_err", "K_W"),
            ("out_q_err", "K_Q"),
        ]:
            table = getattr(n, field_name)
            if table:
                entry[key] = {str(name[j]): _tf_dict(a) for j, a in sorted(table.items())}
        for field_name, key in [("out_w_q", "K_WQ"), ("out_q_q", "K_QQ")]:
            table = getattr(n, field_name)
            if table:
                entry[key] = {
                    f"{name[j]},{name[h]}": _tf_dict(a) for (j, h), a in sorted(table.items())
                }
        nodes.append(entry)
    out = {
        "nodes": nodes,
        "edges": [[name[i], name[j]] for i, j in ctrl.edges],
    }
    if diagnostics is not None:
        out["diagnostics"] = diagnostics
    return out


def controller_from_dict(data: dict) -> DistributedController:
    labels = [n["id"] for n in data["nodes"]]
    index = {label: k for k, label in enumerate(labels)}

    def node_key(key):
        for label in labels:
            if key == label or key == str(label):
                return index[label]
        raise ValueError(f"unknown node id {key!r}")

    nodes = []
    for k, raw in enumerate(data["nodes"]):
        simple = {
            field: {node_key(j): _tf_load(o) for j, o in raw.get(key, {}).items()}
            for field, key in [
                ("link_w", "C_W"),
                ("link_q", "C_Q"),
                ("out_w_err", "K_W"),
                ("out_q_err", "K_Q"),
            ]
        }
        paired = {}
        for field, key in [("out_w_q", "K_WQ"), ("out_q_q", "K_QQ")]:
            table = {}
            for pair, o in raw.get(key, {}).items():
                j, h = pair.split(",")
                table[(node_key(j), node_key(h))] = _tf_load(o)
            paired[field] = table
        nodes.append(
            NodeController(
                node=k,
                err_gain=_tf_load(raw["C_e"]),
                link_w=simple["link_w"],
                link_q=simple["link_q"],
                out_w_err=simple["out_w_err"],
                out_w_q=paired["out_w_q"],
                out_q_err=simple["out_q_err"],
                out_q_q=paired["out_q_q"],
            )
        )
    edges = tuple((index[a], index[b]) for a, b in data.get("edges", []))
    return DistributedController(tuple(nodes), edges)


def save_controller(ctrl: DistributedController, path, labels=None, diagnostics=None) -> None:
    Path(path).write_text(json.dumps(controller_to_dict(ctrl, labels, diagnostics), indent=2) + "\n")


def load_controller(path) -> DistributedController:
    return controller_from_dict(json.loads(Path(path).read_text()))


def write_replicates_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "class", "metric", "jmr", "diverged", "error"])
        for r in records:
            writer.writerow(
                [r.seed, r.label, _fmt(r.metric), _fmt(r.jmr), int(r.diverged), r.error]
            )


def write_summary_csv(path, summaries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "count", "failures", "median", "q1", "q3", "min", "max"])
        for s in summaries:
            writer.writerow(
                [s.label, s.count, s.failures]
                + [_fmt(v) for v in (s.median, s.q1, s.q3, s.minimum, s.maximum)]
            )


def write_traces_csv(path, r, y, y_desired) -> None:
    """Step-response traces: per node the reference, achieved, and desired outputs."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    y_desired = np.asarray(y_desired, dtype=float)
    L = r.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t"]
        for i in range(L):
            header += [f"r_{i + 1}", f"y_{i + 1}", f"yd_{i + 1}"]
        writer.writerow(header)
        for t in range(r.shape[0]):
            row = [t + 1]
            for i in range(L):
                row += [_fmt(r[t, i]), _fmt(y[t, i]), _fmt(y_desired[t, i])]
            writer.writerow(row)


def write_virtual_csv(path, vd: VirtualData) -> None:
    """Virtual signals, one column per signal (r_bar_i, e_bar_i, p_bar_i_j, o_bar_c_j_i)."""
    L = vd.references.shape[1]
    names = [f"r_bar_{i + 1}" for i in range(L)] + [f"e_bar_{i + 1}" for i in range(L)]
    columns = [vd.references[:, i] for i in range(L)] + [vd.errors[:, i] for i in range(L)]
    for (i, j), sig in sorted(vd.reference_links.items()):
        names.append(f"p_bar_{i + 1}_{j + 1}")
        columns.append(sig)
    for (j, i), sig in sorted(vd.controller_links.items()):
        names.append(f"o_bar_c_{j + 1}_{i + 1}")
        columns.append(sig)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + names)
        for t in range(vd.horizon):
            writer.writerow([t + 1] + [_fmt(col[t]) for col in columns])
