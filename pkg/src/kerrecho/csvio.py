"""File formats: CSV traces/grids and JSON reports.

All CSV output is RFC-4180-style with a '.' decimal separator regardless of
locale; floats are written with shortest round-trip precision so reruns with
the same seed are byte-identical.  Reports (echo events, run manifests, panel
indexes, integrity diagnostics) are JSON documents with a `schema` tag.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict

import numpy as np


def _fmt(x) -> str:
    return repr(float(x))


def write_trace_csv(path, times, mean_q, stderr=None, mean_a=None):
    """`t,mean_q,stderr` for stochastic traces, `t,mean_q,re_a,im_a` for
    expectation-value traces (both columns when both are supplied)."""
    cols = ["t", "mean_q"]
    if stderr is not None:
        cols.append("stderr")
    if mean_a is not None:
        cols += ["re_a", "im_a"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(times):
            row = [_fmt(t), _fmt(mean_q[i])]
            if stderr is not None:
                row.append(_fmt(stderr[i]))
            if mean_a is not None:
                row += [_fmt(mean_a[i].real), _fmt(mean_a[i].imag)]
            fh.write(",".join(row) + "\n")


def read_trace_csv(path):
    """Returns (header list, column arrays dict)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, {name: data[:, i] for i, name in enumerate(header)}


def write_histogram_csv(path, hist):
    """Counts grid with a one-line metadata header carrying time and edges."""
    q0, q1, nq = hist.q_edges[0], hist.q_edges[-1], len(hist.q_edges) - 1
    p0, p1, npb = hist.p_edges[0], hist.p_edges[-1], len(hist.p_edges) - 1
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"# time={_fmt(hist.time)} q_edges={_fmt(q0)}:{_fmt(q1)}:{nq} "
            f"p_edges={_fmt(p0)}:{_fmt(p1)}:{npb}\n"
        )
        for row in hist.counts:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


def write_state_csv(path, amplitudes):
    """Fock-basis snapshot: `n,re_amplitude,im_amplitude`."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,re_amplitude,im_amplitude\n")
        for n, c in enumerate(amplitudes):
            fh.write(f"{n},{_fmt(c.real)},{_fmt(c.imag)}\n")


def write_sweep_csv(path, axis_name, col_values, row_name, row_values, matrix):
    """Matrix with axis header rows: first cell names `row\\col` axes."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{row_name}\\{axis_name}," + ",".join(_fmt(v) for v in col_values) + "\n")
        for rv, row in zip(row_values, matrix):
            fh.write(_fmt(rv) + "," + ",".join(_fmt(v) for v in row) + "\n")


def write_echo_report(path, events, comparison=None):
    doc = {
        "schema": "kerrecho/echo-report/1",
        "events": [asdict(ev) for ev in events],
    }
    if comparison is not None:
        doc["comparison"] = {
            "max_relative_deviation": comparison.max_relative,
            "mean_relative_deviation": comparison.mean_relative,
            "records": [asdict(r) for r in comparison.records],
        }
    _write_json(path, doc)


def write_diagnostics(path, diagnostics):
    _write_json(
        path,
        {
            "schema": "kerrecho/lindblad-diagnostics/1",
            "trace_drift": diagnostics.trace_drift,
            "hermiticity_residual": diagnostics.hermiticity_residual,
            "min_eigenvalue": diagnostics.min_eigenvalue,
            "eigenvalue_check_times": list(diagnostics.eigenvalue_check_times),
        },
    )


def write_index(path, panels: dict[str, str]):
    _write_json(path, {"schema": "kerrecho/panel-index/1", "panels": panels})


def scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(path, manifest: dict):
    doc = {"schema": "kerrecho/run-manifest/1"}
    doc.update(manifest)
    _write_json(path, doc)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"cannot serialize {type(obj).__name__}")
