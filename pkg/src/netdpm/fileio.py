"""File formats shared by the command-line interface.

Everything is plain UTF-8 text: CSV with a header row for tabular data,
an edge list with '#' comments, and JSON for run metadata.  Numeric
output is printed with six significant digits; writers accept
``full_precision=True`` to emit shortest-roundtrip floats instead.
Writers put the master seed on a leading comment line so every artifact
records where it came from; readers skip comment lines.
"""

from __future__ import annotations

import csv
import io
import json
import os
from typing import Optional

import numpy as np

from .errors import IngestionError
from .network import Subnetwork


def _fmt(value, full_precision=False) -> str:
    if full_precision:
        return repr(float(value))
    return format(float(value), ".6g")


def _open_rows(path):
    """Yield (line_number, row) over a comma- or tab-separated file."""
    with open(path, "r", encoding="utf-8") as handle:
        sample = handle.read()
    delimiter = "\t" if "\t" in sample.splitlines()[0] else ","
    reader = csv.reader(io.StringIO(sample), delimiter=delimiter)
    for lineno, row in enumerate(reader, start=1):
        if not row or (row[0].lstrip().startswith("#")):
            continue
        yield lineno, [cell.strip() for cell in row]


def read_statistics(path):
    """Read a statistics file; returns ``(feature_ids, values, kind)``.

    The header must be ``feature_id,r`` or ``feature_id,p``; the second
    column name decides whether values are statistics or p-values.
    """
    rows = list(_open_rows(path))
    if not rows:
        raise IngestionError(f"{path}: empty statistics file")
    lineno, header = rows[0]
    if len(header) < 2 or header[0] != "feature_id" or header[1] not in ("r", "p"):
        raise IngestionError(
            f"{path}:{lineno}: header must be 'feature_id,r' or 'feature_id,p'")
    kind = header[1]
    ids, values = [], []
    for lineno, row in rows[1:]:
        if len(row) < 2:
            raise IngestionError(f"{path}:{lineno}: expected two columns")
        try:
            values.append(float(row[1]))
        except ValueError:
            raise IngestionError(f"{path}:{lineno}: {row[1]!r} is not a number") from None
        ids.append(row[0])
    if not ids:
        raise IngestionError(f"{path}: no data rows")
    return ids, np.asarray(values), kind


def write_statistics(path, feature_ids, values, kind="r", seed=None,
                     full_precision=False):
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm statistics seed={seed}\n")
        handle.write(f"feature_id,{kind}\n")
        for fid, val in zip(feature_ids, values):
            handle.write(f"{fid},{_fmt(val, full_precision)}\n")


def read_edge_list(path):
    """Edge rows as (id_a, id_b, optional weight)."""
    rows = []
    for lineno, row in _open_rows(path):
        if len(row) < 2:
            raise IngestionError(f"{path}:{lineno}: expected at least two columns")
        weight = None
        if len(row) > 2 and row[2]:
            try:
                weight = float(row[2])
            except ValueError:
                raise IngestionError(
                    f"{path}:{lineno}: weight {row[2]!r} is not a number") from None
        rows.append((row[0], row[1], weight))
    return rows


def write_edge_list(path, net, seed=None):
    ids = net.ids or tuple(str(i) for i in range(net.n))
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm edges seed={seed}\n")
        for a, b in net.edges:
            handle.write(f"{ids[a]}\t{ids[b]}\n")


def read_node_weights(path):
    """Optional per-node weight map: ``feature_id,omega`` rows."""
    weights = {}
    rows = list(_open_rows(path))
    for lineno, row in rows:
        if row[0] == "feature_id":
            continue
        if len(row) < 2:
            raise IngestionError(f"{path}:{lineno}: expected two columns")
        try:
            weights[row[0]] = float(row[1])
        except ValueError:
            raise IngestionError(f"{path}:{lineno}: {row[1]!r} is not a number") from None
    return weights


def write_probabilities(path, report, seed=None, full_precision=False):
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm probabilities seed={seed}\n")
        handle.write("feature_id,prob_selected,selected\n")
        for fid, prob, sel in zip(report.feature_ids, report.probabilities,
                                  report.selected):
            handle.write(f"{fid},{_fmt(prob, full_precision)},{int(sel)}\n")


def read_probabilities(path):
    rows = list(_open_rows(path))
    ids, probs, selected = [], [], []
    for _, row in rows:
        if row[0] == "feature_id":
            continue
        ids.append(row[0])
        probs.append(float(row[1]))
        selected.append(bool(int(row[2])))
    return ids, np.asarray(probs), np.asarray(selected)


def write_labels(path, report, seed=None):
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm labels seed={seed}\n")
        handle.write("feature_id,selected\n")
        for fid, sel in zip(report.feature_ids, report.selected):
            handle.write(f"{fid},{int(sel)}\n")


def write_labels_array(path, feature_ids, labels, seed=None):
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm labels seed={seed}\n")
        handle.write("feature_id,selected\n")
        for fid, sel in zip(feature_ids, labels):
            handle.write(f"{fid},{int(sel)}\n")


def read_labels(path):
    ids, labels = [], []
    for _, row in _open_rows(path):
        if row[0] == "feature_id":
            continue
        ids.append(row[0])
        labels.append(int(row[1]))
    return ids, np.asarray(labels, dtype=np.uint8)


def write_subnetworks(path, report, seed=None):
    """One line per component: component id then its member feature ids."""
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm subnetworks seed={seed}\n")
        subnets = report.subnetworks or ()
        for cid, sub in enumerate(subnets, start=1):
            members = ",".join(report.feature_ids[i] for i in sub.node_ids)
            handle.write(f"{cid},{members}\n")
        isolated = report.isolated_selected or ()
        if isolated:
            members = ",".join(report.feature_ids[i] for i in isolated)
            handle.write(f"isolated,{members}\n")


def write_metrics(path, metrics, seed=None, full_precision=False):
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm metrics seed={seed}\n")
        handle.write("metric,value\n")
        for name in ("gene_tpr", "gene_fpr", "gene_fdr",
                     "subnet_exact", "subnet_larger", "subnet_fdr"):
            handle.write(f"{name},{_fmt(getattr(metrics, name), full_precision)}\n")


def write_partition(path, partition, seed=None):
    """Merge history: ``step,cluster,components`` rows (components ;-joined)."""
    with open(path, "w", encoding="utf-8") as handle:
        if seed is not None:
            handle.write(f"# netdpm hodc seed={seed}\n")
        handle.write("step,cluster,components\n")
        steps = partition.steps if partition.steps else (partition.initial,)
        for step, clusters in enumerate(steps, start=1):
            for cid, cluster in enumerate(clusters, start=1):
                members = ";".join(str(i + 1) for i in cluster)
                handle.write(f"{step},{cid},{members}\n")


def read_components(path):
    """Component file for the clustering command: mean,variance,weight rows."""
    rows = list(_open_rows(path))
    means, variances, weights = [], [], []
    for lineno, row in rows:
        if row[0] in ("mean", "feature_id"):
            continue
        if len(row) < 3:
            raise IngestionError(f"{path}:{lineno}: expected mean,variance,weight")
        try:
            means.append(float(row[0]))
            variances.append(float(row[1]))
            weights.append(float(row[2]))
        except ValueError:
            raise IngestionError(f"{path}:{lineno}: non-numeric component row") from None
    if not means:
        raise IngestionError(f"{path}: no component rows")
    return np.asarray(means), np.asarray(variances), np.asarray(weights)


def write_metadata(path, deterministic: dict, volatile: Optional[dict] = None):
    """Run metadata: a reproducible section plus timing/paths."""
    payload = dict(deterministic)
    payload["volatile"] = volatile or {}
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")


def read_metadata(path):
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def package_versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {
        "netdpm": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }
