"""Deterministic CSV/JSON readers and writers.

All floats render with 17 significant digits so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .fields import DeformationField3D
from .geometry import RodChart


def fmt(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


FIELD_HEADER = ["S1", "S2", "s3", "v1", "v2", "v3"]


def write_field_csv(path, field: DeformationField3D):
    nodes = field.chart.section.nodes
    rows = []
    for a, s3 in enumerate(field.axial_grid):
        for p in range(len(nodes)):
            rows.append((nodes[p, 0], nodes[p, 1], s3, *field.values[a, p]))
    write_csv(path, FIELD_HEADER, rows)


def read_field_csv(path, chart: RodChart) -> DeformationField3D:
    """Read a deformation sampled as S1,S2,s3,v1,v2,v3 rows.

    Rows must cover the chart's section nodes exactly (any order) at every
    axial station.
    """
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read field CSV {path}: {exc}") from exc
    if data.shape[1] != 6:
        raise ValidationError("field CSV needs the columns S1,S2,s3,v1,v2,v3")
    nodes = chart.section.nodes
    P = len(nodes)
    s3_sorted = np.unique(data[:, 2])
    if len(s3_sorted) < 2 or len(data) != len(s3_sorted) * P:
        raise ValidationError(
            f"field CSV must hold {P} section nodes per axial station")
    tree = cKDTree(nodes)
    dist, idx = tree.query(data[:, :2])
    tol = 1e-9 * max(chart.section.diam, 1.0)
    if np.max(dist) > tol:
        raise ValidationError("field CSV section coordinates do not match the mesh nodes")
    a_idx = np.searchsorted(s3_sorted, data[:, 2])
    values = np.full((len(s3_sorted), P, 3), np.nan)
    values[a_idx, idx] = data[:, 3:6]
    if not np.all(np.isfinite(values)):
        raise ValidationError("field CSV misses some (node, station) pairs")
    return DeformationField3D(chart=chart, axial_grid=s3_sorted, values=values)
