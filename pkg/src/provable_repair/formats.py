"""JSON network and spec files, CSV datasets and region/plot exports.

Network file::

    {"kind": "dnn",
     "layers": [{"weights": [[...], ...], "bias": [...], "activation": "relu"}, ...]}

A decoupled network uses ``"kind": "ddnn"`` with ``"activation_layers"`` and
``"value_layers"``. Floats are written with Python's shortest round-trip
representation, so save/load is bit-exact.

Spec file::

    {"points": [{"point": [...], "constraints": {"A": [[...]], "b": [...]}},
                {"point": [...], "classify_as": 2, "margin": 1e-6}],
     "polytopes": [{"segment": {"start": [...], "end": [...]}, "constraints": {...}},
                   {"polygon": {"vertices": [[...], ...]}, "classify_as": 0}]}
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Union

import numpy as np

from .ddnn import Ddnn
from .errors import FormatError, RepairError
from .metrics import LabeledSet
from .network import Dnn, Layer
from .regions import Polygon2D, RegionPartition, Segment
from .repair import (
    DEFAULT_MARGIN,
    PointConstraint,
    PointSpec,
    PolytopeConstraint,
    PolytopeSpec,
    classification_rows,
)


def _read_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _expect_keys(obj, where, required, optional=()):
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object")
    missing = [k for k in required if k not in obj]
    if missing:
        raise FormatError(f"{where}: missing field(s) {missing}")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise FormatError(f"{where}: unknown field(s) {unknown}")


# --------------------------------------------------------------------------
# networks


def _layer_from_obj(obj, where) -> Layer:
    _expect_keys(obj, where, ("weights", "bias", "activation"))
    try:
        return Layer(obj["weights"], obj["bias"], obj["activation"])
    except (RepairError, ValueError, TypeError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def _layers_from(obj, key, where):
    layers = obj[key]
    if not isinstance(layers, list):
        raise FormatError(f"{where}.{key}: expected a list of layers")
    return [_layer_from_obj(l, f"{where}.{key}[{i}] (layer {i + 1})") for i, l in enumerate(layers)]


def network_from_obj(obj, where="network") -> Union[Dnn, Ddnn]:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise FormatError(f"{where}: missing field 'kind'")
    try:
        if obj["kind"] == "dnn":
            _expect_keys(obj, where, ("kind", "layers"))
            return Dnn(_layers_from(obj, "layers", where))
        if obj["kind"] == "ddnn":
            _expect_keys(obj, where, ("kind", "activation_layers", "value_layers"))
            return Ddnn(
                _layers_from(obj, "activation_layers", where),
                _layers_from(obj, "value_layers", where),
            )
    except FormatError:
        raise
    except RepairError as exc:
        raise FormatError(f"{where}: {exc}") from None
    raise FormatError(f"{where}: kind must be 'dnn' or 'ddnn', got {obj['kind']!r}")


def _layer_obj(layer: Layer) -> dict:
    return {
        "weights": layer.weights.tolist(),
        "bias": layer.bias.tolist(),
        "activation": layer.activation.value,
    }


def network_to_obj(net) -> dict:
    if isinstance(net, Ddnn):
        return {
            "kind": "ddnn",
            "activation_layers": [_layer_obj(l) for l in net.act_layers],
            "value_layers": [_layer_obj(l) for l in net.val_layers],
        }
    return {"kind": "dnn", "layers": [_layer_obj(l) for l in net.layers]}


def load_network(path) -> Union[Dnn, Ddnn]:
    return network_from_obj(_read_json(path), str(path))


def save_network(net, path) -> None:
    Path(path).write_text(json.dumps(network_to_obj(net), indent=1) + "\n")


# --------------------------------------------------------------------------
# specs


def _constraints(obj, where, num_outputs):
    if "constraints" in obj and "classify_as" in obj:
        raise FormatError(f"{where}: give either 'constraints' or 'classify_as', not both")
    if "margin" in obj and "classify_as" not in obj:
        raise FormatError(f"{where}: 'margin' only applies with 'classify_as'")
    if "constraints" in obj:
        c = obj["constraints"]
        _expect_keys(c, f"{where}.constraints", ("A", "b"))
        a = np.array(c["A"], dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != num_outputs:
            raise FormatError(f"{where}.constraints.A must be k x {num_outputs}, got shape {a.shape}")
        return a, c["b"]
    if "classify_as" in obj:
        label = obj["classify_as"]
        if not isinstance(label, int) or isinstance(label, bool):
            raise FormatError(f"{where}.classify_as must be an integer")
        return classification_rows(label, num_outputs, obj.get("margin", DEFAULT_MARGIN))
    raise FormatError(f"{where}: needs 'constraints' or 'classify_as'")


def _polytope(obj, where):
    if "segment" in obj:
        s = obj["segment"]
        _expect_keys(s, f"{where}.segment", ("start", "end"))
        return Segment(s["start"], s["end"])
    if "polygon" in obj:
        p = obj["polygon"]
        _expect_keys(p, f"{where}.polygon", ("vertices",))
        return Polygon2D(p["vertices"])
    raise FormatError(f"{where}: needs 'segment' or 'polygon'")


def spec_from_obj(obj, num_outputs: int, where="spec"):
    """Parse a spec document into ``(PointSpec, PolytopeSpec)``."""
    _expect_keys(obj, where, (), ("points", "polytopes"))
    points, polys = [], []
    try:
        for i, item in enumerate(obj.get("points", [])):
            w = f"{where}.points[{i}]"
            _expect_keys(item, w, ("point",), ("constraints", "classify_as", "margin"))
            a, b = _constraints(item, w, num_outputs)
            points.append(PointConstraint(item["point"], a, b))
        for i, item in enumerate(obj.get("polytopes", [])):
            w = f"{where}.polytopes[{i}]"
            _expect_keys(item, w, (), ("segment", "polygon", "constraints", "classify_as", "margin"))
            if "segment" in item and "polygon" in item:
                raise FormatError(f"{w}: give either 'segment' or 'polygon'")
            a, b = _constraints(item, w, num_outputs)
            polys.append(PolytopeConstraint(_polytope(item, w), a, b))
    except FormatError:
        raise
    except (RepairError, ValueError, TypeError) as exc:
        raise FormatError(f"{where}: {exc}") from None
    return PointSpec(points), PolytopeSpec(polys)


def load_spec(path, num_outputs: int):
    return spec_from_obj(_read_json(path), num_outputs, str(path))


def _constraints_obj(a, b) -> dict:
    return {"A": np.asarray(a).tolist(), "b": np.asarray(b).tolist()}


def spec_to_obj(points: PointSpec = None, polytopes: PolytopeSpec = None) -> dict:
    out = {}
    if points is not None:
        out["points"] = [
            {"point": item.x.tolist(), "constraints": _constraints_obj(item.a, item.b)} for item in points
        ]
    if polytopes is not None:
        items = []
        for item in polytopes:
            p = item.polytope
            if isinstance(p, Segment):
                geo = {"segment": {"start": p.start.tolist(), "end": p.end.tolist()}}
            else:
                geo = {"polygon": {"vertices": p.vertices.tolist()}}
            items.append({**geo, "constraints": _constraints_obj(item.a, item.b)})
        out["polytopes"] = items
    return out


def save_spec(path, points=None, polytopes=None) -> None:
    Path(path).write_text(json.dumps(spec_to_obj(points, polytopes), indent=1) + "\n")


# --------------------------------------------------------------------------
# datasets and exports


def load_labeled_csv(path) -> LabeledSet:
    """One row per point: features, then an integer label. A header row is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise FormatError(f"{path}: line {lineno}: non-numeric value") from None
            rows.append(vals)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() < 2:
        raise FormatError(f"{path}: rows must all have the same number (>= 2) of columns")
    arr = np.array(rows)
    labels = arr[:, -1]
    if not np.all(labels == np.round(labels)):
        raise FormatError(f"{path}: labels must be integers")
    return LabeledSet(arr[:, :-1], labels.astype(np.int64))


def save_labeled_csv(dataset: LabeledSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for x, label in zip(dataset.points, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [int(label)])


def write_regions_csv(part: RegionPartition, path) -> None:
    """One row per region.

    Segments: ``region, t_start, t_end, start..., end..., pattern``.
    Polygons: ``region, num_vertices, vertices, pattern`` with vertices written
    as ``x0 x1 ...`` groups separated by ``;``.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(part.polytope, Segment):
            d = part.polytope.dim
            w.writerow(
                ["region", "t_start", "t_end"]
                + [f"start_{i}" for i in range(d)]
                + [f"end_{i}" for i in range(d)]
                + ["pattern"]
            )
            for i, r in enumerate(part):
                w.writerow(
                    [i, repr(float(r.coords[0])), repr(float(r.coords[1]))]
                    + [repr(float(v)) for v in r.vertices[0]]
                    + [repr(float(v)) for v in r.vertices[1]]
                    + [r.pattern.bits()]
                )
        else:
            w.writerow(["region", "num_vertices", "vertices", "pattern"])
            for i, r in enumerate(part):
                verts = ";".join(" ".join(repr(float(v)) for v in p) for p in r.vertices)
                w.writerow([i, len(r.vertices), verts, r.pattern.bits()])
