"""Ranking files and JSON documents for models, structures and coefficients.

Ranking file::

    # comments and blank lines are ignored
    n=5 notation=ordering counted=true
    186 2 3 1 5 4
    ...

Values are 1-based and may be separated by spaces or commas. In ``ordering``
notation (the default) a record lists items from first to last; in
``ranking`` notation it lists the rank of item 1, item 2, and so on. With
``counted=true`` each record starts with a positive count (optionally
followed by a colon). Files in the PrefLib ``.soc`` layout are also accepted.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any

import numpy as np

from . import perm
from .config import CapError
from .dense import DenseDistribution, SampleSet
from .fourier import FourierCoefficients, dimension
from .riffle import HierarchicalModel, InterleavingDistribution, Node, biased_riffle, internal_node, leaf_node, mixture_riffle
from .tree import TreeNode

MODEL_FORMAT = "riffled-model"
STRUCTURE_FORMAT = "riffled-structure"
FOURIER_FORMAT = "riffled-fourier"
VERSION = 1


class FormatError(ValueError):
    """Malformed input file or document."""


_SPLIT = re.compile(r"[,\s]+")


def _parse_header(line: str, lineno: int) -> dict[str, Any]:
    header: dict[str, Any] = {"notation": "ordering", "counted": False}
    for token in _SPLIT.split(line.strip()):
        if not token:
            continue
        if "=" not in token:
            raise FormatError(f"line {lineno}: header token {token!r} is not key=value")
        key, value = token.split("=", 1)
        key = key.strip().lower()
        value = value.strip().lower()
        if key == "n":
            if not value.isdigit() or int(value) < 1:
                raise FormatError(f"line {lineno}: n must be a positive integer")
            header["n"] = int(value)
        elif key == "notation":
            if value not in ("ordering", "ranking"):
                raise FormatError(f"line {lineno}: notation must be 'ordering' or 'ranking'")
            header["notation"] = value
        elif key == "counted":
            if value not in ("true", "false", "1", "0", "yes", "no"):
                raise FormatError(f"line {lineno}: counted must be true or false")
            header["counted"] = value in ("true", "1", "yes")
        else:
            raise FormatError(f"line {lineno}: unknown header key {key!r}")
    if "n" not in header:
        raise FormatError(f"line {lineno}: header must define n")
    return header


def _parse_record(line: str, lineno: int, n: int, counted: bool, notation: str) -> tuple[perm.Ranking, int]:
    text = line.strip()
    count = 1
    if counted:
        m = re.match(r"^(\d+)\s*[:,]?\s*(.*)$", text)
        if not m:
            raise FormatError(f"line {lineno}: expected a count followed by {n} values")
        count = int(m.group(1))
        text = m.group(2)
        if count < 1:
            raise FormatError(f"line {lineno}: counts must be positive")
    tokens = [t for t in _SPLIT.split(text) if t]
    try:
        values = [int(t) for t in tokens]
    except ValueError:
        raise FormatError(f"line {lineno}: non-integer value in {line.strip()!r}") from None
    if len(values) != n:
        raise FormatError(f"line {lineno}: expected {n} values, got {len(values)}")
    seen = set()
    for v in values:
        if not 1 <= v <= n:
            raise FormatError(f"line {lineno}: value {v} is outside 1..{n}")
        if v in seen:
            raise FormatError(f"line {lineno}: duplicate value {v}")
        seen.add(v)
    r = tuple(v - 1 for v in values)
    if notation == "ordering":
        r = perm.inverse(r)
    return r, count


def parse_rankings(text: str) -> SampleSet:
    header = None
    rows: list[perm.Ranking] = []
    counts: list[int] = []
    preflib_n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*NUMBER ALTERNATIVES:\s*(\d+)", line, re.IGNORECASE)
            if m:
                preflib_n = int(m.group(1))
            continue
        if header is None:
            if "=" in line:
                header = _parse_header(line, lineno)
                continue
            if preflib_n is not None:
                header = {"n": preflib_n, "notation": "ordering", "counted": True}
            else:
                raise FormatError(f"line {lineno}: missing header line (e.g. 'n=5 notation=ordering')")
        r, c = _parse_record(line, lineno, header["n"], header["counted"], header["notation"])
        rows.append(r)
        counts.append(c)
    if header is None:
        if preflib_n is None:
            raise FormatError("empty ranking file: no header found")
        header = {"n": preflib_n}
    if not rows:
        return SampleSet(header["n"], np.zeros((0, header["n"]), dtype=np.int64), np.zeros(0, dtype=np.int64))
    return SampleSet.from_rankings(header["n"], rows, counts)


def load_rankings(path: str | Path) -> SampleSet:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_rankings(text)


def format_rankings(samples: SampleSet, notation: str = "ordering", counted: bool | None = None) -> str:
    if notation not in ("ordering", "ranking"):
        raise ValueError("notation must be 'ordering' or 'ranking'")
    if counted is None:
        counted = bool(np.any(samples.counts > 1))
    lines = [f"n={samples.n} notation={notation} counted={'true' if counted else 'false'}"]
    for row, count in zip(samples.rankings, samples.counts):
        r = tuple(int(v) for v in row)
        shown = perm.inverse(r) if notation == "ordering" else r
        body = " ".join(str(v + 1) for v in shown)
        if counted:
            lines.append(f"{int(count)} {body}")
        else:
            lines.extend([body] * int(count))
    return "\n".join(lines) + "\n"


def save_rankings(samples: SampleSet, path: str | Path, notation: str = "ordering", counted: bool | None = None) -> None:
    Path(path).write_text(format_rankings(samples, notation, counted))


# ----------------------------------------------------------------------------
# models


def _interleaving_doc(m: InterleavingDistribution) -> dict[str, Any]:
    if m.kind == "biased":
        return {"kind": "biased", "alpha": m.params["alpha"]}
    if m.kind == "mixture":
        return {"kind": "mixture", "weights": [float(v) for v in m.params["weights"]],
                "alphas": [float(v) for v in m.params["alphas"]]}
    return {"kind": "table", "probs": [float(v) for v in m.probs]}


def _node_doc(node: Node) -> dict[str, Any]:
    items = [v + 1 for v in node.items]
    if node.is_leaf:
        return {"items": items, "factor": {"probs": [float(v) for v in node.factor.probs]}}
    return {
        "items": items,
        "interleaving": _interleaving_doc(node.interleaving),
        "children": [_node_doc(node.children[0]), _node_doc(node.children[1])],
    }


def model_to_json(model: HierarchicalModel) -> dict[str, Any]:
    return {"format": MODEL_FORMAT, "version": VERSION, "n": model.n, "root": _node_doc(model.root)}


def _check_version(doc: Any, fmt: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError("document must be a JSON object")
    if doc.get("format") != fmt:
        raise FormatError(f"expected a {fmt!r} document, found format {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported {fmt} version {doc.get('version')!r} (expected {VERSION})")


def _items(doc: dict[str, Any], where: str) -> tuple[int, ...]:
    items = doc.get("items")
    if not isinstance(items, list) or not items or not all(isinstance(v, int) and v >= 1 for v in items):
        raise FormatError(f"{where}: 'items' must be a nonempty list of positive integers")
    return tuple(v - 1 for v in items)


def _node_from_doc(doc: Any, where: str) -> Node:
    if not isinstance(doc, dict):
        raise FormatError(f"{where}: node must be an object")
    items = _items(doc, where)
    try:
        if "factor" in doc:
            probs = doc["factor"]["probs"]
            return leaf_node(items, DenseDistribution(len(items), probs))
        kids = doc.get("children")
        if not isinstance(kids, list) or len(kids) != 2:
            raise FormatError(f"{where}: internal node needs two children")
        left = _node_from_doc(kids[0], where + ".children[0]")
        right = _node_from_doc(kids[1], where + ".children[1]")
        entry = doc.get("interleaving")
        if not isinstance(entry, dict):
            raise FormatError(f"{where}: internal node needs an 'interleaving' object")
        p, q = len(left.items), len(right.items)
        kind = entry.get("kind")
        if kind == "table":
            m = InterleavingDistribution(p, q, entry["probs"])
        elif kind == "biased":
            m = biased_riffle(p, q, entry["alpha"])
        elif kind == "mixture":
            m = mixture_riffle(p, q, entry["weights"], entry["alphas"])
        else:
            raise FormatError(f"{where}: unknown interleaving kind {kind!r}")
        node = internal_node(left, right, m)
    except (FormatError, CapError):
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from None
    if node.items != tuple(sorted(items)):
        raise FormatError(f"{where}: items do not match the union of the children")
    return node


def model_from_json(doc: Any) -> HierarchicalModel:
    _check_version(doc, MODEL_FORMAT)
    root = _node_from_doc(doc.get("root"), "root")
    if doc.get("n") != len(root.items):
        raise FormatError("'n' does not match the root's item count")
    try:
        return HierarchicalModel(root)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def _read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _write_json(doc: Any, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def save_model(model: HierarchicalModel, path: str | Path) -> None:
    _write_json(model_to_json(model), path)


def load_model(path: str | Path) -> HierarchicalModel:
    return model_from_json(_read_json(path))


# ----------------------------------------------------------------------------
# structures


def structure_to_json(tree: TreeNode, **meta: Any) -> dict[str, Any]:
    doc = {"format": STRUCTURE_FORMAT, "version": VERSION, "n": len(tree.items), "tree": tree.to_json()}
    doc.update(meta)
    return doc


def structure_from_json(doc: Any) -> TreeNode:
    """Tree from a structure document, or the shape of a model document."""
    if isinstance(doc, dict) and doc.get("format") == MODEL_FORMAT:
        return model_from_json(doc).structure()
    _check_version(doc, STRUCTURE_FORMAT)
    try:
        tree = TreeNode.from_json(doc["tree"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed structure: {exc}") from None
    if tree.items != tuple(range(doc.get("n", -1))):
        raise FormatError("structure must cover items 1..n")
    return tree


def load_structure(path: str | Path) -> TreeNode:
    return structure_from_json(_read_json(path))


# ----------------------------------------------------------------------------
# Fourier coefficients


def fourier_to_json(F: FourierCoefficients) -> dict[str, Any]:
    return {
        "format": FOURIER_FORMAT,
        "version": VERSION,
        "n": F.n,
        "order": F.order,
        "levels": [
            {"partition": list(lam), "dimension": int(mat.shape[0]), "matrix": [float(v) for v in mat.ravel()]}
            for lam, mat in zip(F.levels, F.mats)
        ],
    }


def fourier_from_json(doc: Any) -> FourierCoefficients:
    _check_version(doc, FOURIER_FORMAT)
    try:
        levels, mats = [], []
        for rec in doc["levels"]:
            lam = tuple(int(v) for v in rec["partition"])
            d = int(rec["dimension"])
            if d != dimension(lam):
                raise FormatError(f"level {lam} has dimension {dimension(lam)}, not {d}")
            mats.append(np.array(rec["matrix"], dtype=np.float64).reshape(d, d))
            levels.append(lam)
        return FourierCoefficients(int(doc["n"]), tuple(levels), tuple(mats), doc.get("order"))
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed coefficient document: {exc}") from None


def save_fourier(F: FourierCoefficients, path: str | Path) -> None:
    _write_json(fourier_to_json(F), path)


def load_fourier(path: str | Path) -> FourierCoefficients:
    return fourier_from_json(_read_json(path))
