"""JSONL dataset records: one complex (plus colors, optional coords) and a label per line.

Record schema::

    {"simplices": [[0], [1], [0, 1]], "colors": {"0": [[1.0], [1.0]]},
     "coords": [[0.0, 0.0], [1.0, 0.0]], "label": 1, "group": 7}

``colors`` is keyed by dimension with rows in the order the simplices of that
dimension appear in ``simplices``; ``coords`` and ``group`` are optional.
``group`` ties records that must land on the same side of a split.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..complex import AttributedComplex, GeometricComplex, SimplicialComplex, validate


class DatasetError(ValueError):
    pass


@dataclass
class DatasetRecord:
    item: AttributedComplex | GeometricComplex
    label: float | int
    group: int | None = None

    @property
    def complex(self) -> SimplicialComplex:
        return self.item.complex

    @property
    def attributed(self) -> AttributedComplex:
        return self.item.attributed if isinstance(self.item, GeometricComplex) else self.item

    def to_dict(self) -> dict:
        K = self.complex
        out = {
            "simplices": [list(s) for s in K.simplices],
            "colors": {str(d): np.asarray(c).tolist() for d, c in sorted(self.attributed.colors.items())},
            "label": self.label,
        }
        if isinstance(self.item, GeometricComplex):
            out["coords"] = self.item.coords.tolist()
        if self.group is not None:
            out["group"] = self.group
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetRecord":
        if "simplices" not in d or "label" not in d:
            raise DatasetError("record needs 'simplices' and 'label'")
        simplices = [tuple(int(v) for v in s) for s in d["simplices"]]
        report = validate(simplices)
        if not report.ok:
            raise DatasetError(report.reason)
        K = SimplicialComplex(simplices)
        colors = {int(k): np.asarray(v, dtype=float) for k, v in (d.get("colors") or {}).items()}
        if 0 not in colors:
            colors[0] = np.ones((K.vertex_count, 1))
        A = AttributedComplex(K, colors)
        item = GeometricComplex(A, np.asarray(d["coords"], dtype=float)) if d.get("coords") is not None else A
        label = d["label"]
        label = int(label) if isinstance(label, (int, bool)) else float(label)
        return cls(item, label, d.get("group"))


def load_dataset(path) -> list[DatasetRecord]:
    """Parse a JSONL file; errors name the line (parse) or the record index (validation)."""
    records = []
    width = None
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{ln}: JSON parse error: {e.msg}") from None
            try:
                rec = DatasetRecord.from_dict(d)
            except (DatasetError, ValueError) as e:
                raise DatasetError(f"{path}: record {len(records)} (line {ln}): {e}") from None
            w = rec.attributed.width
            if width is None:
                width = w
            elif w != width:
                raise DatasetError(f"{path}: record {len(records)} (line {ln}): color width {w} != {width}")
            records.append(rec)
    return records


def save_dataset(records, path):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def split_indices(records, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle of groups (records without a group form their own) into train/val/test."""
    groups: dict = {}
    for i, r in enumerate(records):
        key = ("g", r.group) if r.group is not None else ("i", i)
        groups.setdefault(key, []).append(i)
    keys = sorted(groups, key=repr)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(keys))
    n = len(keys)
    n_tr = int(round(fractions[0] * n))
    n_va = int(round(fractions[1] * n))
    parts = (order[:n_tr], order[n_tr:n_tr + n_va], order[n_tr + n_va:])
    return tuple(sorted(i for k in part for i in groups[keys[k]]) for part in parts)
