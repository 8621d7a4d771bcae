"""CSV datasets and JSON model files.

A dataset file has a header with the required columns ``t`` and
``censored``, an optional positive ``weight`` column, and feature columns.
A feature column whose non-empty cells all parse as numbers is numeric, and
empty cells become NaN. Any other column is categorical and is one-hot
encoded as ``name=value`` over a sorted vocabulary. The encoding travels
with the model so prediction-time columns line up exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .baselines import GeometricModel, LogisticModel
from .data import DataError, SurvivalData
from .gbrt import GbrtBetaLogistic
from .linear import LinearBetaLogistic
from .ranking import format_float

MODEL_TYPES = {
    "betalogistic-linear": LinearBetaLogistic,
    "betalogistic-gbrt": GbrtBetaLogistic,
    "logistic": LogisticModel,
    "geometric": GeometricModel,
}
RESERVED = ("t", "censored", "weight")


@dataclass(frozen=True)
class ColumnEncoding:
    name: str
    kind: str  # "numeric" or "categorical"
    values: tuple = ()

    def feature_names(self) -> list:
        if self.kind == "numeric":
            return [self.name]
        return [f"{self.name}={v}" for v in self.values]

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "values": list(self.values)}

    @classmethod
    def from_dict(cls, doc: dict) -> "ColumnEncoding":
        return cls(doc["name"], doc["kind"], tuple(doc.get("values", ())))


@dataclass
class Dataset:
    data: SurvivalData
    encoding: list
    extra: dict
    missing_cells: int = 0


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _parse_int(cell: str, column: str, row: int, allowed=None) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"row {row}: column {column!r} has non-numeric value {cell!r}") from None
    if not math.isfinite(value) or value != int(value):
        raise DataError(f"row {row}: column {column!r} must be an integer, got {cell!r}")
    value = int(value)
    if allowed is not None and value not in allowed:
        raise DataError(f"row {row}: column {column!r} must be one of {sorted(allowed)}, got {value}")
    return value


def infer_encoding(header: Sequence[str], rows: Sequence[Sequence[str]], exclude=()) -> list:
    encoding = []
    for j, name in enumerate(header):
        if name in RESERVED or name in exclude:
            continue
        cells = [r[j] for r in rows if r[j] != ""]
        if all(_is_number(c) for c in cells):
            encoding.append(ColumnEncoding(name, "numeric"))
        else:
            encoding.append(ColumnEncoding(name, "categorical", tuple(sorted(set(cells)))))
    return encoding


def read_dataset(path, encoding: Optional[list] = None, exclude: Sequence[str] = ()) -> Dataset:
    """Load a dataset file, validating ``t`` and ``censored`` row by row.

    With ``encoding`` given (from a trained model) the feature columns are
    encoded exactly as at training time; unseen categories encode as all
    zeros. Columns named in ``exclude`` are returned in ``Dataset.extra``.
    Row numbers in errors count the header as row 1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty (a header row is required)") from None
        rows = [r for r in reader if r]
    missing = [c for c in ("t", "censored") if c not in header]
    if missing:
        raise DataError(f"{path}: missing required column(s) {', '.join(missing)}")
    for k, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DataError(f"row {k}: expected {len(header)} cells, found {len(r)}")
    col = {name: j for j, name in enumerate(header)}
    for name in exclude:
        if name not in col:
            raise DataError(f"{path}: column {name!r} not found")

    n = len(rows)
    t = np.empty(n, dtype=np.int64)
    censored = np.empty(n, dtype=bool)
    weight = np.ones(n)
    for k, r in enumerate(rows, start=2):
        tv = _parse_int(r[col["t"]], "t", k)
        if tv < 1:
            raise DataError(f"row {k}: t must be >= 1, got {tv} (shift zero-based times by one)")
        t[k - 2] = tv
        censored[k - 2] = bool(_parse_int(r[col["censored"]], "censored", k, {0, 1}))
        if "weight" in col:
            try:
                wv = float(r[col["weight"]])
            except ValueError:
                wv = float("nan")
            if not (math.isfinite(wv) and wv > 0):
                raise DataError(f"row {k}: weight must be a positive number, got {r[col['weight']]!r}")
            weight[k - 2] = wv

    if encoding is None:
        encoding = infer_encoding(header, rows, exclude)
    blocks, names, missing_cells = [], [], 0
    for enc in encoding:
        if enc.name not in col:
            raise DataError(f"{path}: feature column {enc.name!r} expected by the model is absent")
        j = col[enc.name]
        if enc.kind == "numeric":
            values = np.empty(n)
            for k, r in enumerate(rows):
                cell = r[j]
                if cell == "":
                    values[k] = np.nan
                    missing_cells += 1
                elif _is_number(cell):
                    values[k] = float(cell)
                else:
                    raise DataError(f"row {k + 2}: numeric column {enc.name!r} has value {cell!r}")
            blocks.append(values[:, None])
        else:
            index = {v: i for i, v in enumerate(enc.values)}
            onehot = np.zeros((n, len(enc.values)))
            for k, r in enumerate(rows):
                i = index.get(r[j])
                if i is not None:
                    onehot[k, i] = 1.0
            blocks.append(onehot)
        names.extend(enc.feature_names())
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    extra = {name: [r[col[name]] for r in rows] for name in exclude}
    data = SurvivalData(t, censored, X, weight, names)
    return Dataset(data, list(encoding), extra, missing_cells)


def write_dataset(data: SurvivalData, path, include_weight: bool = False) -> None:
    header = ["t", "censored"] + (["weight"] if include_weight else []) + list(data.feature_names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(data)):
            row = [int(data.t[i]), int(data.censored[i])]
            if include_weight:
                row.append(format_float(data.weight[i]))
            row.extend("" if np.isnan(v) else format_float(v) for v in data.X[i])
            w.writerow(row)


def model_to_json(model, encoding: Optional[list] = None) -> str:
    doc = model.to_dict()
    if encoding is not None:
        doc["encoding"] = [e.to_dict() for e in encoding]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_model(model, path, encoding: Optional[list] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_json(model, encoding))


def model_from_dict(doc: dict):
    kind = doc.get("model_type")
    if kind not in MODEL_TYPES:
        raise DataError(f"unknown model_type {kind!r}")
    return MODEL_TYPES[kind].from_dict(doc)


def load_model(path):
    """Return ``(model, encoding)``; ``encoding`` is None when not stored."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a model file ({exc})") from None
    encoding = doc.get("encoding")
    if encoding is not None:
        encoding = [ColumnEncoding.from_dict(e) for e in encoding]
    return model_from_dict(doc), encoding
