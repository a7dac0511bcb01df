"""CSV/JSON readers and writers for connectomes, time series, partitions and metrics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import FeatureMatrix
from .complex import WeightedGraph
from .signals import NodeTimeSeries

FLOAT_FMT = "%.17g"
METRICS_SCHEMA = 1


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_matrix(path, header: bool | None = None) -> np.ndarray:
    """Read a numeric CSV matrix.

    A single header row is skipped when its first cell is not numeric (or
    when ``header`` is True).  Non-numeric cells and NaNs raise ``ValueError``
    naming the 1-based line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and (header or (header is None and not _is_number(row[0].strip()))):
                continue
            vals = []
            for cell in row:
                cell = cell.strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}: non-numeric cell {cell!r} at line {lineno}") from None
                if math.isnan(v):
                    raise ValueError(f"{path}: NaN entry at line {lineno}")
                vals.append(v)
            if rows and len(vals) != len(rows[0]):
                raise ValueError(f"{path}: line {lineno} has {len(vals)} columns, expected {len(rows[0])}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def write_matrix(path, matrix) -> None:
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 1:
        m = m[None, :]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, m, delimiter=",", fmt=FLOAT_FMT)


def load_connectome(path) -> WeightedGraph:
    a = read_matrix(path)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{path}: connectome must be square, got {a.shape}")
    if np.any(np.diag(a) != 0):
        raise ValueError(f"{path}: self-loops not allowed")
    if not np.allclose(a, a.T, rtol=1e-12, atol=0.0):
        raise ValueError(f"{path}: connectome is not symmetric")
    if np.any(a < 0):
        raise ValueError(f"{path}: negative connection weights")
    return WeightedGraph.from_matrix(np.triu(a, 1) + np.triu(a, 1).T)


def write_connectome(path, g: WeightedGraph) -> None:
    write_matrix(path, g.to_matrix())


def read_labels(path) -> np.ndarray:
    m = read_matrix(path)
    if m.shape[1] != 1:
        raise ValueError(f"{path}: expected a single label column, got {m.shape[1]}")
    labels = m[:, 0]
    if not np.all(labels == np.round(labels)):
        raise ValueError(f"{path}: labels must be integers")
    return labels.astype(np.int64)


def write_labels(path, labels) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(labels, dtype=np.int64)[:, None], fmt="%d")


def load_timeseries(path, labels_path=None) -> NodeTimeSeries:
    data = read_matrix(path)
    labels = read_labels(labels_path) if labels_path is not None else None
    return NodeTimeSeries(data, labels)


def write_features(path, f: FeatureMatrix) -> None:
    """Feature matrix CSV: subject, state and encoding header rows, then one row per feature."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject"] + f.subjects.tolist())
        w.writerow(["state"] + f.states.tolist())
        w.writerow(["encoding"] + f.encodings.tolist())
        for k, row in enumerate(f.values):
            w.writerow([f"f{k}"] + [FLOAT_FMT % v for v in row])


def read_features(path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 4:
        raise ValueError(f"{path}: feature CSV needs 3 header rows and at least one feature row")
    meta = {}
    for lineno, name in enumerate(("subject", "state", "encoding"), start=1):
        row = rows[lineno - 1]
        if row[0] != name:
            raise ValueError(f"{path}: line {lineno} should start with {name!r}")
        meta[name] = np.asarray([int(c) for c in row[1:]])
    values = []
    for lineno, row in enumerate(rows[3:], start=4):
        try:
            values.append([float(c) for c in row[1:]])
        except ValueError:
            raise ValueError(f"{path}: non-numeric cell at line {lineno}") from None
    return FeatureMatrix(np.asarray(values), meta["subject"], meta["state"], meta["encoding"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_metrics(metrics: dict) -> str:
    payload = {"schema": METRICS_SCHEMA, **_jsonable(metrics)}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_metrics(path, metrics: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps_metrics(metrics))


def read_metrics(path) -> dict:
    return json.loads(Path(path).read_text())


@dataclass
class RecordingEntry:
    subject: int
    encoding: int
    path: str


@dataclass
class DatasetManifest:
    """Connectome, per-(subject, encoding) recordings and the shared frame labels.

    Paths are stored relative to the manifest file.
    """

    connectome: str
    recordings: list
    frame_labels: str
    state_names: list = field(default_factory=list)
    root: Path = field(default=Path("."), repr=False)

    def resolve(self, rel: str) -> Path:
        return (self.root / rel).resolve()

    def to_json(self) -> dict:
        return {
            "connectome": self.connectome,
            "recordings": [{"subject": r.subject, "encoding": r.encoding, "path": r.path}
                           for r in self.recordings],
            "frame_labels": self.frame_labels,
            "state_names": list(self.state_names),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"manifest not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid manifest JSON ({exc})") from None
        for key in ("connectome", "recordings", "frame_labels"):
            if key not in data:
                raise ValueError(f"{path}: manifest lacks {key!r}")
        m = cls(
            data["connectome"],
            [RecordingEntry(int(r["subject"]), int(r["encoding"]), r["path"]) for r in data["recordings"]],
            data["frame_labels"],
            list(data.get("state_names", [])),
            path.parent,
        )
        for rel in [m.connectome, m.frame_labels] + [r.path for r in m.recordings]:
            if not m.resolve(rel).exists():
                raise FileNotFoundError(f"{path}: referenced file not found: {m.resolve(rel)}")
        return m
