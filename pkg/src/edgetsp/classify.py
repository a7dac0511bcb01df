"""Nodal feature matrices, one-vs-one linear SVMs and leave-one-subject-out CV."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .seeding import derive_seed, make_rng

DEFAULT_C = 1.0
DEFAULT_EPOCHS = 200
DEFAULT_BATCH = 16
OBJECTIVE_TOL = 1e-6


@dataclass(frozen=True)
class FeatureMatrix:
    """``values`` is n_features x n_samples; one (subject, state, encoding) triple per column."""

    values: np.ndarray
    subjects: np.ndarray
    states: np.ndarray
    encodings: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("feature values must be a 2-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", v)
        for name in ("subjects", "states", "encodings"):
            meta = np.asarray(getattr(self, name), dtype=np.int64)
            if meta.shape != (v.shape[1],):
                raise ValueError(f"{name} metadata has {meta.size} entries for {v.shape[1]} columns")
            object.__setattr__(self, name, meta)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def zscore_rows(values, mean=None, std=None):
    """Standardise each feature (row); returns (z, mean, std)."""
    values = np.asarray(values, dtype=float)
    if mean is None:
        mean = values.mean(axis=1, keepdims=True)
        std = values.std(axis=1, keepdims=True)
        bad = np.flatnonzero(std.ravel() == 0)
        if bad.size:
            raise ValueError(f"zero variance feature {int(bad[0])}")
    return (values - mean) / std, mean, std


def assemble_features(nodal_values: dict, zscore: bool = True) -> FeatureMatrix:
    """Stack node vectors keyed by (subject, state, encoding) into a feature matrix.

    Columns are ordered by state, then encoding, then subject.
    """
    if not nodal_values:
        raise ValueError("no nodal values given")
    keys = list(nodal_values)
    subjects = sorted({k[0] for k in keys})
    states = sorted({k[1] for k in keys})
    encodings = sorted({k[2] for k in keys})
    missing = [(s, b, e) for b in states for e in encodings for s in subjects
               if (s, b, e) not in nodal_values]
    if missing:
        raise ValueError(f"missing (subject, state, encoding) entries: {missing}")
    order = [(s, b, e) for b in states for e in encodings for s in subjects]
    lengths = {np.asarray(nodal_values[k]).shape for k in order}
    if len(lengths) != 1:
        raise ValueError(f"nodal vectors have unequal shapes {sorted(lengths)}")
    values = np.column_stack([np.asarray(nodal_values[k], dtype=float) for k in order])
    if zscore:
        values, _, _ = zscore_rows(values)
    return FeatureMatrix(
        values,
        np.array([k[0] for k in order]),
        np.array([k[1] for k in order]),
        np.array([k[2] for k in order]),
    )


@dataclass
class LinearSvmModel:
    """One binary linear SVM per unordered class pair.

    ``weights[p]`` and ``biases[p]`` score pair ``pairs[p] = (a, b)`` with
    positive values voting for ``a``.
    """

    classes: np.ndarray
    pairs: list
    weights: np.ndarray
    biases: np.ndarray
    objective_history: np.ndarray = field(default=None, repr=False)
    hyperparameters: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def decision_values(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x @ self.weights.T + self.biases


def _objective(w, b, xs, ys, valid, c_reg):
    margins = np.einsum("pnd,pd->pn", xs, w) + b[:, None]
    hinge = np.maximum(0.0, 1.0 - ys * margins) * valid
    return 0.5 * (np.sum(w * w, axis=1) + b * b) + c_reg * hinge.sum(axis=1)


def train_linear_svm_ovo(x, labels, c_reg: float = DEFAULT_C, seed: int = 0,
                         epochs: int = DEFAULT_EPOCHS, batch_size: int = DEFAULT_BATCH) -> LinearSvmModel:
    """Train all one-vs-one hinge-loss models on samples ``x`` (n_samples x n_features).

    Each pair minimises 0.5 (|w|^2 + b^2) + c_reg * sum(hinge) by mini-batch
    Pegasos steps with rate 1 / (lambda t), lambda = 1 / (c_reg n_pair).  An
    epoch that raises the objective is rolled back and the rate halved for
    that pair, so the per-epoch objective never increases.  All pairs are
    trained together as one batched problem; each has its own seeded shuffle.
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for sample matrix of shape {x.shape}")
    if c_reg <= 0:
        raise ValueError("c_reg must be positive")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need at least two classes")
    pairs = list(combinations(classes.tolist(), 2))
    n_pairs, d = len(pairs), x.shape[1]

    members = [np.flatnonzero((labels == a) | (labels == b)) for a, b in pairs]
    m = max(len(ix) for ix in members)
    idx = np.zeros((n_pairs, m), dtype=np.int64)
    valid = np.zeros((n_pairs, m))
    ys = np.zeros((n_pairs, m))
    for p, ((a, _), ix) in enumerate(zip(pairs, members)):
        idx[p, :len(ix)] = ix
        valid[p, :len(ix)] = 1.0
        ys[p, :len(ix)] = np.where(labels[ix] == a, 1.0, -1.0)
    counts = valid.sum(axis=1)
    lam = 1.0 / (c_reg * counts)
    radius = 1.0 / np.sqrt(lam)
    xs = x[idx] * valid[:, :, None]
    rngs = [make_rng(derive_seed(seed, "svm-pair", a, b)) for a, b in pairs]

    w = np.zeros((n_pairs, d))
    b = np.zeros(n_pairs)
    rate = np.ones(n_pairs)
    t = np.zeros(n_pairs)
    obj = _objective(w, b, xs, ys, valid, c_reg)
    history = [obj.copy()]
    rows = np.arange(n_pairs)[:, None]
    for _ in range(epochs):
        perm = np.zeros((n_pairs, m), dtype=np.int64)
        for p, rng in enumerate(rngs):
            k = int(counts[p])
            perm[p, :k] = rng.permutation(k)
            perm[p, k:] = np.arange(k, m)
        w_prev, b_prev, t_prev = w.copy(), b.copy(), t.copy()
        for start in range(0, m, batch_size):
            sel = perm[:, start:start + batch_size]
            xb, yb, vb = xs[rows, sel], ys[rows, sel], valid[rows, sel]
            nb = vb.sum(axis=1)
            active = nb > 0
            t = t + active
            eta = rate / (lam * np.maximum(t, 1.0))
            margins = np.einsum("pnd,pd->pn", xb, w) + b[:, None]
            viol = (yb * margins < 1.0) * vb
            step = eta / np.maximum(nb, 1.0)
            gw = np.einsum("pn,pnd->pd", viol * yb, xb)
            gb = np.sum(viol * yb, axis=1)
            shrink = np.where(active, 1.0 - eta * lam, 1.0)
            w = shrink[:, None] * w + (step * active)[:, None] * gw
            b = shrink * b + step * active * gb
            norm = np.sqrt(np.sum(w * w, axis=1) + b * b)
            scale = np.minimum(1.0, radius / np.maximum(norm, 1e-300))
            w = w * scale[:, None]
            b = b * scale
        new_obj = _objective(w, b, xs, ys, valid, c_reg)
        worse = new_obj > obj + OBJECTIVE_TOL * np.maximum(1.0, np.abs(obj))
        if np.any(worse):
            w[worse], b[worse], t[worse] = w_prev[worse], b_prev[worse], t_prev[worse]
            rate[worse] *= 0.5
            new_obj[worse] = obj[worse]
        obj = new_obj
        history.append(obj.copy())
    return LinearSvmModel(
        classes=classes,
        pairs=pairs,
        weights=w,
        biases=b,
        objective_history=np.asarray(history),
        hyperparameters={"c_reg": c_reg, "epochs": epochs, "batch_size": batch_size, "seed": seed},
    )


def predict(model: LinearSvmModel, x) -> np.ndarray:
    """One-vs-one voting; ties go to the lowest class id.

    A 1-d ``x`` is a single sample and yields a 0-d result.
    """
    single = np.asarray(x).ndim == 1
    dv = model.decision_values(x)
    class_pos = {c: k for k, c in enumerate(model.classes.tolist())}
    votes = np.zeros((dv.shape[0], model.classes.size), dtype=np.int64)
    for p, (a, b) in enumerate(model.pairs):
        winner = np.where(dv[:, p] >= 0, class_pos[a], class_pos[b])
        np.add.at(votes, (np.arange(dv.shape[0]), winner), 1)
    out = model.classes[np.argmax(votes, axis=1)]
    return out[0] if single else out


@dataclass
class CvResult:
    accuracy: float
    per_fold: list
    predictions: np.ndarray = field(repr=False)
    hyperparameters: dict = field(default_factory=dict)


def loso_cv(f: FeatureMatrix, labels=None, c_reg: float = DEFAULT_C, seed: int = 0,
            epochs: int = DEFAULT_EPOCHS) -> CvResult:
    """Leave-one-subject-out accuracy.

    Features are standardised with statistics of the training columns only.
    ``labels`` defaults to the state ids of the columns.
    """
    labels = f.states if labels is None else np.asarray(labels)
    if labels.shape != (f.values.shape[1],):
        raise ValueError("one label per column required")
    subjects = np.unique(f.subjects)
    if subjects.size < 2:
        raise ValueError("leave-one-subject-out needs at least two subjects")
    all_states = set(np.unique(f.states).tolist())
    for s in subjects.tolist():
        have = set(f.states[f.subjects == s].tolist())
        if have != all_states:
            raise ValueError(f"subject {s} is missing states {sorted(all_states - have)}")
    preds = np.empty_like(labels)
    per_fold = []
    for s in subjects.tolist():
        test = f.subjects == s
        train_vals, mean, std = zscore_rows(f.values[:, ~test])
        test_vals, _, _ = zscore_rows(f.values[:, test], mean, std)
        model = train_linear_svm_ovo(train_vals.T, labels[~test], c_reg,
                                     derive_seed(seed, "fold", s), epochs=epochs)
        preds[test] = predict(model, test_vals.T)
        per_fold.append(float(np.mean(preds[test] == labels[test])))
    acc = float(np.mean(preds == labels))
    return CvResult(acc, per_fold, preds,
                    {"c_reg": c_reg, "epochs": epochs, "batch_size": DEFAULT_BATCH, "seed": seed})
