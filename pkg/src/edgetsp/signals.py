"""Lifting node time series to edge signals and projecting edge summaries back."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .complex import BoundaryOperators, SimplicialComplex2


@dataclass(frozen=True)
class NodeTimeSeries:
    """T x n0 recording; ``frame_labels`` holds one integer state id per frame."""

    data: np.ndarray
    frame_labels: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 2:
            raise ValueError(f"time series must be T x n with T >= 2, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("time series contains non-finite entries")
        object.__setattr__(self, "data", data)
        if self.frame_labels is not None:
            labels = np.asarray(self.frame_labels, dtype=np.int64)
            if labels.shape != (data.shape[0],):
                raise ValueError(f"{labels.shape[0]} frame labels for {data.shape[0]} frames")
            object.__setattr__(self, "frame_labels", labels)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.data.shape[1]


def _edge_ends(k: SimplicialComplex2, width: int):
    if width != k.n_nodes:
        raise ValueError(f"signal has {width} channels but complex has {k.n_nodes} nodes")
    e = np.asarray(k.edges, dtype=np.int64).reshape(-1, 2)
    return e[:, 0], e[:, 1]


def zscore_columns(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sd = x.std(axis=0)
    bad = np.flatnonzero(sd == 0)
    if bad.size:
        raise ValueError(f"zero-variance channel {int(bad[0])}")
    return (x - x.mean(axis=0)) / sd


def hilbert_phase(x) -> np.ndarray:
    """Instantaneous phase of every column, wrapped to (-pi, pi].

    Each column is demeaned, the analytic signal is formed in the frequency
    domain (negative bins zeroed, positive bins doubled, DC and Nyquist kept)
    and its argument returned.  No padding or tapering is applied.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 frames, got {n}")
    x = x - x.mean(axis=0)
    bad = np.flatnonzero(np.all(x == 0, axis=0))
    if bad.size:
        raise ValueError(f"zero-variance channel {int(bad[0])}")
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    analytic = np.fft.ifft(np.fft.fft(x, axis=0) * h[:, None], axis=0)
    phase = np.angle(analytic)
    phase[phase <= -np.pi] = np.pi
    return phase


def lift_product(x, k: SimplicialComplex2, zscore: bool = False) -> np.ndarray:
    """Co-fluctuation edge series e_ij(t) = x_i(t) x_j(t)."""
    x = np.asarray(x, dtype=float)
    i, j = _edge_ends(k, x.shape[1])
    if zscore:
        x = zscore_columns(x)
    return x[:, i] * x[:, j]


def lift_phase(theta, k: SimplicialComplex2, f: str = "sin") -> np.ndarray:
    """Phase-synchrony edge series f(theta_i(t) - theta_j(t)) for f in {sin, cos}."""
    theta = np.asarray(theta, dtype=float)
    i, j = _edge_ends(k, theta.shape[1])
    diff = theta[:, i] - theta[:, j]
    if f == "sin":
        return np.sin(diff)
    if f == "cos":
        return np.cos(diff)
    raise ValueError(f"phase lift must be 'sin' or 'cos', got {f!r}")


def regress_out(x, regressors) -> np.ndarray:
    """Residuals of an OLS fit of every column on ``[1 | regressors]``."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(regressors, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    if r.shape[0] != x.shape[0]:
        raise ValueError(f"regressors have {r.shape[0]} rows for {x.shape[0]} frames")
    design = np.column_stack([np.ones(x.shape[0]), r])
    if design.shape[1] >= x.shape[0]:
        raise ValueError("more regressors than frames")
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("regressor design is rank deficient")
    beta, *_ = np.linalg.lstsq(design, x, rcond=None)
    return x - design @ beta


def block_regressors(labels, drop=None) -> np.ndarray:
    """Boxcar indicator per state; the ``drop`` state (default: the first) is the baseline."""
    labels = np.asarray(labels)
    states = np.unique(labels)
    if drop is None:
        drop = states[0]
    cols = [(labels == s).astype(float) for s in states if s != drop]
    return np.column_stack(cols) if cols else np.zeros((labels.shape[0], 0))


def temporal_l2_norm(e) -> np.ndarray:
    """Per-edge l2 norm over frames."""
    e = np.asarray(e, dtype=float)
    return np.sqrt(np.sum(e * e, axis=0))


def project_edges_to_nodes(b: BoundaryOperators, v) -> np.ndarray:
    """Node values s = |B1| v: each node sums the values of its incident edges."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != b.n1:
        raise ValueError(f"edge vector length {v.shape[-1]} does not match {b.n1} edges")
    if np.any(v < 0):
        warnings.warn("projecting negative edge values onto nodes", stacklevel=2)
    unsigned = abs(b.b1).astype(float)
    return unsigned @ v if v.ndim == 1 else (unsigned @ v.T).T
