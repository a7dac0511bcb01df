"""Synthetic connectomes and recordings with planted state blocks.

Every random draw comes from numpy's PCG64 generator seeded through
:func:`edgetsp.seeding.derive_seed`, so a dataset is a pure function of its
configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import scipy.sparse.csgraph as csgraph

from .complex import WeightedGraph
from .io import DatasetManifest, RecordingEntry, write_connectome, write_labels, write_matrix
from .seeding import derive_seed, make_rng
from .signals import NodeTimeSeries

MAX_GRAPH_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthConfig:
    n_nodes: int = 119
    n_subjects: int = 20
    n_encodings: int = 2
    n_states: int = 8
    frames_per_state: int = 30
    noise_sigma: float = 1.0
    coupling_strength: float = 0.8
    n_modules: int = 8
    p_intra: float = 0.9
    p_inter: float = 0.25
    active_modules: int = 3
    amplitude_jitter: float = 1.0
    amplitude_memory: float = 0.95
    standardize_blocks: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("n_nodes", "n_subjects", "n_encodings", "n_states", "frames_per_state", "n_modules"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0 <= self.coupling_strength <= 1:
            raise ValueError("coupling_strength must lie in [0, 1]")
        if not (0 <= self.p_inter <= 1 and 0 <= self.p_intra <= 1):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if not 1 <= self.active_modules <= self.n_modules:
            raise ValueError("active_modules must lie in [1, n_modules]")
        if self.amplitude_jitter < 0:
            raise ValueError("amplitude_jitter must be nonnegative")
        if not 0 <= self.amplitude_memory < 1:
            raise ValueError("amplitude_memory must lie in [0, 1)")

    @classmethod
    def field_names(cls) -> set:
        return {f.name for f in fields(cls)}

    def with_updates(self, **kw) -> "SynthConfig":
        return replace(self, **kw)


def module_assignment(cfg: SynthConfig) -> np.ndarray:
    """Contiguous, near-equal module blocks."""
    return (np.arange(cfg.n_nodes) * cfg.n_modules) // cfg.n_nodes


def generate_structural_graph(cfg: SynthConfig) -> WeightedGraph:
    """Seeded modular random graph with log-normal weights (heavier inside modules).

    Redrawn until connected; fails after 100 attempts.
    """
    modules = module_assignment(cfg)
    same = modules[:, None] == modules[None, :]
    prob = np.where(same, cfg.p_intra, cfg.p_inter)
    iu = np.triu_indices(cfg.n_nodes, k=1)
    for attempt in range(MAX_GRAPH_ATTEMPTS):
        rng = make_rng(derive_seed(cfg.seed, "structural-graph", attempt))
        present = rng.random(iu[0].size) < prob[iu]
        weights = rng.lognormal(mean=np.where(same[iu], 1.0, 0.0), sigma=0.5)
        a = np.zeros((cfg.n_nodes, cfg.n_nodes))
        a[iu] = np.where(present, weights, 0.0)
        a = a + a.T
        n_comp, _ = csgraph.connected_components(a != 0, directed=False)
        if n_comp == 1:
            return WeightedGraph.from_matrix(a)
    raise ValueError(f"could not draw a connected graph in {MAX_GRAPH_ATTEMPTS} attempts")


def state_coupling(cfg: SynthConfig, g: WeightedGraph, state: int) -> np.ndarray:
    """Row-normalised coupling matrix of one state.

    State 0 (rest) uses the full adjacency.  Every task state keeps only the
    edges among a few state-specific modules and orients them along a
    state-specific node ranking, so each node listens to its upstream
    neighbours only.  Nodes left without inputs get a zero row.
    """
    a = g.to_matrix()
    if state > 0:
        rng = make_rng(derive_seed(cfg.seed, "state-mask", state))
        modules = module_assignment(cfg)
        active = rng.choice(cfg.n_modules, size=cfg.active_modules, replace=False)
        on = np.isin(modules, active)
        rank = rng.permutation(cfg.n_nodes)
        mask = on[:, None] & on[None, :] & (rank[None, :] < rank[:, None])
        a = a * mask
    rowsum = a.sum(axis=1, keepdims=True)
    return np.divide(a, rowsum, out=np.zeros_like(a), where=rowsum > 0)


def state_labels(cfg: SynthConfig) -> np.ndarray:
    return np.repeat(np.arange(cfg.n_states), cfg.frames_per_state)


def generate_recording(cfg: SynthConfig, g: WeightedGraph, subject: int, encoding: int,
                       couplings=None) -> NodeTimeSeries:
    """Simulate x(t+1) = (1 - eps) x(t) + eps C_s x(t) + sigma * noise over consecutive state blocks.

    Each node is then multiplied by a slow log-normal gain exp(kappa * u_i(t)),
    u_i a unit-variance AR(1) process with coefficient ``amplitude_memory``;
    this state-independent nuisance distorts amplitudes but barely moves
    instantaneous phases.  With ``standardize_blocks`` every node is finally
    z-scored inside each state block, so states differ only in how nodes
    co-fluctuate, not in block amplitude.
    """
    if couplings is None:
        couplings = [state_coupling(cfg, g, s) for s in range(cfg.n_states)]
    labels = state_labels(cfg)
    rng = make_rng(derive_seed(cfg.seed, "recording", subject, encoding))
    eps = cfg.coupling_strength
    x = rng.standard_normal(cfg.n_nodes)
    out = np.empty((labels.size, cfg.n_nodes))
    for t, s in enumerate(labels):
        x = (1.0 - eps) * x + eps * (couplings[s] @ x) + cfg.noise_sigma * rng.standard_normal(cfg.n_nodes)
        out[t] = x
    if cfg.amplitude_jitter > 0:
        gain_rng = make_rng(derive_seed(cfg.seed, "gain", subject, encoding))
        rho = cfg.amplitude_memory
        u = np.zeros(cfg.n_nodes)
        for t in range(labels.size):
            u = rho * u + np.sqrt(1.0 - rho * rho) * gain_rng.standard_normal(cfg.n_nodes)
            out[t] *= np.exp(cfg.amplitude_jitter * u)
    if cfg.standardize_blocks:
        for s in range(cfg.n_states):
            blk = labels == s
            if blk.sum() > 1:
                sd = out[blk].std(axis=0)
                out[blk] = (out[blk] - out[blk].mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    return NodeTimeSeries(out, labels)


def generate_dataset(cfg: SynthConfig):
    """Return (graph, {(subject, encoding): NodeTimeSeries})."""
    g = generate_structural_graph(cfg)
    couplings = [state_coupling(cfg, g, s) for s in range(cfg.n_states)]
    recs = {(s, e): generate_recording(cfg, g, s, e, couplings)
            for s in range(cfg.n_subjects) for e in range(cfg.n_encodings)}
    return g, recs


def write_dataset(cfg: SynthConfig, out_dir) -> Path:
    """Write a synthetic dataset plus manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, recs = generate_dataset(cfg)
    write_connectome(out / "connectome.csv", g)
    write_labels(out / "frame_labels.csv", state_labels(cfg))
    entries = []
    for (s, e), rec in recs.items():
        rel = f"timeseries/sub-{s:03d}_enc-{e}.csv"
        write_matrix(out / rel, rec.data)
        entries.append(RecordingEntry(s, e, rel))
    names = ["rest"] + [f"task{k}" for k in range(1, cfg.n_states)]
    manifest = DatasetManifest("connectome.csv", entries, "frame_labels.csv", names, out)
    manifest.save(out / "manifest.json")
    return out / "manifest.json"
