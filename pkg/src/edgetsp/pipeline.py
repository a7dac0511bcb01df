"""End-to-end dynamic (recurrence/ECS) and static (LOSO SVM) decoding runs."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import cluster, signals, spectral
from .classify import FeatureMatrix, assemble_features, loso_cv
from .complex import boundary_operators, clique_complex_order2, threshold_top_fraction
from .io import DatasetManifest, load_connectome, read_labels, read_matrix, write_features, write_matrix
from .seeding import derive_seed, make_rng
from .synth import SynthConfig

LAPLACIANS = {"L1_down": "down", "L1_full": "full"}
LIFTS = ("prod", "sin", "cos")
PARTS = ("harm", "grad", "curl", "none")
GSP_DYNAMIC = ("coupled", "decoupled")
GSP_STATIC = ("coupled", "decoupled", "sdi")


class PipelineError(Exception):
    """A stage failed; ``stage`` names it and ``numerical`` tells numerical from input failures."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage
        self.numerical = isinstance(exc, (ArithmeticError, np.linalg.LinAlgError))


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, tp, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError) and isinstance(exc, Exception):
            raise PipelineError(self.name, exc) from exc
        return False


def default_tsp_variants() -> list:
    out = []
    for lap in LAPLACIANS:
        for lift in LIFTS:
            for part in ("harm", "grad", "curl"):
                if lap == "L1_down" and part == "curl":
                    continue
                out.append(f"tsp:{lap}:{lift}:{part}")
    return out


def default_variants(static: bool) -> list:
    gsp = GSP_STATIC if static else GSP_DYNAMIC
    base = [] if static else ["raw"]
    return base + [f"gsp:{g}" for g in gsp] + default_tsp_variants()


def parse_variant(name: str):
    """``raw`` | ``gsp:<coupled|decoupled|sdi>`` | ``tsp:<L1_down|L1_full>:<prod|sin|cos>:<harm|grad|curl|none>``."""
    bits = name.split(":")
    if bits == ["raw"]:
        return ("raw",)
    if len(bits) == 2 and bits[0] == "gsp" and bits[1] in GSP_STATIC:
        return tuple(bits)
    if len(bits) == 4 and bits[0] == "tsp" and bits[1] in LAPLACIANS and bits[2] in LIFTS and bits[3] in PARTS:
        if bits[1] == "L1_down" and bits[3] == "curl":
            raise ValueError(f"variant {name}: curl undefined without triangles")
        return tuple(bits)
    raise ValueError(f"unknown method variant {name!r}")


@dataclass(frozen=True)
class PipelineConfig:
    threshold_fraction: float = 0.2
    laplacian_variant: str = "L1_down"
    lift: str = "sin"
    hodge_part: str = "harm"
    gsp_cutoff: int = 30
    recurrence_pct: float = 95.0
    consensus_runs: int = 100
    ecs_alpha: float = 0.9
    n_boot: int = 10
    boot_fraction: float = 0.8
    c_reg: float = 1.0
    svm_epochs: int = 200
    zscore_product: bool = True
    null_permutations: int = 100
    variants: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.threshold_fraction <= 1:
            raise ValueError("threshold_fraction must lie in (0, 1]")
        if self.laplacian_variant not in LAPLACIANS:
            raise ValueError(f"laplacian_variant must be one of {sorted(LAPLACIANS)}")
        if self.lift not in LIFTS:
            raise ValueError(f"lift must be one of {LIFTS}")
        if self.hodge_part not in PARTS:
            raise ValueError(f"hodge_part must be one of {PARTS}")
        if self.laplacian_variant == "L1_down" and self.hodge_part == "curl":
            raise ValueError("hodge_part=curl requires laplacian_variant=L1_full")
        if self.gsp_cutoff < 1:
            raise ValueError("gsp_cutoff must be at least 1")
        if not 0 < self.recurrence_pct < 100:
            raise ValueError("recurrence_pct must lie in (0, 100)")
        if self.consensus_runs < 1 or self.n_boot < 1 or self.svm_epochs < 1:
            raise ValueError("consensus_runs, n_boot and svm_epochs must be at least 1")
        if not 0 < self.ecs_alpha < 1:
            raise ValueError("ecs_alpha must lie in (0, 1)")
        if not 0 < self.boot_fraction <= 1:
            raise ValueError("boot_fraction must lie in (0, 1]")
        if self.c_reg <= 0:
            raise ValueError("c_reg must be positive")
        object.__setattr__(self, "variants", tuple(self.variants))
        for v in self.variants:
            parse_variant(v)

    @property
    def primary_variant(self) -> str:
        """The variant named by laplacian_variant / lift / hodge_part."""
        return f"tsp:{self.laplacian_variant}:{self.lift}:{self.hodge_part}"

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["variants"] = list(self.variants)
        return d

    @classmethod
    def field_names(cls) -> set:
        return {f.name for f in fields(cls)}

    def with_updates(self, **kw) -> "PipelineConfig":
        return replace(self, **kw)


def _coerce(value: str, kind):
    if kind is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind is tuple:
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return kind(value.strip())


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) into a dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None):
    """Return ``(PipelineConfig, synth_overrides)`` from a key-value file.

    Keys belonging to :class:`edgetsp.synth.SynthConfig` are returned
    separately; ``seed`` feeds both.  Unknown keys are rejected.
    """
    raw = parse_config_text(Path(path).read_text()) if path is not None else {}
    raw.update({k: str(v) for k, v in (overrides or {}).items()})
    pipe_types = {f.name: f.type for f in fields(PipelineConfig)}
    synth_types = {f.name: f.type for f in fields(SynthConfig)}
    pipe_kw, synth_kw = {}, {}
    for key, value in raw.items():
        if key in pipe_types:
            default = getattr(PipelineConfig(), key)
            pipe_kw[key] = _coerce(value, type(default))
        if key in synth_types:
            synth_kw[key] = _coerce(value, type(getattr(SynthConfig(), key)))
        if key not in pipe_types and key not in synth_types:
            raise ValueError(f"unknown config key {key!r}")
    return PipelineConfig(**pipe_kw), synth_kw


@dataclass
class Dataset:
    graph: object
    labels: np.ndarray
    recordings: dict = field(repr=False)

    @property
    def subjects(self) -> list:
        return sorted({s for s, _ in self.recordings})

    @property
    def encodings(self) -> list:
        return sorted({e for _, e in self.recordings})


def load_dataset(manifest) -> Dataset:
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.load(manifest)
    g = load_connectome(manifest.resolve(manifest.connectome))
    labels = read_labels(manifest.resolve(manifest.frame_labels))
    recs = {}
    for r in manifest.recordings:
        data = read_matrix(manifest.resolve(r.path))
        if data.shape[0] != labels.size:
            raise ValueError(f"{r.path}: {data.shape[0]} frames but {labels.size} frame labels")
        if data.shape[1] != g.n_nodes:
            raise ValueError(f"{r.path}: {data.shape[1]} channels but connectome has {g.n_nodes} nodes")
        recs[(r.subject, r.encoding)] = data
    return Dataset(g, labels, recs)


class Workspace:
    """Structures shared by all variants of one run: complex, projectors, GSP basis."""

    def __init__(self, ds: Dataset, cfg: PipelineConfig):
        self.ds = ds
        self.cfg = cfg
        with _stage("threshold"):
            self.thresholded = threshold_top_fraction(ds.graph, cfg.threshold_fraction)
        with _stage("clique-complex"):
            self.complex = clique_complex_order2(self.thresholded)
        with _stage("boundary"):
            self.boundary = boundary_operators(self.complex)
        self._projectors = {}
        self._gsp_basis = None
        self._preprocessed = {}
        self._phases = {}

    def projector(self, lap: str) -> spectral.HodgeProjector:
        if lap not in self._projectors:
            with _stage("hodge-projector"):
                self._projectors[lap] = spectral.HodgeProjector(self.boundary, LAPLACIANS[lap])
        return self._projectors[lap]

    @property
    def gsp_basis(self) -> spectral.EigenBasis:
        if self._gsp_basis is None:
            with _stage("gsp-eigenbasis"):
                self._gsp_basis = spectral.eigendecompose(spectral.graph_laplacian(self.ds.graph))
        return self._gsp_basis

    def preprocessed(self, key) -> np.ndarray:
        """Recording with the state-block regressors removed."""
        if key not in self._preprocessed:
            with _stage("regress-out"):
                reg = signals.block_regressors(self.ds.labels)
                self._preprocessed[key] = signals.regress_out(self.ds.recordings[key], reg)
        return self._preprocessed[key]

    def phase(self, key) -> np.ndarray:
        if key not in self._phases:
            with _stage("hilbert"):
                self._phases[key] = signals.hilbert_phase(self.preprocessed(key))
        return self._phases[key]

    def edge_series(self, key, lift: str) -> np.ndarray:
        with _stage("lift"):
            if lift == "prod":
                return signals.lift_product(self.preprocessed(key), self.complex, zscore=self.cfg.zscore_product)
            return signals.lift_phase(self.phase(key), self.complex, lift)

    def signal(self, key, variant: str) -> np.ndarray:
        """Frame-major signal of one recording under a method variant."""
        v = parse_variant(variant)
        if v[0] == "raw":
            return self.preprocessed(key)
        if v[0] == "gsp":
            with _stage("gsp-split"):
                coupled, decoupled = spectral.split_coupled_decoupled(
                    self.gsp_basis, self.preprocessed(key), min(self.cfg.gsp_cutoff, self.gsp_basis.dim))
            if v[1] == "coupled":
                return coupled
            if v[1] == "decoupled":
                return decoupled
            raise ValueError("SDI is a nodal summary, not a time series")
        _, lap, lift, part = v
        e = self.edge_series(key, lift)
        if part == "none":
            return e
        with _stage("hodge-filter"):
            return self.projector(lap).project(e, part)


def _subject_signal(ws: Workspace, subject, variant) -> np.ndarray:
    return np.hstack([ws.signal((subject, enc), variant) for enc in ws.ds.encodings
                      if (subject, enc) in ws.ds.recordings])


def _variants(cfg: PipelineConfig, static: bool) -> list:
    if cfg.variants:
        return list(cfg.variants)
    return default_variants(static)


def run_dynamic_decoding(manifest, cfg: PipelineConfig, out_dir=None) -> dict:
    """Bootstrap ECS of consensus partitions versus the frame labels, per variant."""
    with _stage("load"):
        ds = manifest if isinstance(manifest, Dataset) else load_dataset(manifest)
    ws = Workspace(ds, cfg)
    truth = ds.labels
    subjects = ds.subjects
    sample_size = max(1, int(round(cfg.boot_fraction * len(subjects))))
    results = {}
    for variant in _variants(cfg, static=False):
        if parse_variant(variant)[0] == "gsp" and parse_variant(variant)[1] == "sdi":
            continue
        per_subject = [_subject_signal(ws, s, variant) for s in subjects]
        with _stage(f"bootstrap-ecs[{variant}]"):
            boot = cluster.bootstrap_ecs(
                per_subject, truth, n_boot=cfg.n_boot, sample_size=sample_size,
                seed=derive_seed(cfg.seed, "bootstrap", variant), pct=cfg.recurrence_pct,
                n_runs=cfg.consensus_runs, alpha=cfg.ecs_alpha)
            null_mean, null_std, _ = cluster.permutation_null(
                boot.partitions, truth, cfg.null_permutations,
                derive_seed(cfg.seed, "null", variant), cfg.ecs_alpha)
        results[variant] = {
            "ecs_mean": boot.mean,
            "ecs_std": boot.std,
            "n_boot": cfg.n_boot,
            "per_sample": boot.per_sample,
            "null_mean": null_mean,
            "null_std": null_std,
            "n_communities": [int(p.max() + 1) for p in boot.partitions],
        }
        if out_dir is not None:
            with _stage("write-recurrence"):
                full = np.hstack(per_subject)
                write_matrix(Path(out_dir) / "recurrence" / f"{variant.replace(':', '_')}.csv",
                             cluster.recurrence_matrix(full))
    return {
        "experiment": "dynamic",
        "config": cfg.as_dict(),
        "n_frames": int(truth.size),
        "n_subjects": len(subjects),
        "bootstrap_sample_size": sample_size,
        "complex": {"n_nodes": ws.complex.n_nodes, "n_edges": ws.complex.n_edges,
                    "n_triangles": ws.complex.n_triangles},
        "variants": results,
    }


def nodal_values(ws: Workspace, key, variant: str) -> dict:
    """Per-state node vector of one recording: {state: vector}."""
    v = parse_variant(variant)
    labels = ws.ds.labels
    out = {}
    if v[0] == "gsp":
        with _stage("gsp-split"):
            coupled, decoupled = spectral.split_coupled_decoupled(
                ws.gsp_basis, ws.preprocessed(key), min(ws.cfg.gsp_cutoff, ws.gsp_basis.dim))
        for s in np.unique(labels).tolist():
            blk = labels == s
            if v[1] == "coupled":
                out[s] = np.linalg.norm(coupled[blk], axis=0)
            elif v[1] == "decoupled":
                out[s] = np.linalg.norm(decoupled[blk], axis=0)
            else:
                with _stage("sdi"):
                    out[s] = spectral.structural_decoupling_index(coupled[blk], decoupled[blk])
        return out
    if v[0] == "raw":
        x = ws.preprocessed(key)
        return {s: np.linalg.norm(x[labels == s], axis=0) for s in np.unique(labels).tolist()}
    e = ws.signal(key, variant)
    for s in np.unique(labels).tolist():
        with _stage("edge-to-node"):
            out[s] = signals.project_edges_to_nodes(ws.boundary, signals.temporal_l2_norm(e[labels == s]))
    return out


def static_features(ws: Workspace, variant: str):
    """Feature matrix (nodes x state*encoding*subject) of one variant, not yet standardised."""
    table = {}
    for (subj, enc) in sorted(ws.ds.recordings):
        for s, vec in nodal_values(ws, (subj, enc), variant).items():
            table[(subj, s, enc)] = vec
    with _stage("assemble-features"):
        return assemble_features(table, zscore=False)


def _drop_constant_rows(f):
    keep = np.flatnonzero(f.values.std(axis=1) > 0)
    return FeatureMatrix(f.values[keep], f.subjects, f.states, f.encodings), int(f.values.shape[0] - keep.size)


def chance_interval(n: int, n_classes: int, level: float = 0.99):
    """Two-sided binomial interval of accuracy under uniform guessing."""
    p = 1.0 / n_classes
    lo = stats.binom.ppf((1 - level) / 2, n, p) / n
    hi = stats.binom.ppf(1 - (1 - level) / 2, n, p) / n
    return float(lo), float(hi)


def run_static_decoding(manifest, cfg: PipelineConfig, out_dir=None) -> dict:
    """LOSO one-vs-one SVM accuracy on nodal features, per variant, plus a shuffled-label control."""
    with _stage("load"):
        ds = manifest if isinstance(manifest, Dataset) else load_dataset(manifest)
    if len(ds.subjects) < 2:
        raise PipelineError("load", ValueError("static decoding needs at least two subjects"))
    ws = Workspace(ds, cfg)
    results = {}
    n_classes = int(np.unique(ds.labels).size)
    for variant in _variants(cfg, static=True):
        f = static_features(ws, variant)
        f, dropped = _drop_constant_rows(f)
        if out_dir is not None:
            write_features(Path(out_dir) / "features" / f"{variant.replace(':', '_')}.csv", f)
        with _stage(f"loso-cv[{variant}]"):
            cv = loso_cv(f, c_reg=cfg.c_reg, seed=derive_seed(cfg.seed, "loso", variant), epochs=cfg.svm_epochs)
        results[variant] = {"accuracy": cv.accuracy, "per_fold": cv.per_fold,
                            "n_features": int(f.values.shape[0]), "dropped_constant_features": dropped}
    tsp = {k: v for k, v in results.items() if k.startswith("tsp:")}
    gsp = {k: v for k, v in results.items() if k.startswith("gsp:")}
    best_tsp = max(tsp, key=lambda k: (tsp[k]["accuracy"], k)) if tsp else None
    best_gsp = max(gsp, key=lambda k: (gsp[k]["accuracy"], k)) if gsp else None
    control = None
    control_variant = best_tsp or (next(iter(results)) if results else None)
    if control_variant is not None:
        f, _ = _drop_constant_rows(static_features(ws, control_variant))
        shuffled = make_rng(derive_seed(cfg.seed, "shuffle")).permutation(f.states)
        with _stage("shuffled-control"):
            cv = loso_cv(f, labels=shuffled, c_reg=cfg.c_reg,
                         seed=derive_seed(cfg.seed, "loso-shuffled"), epochs=cfg.svm_epochs)
        lo, hi = chance_interval(f.values.shape[1], n_classes)
        control = {"variant": control_variant, "accuracy": cv.accuracy, "chance": 1.0 / n_classes,
                   "ci99": [lo, hi], "within_ci": bool(lo <= cv.accuracy <= hi)}
    return {
        "experiment": "static",
        "config": cfg.as_dict(),
        "n_classes": n_classes,
        "n_subjects": len(ds.subjects),
        "complex": {"n_nodes": ws.complex.n_nodes, "n_edges": ws.complex.n_edges,
                    "n_triangles": ws.complex.n_triangles},
        "variants": results,
        "best_tsp": best_tsp,
        "best_gsp": best_gsp,
        "shuffled_control": control,
        "hyperparameters": {"c_reg": cfg.c_reg, "epochs": cfg.svm_epochs},
    }
