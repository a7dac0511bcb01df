"""Acceptance suite: one test per numbered criterion, each recorded as a PASS/FAIL line."""
import time

import numpy as np
import pytest

from edgetsp.classify import assemble_features
from edgetsp.cluster import consensus_cluster, element_centric_similarity, louvain, modularity, relabel
from edgetsp.complex import boundary_operators, clique_complex_order2, complete_graph
from edgetsp.io import dumps_metrics
from edgetsp.pipeline import (
    Dataset,
    PipelineConfig,
    Workspace,
    run_dynamic_decoding,
    run_static_decoding,
    static_features,
)
from edgetsp.signals import hilbert_phase, lift_phase
from edgetsp.spectral import (
    HodgeProjector,
    eigendecompose,
    fourier_forward,
    fourier_inverse,
    hodge_decompose,
    hodge_laplacian,
    node_laplacian,
)
from edgetsp.synth import SynthConfig, generate_dataset, generate_structural_graph, state_labels

from builders import (
    FIXTURES,
    boundaries,
    brute_force_modularity,
    joined_triangles,
    planted_sbm,
    random_complex,
    random_tree_plus,
    single_move_gain,
)

DYNAMIC_VARIANTS = ("raw", "tsp:L1_down:sin:harm")
BUDGET_S = 300.0


def operators(b):
    return {
        "L0": node_laplacian(b),
        "L1_down": hodge_laplacian(b, "down"),
        "L1_up": hodge_laplacian(b, "up"),
        "L1": hodge_laplacian(b, "full"),
    }


def default_dataset(cfg=None):
    cfg = cfg or SynthConfig()
    g, recs = generate_dataset(cfg)
    return Dataset(g, state_labels(cfg), {k: v.data for k, v in recs.items()})


def test_criterion_01_spectral_oracles(record_criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for name in FIXTURES:
        for op in operators(boundaries(name)).values():
            if op.shape[0] == 0:
                continue
            eb = eigendecompose(op)
            oracle = np.linalg.eigvals(op)
            worst = max(worst, np.max(np.abs(np.sort(oracle.real) - eb.eigenvalues)), np.max(np.abs(oracle.imag)))
            resid = op @ eb.eigenvectors - eb.eigenvectors * eb.eigenvalues
            worst = max(worst, np.max(np.abs(resid)))
    k3 = eigendecompose(hodge_laplacian(boundaries("K3"), "down")).eigenvalues
    k3f = eigendecompose(hodge_laplacian(boundaries("K3_filled"), "full")).eigenvalues
    examples = np.allclose(k3, [0, 3, 3], atol=1e-8) and np.allclose(k3f, [3, 3, 3], atol=1e-8)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and examples and elapsed < 1.0
    record_criterion(1, "spectral oracles", ok, f"max deviation {worst:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_topology(record_criterion):
    t0 = time.perf_counter()
    expected = {"C4": 1, "P3": 0, "K3_filled": 0, "K3": 1}
    fixed = all(eigendecompose(hodge_laplacian(boundaries(n), "full")).kernel_dim == k for n, k in expected.items())
    rng = np.random.default_rng(2)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(3, 21))
        g = random_tree_plus(rng, n, int(rng.integers(0, n)))
        k = clique_complex_order2(g)
        assert k.n_triangles == 0
        b = boundary_operators(k)
        if eigendecompose(hodge_laplacian(b, "full")).kernel_dim != b.n1 - b.n0 + 1:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = fixed and mismatches == 0 and elapsed < 10.0
    record_criterion(2, "harmonic dimension", ok, f"{mismatches} random mismatches, {elapsed:.2f}s")
    assert ok


def test_criterion_03_hodge_decomposition(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_rec = worst_orth = worst_idem = 0.0
    n_signals = 0
    while n_signals < 1000:
        b = boundary_operators(random_complex(rng, 30))
        if b.n1 == 0:
            continue
        proj = HodgeProjector(b)
        for _ in range(10):
            x = rng.normal(size=b.n1)
            d = hodge_decompose(b, x) if n_signals % 100 == 0 else proj.decompose(x)
            nx = np.linalg.norm(x)
            worst_rec = max(worst_rec, np.linalg.norm(d.grad + d.curl + d.harm - x) / nx)
            for u, v in ((d.grad, d.curl), (d.grad, d.harm), (d.curl, d.harm)):
                worst_orth = max(worst_orth, abs(u @ v) / nx ** 2)
            for part, comp in (("grad", d.grad), ("curl", d.curl), ("harm", d.harm)):
                worst_idem = max(worst_idem, np.max(np.abs(proj.project(comp, part) - comp), initial=0.0))
            n_signals += 1
    elapsed = time.perf_counter() - t0
    ok = worst_rec < 1e-8 and worst_orth < 1e-8 and worst_idem < 1e-10 and elapsed < 60.0
    record_criterion(3, "Hodge decomposition", ok,
                     f"reconstruction {worst_rec:.1e}, orthogonality {worst_orth:.1e}, "
                     f"idempotence {worst_idem:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_04_fourier_roundtrip(record_criterion):
    rng = np.random.default_rng(4)
    bases = [eigendecompose(op) for name in FIXTURES for op in operators(boundaries(name)).values() if op.shape[0]]
    bases += [eigendecompose(hodge_laplacian(boundary_operators(random_complex(rng, 25)), "full")) for _ in range(5)]
    worst = 0.0
    for eb in bases:
        for _ in range(100):
            x = rng.normal(size=eb.dim)
            worst = max(worst, np.linalg.norm(x - fourier_inverse(eb, fourier_forward(eb, x))) / np.linalg.norm(x))
    ok = worst < 1e-10
    record_criterion(4, "Fourier roundtrip", ok, f"worst relative error {worst:.1e} over {len(bases)} bases")
    assert ok


def test_criterion_05_hilbert_phase(record_criterion):
    t_len, k = 256, 12
    t = np.arange(t_len)
    phase = hilbert_phase(np.cos(2 * np.pi * k * t / t_len))[:, 0]
    cut = int(0.05 * t_len)
    inc = np.angle(np.exp(1j * np.diff(phase)))[cut:t_len - cut]
    inc_err = np.max(np.abs(inc - 2 * np.pi * k / t_len))
    rng = np.random.default_rng(5)
    k6 = clique_complex_order2(complete_graph(6))
    theta = hilbert_phase(rng.normal(size=(t_len, 6)))
    s, c = lift_phase(theta, k6, "sin"), lift_phase(theta, k6, "cos")
    pyth = np.max(np.abs(s * s + c * c - 1))
    ok = inc_err < 1e-6 and pyth <= 1e-12
    record_criterion(5, "Hilbert phase", ok, f"increment error {inc_err:.1e} rad, sin^2+cos^2 {pyth:.1e}")
    assert ok


def test_criterion_06_clustering(record_criterion):
    adj = joined_triangles()
    q_best, p_best = brute_force_modularity(adj)
    labels = louvain(adj, 0)
    exact = relabel(labels).tolist() == [0, 0, 0, 1, 1, 1] and abs(modularity(adj, labels) - q_best) < 1e-12
    gr = np.random.default_rng(60)
    worst_gain = -np.inf
    for _ in range(20):
        n = int(gr.integers(4, 13))
        upper = np.triu((gr.random((n, n)) < 0.4) * gr.uniform(0.5, 2.0, (n, n)), k=1)
        if upper.any():
            worst_gain = max(worst_gain, single_move_gain(upper + upper.T, louvain(upper + upper.T, 1)))
    sbm, truth = planted_sbm(np.random.default_rng(2024))
    sbm_ecs = element_centric_similarity(consensus_cluster(sbm, 100, seed=0), truth)
    rng = np.random.default_rng(6)
    invariant = True
    for _ in range(1000):
        p = rng.integers(0, int(rng.integers(1, 10)), size=int(rng.integers(1, 40)))
        perm = rng.permutation(10)
        invariant &= element_centric_similarity(p, p) == pytest.approx(1.0, abs=1e-12)
        invariant &= element_centric_similarity(p, perm[p]) == pytest.approx(1.0, abs=1e-12)
    ok = exact and worst_gain <= 1e-12 and sbm_ecs >= 0.9 and invariant
    record_criterion(6, "clustering", ok, f"joined cliques exact={exact}, best single-move gain "
                     f"{worst_gain:.1e}, SBM ECS {sbm_ecs:.3f}")
    assert ok


@pytest.fixture(scope="module")
def dataset():
    return default_dataset()


@pytest.fixture(scope="module")
def dynamic_run(dataset):
    t0 = time.perf_counter()
    metrics = run_dynamic_decoding(dataset, PipelineConfig(variants=DYNAMIC_VARIANTS))
    return metrics, dumps_metrics(metrics), time.perf_counter() - t0


@pytest.fixture(scope="module")
def static_run(dataset):
    t0 = time.perf_counter()
    metrics = run_static_decoding(dataset, PipelineConfig())
    return metrics, dumps_metrics(metrics), time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_07_dynamic_benchmark(dynamic_run, record_criterion):
    metrics, _, elapsed = dynamic_run
    tsp = metrics["variants"]["tsp:L1_down:sin:harm"]
    raw = metrics["variants"]["raw"]
    margin = (tsp["ecs_mean"] - tsp["null_mean"]) / tsp["null_std"]
    ok = tsp["ecs_mean"] > raw["ecs_mean"] and margin >= 3 and elapsed < BUDGET_S
    record_criterion(7, "dynamic benchmark", ok,
                     f"harm-sin ECS {tsp['ecs_mean']:.3f}, raw {raw['ecs_mean']:.3f}, "
                     f"null {tsp['null_mean']:.3f}+-{tsp['null_std']:.3f} ({margin:.0f} sd), {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_08_static_benchmark(static_run, record_criterion):
    metrics, _, elapsed = static_run
    acc = {k: v["accuracy"] for k, v in metrics["variants"].items()}
    best_tsp, best_gsp = acc[metrics["best_tsp"]], acc[metrics["best_gsp"]]
    chance = 1.0 / metrics["n_classes"]
    control = metrics["shuffled_control"]
    ok = best_tsp >= 3 * chance and best_tsp >= best_gsp and control["within_ci"] and elapsed < BUDGET_S
    record_criterion(8, "static benchmark", ok,
                     f"{metrics['best_tsp']} {best_tsp:.3f} vs {metrics['best_gsp']} {best_gsp:.3f}, "
                     f"control {control['accuracy']:.3f} in [{control['ci99'][0]:.3f}, {control['ci99'][1]:.3f}], "
                     f"{elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_09_determinism(dynamic_run, static_run, record_criterion):
    again_dyn = dumps_metrics(run_dynamic_decoding(default_dataset(), PipelineConfig(variants=DYNAMIC_VARIANTS)))
    again_static = dumps_metrics(run_static_decoding(default_dataset(), PipelineConfig()))
    same_dyn = again_dyn.encode() == dynamic_run[1].encode()
    same_static = again_static.encode() == static_run[1].encode()
    ok = same_dyn and same_static
    record_criterion(9, "determinism", ok, f"dynamic identical={same_dyn}, static identical={same_static}")
    assert ok


def test_criterion_10_feature_shape(record_criterion):
    cfg = SynthConfig(n_subjects=100, frames_per_state=8)
    g = generate_structural_graph(cfg)
    labels = state_labels(cfg)
    rng = np.random.default_rng(10)
    recs = {(s, e): rng.normal(size=(labels.size, cfg.n_nodes))
            for s in range(cfg.n_subjects) for e in range(cfg.n_encodings)}
    ws = Workspace(Dataset(g, labels, recs), PipelineConfig())
    f = static_features(ws, "tsp:L1_down:sin:harm")
    z = assemble_features({(int(s), int(b), int(e)): f.values[:, j]
                           for j, (s, b, e) in enumerate(zip(f.subjects, f.states, f.encodings))})
    ok = f.shape == (119, 1600) and z.shape == (119, 1600)
    record_criterion(10, "full-scale feature shape", ok, f"{f.shape[0]}x{f.shape[1]}")
    assert ok
