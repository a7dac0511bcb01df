import json

import numpy as np
import pytest

from edgetsp.classify import assemble_features
from edgetsp.cluster import recurrence_matrix
from edgetsp.complex import WeightedGraph
from edgetsp.io import (
    DatasetManifest,
    dumps_metrics,
    load_connectome,
    load_timeseries,
    read_features,
    read_labels,
    read_matrix,
    write_connectome,
    write_features,
    write_labels,
    write_matrix,
    write_metrics,
)
from edgetsp.seeding import derive_seed, make_rng
from edgetsp.synth import (
    SynthConfig,
    generate_dataset,
    generate_recording,
    generate_structural_graph,
    state_coupling,
    state_labels,
    write_dataset,
)

SMALL = SynthConfig(n_nodes=24, n_subjects=2, n_states=3, frames_per_state=10, n_modules=4, active_modules=2)


class TestSeeding:
    def test_derive_is_stable(self):
        assert derive_seed(0, "a", 1) == derive_seed(0, "a", 1)
        assert derive_seed(0, "a", 1) != derive_seed(0, "a", 2)
        assert derive_seed(0, "a") != derive_seed(1, "a")

    def test_pcg64(self):
        rng = make_rng(5)
        assert type(rng.bit_generator).__name__ == "PCG64"
        assert rng.random() == np.random.Generator(np.random.PCG64(5)).random()


class TestConfig:
    @pytest.mark.parametrize("kw", [{"n_nodes": 0}, {"n_states": 0}, {"noise_sigma": -1.0},
                                    {"coupling_strength": 1.5}, {"active_modules": 9}])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            SynthConfig(**kw)

    def test_full_scale_defaults(self):
        cfg = SynthConfig()
        assert (cfg.n_nodes, cfg.n_states, cfg.n_encodings) == (119, 8, 2)


class TestStructuralGraph:
    def test_deterministic(self):
        assert generate_structural_graph(SMALL) == generate_structural_graph(SMALL)

    def test_two_cliques_cannot_connect(self):
        cfg = SynthConfig(n_nodes=10, n_modules=2, p_intra=1.0, p_inter=0.0, active_modules=1)
        with pytest.raises(ValueError, match="connected"):
            generate_structural_graph(cfg)

    def test_default_density_range(self):
        dens = [generate_structural_graph(SynthConfig(seed=s)).density() for s in range(100)]
        assert 0.1 <= min(dens) and max(dens) <= 0.4


class TestRecording:
    def test_deterministic(self):
        g = generate_structural_graph(SMALL)
        a = generate_recording(SMALL, g, 1, 0)
        b = generate_recording(SMALL, g, 1, 0)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, generate_recording(SMALL, g, 1, 1).data)

    def test_identity_coupling_without_noise_is_constant(self):
        cfg = SMALL.with_updates(noise_sigma=0.0, amplitude_jitter=0.0, standardize_blocks=False)
        g = generate_structural_graph(cfg)
        eye = [np.eye(cfg.n_nodes)] * cfg.n_states
        x = generate_recording(cfg, g, 0, 0, eye).data
        assert np.allclose(x, x[0])

    def test_labels_are_contiguous_blocks(self):
        labels = state_labels(SMALL)
        assert labels.tolist() == [0] * 10 + [1] * 10 + [2] * 10

    def test_couplings_row_normalised(self):
        g = generate_structural_graph(SMALL)
        for s in range(SMALL.n_states):
            c = state_coupling(SMALL, g, s)
            sums = c.sum(axis=1)
            assert np.allclose(sums[sums > 0], 1.0)
            assert np.all(c >= 0)
        assert np.allclose(state_coupling(SMALL, g, 0).sum(axis=1), 1.0)

    def test_within_state_recurrence_exceeds_between(self):
        cfg = SynthConfig(n_subjects=1, amplitude_jitter=0.0, standardize_blocks=False)
        g, recs = generate_dataset(cfg)
        labels = state_labels(cfg)
        r = recurrence_matrix(recs[(0, 0)].data)
        same = labels[:, None] == labels[None, :]
        off = ~np.eye(labels.size, dtype=bool)
        assert r[same & off].mean() > r[~same].mean()

    def test_block_standardisation(self):
        g, recs = generate_dataset(SMALL)
        x = recs[(0, 0)].data
        labels = state_labels(SMALL)
        for s in range(SMALL.n_states):
            blk = x[labels == s]
            assert np.allclose(blk.mean(axis=0), 0) and np.allclose(blk.std(axis=0), 1)


class TestMatrixIo:
    def test_roundtrip(self, tmp_path, rng):
        m = rng.normal(size=(10, 10))
        m = m + m.T
        write_matrix(tmp_path / "m.csv", m)
        assert np.max(np.abs(read_matrix(tmp_path / "m.csv") - m)) <= 1e-12

    def test_bad_cell_line_number(self, tmp_path):
        lines = ["1,2", "3,4", "5,6", "7,8", "9,x", "1,1"]
        (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="line 5"):
            read_matrix(tmp_path / "bad.csv")

    def test_nan_rejected(self, tmp_path):
        (tmp_path / "nan.csv").write_text("1,2\nnan,3\n")
        with pytest.raises(ValueError, match="NaN"):
            read_matrix(tmp_path / "nan.csv")

    def test_header_skipped(self, tmp_path):
        (tmp_path / "h.csv").write_text("a,b\n1,2\n")
        assert read_matrix(tmp_path / "h.csv").tolist() == [[1, 2]]

    def test_ragged(self, tmp_path):
        (tmp_path / "r.csv").write_text("1,2\n3\n")
        with pytest.raises(ValueError, match="line 2"):
            read_matrix(tmp_path / "r.csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_matrix(tmp_path / "nope.csv")


class TestConnectomeIo:
    def test_roundtrip(self, tmp_path):
        g = generate_structural_graph(SMALL)
        write_connectome(tmp_path / "c.csv", g)
        assert load_connectome(tmp_path / "c.csv") == g

    def test_self_loops(self, tmp_path):
        write_matrix(tmp_path / "c.csv", np.eye(3))
        with pytest.raises(ValueError, match="self-loops not allowed"):
            load_connectome(tmp_path / "c.csv")

    def test_asymmetric(self, tmp_path):
        write_matrix(tmp_path / "c.csv", np.array([[0, 1.0], [2.0, 0]]))
        with pytest.raises(ValueError, match="symmetric"):
            load_connectome(tmp_path / "c.csv")

    def test_non_square(self, tmp_path):
        write_matrix(tmp_path / "c.csv", np.zeros((2, 3)))
        with pytest.raises(ValueError, match="square"):
            load_connectome(tmp_path / "c.csv")


class TestOtherFormats:
    def test_labels_roundtrip(self, tmp_path):
        write_labels(tmp_path / "l.csv", [0, 2, 1])
        assert read_labels(tmp_path / "l.csv").tolist() == [0, 2, 1]

    def test_timeseries_with_labels(self, tmp_path, rng):
        write_matrix(tmp_path / "x.csv", rng.normal(size=(4, 3)))
        write_labels(tmp_path / "l.csv", [0, 0, 1, 1])
        ts = load_timeseries(tmp_path / "x.csv", tmp_path / "l.csv")
        assert ts.data.shape == (4, 3) and ts.frame_labels.tolist() == [0, 0, 1, 1]

    def test_features_roundtrip(self, tmp_path, rng):
        f = assemble_features({(s, b, e): rng.normal(size=5) for s in range(2) for b in range(3) for e in range(2)})
        write_features(tmp_path / "f.csv", f)
        back = read_features(tmp_path / "f.csv")
        assert np.max(np.abs(back.values - f.values)) <= 1e-12
        assert back.subjects.tolist() == f.subjects.tolist()
        assert back.states.tolist() == f.states.tolist()
        assert back.encodings.tolist() == f.encodings.tolist()

    def test_metrics_schema_and_order(self, tmp_path):
        text = dumps_metrics({"b": np.float64(1.5), "a": np.arange(2)})
        data = json.loads(text)
        assert data == {"schema": 1, "a": [0, 1], "b": 1.5}
        assert text.index('"a"') < text.index('"b"')
        write_metrics(tmp_path / "m.json", {"x": 1})
        assert json.loads((tmp_path / "m.json").read_text())["schema"] == 1


class TestManifest:
    def test_write_dataset_roundtrip(self, tmp_path):
        path = write_dataset(SMALL, tmp_path / "ds")
        m = DatasetManifest.load(path)
        assert len(m.recordings) == SMALL.n_subjects * SMALL.n_encodings
        assert m.state_names[0] == "rest"
        g, recs = generate_dataset(SMALL)
        assert load_connectome(m.resolve(m.connectome)) == g
        first = m.recordings[0]
        x = read_matrix(m.resolve(first.path))
        assert np.max(np.abs(x - recs[(first.subject, first.encoding)].data)) <= 1e-12

    def test_missing_reference_named(self, tmp_path):
        path = write_dataset(SMALL, tmp_path / "ds")
        (tmp_path / "ds" / "frame_labels.csv").unlink()
        with pytest.raises(FileNotFoundError, match="frame_labels.csv"):
            DatasetManifest.load(path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="absent.json"):
            DatasetManifest.load(tmp_path / "absent.json")

    def test_graph_equality_is_structural(self):
        assert WeightedGraph(2, ((0, 1, 1.0),)) == WeightedGraph(2, ((0, 1, 1.0),))
