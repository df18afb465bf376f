import json

import numpy as np
import pytest
from scipy import stats

from braintap import data


def write_cohort_fixture(tmp_path, n=4):
    """Hand-built 3-subject, 2-prior cohort."""
    rng = np.random.default_rng(42)
    p1 = np.zeros((n, n))
    p1[0, 1] = p1[1, 0] = 1.0
    p2 = np.zeros((n, n))
    p2[2, 3] = p2[3, 2] = 1.0
    data._write_matrix(tmp_path / "prior_a.csv", p1)
    data._write_matrix(tmp_path / "prior_b.csv", p2)
    subjects = []
    for i, label in enumerate([0, 1, 0]):
        m = rng.normal(size=(n, n))
        m = (m + m.T) / 2
        np.fill_diagonal(m, 0.0)
        data._write_matrix(tmp_path / f"fc_s{i}.csv", m)
        data._write_matrix(tmp_path / f"sc_s{i}.csv", np.abs(m))
        subjects.append(
            {"id": f"s{i}", "label": label, "fc": f"fc_s{i}.csv",
             "sc": f"sc_s{i}.csv", "split": "train"}
        )
    manifest = {
        "version": 1, "n_rois": n,
        "priors": [{"name": "a", "path": "prior_a.csv"},
                   {"name": "b", "path": "prior_b.csv"}],
        "subjects": subjects,
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    return tmp_path


class TestLoadCohort:
    def test_well_formed_fixture(self, tmp_path):
        subjects, priors, manifest = data.load_cohort(write_cohort_fixture(tmp_path))
        assert len(subjects) == 3
        assert len(priors) == 2
        assert manifest.n_rois == 4

    def test_non_binary_prior_rejected(self, tmp_path):
        d = write_cohort_fixture(tmp_path)
        bad = np.zeros((4, 4))
        bad[0, 1] = bad[1, 0] = 0.5
        data._write_matrix(d / "prior_a.csv", bad)
        with pytest.raises(data.CohortError, match="non-binary prior entry"):
            data.load_cohort(d)

    def test_nonsquare_matrix_rejected(self, tmp_path):
        d = write_cohort_fixture(tmp_path)
        (d / "fc_s0.csv").write_text("\n".join(",".join("0" for _ in range(5)) for _ in range(4)) + "\n")
        with pytest.raises(data.CohortError, match="non-square"):
            data.load_cohort(d)

    def test_asymmetric_rejected(self, tmp_path):
        d = write_cohort_fixture(tmp_path)
        m = np.zeros((4, 4))
        m[0, 1] = 1.0
        data._write_matrix(d / "fc_s0.csv", m)
        with pytest.raises(data.CohortError, match="asymmetric"):
            data.load_cohort(d)

    def test_missing_file_rejected(self, tmp_path):
        d = write_cohort_fixture(tmp_path)
        (d / "sc_s1.csv").unlink()
        with pytest.raises(data.CohortError, match="missing file"):
            data.load_cohort(d)

    def test_bad_label_rejected(self, tmp_path):
        d = write_cohort_fixture(tmp_path)
        raw = json.loads((d / "manifest.json").read_text())
        raw["subjects"][0]["label"] = 2
        (d / "manifest.json").write_text(json.dumps(raw))
        with pytest.raises(data.CohortError, match="invalid label"):
            data.load_cohort(d)


class TestFreeMask:
    def test_full_coverage_complement_empty(self):
        full = np.ones((4, 4))
        np.fill_diagonal(full, 0.0)
        assert data.derive_free_mask([full]).sum() == 0.0

    def test_hand_case_3x3(self):
        p = np.zeros((3, 3))
        p[0, 1] = p[1, 0] = 1.0
        free = data.derive_free_mask([p])
        expect = np.zeros((3, 3))
        for i, j in [(0, 2), (2, 0), (1, 2), (2, 1)]:
            expect[i, j] = 1.0
        np.testing.assert_array_equal(free, expect)

    def test_no_masks_gives_all_offdiagonal(self):
        free = data.derive_free_mask([], n_rois=3)
        assert free.sum() == 6.0
        assert np.all(np.diag(free) == 0.0)

    def test_disjoint_from_every_prior(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            masks = []
            for _ in range(3):
                m = (rng.random((5, 5)) < 0.3).astype(float)
                m = np.maximum(m, m.T)
                np.fill_diagonal(m, 0.0)
                masks.append(m)
            free = data.derive_free_mask(masks)
            for m in masks:
                assert (free * m).sum() == 0.0


class TestGenerator:
    def test_round_trip(self, tmp_path):
        d = data.generate_synthetic_cohort(tmp_path / "c", 20, 12, 2, 0.4, 0.2, seed=7)
        subjects, priors, manifest = data.load_cohort(d)
        assert len(subjects) == 20
        assert len(priors) == 2
        splits = [s["split"] for s in manifest.subjects]
        assert splits.count("train") == 12 and splits.count("val") == 4

    def test_balanced_labels(self, tmp_path):
        d = data.generate_synthetic_cohort(tmp_path / "c", 30, 10, 1, 0.3, 0.1, seed=0)
        subjects, _, _ = data.load_cohort(d)
        assert sum(s.label for s in subjects) == 15

    def test_determinism_byte_identical(self, tmp_path):
        d1 = data.generate_synthetic_cohort(tmp_path / "a", 6, 8, 2, 0.4, 0.2, seed=3)
        d2 = data.generate_synthetic_cohort(tmp_path / "b", 6, 8, 2, 0.4, 0.2, seed=3)
        for f in sorted(p.name for p in d1.iterdir()):
            assert (d1 / f).read_bytes() == (d2 / f).read_bytes(), f

    def test_zero_signal_statistically_null(self, tmp_path):
        d = data.generate_synthetic_cohort(tmp_path / "c", 200, 8, 1, 0.0, 0.2, seed=5)
        subjects, _, _ = data.load_cohort(d)
        fc0 = np.array([s.fc for s in subjects if s.label == 0])
        fc1 = np.array([s.fc for s in subjects if s.label == 1])
        iu = np.triu_indices(8, k=1)
        rejected = 0
        for i, j in zip(*iu):
            _, p = stats.ttest_ind(fc0[:, i, j], fc1[:, i, j])
            rejected += p < 0.01
        assert rejected <= 0.05 * len(iu[0])

    def test_signal_shifts_class1_mean(self, tmp_path):
        d = data.generate_synthetic_cohort(tmp_path / "c", 400, 12, 2, 0.5, 0.1, seed=9)
        subjects, priors, _ = data.load_cohort(d)
        fc0 = np.mean([s.fc for s in subjects if s.label == 0], axis=0)
        fc1 = np.mean([s.fc for s in subjects if s.label == 1], axis=0)
        block = priors.masks[0].astype(bool)
        assert (fc1 - fc0)[block].mean() > 0.3

    def test_invalid_sizes(self, tmp_path):
        with pytest.raises(data.CohortError):
            data.generate_synthetic_cohort(tmp_path / "c", 10, 5, 1, 0.1, 0.1, seed=0)
        with pytest.raises(data.CohortError):
            data.generate_synthetic_cohort(tmp_path / "c", 11, 8, 1, 0.1, 0.1, seed=0)
        with pytest.raises(data.CohortError):
            data.generate_synthetic_cohort(tmp_path / "c", 10, 8, 0, 0.1, 0.1, seed=0)
