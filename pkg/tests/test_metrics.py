import numpy as np
import pytest

from oracles import eer_brute_force
from replaykit.corpus import Manifest, UtteranceMeta
from replaykit.metrics import ScoreRecord, compute_eer, read_scores, write_scores


def _records(genuine, replay):
    recs = [ScoreRecord(f"g{i}", s, "genuine") for i, s in enumerate(genuine)]
    recs += [ScoreRecord(f"r{i}", s, "replay") for i, s in enumerate(replay)]
    return recs


class TestComputeEer:
    def test_perfectly_separable(self):
        eer, threshold = compute_eer(_records([2.0, 3.0], [0.0, 1.0]))
        assert eer == 0.0
        assert 1.0 < threshold <= 2.0

    def test_interleaved_half(self):
        eer, _ = compute_eer(_records([0.0, 2.0], [1.0, 3.0]))
        assert eer == pytest.approx(0.5, abs=1e-12)

    def test_identical_multisets(self):
        scores = [0.3, 1.1, 2.2]
        eer, _ = compute_eer(_records(scores, scores))
        assert eer == pytest.approx(0.5, abs=1e-12)

    def test_one_class_only(self):
        with pytest.raises(ValueError, match="at least one"):
            compute_eer([ScoreRecord("g0", 1.0, "genuine")])

    def test_eer_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            g = rng.normal(1, 1, size=rng.integers(1, 20)).tolist()
            r = rng.normal(0, 1, size=rng.integers(1, 20)).tolist()
            eer, _ = compute_eer(_records(g, r))
            assert 0.0 <= eer <= 1.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            g = rng.normal(1, 1, size=12).tolist()
            r = rng.normal(0, 1, size=9).tolist()
            base, _ = compute_eer(_records(g, r))
            for f in (lambda s: 3.0 * s + 7.0, np.tanh, lambda s: s ** 3):
                mapped, _ = compute_eer(_records([float(f(s)) for s in g],
                                                 [float(f(s)) for s in r]))
                assert mapped == pytest.approx(base, abs=1e-12)

    def test_label_swap_equals_score_negation(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            g = rng.normal(0.5, 1, size=11).tolist()
            r = rng.normal(0.0, 1, size=14).tolist()
            swapped, _ = compute_eer(_records(r, g))
            negated, _ = compute_eer(_records([-s for s in g],
                                              [-s for s in r]))
            assert swapped == pytest.approx(negated, abs=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(3)
        for trial in range(500):
            n_g = int(rng.integers(1, 26))
            n_r = int(rng.integers(1, 26))
            if trial % 3 == 0:
                # quantized scores force ties across and within classes
                g = rng.integers(0, 6, size=n_g).astype(float).tolist()
                r = rng.integers(0, 6, size=n_r).astype(float).tolist()
            else:
                g = rng.normal(0.5, 1, size=n_g).tolist()
                r = rng.normal(0.0, 1, size=n_r).tolist()
            eer, _ = compute_eer(_records(g, r))
            assert abs(eer - eer_brute_force(g, r)) <= 1e-9, (g, r)

    def test_threshold_is_operating_point(self):
        records = _records([0.1, 0.9, 1.4], [-0.3, 0.2, 0.8])
        eer, threshold = compute_eer(records)
        genuine = [r.score for r in records if r.label == "genuine"]
        replay = [r.score for r in records if r.label == "replay"]
        far = sum(1 for s in replay if s >= threshold) / len(replay)
        frr = sum(1 for s in genuine if s < threshold) / len(genuine)
        # at the interpolated threshold the two step rates bracket the EER
        assert min(far, frr) - 1e-12 <= eer <= max(far, frr) + 1e-12

    def test_rejects_nonfinite_score(self):
        with pytest.raises(ValueError, match="finite"):
            ScoreRecord("u", float("nan"), "genuine")


class TestScoreFiles:
    def test_roundtrip(self, tmp_path):
        records = _records([0.25, -1.5], [3.125])
        p = tmp_path / "scores.tsv"
        write_scores(records, p)
        assert read_scores(p) == records

    def test_full_precision(self, tmp_path):
        records = [ScoreRecord("u0", 0.1 + 0.2, "genuine"),
                   ScoreRecord("u1", -1.0 / 3.0, "replay")]
        p = tmp_path / "scores.tsv"
        write_scores(records, p)
        back = read_scores(p)
        assert back[0].score == records[0].score
        assert back[1].score == records[1].score

    def test_labels_filled_from_manifest(self, tmp_path):
        manifest = Manifest([
            UtteranceMeta("u0", "a.wav", "genuine", "S00", "P00", "-"),
            UtteranceMeta("u1", "b.wav", "replay", "S00", "P00", "D00"),
        ])
        p = tmp_path / "scores.tsv"
        p.write_text("u0\t1.5\t-\nu1\t-0.5\t-\n")
        back = read_scores(p, manifest)
        assert [r.label for r in back] == ["genuine", "replay"]

    def test_unknown_utt_without_label(self, tmp_path):
        p = tmp_path / "scores.tsv"
        p.write_text("u9\t1.5\t-\n")
        with pytest.raises(ValueError, match="no label"):
            read_scores(p)

    def test_label_conflict_detected(self, tmp_path):
        manifest = Manifest([
            UtteranceMeta("u0", "a.wav", "genuine", "S00", "P00", "-"),
        ])
        p = tmp_path / "scores.tsv"
        p.write_text("u0\t1.5\treplay\n")
        with pytest.raises(ValueError, match="disagrees"):
            read_scores(p, manifest)
