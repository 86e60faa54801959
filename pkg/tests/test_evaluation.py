import json
import shutil

import numpy as np
import pytest

from crossfp import evaluation, fusion, pipeline, synth
from crossfp.config import PipelineConfig
from crossfp.errors import EmptyDatasetError, EmptyScoresError
from crossfp.evaluation import (
    ScoreSet,
    compute_metrics,
    emit_report,
    read_scores_csv,
    run_protocol,
    scan_dataset,
)


def eer_sweep_oracle(genuine, impostor):
    """Exhaustive per-threshold sweep; midpoint at the closest FMR/FNMR."""
    genuine = np.asarray(genuine, dtype=float)
    impostor = np.asarray(impostor, dtype=float)
    best_gap, best_eer = None, None
    for t in np.unique(np.concatenate([genuine, impostor])):
        fmr = float(np.mean(impostor <= t))
        fnmr = float(np.mean(genuine > t))
        gap = abs(fmr - fnmr)
        if best_gap is None or gap < best_gap - 1e-15:
            best_gap, best_eer = gap, 0.5 * (fmr + fnmr)
    return best_eer


class TestComputeMetrics:
    def test_perfect_separation(self):
        metrics = compute_metrics(ScoreSet(genuine=[0.1, 0.2], impostor=[0.3, 0.4]))
        assert metrics.eer == 0.0
        assert metrics.zero_fmr == 0.0
        assert metrics.fmr100 == 0.0

    def test_identical_distributions_give_half(self):
        rng = np.random.default_rng(0)
        scores = ScoreSet(
            genuine=list(rng.normal(10.0, 2.0, size=10000)),
            impostor=list(rng.normal(10.0, 2.0, size=10000)),
        )
        scores.genuine = [abs(s) for s in scores.genuine]
        scores.impostor = [abs(s) for s in scores.impostor]
        metrics = compute_metrics(scores)
        assert metrics.eer == pytest.approx(0.5, abs=0.02)

    def test_matches_sweep_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            genuine = rng.gamma(2.0, 2.0, size=500)
            impostor = rng.gamma(3.0, 2.5, size=500)
            scores = ScoreSet(genuine=list(genuine), impostor=list(impostor))
            metrics = compute_metrics(scores)
            oracle = eer_sweep_oracle(genuine, impostor)
            assert abs(metrics.eer - oracle) <= 1e-3

    def test_det_rows_monotone_and_sorted(self):
        rng = np.random.default_rng(2)
        scores = ScoreSet(
            genuine=list(rng.gamma(2.0, 2.0, size=200)),
            impostor=list(rng.gamma(4.0, 2.0, size=300)),
        )
        det = compute_metrics(scores).det
        assert (np.diff(det[:, 0]) > 0).all()
        assert (np.diff(det[:, 1]) >= 0).all()  # fmr grows with threshold
        assert (np.diff(det[:, 2]) <= 0).all()  # fnmr shrinks

    def test_fnmr_floors_respect_fmr_ceilings(self):
        rng = np.random.default_rng(3)
        genuine = rng.gamma(2.0, 2.0, size=400)
        impostor = rng.gamma(5.0, 2.0, size=2000)
        metrics = compute_metrics(ScoreSet(list(genuine), list(impostor)))
        det = metrics.det
        ok100 = det[:, 1] <= 0.01
        assert metrics.fmr100 == pytest.approx(det[ok100, 2].min())
        assert metrics.fmr1000 >= metrics.fmr100 - 1e-12
        assert metrics.zero_fmr >= metrics.fmr1000 - 1e-12

    def test_duplication_invariance(self):
        rng = np.random.default_rng(4)
        genuine = list(rng.gamma(2.0, 2.0, size=100))
        impostor = list(rng.gamma(4.0, 2.0, size=100))
        once = compute_metrics(ScoreSet(genuine, impostor))
        twice = compute_metrics(ScoreSet(genuine * 2, impostor * 2))
        assert once.eer == pytest.approx(twice.eer, abs=1e-12)

    def test_empty_scores_rejected(self):
        with pytest.raises(EmptyScoresError):
            compute_metrics(ScoreSet(genuine=[], impostor=[1.0]))

    def test_eer_gap_bound_at_crossing(self):
        rng = np.random.default_rng(5)
        genuine = rng.gamma(2.0, 2.0, size=500)
        impostor = rng.gamma(3.0, 2.5, size=700)
        metrics = compute_metrics(ScoreSet(list(genuine), list(impostor)))
        gaps = np.abs(metrics.det[:, 1] - metrics.det[:, 2])
        assert gaps.min() <= 1.0 / min(500, 700)


class TestScanDataset:
    def test_parses_naming_scheme(self, small_corpus):
        images = scan_dataset(small_corpus / "sensorA")
        assert len(images) == 8
        first = images[0]
        assert (first.subject, first.finger, first.impression) == ("s000", "f1", "i0")
        assert first.identity == "s000_f1"

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(EmptyDatasetError):
            scan_dataset(tmp_path)

    def test_bad_filename_rejected(self, tmp_path):
        (tmp_path / "badname.png").write_bytes(b"")
        with pytest.raises(EmptyDatasetError):
            scan_dataset(tmp_path)


@pytest.fixture(scope="module")
def two_by_two(tmp_path_factory):
    """2 subjects x 2 impressions of one sensor, model fitted on it."""
    root = tmp_path_factory.mktemp("proto")
    synth.generate_synthetic_corpus(root, n_fingers=2, impressions_per_sensor=2, seed=3)
    data = root / "sensorA"
    config = PipelineConfig()
    images = evaluation.scan_dataset(data)
    pairs = pipeline.extract_many([img.path for img in images], config)
    model = fusion.fit_cca(
        fusion.DescriptorPairSet(
            x=np.stack([p.coror for p in pairs], axis=1),
            y=np.stack([p.gaborhog for p in pairs], axis=1),
        )
    )
    return data, model


class TestRunProtocol:
    def test_pairing_combinatorics(self, two_by_two):
        data, model = two_by_two
        scores = run_protocol(data, data, model)
        # Each of 4 probes: 1 genuine (other same-finger impression) and
        # 1 impostor (the other subject).
        assert len(scores.genuine) == 4
        assert len(scores.impostor) == 4
        assert all(s > 0 for s in scores.genuine)

    def test_identical_probe_scores_zero(self, two_by_two, tmp_path):
        data, model = two_by_two
        probe_dir = tmp_path / "probe"
        probe_dir.mkdir()
        # A byte-identical copy under a new impression name is a real
        # comparison (only the same file is excluded), so it scores 0.
        shutil.copy(data / "s000_f1_i0.png", probe_dir / "s000_f1_i9.png")
        scores = run_protocol(data, probe_dir, model)
        assert min(scores.genuine) == pytest.approx(0.0, abs=1e-9)

    def test_impostor_cap_is_deterministic(self, two_by_two):
        data, model = two_by_two
        first = run_protocol(data, data, model, impostor_cap=2, seed=9)
        second = run_protocol(data, data, model, impostor_cap=2, seed=9)
        assert len(first.impostor) == 2
        assert first.impostor == second.impostor
        assert len(first.genuine) == 4


@pytest.fixture(scope="module")
def emitted(tmp_path_factory):
    rng = np.random.default_rng(6)
    scores = ScoreSet(
        genuine=list(rng.gamma(2.0, 2.0, size=300)),
        impostor=list(rng.gamma(4.0, 2.0, size=400)),
    )
    metrics = compute_metrics(scores)
    out = tmp_path_factory.mktemp("report")
    written = emit_report(metrics, scores, out)
    return scores, metrics, out, written


class TestEmitReport:
    def test_all_files_written(self, emitted):
        _, _, out, written = emitted
        names = {p.name for p in written}
        assert {"metrics.json", "scores.csv", "det.csv", "det.png", "scores_hist.png"} <= names
        assert all(p.exists() and p.stat().st_size > 0 for p in written)

    def test_metrics_round_trip_from_csv(self, emitted):
        scores, metrics, out, _ = emitted
        reread = compute_metrics(read_scores_csv(out / "scores.csv"))
        stored = json.loads((out / "metrics.json").read_text())
        assert reread.eer == pytest.approx(stored["eer"], abs=1e-12)
        assert reread.fmr100 == pytest.approx(stored["fmr100"], abs=1e-12)
        assert reread.zero_fmr == pytest.approx(stored["zero_fmr"], abs=1e-12)

    def test_det_csv_is_threshold_sorted(self, emitted):
        _, _, out, _ = emitted
        rows = (out / "det.csv").read_text().strip().splitlines()
        assert rows[0] == "threshold,fmr,fnmr"
        thresholds = [float(r.split(",")[0]) for r in rows[1:]]
        assert thresholds == sorted(thresholds)

    def test_creates_missing_directory(self, tmp_path):
        scores = ScoreSet(genuine=[1.0, 2.0], impostor=[3.0, 4.0])
        metrics = compute_metrics(scores)
        out = tmp_path / "deep" / "nested"
        emit_report(metrics, scores, out, render_figures=False)
        assert (out / "metrics.json").exists()
