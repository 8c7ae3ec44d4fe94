import time

import numpy as np
import pytest

from kronfeat import (
    ContractError,
    DataFormatError,
    DatasetManifest,
    ExperimentConfig,
    SkeletonSequence,
    encode_split,
    load_report,
    run_sweep,
    synth_dataset,
)
from kronfeat.sweep import (
    cell_seed,
    emit_report,
    report_to_csv,
)


@pytest.fixture(scope="module")
def manifest():
    return synth_dataset(3, 10, joints=3, t_range=(15, 30), noise=0.3, seed=2)


class TestConfig:
    def test_protocol_defaults(self):
        cfg = ExperimentConfig(method="kron_pi")
        assert cfg.nus == (10, 20, 50, 100, 200, 500, 1000, 2000, 5000)
        assert cfg.repetitions == 10

    def test_rejects_unknown_method(self):
        with pytest.raises(ContractError):
            ExperimentConfig(method="magic")

    def test_rejects_unsorted_nus(self):
        with pytest.raises(ContractError):
            ExperimentConfig(method="kron_pi", nus=(50, 10))

    def test_cell_seed_depends_on_every_coordinate(self):
        base = cell_seed(0, "kron_pi", 10, 0)
        assert base != cell_seed(1, "kron_pi", 10, 0)
        assert base != cell_seed(0, "kron_e", 10, 0)
        assert base != cell_seed(0, "kron_pi", 20, 0)
        assert base != cell_seed(0, "kron_pi", 10, 1)
        assert base == cell_seed(0, "kron_pi", 10, 0)


class TestEncodeSplit:
    def test_shapes(self, manifest):
        xtr, ytr, xte, yte, skipped = encode_split(manifest)
        assert xtr.shape[0] == len(ytr) == 15
        assert xte.shape[0] == len(yte) == 15
        assert xtr.shape[1:] == (6, 6)
        assert skipped == []

    def test_systematic_failure_aborts(self):
        # constant joints make every covariance zero and the log norm zero
        frames = np.zeros((10, 3, 3))
        frames[:, 1, 0] = 1.0
        frames[:, 2, 1] = 1.0
        samples = [SkeletonSequence("a" if i % 2 else "b", frames) for i in range(6)]
        man = DatasetManifest("degen", samples, [0, 1, 2], [3, 4, 5])
        with pytest.raises(DataFormatError, match="failed descriptor"):
            encode_split(man, eps=0.0)


class TestRunSweep:
    def test_single_cell(self, manifest):
        cfg = ExperimentConfig(method="kron_pi", nus=(10,), repetitions=1, seed=3)
        report = run_sweep(manifest, cfg)
        assert len(report.rows) == 1
        row = report.rows[0]
        assert row.method == "kron_pi" and row.nu == 10 and row.repetition == 0
        assert 0.0 <= row.test_accuracy <= 1.0
        assert row.train_time_s == 0.0  # timing off by default

    def test_exact_mode_ignores_nus(self, manifest):
        cfg = ExperimentConfig(method="exact", nus=(10, 50), repetitions=4, seed=3)
        report = run_sweep(manifest, cfg)
        assert len(report.rows) == 1
        assert report.rows[0].nu == 0

    def test_row_count_is_grid_times_repetitions(self, manifest):
        cfg = ExperimentConfig(method="taylor", nus=(10, 20), repetitions=3, seed=1)
        report = run_sweep(manifest, cfg)
        assert len(report.rows) == 6
        assert [a.runs for a in report.aggregates] == [3, 3]

    def test_byte_identical_reruns(self, manifest):
        cfg = ExperimentConfig(method="kron_pi", nus=(10, 50), repetitions=2, seed=9)
        a = report_to_csv(run_sweep(manifest, cfg))
        b = report_to_csv(run_sweep(manifest, cfg))
        assert a == b

    def test_workers_do_not_change_bytes(self, manifest):
        base = ExperimentConfig(method="kron_pi", nus=(10, 50), repetitions=2, seed=9)
        threaded = ExperimentConfig(method="kron_pi", nus=(10, 50), repetitions=2,
                                    seed=9, workers=4)
        assert report_to_csv(run_sweep(manifest, base)) == report_to_csv(
            run_sweep(manifest, threaded)
        )

    def test_timing_recorded_when_asked(self, manifest):
        cfg = ExperimentConfig(method="kron_pi", nus=(10,), repetitions=1, seed=1,
                               record_timing=True)
        report = run_sweep(manifest, cfg)
        assert report.rows[0].train_time_s > 0.0

    def test_fastfood_skip_rows_are_explicit(self, manifest):
        # d=6 -> D=36 -> padded 64: nu=10 and 100 skip, 64 and 128 run
        cfg = ExperimentConfig(method="fastfood", nus=(10, 64, 100, 128),
                               repetitions=1, seed=4)
        report = run_sweep(manifest, cfg)
        status = {r.nu: r.test_accuracy for r in report.rows}
        assert status[10] is None and status[100] is None
        assert status[64] is not None and status[128] is not None
        assert len(report.rows) == 4  # skip rows still counted
        aggs = {a.nu: a.runs for a in report.aggregates}
        assert aggs[10] == 0 and aggs[64] == 1

    def test_perceptron_method(self, manifest):
        cfg = ExperimentConfig(method="perceptron", nus=(8,), repetitions=1,
                               seed=5, mlp_epochs=50)
        report = run_sweep(manifest, cfg)
        assert report.rows[0].test_accuracy is not None


class TestReports:
    def test_csv_shape(self, manifest):
        cfg = ExperimentConfig(method="kron_pi", nus=(10,), repetitions=2, seed=0)
        text = report_to_csv(run_sweep(manifest, cfg))
        lines = text.splitlines()
        assert lines[0] == "method,nu,repetition,seed,train_time_s,test_accuracy"
        assert all(line.count(",") == 5 for line in lines[1:3])
        agg_at = lines.index("# aggregates")
        assert lines[agg_at + 1] == "method,nu,mean_accuracy,std_accuracy,runs"

    def test_empty_report_is_header_only(self):
        from kronfeat.sweep import ExperimentReport

        text = report_to_csv(ExperimentReport(config={}))
        lines = text.splitlines()
        assert lines[0] == "method,nu,repetition,seed,train_time_s,test_accuracy"
        assert lines[1] == ""
        assert lines[2] == "# aggregates"

    def test_json_round_trip_identical(self, manifest, tmp_path):
        cfg = ExperimentConfig(method="fourier", nus=(10,), repetitions=2, seed=2)
        report = run_sweep(manifest, cfg)
        p1 = tmp_path / "r1.json"
        p2 = tmp_path / "r2.json"
        emit_report(report, p1, fmt="json")
        emit_report(load_report(p1), p2, fmt="json")
        assert p1.read_bytes() == p2.read_bytes()

    def test_unknown_format(self, manifest, tmp_path):
        from kronfeat.sweep import ExperimentReport

        with pytest.raises(ContractError):
            emit_report(ExperimentReport(config={}), tmp_path / "x", fmt="xml")


class TestProtocolScale:
    def test_calibration_accuracy_threshold(self):
        # threshold frozen after a single calibration run (all seeds hit 1.0)
        man = synth_dataset(5, 40, joints=4, t_range=(20, 60), noise=0.1, seed=0)
        xtr, ytr, xte, yte, _ = encode_split(man)
        from kronfeat import KronPiMap, LinearSVM

        for seed in range(10):
            fmap = KronPiMap(nu=1000, sigma=1.0, theta=0.9, seed=seed).fit(xtr)
            clf = LinearSVM(c=1.0, seed=seed).fit(fmap.transform(xtr), ytr)
            acc = np.mean(clf.predict(fmap.transform(xte)) == yte)
            assert acc >= 0.9, f"seed {seed}: accuracy {acc:.3f}"

    def test_full_default_sweep_trend(self):
        # the complete protocol grid; calibrated once and frozen: the mean
        # accuracy curve rises to its plateau with no inversion, and the
        # run stays far inside the ten-minute budget
        start = time.perf_counter()
        man = synth_dataset(5, 40, joints=4, t_range=(20, 60), noise=0.1, seed=0)
        cfg = ExperimentConfig(method="kron_pi", seed=1)
        report = run_sweep(man, cfg)
        assert time.perf_counter() - start < 600.0
        means = [a.mean_accuracy for a in report.aggregates]
        assert len(means) == 9
        drops = [means[i] - means[i + 1] for i in range(8) if means[i] > means[i + 1]]
        assert len(drops) <= 1
        assert all(d <= 0.02 for d in drops)


class TestMonotoneTrend:
    def test_spearman_accuracy_vs_nu(self):
        # harder dataset so accuracy actually climbs with nu
        pytest.importorskip("scipy")
        from scipy.stats import spearmanr

        man = synth_dataset(6, 20, joints=4, t_range=(20, 40), noise=1.2, seed=3)
        for method in ("kron_pi", "kron_e", "fourier", "taylor"):
            cfg = ExperimentConfig(method=method, nus=(10, 50, 200, 1000),
                                   repetitions=3, seed=11)
            report = run_sweep(man, cfg)
            means = [a.mean_accuracy for a in report.aggregates]
            rho = spearmanr([a.nu for a in report.aggregates], means).statistic
            assert rho >= 0.8, f"{method}: accuracy not increasing in nu: {means}"
