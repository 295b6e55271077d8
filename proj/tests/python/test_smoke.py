import math

import numpy as np
import pytest

import insomnet


def test_version_and_names():
    assert insomnet.__version__ == "0.1.0"
    names = insomnet.feature_names()
    assert len(names) == 31
    assert names[0] == "MEAN" and "REL_BETA" in names


def test_shape_trace():
    assert insomnet.shape_trace(20) == [18, 17, 8, 8, 4, 4, 2, 512, 512, 128, 2]
    with pytest.raises(insomnet.InsomnetError) as err:
        insomnet.shape_trace(21)
    assert err.value.code == "ShapeError"


def test_filter_edges():
    edge = 1 / math.sqrt(2)
    assert insomnet.filter_gain(0.5) == pytest.approx(edge, rel=0.02)
    assert insomnet.filter_gain(40.0) == pytest.approx(edge, rel=0.02)
    assert insomnet.filter_gain(0.1) < 1e-3


def test_t_distribution_against_scipy():
    stats = pytest.importorskip("scipy.stats")
    for t, dof in [(1.0, 8.0), (2.5, 12.3), (0.3, 3.0)]:
        assert insomnet.p_value(t, dof) == pytest.approx(2 * stats.t.sf(t, dof), rel=1e-10)
    assert insomnet.t_critical(0.05, 30.0) == pytest.approx(stats.t.ppf(0.975, 30.0), rel=1e-10)


def test_features_of_a_sine():
    fs = 128.0
    t = np.arange(30 * 128) / fs
    f = insomnet.epoch_features(np.sin(2 * np.pi * 2 * t) + np.sin(2 * np.pi * 20 * t + 0.7), fs)
    assert f["RATIO_DELTA_BETA"] == pytest.approx(1.0, abs=0.1)
    freqs, power = insomnet.psd(np.sin(2 * np.pi * 10 * t), fs)
    assert len(freqs) == 257
    assert freqs[np.argmax(power)] == pytest.approx(10.0)


def test_metrics():
    m = insomnet.metrics_from_counts(tp=45, tn=40, fp=10, fn=5)
    assert m["kappa"] == pytest.approx(0.7, abs=1e-12)
    assert insomnet.metrics_from_counts(25, 25, 25, 25)["kappa"] == 0.0
    assert insomnet.metrics([1, 1, 0], [0, 0, 0])["precision"] is None


def test_edf_round_trip(tmp_path):
    x = np.random.default_rng(3).normal(scale=40.0, size=1000)
    path = tmp_path / "x.edf"
    insomnet.write_edf(str(path), x, 256.0)
    fs, back = insomnet.read_edf(str(path))
    assert fs == 256.0
    assert back.shape == x.shape
    assert np.max(np.abs(back - x)) < 0.01


def test_synthetic_subject():
    x, stages = insomnet.synth_subject("insomnia", duration=300, fs=128, seed=4)
    assert x.shape == (300 * 128,)
    assert len(stages) == 10
    assert set(stages) <= {"W", "S1", "S2", "S3", "S4", "REM"}


def test_stage_order_error(tmp_path):
    with pytest.raises(insomnet.InsomnetError) as err:
        insomnet.train(str(tmp_path))
    assert err.value.code == "StageOrderError"


def test_small_pipeline(tmp_path):
    insomnet.run(str(tmp_path), n_healthy=2, n_insomnia=2, duration=300, max_epochs=2, seed=3)
    rows = insomnet.read_metrics(str(tmp_path / "eval" / "metrics.csv"))
    assert {r["level"] for r in rows} == {"epoch", "subject"}
    assert all(r["channel"] == "Fp2" for r in rows)
