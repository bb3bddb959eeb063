import numpy as np
import pytest

from beamvq.data import Boundary, FieldTensor, synth_divfree
from beamvq.errors import ConfigError, DataError
from beamvq.metrics import (ScoreConfig, divergence_field, energy_spectrum, evaluate, leadtime_curves,
                            make_scorer, mean_abs_divergence, mse, physics_score, rel_l2, rmse,
                            spatial_variance, spectrum_distance, ssim, tke)
from beamvq.metrics.statistical import gaussian_window

RNG = np.random.default_rng(99)


def uv_field(u: np.ndarray, v: np.ndarray, boundary=Boundary.PERIODIC, dx=1.0, dy=1.0) -> FieldTensor:
    u, v = np.atleast_3d(u), np.atleast_3d(v)
    if u.ndim == 2:
        u, v = u[None], v[None]
    return FieldTensor(np.stack([u, v], axis=1).astype(np.float64), dx, dy, boundary)


def test_constant_velocity_has_zero_divergence():
    f = uv_field(np.full((1, 8, 9), 2.0), np.full((1, 8, 9), -1.0), Boundary.CLAMPED)
    assert mean_abs_divergence(f) == 0.0


def test_linear_field_divergence_exactly_two():
    h, w = 9, 11
    y, x = np.meshgrid(np.arange(h) * 0.5, np.arange(w) * 0.25, indexing="ij")
    f = uv_field(x[None], y[None], Boundary.CLAMPED, dx=0.25, dy=0.5)
    div = divergence_field(f)
    np.testing.assert_array_equal(div, 2.0)
    assert mean_abs_divergence(f) == 2.0


def test_sin_sin_streamfunction_divergence_free():
    f = synth_divfree(64, 64, lambda X, Y: np.sin(X) * np.sin(Y))
    assert mean_abs_divergence(f) < 1e-10


def test_divergence_needs_two_channels_and_3x3():
    with pytest.raises(DataError):
        mean_abs_divergence(FieldTensor(np.zeros((1, 1, 8, 8))))
    with pytest.raises(DataError):
        mean_abs_divergence(FieldTensor(np.zeros((1, 2, 2, 8))))


def test_tke_cases():
    const = uv_field(np.ones((4, 5, 5)), np.ones((4, 5, 5)))
    assert tke(const)[1] == 0.0
    u = np.stack([np.ones((5, 5)), -np.ones((5, 5))])
    per_pixel, mean = tke(uv_field(u, np.zeros_like(u)))
    np.testing.assert_allclose(per_pixel, 0.5)
    assert mean == pytest.approx(0.5)
    with pytest.raises(DataError):
        tke(uv_field(np.ones((1, 5, 5)), np.ones((1, 5, 5))))


def test_tke_matches_double_loop():
    u, v = RNG.normal(size=(2, 6, 4, 5))
    total = 0.0
    for i in range(4):
        for j in range(5):
            mu_u = sum(u[t, i, j] for t in range(6)) / 6
            mu_v = sum(v[t, i, j] for t in range(6)) / 6
            var_u = sum((u[t, i, j] - mu_u) ** 2 for t in range(6)) / 6
            var_v = sum((v[t, i, j] - mu_v) ** 2 for t in range(6)) / 6
            total += 0.5 * (var_u + var_v)
    assert tke(uv_field(u, v))[1] == pytest.approx(total / 20, rel=1e-12)


def test_single_mode_spectrum():
    A, W = 0.7, 32
    x = np.arange(W)
    u = np.broadcast_to(A * np.cos(2 * np.pi * x / W), (W, W))
    spec = energy_spectrum(uv_field(u[None], np.zeros((1, W, W))))
    assert spec.energy[1] == pytest.approx(A**2 / 4, rel=1e-12)
    assert spec.total == pytest.approx(A**2 / 4, rel=1e-12)
    assert np.abs(np.delete(spec.energy, 1)).max() < 1e-15


def test_zero_fluctuation_spectrum_is_zero():
    spec = energy_spectrum(uv_field(np.full((2, 8, 8), 3.0), np.full((2, 8, 8), -1.0)))
    assert np.all(spec.energy == 0.0)


@pytest.mark.parametrize("shape", [(3, 16, 16), (2, 12, 20), (1, 15, 9)])
def test_parseval(shape):
    u, v = RNG.normal(size=(2,) + shape)
    f = uv_field(u, v)
    assert energy_spectrum(f).total == pytest.approx(spatial_variance(f), rel=1e-10)


def test_spectrum_distance_zero_and_csv(tmp_path):
    f = uv_field(*RNG.normal(size=(2, 2, 8, 8)))
    s = energy_spectrum(f)
    assert spectrum_distance(s, s) == 0.0
    s.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "k,E" and len(lines) == s.k.size + 1


def test_statistical_metrics():
    t = RNG.normal(size=(2, 3, 9, 9))
    assert mse(t, t) == 0.0 and rel_l2(t, t) == 0.0 and ssim(t, t) == pytest.approx(1.0)
    assert mse(t + 0.3, t) == pytest.approx(0.09)
    assert rmse(t + 0.3, t) == pytest.approx(0.3)
    p = RNG.normal(size=t.shape)
    naive = sum((a - b) ** 2 for a, b in zip(p.ravel(), t.ravel())) / t.size
    assert mse(p, t) == pytest.approx(naive, rel=1e-12)
    with pytest.raises(DataError):
        rel_l2(p, np.zeros_like(p))


def brute_ssim(p: np.ndarray, t: np.ndarray) -> float:
    w1 = gaussian_window()
    w = np.outer(w1, w1)
    L = t.max() - t.min()
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    vals = []
    for i in range(3, p.shape[0] - 3):
        for j in range(3, p.shape[1] - 3):
            a = p[i - 3 : i + 4, j - 3 : j + 4]
            b = t[i - 3 : i + 4, j - 3 : j + 4]
            ma, mb = (w * a).sum(), (w * b).sum()
            va = (w * (a - ma) ** 2).sum()
            vb = (w * (b - mb) ** 2).sum()
            cov = (w * (a - ma) * (b - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_ssim_matches_windowed_oracle():
    t = RNG.normal(size=(12, 14))
    p = t + 0.3 * RNG.normal(size=t.shape)
    assert ssim(p, t) == pytest.approx(brute_ssim(p, t), rel=1e-10)


def test_scores():
    free = synth_divfree(16, 16, seed=1, frames=2)
    cfg = ScoreConfig(kind="neg_divergence", dx=free.dx, dy=free.dy)
    assert physics_score(free.values, cfg) == pytest.approx(0.0, abs=1e-10)
    u, v = RNG.normal(size=(2, 2, 16, 16))
    a = physics_score(uv_field(u, v), cfg)
    b = physics_score(uv_field(2 * u, 2 * v), cfg)
    assert b < a < 0
    ref = energy_spectrum(uv_field(u, v))
    spec_cfg = ScoreConfig(kind="spectrum_match", reference=ref)
    assert physics_score(uv_field(u, v), spec_cfg) == 0.0
    assert physics_score(uv_field(2 * u, v), spec_cfg) < 0.0


def test_score_config_validation():
    with pytest.raises(ConfigError):
        ScoreConfig(kind="bogus").validate()
    with pytest.raises(ConfigError):
        ScoreConfig(kind="spectrum_match").validate()
    with pytest.raises(ConfigError):
        physics_score(np.zeros((1, 2, 4, 4)), ScoreConfig(kind="neg_mse"))


def test_make_scorer_transform_and_kind():
    u, v = RNG.normal(size=(2, 1, 8, 8))
    frames = np.stack([u, v], axis=1)
    score = make_scorer(ScoreConfig(), transform=lambda a: 3 * a)
    assert score.kind == "neg_divergence"
    assert score(frames) == pytest.approx(-3 * mean_abs_divergence(frames))


def test_evaluate_identical_pair():
    t = RNG.normal(size=(2, 4, 3, 9, 9))
    rep = evaluate(t, t)
    assert rep.mse == 0.0 and rep.ssim == pytest.approx(1.0) and rep.spectrum_distance == 0.0
    assert rep.tke_rel_error == 0.0
    curves = leadtime_curves(t, t)
    assert curves["step"].tolist() == [1, 2, 3, 4]
    np.testing.assert_allclose(curves["ssim"], 1.0)
