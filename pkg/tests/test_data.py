import numpy as np
import pytest

from beamvq.data import (Boundary, Dataset, FieldTensor, Provenance, SampleWindow, SWEConfig, compute_stats,
                         denormalize, generate_swe, load_dataset, normalize, save_dataset, split_by_time,
                         synth_divfree, total_volume, window_dataset)
from beamvq.data.swe import gaussian_bumps
from beamvq.errors import CFLError, DataError, FormatError, NumericError
from beamvq.metrics import divergence_field


def small_swe(**kw) -> SWEConfig:
    base = dict(height=32, width=32, steps=100)
    base.update(kw)
    return SWEConfig(**base)


def test_flat_state_is_steady():
    cfg = small_swe(steps=20)
    out = generate_swe(cfg, h0=np.ones((32, 32)))
    np.testing.assert_array_equal(out.values, np.broadcast_to(out.values[0], out.values.shape))


def test_volume_conserved_over_100_steps():
    cfg = small_swe(steps=101)
    traj = generate_swe(cfg, seed=3)
    vol = total_volume(traj.values, cfg.dx, cfg.dy)
    assert np.max(np.abs(vol - vol[0]) / vol[0]) < 1e-6


def test_mirror_symmetric_initial_condition_stays_symmetric():
    cfg = small_swe(steps=40)
    y = np.arange(32)[:, None]
    x = np.arange(32)[None, :]
    # symmetric about the column axis x -> 31 - x
    h0 = 1.0 + 0.2 * np.exp(-((x - 15.5) ** 2 + (y - 10.0) ** 2) / 18.0)
    traj = generate_swe(cfg, h0=h0).values.astype(np.float64)
    h, u = traj[:, 2], traj[:, 0]
    np.testing.assert_allclose(h, h[:, :, ::-1], atol=1e-6)
    np.testing.assert_allclose(u, -u[:, :, ::-1], atol=1e-6)


def test_generation_is_deterministic():
    cfg = small_swe(steps=10)
    np.testing.assert_array_equal(generate_swe(cfg, seed=5).values, generate_swe(cfg, seed=5).values)
    assert not np.array_equal(gaussian_bumps(cfg, 5), gaussian_bumps(cfg, 6))


def test_cfl_violation_raises():
    with pytest.raises(CFLError) as err:
        generate_swe(small_swe(steps=2, dt=2.0), seed=0)
    assert err.value.cfl > err.value.limit


def test_non_positive_height_rejected():
    with pytest.raises(NumericError):
        generate_swe(small_swe(steps=2), h0=np.zeros((32, 32)))


def test_psi_sin_sin_gives_analytic_velocity():
    f = synth_divfree(32, 32, lambda X, Y: np.sin(X) * np.sin(Y), method="spectral")
    X = np.arange(32) * 2 * np.pi / 32
    XX, YY = np.meshgrid(X, X)
    np.testing.assert_allclose(f.values[0, 0], np.sin(XX) * np.cos(YY), atol=1e-12)
    np.testing.assert_allclose(f.values[0, 1], -np.cos(XX) * np.sin(YY), atol=1e-12)


def test_constant_psi_gives_zero_velocity():
    f = synth_divfree(16, 16, np.full((16, 16), 3.0))
    assert np.abs(f.values).max() == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_random_streamfunction_divergence_free(seed):
    f = synth_divfree(48, 40, seed=seed, frames=3)
    assert np.abs(divergence_field(f)).max() < 1e-10


def test_divfree_rejects_clamped():
    with pytest.raises(DataError):
        synth_divfree(16, 16, boundary="clamped")


def const_field(t: int, value: float = 1.0) -> FieldTensor:
    return FieldTensor(np.full((t, 3, 8, 8), value, dtype=np.float32))


def test_window_counts():
    assert len(window_dataset(const_field(60), 5, 50, stride=5)) == 2
    assert len(window_dataset(const_field(60), 5, 50, stride=60)) == 1
    with pytest.raises(DataError):
        window_dataset(const_field(10), 5, 50)


def test_constant_field_windows_identical():
    ds = window_dataset(const_field(20, 2.5), 3, 4, stride=2)
    first = ds.samples[0]
    for s in ds.samples:
        np.testing.assert_array_equal(s.inputs, first.inputs)
        np.testing.assert_array_equal(s.target, first.target)


def test_windows_are_chronological_slices():
    vals = np.arange(12 * 3 * 4 * 4, dtype=np.float32).reshape(12, 3, 4, 4)
    ds = window_dataset(FieldTensor(vals), 2, 3, stride=2)
    np.testing.assert_array_equal(ds.samples[1].inputs, vals[2:4])
    np.testing.assert_array_equal(ds.samples[1].target, vals[4:7])


def test_time_split_blocks_do_not_overlap():
    vals = np.arange(100, dtype=np.float32)[:, None, None, None] * np.ones((1, 3, 4, 4), dtype=np.float32)
    parts = split_by_time(FieldTensor(vals))
    assert [p.T for p in parts] == [70, 15, 15]
    assert parts[1].values[0, 0, 0, 0] == 70.0


def random_dataset(n: int = 6, seed: int = 0, scale: float = 3.0) -> Dataset:
    rng = np.random.default_rng(seed)
    samples = [SampleWindow((scale * rng.normal(size=(2, 3, 5, 5)) + 7).astype(np.float32),
                            (scale * rng.normal(size=(3, 3, 5, 5)) + 7).astype(np.float32), Provenance.ORIGINAL, i)
               for i in range(n)]
    return Dataset(samples, 0.5, 0.25, Boundary.CLAMPED)


def test_normalize_round_trip_and_zero_mean():
    ds = random_dataset()
    norm = normalize(ds)
    for a, b in zip(ds.samples, norm.samples):
        # float32 storage: relative to the data scale
        np.testing.assert_allclose(denormalize(b.inputs, norm.stats), a.inputs, rtol=0,
                                   atol=1e-6 * np.abs(a.inputs).max())
    frames = np.concatenate([np.concatenate([s.inputs, s.target]) for s in norm.samples]).astype(np.float64)
    assert np.abs(frames.mean(axis=(0, 2, 3))).max() < 1e-5


def test_constant_channel_normalizes_to_zero():
    ds = random_dataset()
    for s in ds.samples:
        s.inputs[:, 2] = 4.0
        s.target[:, 2] = 4.0
    stats = compute_stats(ds)
    assert stats.std[2] == 1.0
    assert np.all(normalize(ds).samples[0].inputs[:, 2] == 0.0)


def test_stats_ignore_pseudo_samples():
    ds = random_dataset()
    base = compute_stats(ds)
    pseudo = SampleWindow(np.full((2, 3, 5, 5), 1e3, np.float32), np.full((3, 3, 5, 5), 1e3, np.float32),
                          Provenance.PSEUDO, 99)
    mixed = Dataset(ds.samples + [pseudo], ds.dx, ds.dy, ds.boundary)
    np.testing.assert_array_equal(compute_stats(mixed).mean, base.mean)


def test_bvqd_round_trip_bitwise(tmp_path):
    ds = random_dataset()
    ds.samples[2].provenance = Provenance.PSEUDO
    save_dataset(tmp_path / "a.bvqd", ds)
    back = load_dataset(tmp_path / "a.bvqd")
    assert (back.dx, back.dy, back.boundary) == (0.5, 0.25, Boundary.CLAMPED)
    for a, b in zip(ds.samples, back.samples):
        assert a.provenance == b.provenance
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.target, b.target)
    save_dataset(tmp_path / "b.bvqd", back)
    assert (tmp_path / "a.bvqd").read_bytes() == (tmp_path / "b.bvqd").read_bytes()


@pytest.mark.parametrize("mutate", ["truncate", "magic", "version", "provenance", "pad"])
def test_bvqd_corruption_detected(tmp_path, mutate):
    path = tmp_path / "a.bvqd"
    save_dataset(path, random_dataset(n=2))
    buf = bytearray(path.read_bytes())
    if mutate == "truncate":
        buf = buf[:-7]
    elif mutate == "magic":
        buf[0:4] = b"NOPE"
    elif mutate == "version":
        buf[4] = 7
    elif mutate == "provenance":
        buf[41] = 9  # first sample's flag follows the 41-byte header
    else:
        buf += b"\1\2"
    path.write_bytes(bytes(buf))
    with pytest.raises(FormatError):
        load_dataset(path)


def test_empty_dataset_cannot_be_saved(tmp_path):
    with pytest.raises(DataError):
        Dataset([])
    with pytest.raises(DataError):
        save_dataset(tmp_path / "x.bvqd", None)


def test_field_validation():
    with pytest.raises(DataError):
        FieldTensor(np.zeros((2, 3, 4)))
    with pytest.raises(DataError):
        FieldTensor(np.zeros((1, 2, 4, 4)), dx=0.0)
    with pytest.raises(DataError):
        FieldTensor(np.full((1, 2, 4, 4), np.nan))
