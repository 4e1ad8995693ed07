import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcformer.data import (
    ForecastDataset,
    Series,
    autocorrelation,
    inject_noise,
    load_csv,
    noise_mask,
    sliding_windows,
    split_712,
    synth_generate,
    write_csv,
)
from gcformer.errors import (
    DatasetNotFoundError,
    InvalidArgumentError,
    MalformedRowError,
    NonMonotoneTimestampError,
    NonNumericCellError,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_load_three_rows_seven_channels(tmp_path):
    head = "date," + ",".join(f"c{i}" for i in range(7))
    rows = [f"2016-07-01 0{h}:00:00," + ",".join(str(h * 10 + i) for i in range(7)) for h in range(3)]
    s = load_csv(write(tmp_path, "\n".join([head, *rows]) + "\n"))
    assert s.shape == (3, 7)
    assert s.names == tuple(f"c{i}" for i in range(7))
    assert s.values[2, 6] == 26.0


def test_load_errors_are_distinct(tmp_path):
    with pytest.raises(DatasetNotFoundError):
        load_csv(str(tmp_path / "missing.csv"))
    with pytest.raises(MalformedRowError):
        load_csv(write(tmp_path, ""))
    with pytest.raises(MalformedRowError):
        load_csv(write(tmp_path, "date,a,b\n0,1,2\n1,3\n"))
    with pytest.raises(NonNumericCellError):
        load_csv(write(tmp_path, "date,a\n0,1\n1,x\n"))
    with pytest.raises(NonMonotoneTimestampError):
        load_csv(write(tmp_path, "date,a\n0,1\n2,2\n1,3\n"))


def test_round_trip(tmp_path, rng):
    s = Series.from_array(rng.standard_normal((50, 3)) * 1e3, names=("x", "y", "z"))
    path = str(tmp_path / "rt.csv")
    write_csv(s, path)
    back = load_csv(path)
    assert back.timestamps == s.timestamps and back.names == s.names
    assert np.max(np.abs(back.values - s.values)) <= 1e-12


def test_iso_timestamps_round_trip(tmp_path):
    path = write(tmp_path, "date,a\n2020-01-01 00:00:00,1.5\n2020-01-01 01:00:00,2.5\n")
    s = load_csv(path)
    out = str(tmp_path / "o.csv")
    write_csv(s, out)
    assert open(out).read() == open(path).read()


@pytest.mark.parametrize("T,sizes", [(100, (70, 10, 20)), (10, (7, 1, 2)), (1234, (863, 123, 248))])
def test_split_sizes(T, sizes):
    s = Series.from_array(np.arange(T, dtype=float))
    parts = split_712(s)
    assert tuple(len(p) for p in parts) == sizes
    np.testing.assert_array_equal(np.concatenate([p.values for p in parts]), s.values)


def test_split_too_short():
    with pytest.raises(InvalidArgumentError):
        split_712(Series.from_array(np.zeros(9)))


def test_no_leakage():
    s = Series.from_array(np.arange(500.0))
    tr, va, te = split_712(s)
    assert max(tr.timestamps) < min(va.timestamps) <= max(va.timestamps) < min(te.timestamps)


def test_window_counts():
    assert len(sliding_windows(np.arange(10.0), 4, 2)) == 5
    assert len(sliding_windows(np.arange(6.0), 4, 2)) == 1
    with pytest.raises(InvalidArgumentError):
        sliding_windows(np.arange(5.0), 4, 2)


@given(st.integers(2, 60), st.integers(1, 8), st.integers(1, 8), st.integers(1, 5))
def test_windows_index_oracle(T, N, H, stride):
    if T < N + H:
        return
    x = np.arange(T * 2, dtype=float).reshape(T, 2)
    w = sliding_windows(x, N, H, stride)
    assert len(w) == (T - N - H) // stride + 1
    for i, off in enumerate(w.offsets):
        np.testing.assert_array_equal(w.inputs[i], x[off:off + N])
        np.testing.assert_array_equal(w.targets[i], x[off + N:off + N + H])


def test_window_shift_consistency():
    x = np.random.default_rng(0).standard_normal((40, 1))
    w = sliding_windows(x, 5, 3)
    for i in range(10):
        np.testing.assert_array_equal(w.inputs[i], sliding_windows(x[i:], 5, 3).inputs[0])


def test_generators():
    z = synth_generate("sin_mix", 100, 2, periods=(24, 7), amplitudes=(0, 0))
    assert np.all(z.values == 0)
    c = synth_generate("random_walk", 50, 3, sigma=0.0, start=2.0)
    assert np.all(c.values == 2.0)
    s = synth_generate("sin_mix", 2000, 1, seed=3, periods=(24,))
    assert autocorrelation(s.values[:, 0], 24) > 0.95
    a = synth_generate("trend_seasonal_noise", 300, 2, seed=5)
    b = synth_generate("trend_seasonal_noise", 300, 2, seed=5)
    np.testing.assert_array_equal(a.values, b.values)
    with pytest.raises(InvalidArgumentError):
        synth_generate("chaos", 10, 1)


def test_inject_noise_identities():
    s = synth_generate("sin_mix", 400, 2, seed=1)
    ds = ForecastDataset.from_series(s, 24, 8)
    assert np.array_equal(inject_noise(ds, 0.0, 1.0).train.values, ds.train.values)
    assert np.array_equal(inject_noise(ds, 1.0, 0.0).train.values, ds.train.values)
    noisy = inject_noise(ds, 0.5, 1.0, seed=2)
    assert not np.array_equal(noisy.train.values, ds.train.values)
    assert noisy.val is ds.val and noisy.test is ds.test


def test_noise_count_exact():
    mask = noise_mask((2500, 4), 0.1, seed=0)
    assert mask.sum() == 1000
    s = Series.from_array(np.random.default_rng(0).standard_normal((2500, 4)))
    changed = inject_noise(s, 0.1, 1.0, seed=0).values != s.values
    assert changed.sum() == 1000


def test_noise_fraction_bounds():
    with pytest.raises(InvalidArgumentError):
        noise_mask((10,), 1.5, 0)


def test_series_validation():
    with pytest.raises(NonMonotoneTimestampError):
        Series((0, 0), np.zeros((2, 1)))
    with pytest.raises(InvalidArgumentError):
        Series((0, 1, 2), np.zeros((2, 1)))
