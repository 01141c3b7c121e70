import numpy as np
import pytest

from latnkm.data import Dataset, Standardizer, gen_cubic, kfold_indices, load_csv, split
from latnkm.errors import FormatError, InvalidData


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_row_file(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n"), "y")
    assert (ds.N, ds.D) == (3, 2)
    np.testing.assert_array_equal(ds.y, [3, 6, 9])
    assert ds.columns == ["a", "b"]


def test_target_in_the_middle(tmp_path):
    ds = load_csv(write(tmp_path, "a,y,b\n1,2,3\n4,5,7\n"), "y")
    np.testing.assert_array_equal(ds.X, [[1, 3], [4, 7]])


def test_missing_target(tmp_path):
    with pytest.raises(FormatError):
        load_csv(write(tmp_path, "a,b\n1,2\n3,4\n"), "y")


def test_nan_cell_location(tmp_path):
    with pytest.raises(FormatError) as info:
        load_csv(write(tmp_path, "a,b,y\n1,2,3\n4,NaN,6\n"))
    assert info.value.row == 3 and info.value.column == "b"


def test_ragged_row(tmp_path):
    with pytest.raises(FormatError) as info:
        load_csv(write(tmp_path, "a,y\n1,2\n3\n"))
    assert info.value.row == 3


def test_constant_column(tmp_path):
    p = write(tmp_path, "a,c,y\n1,5,3\n2,5,6\n3,5,1\n")
    with pytest.raises(InvalidData):
        load_csv(p)
    assert load_csv(p, drop_constant=True).columns == ["a"]


def test_split_sizes_and_determinism(rng):
    ds = Dataset(rng.standard_normal((10, 2)), rng.standard_normal(10))
    tr, te = split(ds, 0.9, seed=3)
    assert (tr.N, te.N) == (9, 1)
    tr2, te2 = split(ds, 0.9, seed=3)
    np.testing.assert_array_equal(tr.X, tr2.X)
    np.testing.assert_array_equal(te.y, te2.y)


def test_train_standardisation(rng):
    ds = Dataset(rng.normal(5, 3, (40, 3)), rng.normal(-2, 4, 40))
    tr, te = split(ds, 0.75, seed=0)
    np.testing.assert_allclose(tr.X.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(tr.X.std(axis=0), 1, atol=1e-10)
    assert abs(tr.y.mean()) < 1e-10
    assert np.abs(te.X.mean(axis=0)).max() > 1e-6
    st = tr.standardizer
    np.testing.assert_allclose(st.inverse_y(st.transform_y(ds.y)), ds.y, atol=1e-12)
    assert Standardizer.from_dict(st.to_dict()).to_dict() == st.to_dict()


def test_kfold(rng):
    folds = kfold_indices(11, 5, 0)
    val = np.concatenate([v for _, v in folds])
    assert sorted(val.tolist()) == list(range(11))
    for tr, va in folds:
        assert not set(tr) & set(va)
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, kfold_indices(11, 5, 0)))
    with pytest.raises(InvalidData):
        kfold_indices(3, 5, 0)


def test_cubic():
    train, test = gen_cubic(1)
    assert (train.N, test.N, train.D) == (20, 100, 1)
    assert np.all(np.abs(train.X) <= 4) and np.all(np.abs(test.X) <= 5)
    clean, _ = gen_cubic(1, noise=False)
    np.testing.assert_array_equal(clean.y, clean.X[:, 0] ** 3)
    np.testing.assert_array_equal(clean.X, train.X)


def test_distinct_seeds_differ(rng):
    ds = Dataset(rng.standard_normal((25, 2)), rng.standard_normal(25))
    a, _ = split(ds, 0.8, seed=0, standardize=False)
    b, _ = split(ds, 0.8, seed=1, standardize=False)
    assert not np.array_equal(a.y, b.y)
