import numpy as np
import pytest

from fedbench.data import (CSVParseError, DataValidationError, Dataset, ScalerParams, SplitSpec,
                           kfold, kfold_indices, load_csv, split, split_indices, standardize,
                           synthesize_blobs)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_first_appearance(tmp_path):
    p = write(tmp_path, "f1,f2,y\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n")
    ds, mapping = load_csv(p, "y")
    assert ds.n_classes == 2
    assert ds.labels.tolist() == [0, 1, 0, 1]
    assert mapping == {"a": 0, "b": 1}
    assert ds.features.shape == (4, 2)


def test_load_csv_header_only(tmp_path):
    with pytest.raises(DataValidationError, match="no samples"):
        load_csv(write(tmp_path, "f1,y\n"), "y")


def test_load_csv_three_classes_by_index(tmp_path):
    ds, _ = load_csv(write(tmp_path, "0.5,x\n1.5,y\n2.5,z\n3.5,x\n"), 1, has_header=False)
    assert ds.n_classes == 3 and ds.n_features == 1


def test_load_csv_ragged(tmp_path):
    with pytest.raises(CSVParseError, match=":3:"):
        load_csv(write(tmp_path, "a,b,y\n1,2,p\n1,p\n"), "y")


def test_load_csv_non_numeric(tmp_path):
    with pytest.raises(CSVParseError, match="line 3, column 2"):
        load_csv(write(tmp_path, "a,b,y\n1,2,p\n1,zz,q\n"), "y")


def test_load_csv_single_class(tmp_path):
    with pytest.raises(DataValidationError):
        load_csv(write(tmp_path, "a,y\n1,p\n2,p\n"), "y")


def test_blob_counts_remainder():
    ds = synthesize_blobs(10, 4, 3, 1.0, 0)
    assert ds.class_counts().tolist() == [4, 3, 3]


def test_blob_means():
    ds = synthesize_blobs(3000, 4, 2, 5.0, 1)
    m0 = ds.features[ds.labels == 0].mean(axis=0)
    m1 = ds.features[ds.labels == 1].mean(axis=0)
    assert m0[0] == pytest.approx(5.0, abs=0.15) and m1[1] == pytest.approx(5.0, abs=0.15)
    assert abs(m0[1]) < 0.15 and abs(m1[0]) < 0.15


def test_blob_zero_features():
    with pytest.raises(ValueError):
        synthesize_blobs(10, 0, 2, 1.0, 0)


def test_standardize_train_means_zero():
    ds = synthesize_blobs(200, 5, 2, 3.0, 2)
    tr, (same,), _ = standardize(ds, [ds])
    assert np.all(np.abs(tr.features.mean(axis=0)) <= 1e-12)
    assert np.array_equal(tr.features, same.features)


def test_standardize_constant_column():
    x = np.column_stack([np.full(6, 3.0), np.arange(6.0)])
    ds = Dataset(x, [0, 1, 0, 1, 0, 1], 2)
    tr, _, _ = standardize(ds)
    assert np.all(tr.features[:, 0] == 0.0)


def test_standardize_applies_train_stats_to_test():
    tr = synthesize_blobs(400, 3, 2, 1.0, 3)
    te = synthesize_blobs(400, 3, 2, 1.0, 4)
    te = Dataset(te.features + 2.0, te.labels, 2)
    _, (te_s,), _ = standardize(tr, [te])
    assert np.all(np.abs(te_s.features.mean(axis=0)) > 0.5)


def test_standardize_idempotent():
    ds = synthesize_blobs(300, 4, 2, 2.0, 5)
    once, _, _ = standardize(ds)
    twice, _, _ = standardize(once)
    assert np.allclose(once.features, twice.features, atol=1e-9)


def test_scaler_text_roundtrip(tmp_path):
    x = np.column_stack([np.full(4, 1.0), [1.0, 2.0, 3.0, 4.0]])
    _, _, sc = standardize(Dataset(x, [0, 1, 0, 1], 2))
    sc.save(tmp_path / "scaler.txt")
    back = ScalerParams.load(tmp_path / "scaler.txt")
    assert np.array_equal(back.mean, sc.mean) and np.array_equal(back.scale, sc.scale)


def test_split_80_20_ratio():
    ds = Dataset(np.zeros((100, 1)), [0] * 50 + [1] * 50, 2)
    tr, te = split(ds, SplitSpec(0.8, True, 0))
    assert tr.class_counts().tolist() == [40, 40]
    assert te.class_counts().tolist() == [10, 10]


def test_split_single_class_arithmetic():
    ds = Dataset(np.zeros((12, 1)), [0] * 10 + [1] * 2, 2)
    tr, te = split(ds, SplitSpec(0.8, True, 0))
    assert tr.class_counts()[0] == 8 and te.class_counts()[0] == 2


def test_split_deterministic_and_partitioning():
    ds = synthesize_blobs(101, 2, 3, 1.0, 0)
    a = split_indices(ds, SplitSpec(0.8, True, 9))
    b = split_indices(ds, SplitSpec(0.8, True, 9))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert sorted(np.concatenate(a).tolist()) == list(range(101))


def test_split_rejects_singleton_class():
    ds = Dataset(np.zeros((4, 1)), [0, 0, 0, 1], 2)
    with pytest.raises(DataValidationError, match="class 1"):
        split(ds, SplitSpec(0.8, True, 0))


def test_kfold_equal_division():
    ds = Dataset(np.zeros((10, 1)), [0, 1] * 5, 2)
    folds = kfold(ds, 5, 0)
    assert [va.n_samples for _, va in folds] == [2] * 5


def test_kfold_covers_once():
    ds = synthesize_blobs(37, 2, 3, 1.0, 0)
    folds = kfold_indices(ds, 5, 1)
    val = np.concatenate([va for _, va in folds])
    assert sorted(val.tolist()) == list(range(37))
    for tr, va in folds:
        assert not set(tr) & set(va)
        assert tr.size + va.size == 37


def test_kfold_remainder_first():
    ds = Dataset(np.zeros((12, 1)), [0, 1] * 6, 2)
    sizes = [va.size for _, va in kfold_indices(ds, 5, 0)]
    assert sizes == [3, 3, 2, 2, 2]


def test_kfold_too_many_folds():
    with pytest.raises(ValueError):
        kfold(Dataset(np.zeros((3, 1)), [0, 1, 0], 2), 4, 0)
