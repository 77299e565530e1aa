import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jacobi_free_eigvals
from orbqfl.dataio import (
    Dataset,
    DatasetError,
    jacobi_eigh,
    load_statlog,
    normalize,
    one_hot,
    parse_statlog,
    partition,
    pca_fit,
    pca_transform,
    prepare,
    split,
    synthetic_blobs,
)


def row(label, value=0):
    return " ".join([str(value)] * 36 + [str(label)])


def plain(n, d=2, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.uniform(size=(n, d)), rng.integers(0, 2, size=n), ("a", "b"))


def test_parse_basic_rows():
    d = parse_statlog(row(1) + "\n\n" + row(7, 255) + "\n")
    assert d.features.shape == (2, 36)
    assert np.all(d.features[0] == 0) and np.all(d.features[1] == 255)
    assert d.labels.tolist() == [0, 5]
    assert d.n_classes == 6


def test_parse_errors_name_the_line():
    with pytest.raises(DatasetError, match="line 2"):
        parse_statlog(row(1) + "\n" + "1 2 3")
    with pytest.raises(DatasetError, match="unknown label 6"):
        parse_statlog(row(6))
    with pytest.raises(DatasetError, match="line 1"):
        parse_statlog(row(1).replace("0", "x", 1))


def test_missing_file_hint(tmp_path):
    with pytest.raises(FileNotFoundError, match="synthetic"):
        load_statlog(tmp_path / "sat.trn")
    (tmp_path / "a").write_text(row(2))
    (tmp_path / "b").write_text(row(3) + "\n")
    assert load_statlog(tmp_path / "a", tmp_path / "b").labels.tolist() == [1, 2]


def test_normalize_cases():
    x = np.array([[0.0, 5.0, 1.0], [255.0, 5.0, 3.0]])
    out = normalize(Dataset(x, np.array([0, 1]), ("a", "b"))).features
    np.testing.assert_array_equal(out, [[0, 0, 0], [1, 0, 1]])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_normalize_idempotent_and_bounded(n, d, seed):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.normal(0, 100, size=(n, d)), np.zeros(n, dtype=int), ("a",))
    once = normalize(data)
    assert once.features.min() >= 0 and once.features.max() <= 1
    np.testing.assert_allclose(normalize(once).features, once.features, atol=1e-15)


def test_one_hot():
    assert one_hot([2], 6).tolist() == [[0, 0, 1, 0, 0, 0]]
    m = one_hot([0, 3, 1, 3], 4)
    np.testing.assert_array_equal(m.sum(axis=1), 1)
    np.testing.assert_array_equal(one_hot([0, 0], 1), [[1], [1]])
    with pytest.raises(DatasetError):
        one_hot([4], 4)


def test_jacobi_against_dense_oracle():
    fixture = np.array(
        [[2.0, 0.5, 1.0], [1.0, 1.5, -0.5], [0.0, 2.5, 0.5], [3.0, -1.0, 2.0], [1.5, 0.0, 1.0]]
    )
    cov = np.cov(fixture, rowvar=False)
    vals, vecs = jacobi_eigh(cov)
    np.testing.assert_allclose(np.sort(vals)[::-1], jacobi_free_eigvals(cov), atol=1e-10)
    np.testing.assert_allclose(cov @ vecs, vecs * vals, atol=1e-10)
    model = pca_fit(fixture, 3)
    np.testing.assert_allclose(model.explained_variance, jacobi_free_eigvals(cov), atol=1e-10)


def test_pca_rank_one():
    t = np.linspace(0, 1, 20)
    model = pca_fit(np.column_stack([t, 2 * t]), 2)
    assert model.explained_variance[0] > 0
    assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-12)


def test_pca_full_rank_preserves_order():
    x = np.random.default_rng(1).uniform(size=(30, 2))
    model = pca_fit(x, 2)
    z = pca_transform(model, x)
    proj = (x - model.mean) @ model.components.T
    for k in range(2):
        assert (np.argsort(z[:, k], kind="stable") == np.argsort(proj[:, k], kind="stable")).all()
    assert z.min() == 0.0 and z.max() == 1.0


def test_pca_errors():
    with pytest.raises(DatasetError):
        pca_fit(np.zeros((4, 2)), 3)
    with pytest.raises(DatasetError):
        pca_fit(np.zeros((1, 2)), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 30), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_pca_orthonormal_and_sorted(n, d, seed):
    x = np.random.default_rng(seed).normal(size=(n, d))
    q = max(1, d - 1)
    model = pca_fit(x, q)
    g = model.components
    np.testing.assert_allclose(g @ g.T, np.eye(q), atol=1e-8)
    assert np.all(np.diff(model.explained_variance) <= 1e-12)
    z = pca_transform(model, x)
    assert z.min() >= 0 and z.max() <= 1


def test_split_sizes_and_cover():
    data = plain(6435)
    train, test = split(data, 0.9, seed=4)
    assert (len(train), len(test)) == (5791, 644)
    again, _ = split(data, 0.9, seed=4)
    np.testing.assert_array_equal(train.features, again.features)
    merged = np.concatenate([train.features, test.features])
    assert sorted(map(tuple, merged)) == sorted(map(tuple, data.features))
    with pytest.raises(DatasetError):
        split(data, 1.0)


def test_partition_sizes():
    assert partition(plain(10), 5).sizes() == [2] * 5
    assert sorted(partition(plain(11), 5).sizes(), reverse=True) == [3, 2, 2, 2, 2]
    with pytest.raises(DatasetError):
        partition(plain(3), 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 60), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_partition_is_exact(n, k, seed):
    if k > n:
        return
    plan = partition(plain(n), k, seed)
    flat = sorted(i for s in plan.shards for i in s)
    assert flat == list(range(n))
    assert max(plan.sizes()) - min(plan.sizes()) <= 1
    assert plan.digest() == partition(plain(n), k, seed).digest()


def test_blobs():
    d = synthetic_blobs(50, 2, 2, separation=0.5, seed=2)
    assert len(d) == 100 and d.features.min() >= 0 and d.features.max() <= 1
    again = synthetic_blobs(50, 2, 2, separation=0.5, seed=2)
    np.testing.assert_array_equal(d.features, again.features)
    # 1-nearest-centroid classifier
    cents = np.array([d.features[d.labels == k].mean(axis=0) for k in range(2)])
    pred = np.argmin(((d.features[:, None, :] - cents[None]) ** 2).sum(-1), axis=1)
    assert (pred == d.labels).mean() == 1.0
    with pytest.raises(DatasetError):
        synthetic_blobs(5, 30, 1, separation=0.5)


def test_prepare_pipeline_is_deterministic():
    rng = np.random.default_rng(0)
    raw = Dataset(rng.integers(0, 256, size=(80, 36)).astype(float), rng.integers(0, 6, size=80), tuple("abcdef"))
    a = prepare(raw, 4, 0.9, seed=1)
    b = prepare(raw, 4, 0.9, seed=1)
    assert a[0].features.shape == (72, 4) and a[1].features.shape == (8, 4)
    np.testing.assert_array_equal(a[0].features, b[0].features)
    np.testing.assert_array_equal(a[1].features, b[1].features)
    assert a[1].features.min() >= 0 and a[1].features.max() <= 1
