"""Backend parity and oracle checks for the grid/point kernels."""

import numpy as np
import pytest

from conftest import flood_labels
from bevlang import kernels
from bevlang.kernels import normalize_labels, numpy_impl

numba_impl = pytest.importorskip("bevlang.kernels.numba_impl")


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("connectivity", [4, 8])
def test_label_components_matches_flood_fill(seed, connectivity):
    rng = np.random.default_rng(seed)
    mask = rng.random((40, 47)) < 0.42
    expected = flood_labels(mask, connectivity)
    got = kernels.label_components(mask, connectivity)
    assert np.array_equal(got, expected)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("connectivity", [4, 8])
def test_label_backends_agree(seed, connectivity):
    rng = np.random.default_rng(100 + seed)
    mask = rng.random((60, 33)) < rng.uniform(0.2, 0.8)
    a = normalize_labels(numpy_impl.label_components(mask, connectivity))
    b = normalize_labels(numba_impl.label_components(mask, connectivity))
    assert np.array_equal(a, b)


def test_label_edge_masks():
    empty = np.zeros((5, 5), dtype=bool)
    assert kernels.label_components(empty).max() == 0
    full = np.ones((5, 5), dtype=bool)
    labels = kernels.label_components(full)
    assert labels.min() == 1 and labels.max() == 1
    diagonal = np.eye(6, dtype=bool)
    assert kernels.label_components(diagonal, connectivity=8).max() == 1
    assert kernels.label_components(diagonal, connectivity=4).max() == 6


def test_label_rejects_bad_connectivity():
    with pytest.raises(ValueError):
        kernels.label_components(np.ones((2, 2), dtype=bool), connectivity=6)


def brute_k_nearest(xs, ys, tx, ty, k):
    d2 = [(float((x - tx) ** 2 + (y - ty) ** 2), i) for i, (x, y) in enumerate(zip(xs, ys))]
    d2.sort()
    return np.array([i for _, i in d2[: min(k, len(d2))]], dtype=np.int64)


@pytest.mark.parametrize("seed", range(6))
def test_k_nearest_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 300))
    xs = rng.normal(scale=20, size=n)
    ys = rng.normal(scale=20, size=n)
    # duplicated points force index tie-breaks
    if n > 4:
        xs[3], ys[3] = xs[1], ys[1]
    tx, ty = rng.normal(scale=10, size=2)
    k = int(rng.integers(1, n + 5))
    expected = brute_k_nearest(xs, ys, tx, ty, k)
    assert np.array_equal(kernels.k_nearest_planar(xs, ys, tx, ty, k), expected)
    assert np.array_equal(numpy_impl.k_nearest_planar(xs, ys, tx, ty, k), expected)
    assert np.array_equal(numba_impl.k_nearest_planar(xs, ys, tx, ty, k), expected)


def test_k_nearest_clamps_to_population():
    xs = np.array([0.0, 1.0, 2.0])
    ys = np.zeros(3)
    idx = kernels.k_nearest_planar(xs, ys, 0.0, 0.0, 10)
    assert np.array_equal(idx, [0, 1, 2])


@pytest.mark.parametrize("seed", range(5))
def test_projection_backends_agree_bitwise(seed):
    rng = np.random.default_rng(200 + seed)
    points = rng.normal(scale=30, size=(500, 3))
    rot = random_rotation(rng)
    trans = rng.normal(scale=2, size=3)
    a = numpy_impl.project_points(points, rot, trans, 500.0, 510.0, 400.0, 225.0, 1e-3)
    b = numba_impl.project_points(points, rot, trans, 500.0, 510.0, 400.0, 225.0, 1e-3)
    for left, right in zip(a, b):
        assert np.array_equal(left, right)


def test_projection_visibility_and_pinhole_formula():
    rot = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    trans = -rot @ np.array([0.0, 0.0, 1.6])
    points = np.array([[10.0, 0.0, 1.6], [-5.0, 0.0, 1.6], [10.0, 2.0, 0.0]])
    uv, depth, visible = kernels.project_points(points, rot, trans, 500.0, 500.0, 400.0, 225.0, 1e-3)
    assert visible.tolist() == [True, False, True]
    assert depth[0] == pytest.approx(10.0)
    # point on the optical axis lands on the principal point
    assert uv[0].tolist() == pytest.approx([400.0, 225.0])
    # 2 m left at 10 m depth: u = 400 + 500 * (-2/10)
    assert uv[2, 0] == pytest.approx(400.0 - 100.0)
    # invisible points report zeroed uv
    assert uv[1].tolist() == [0.0, 0.0]
