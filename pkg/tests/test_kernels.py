import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import available_backends
from provnet import kernels

needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="compiled kernels not built")


def csr(rows):
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.array([x for r in rows for x in sorted(r)], dtype=np.int64)
    return indptr, indices


def random_rows(seed, n_rows=200, n_nodes=50):
    rng = np.random.default_rng(seed)
    return [sorted(rng.choice(n_nodes, size=rng.integers(0, 9), replace=False).tolist()) for _ in range(n_rows)]


@pytest.mark.parametrize("backend", available_backends())
def test_pair_keys_matches_combinations(backend):
    rows = random_rows(0)
    indptr, indices = csr(rows)
    got = kernels.pair_keys(indptr, indices, 50, 0, len(rows), backend=backend)
    want = [a * 50 + b for r in rows for a, b in itertools.combinations(r, 2)]
    assert got.dtype == np.int64 and got.tolist() == want


@pytest.mark.parametrize("backend", available_backends())
def test_pair_keys_sub_range(backend):
    rows = random_rows(1)
    indptr, indices = csr(rows)
    full = kernels.pair_keys(indptr, indices, 50, 0, len(rows), backend=backend)
    parts = [kernels.pair_keys(indptr, indices, 50, s, min(s + 37, len(rows)), backend=backend) for s in range(0, len(rows), 37)]
    assert np.array_equal(np.concatenate(parts), full)
    assert kernels.pair_keys(indptr, indices, 50, 5, 5, backend=backend).size == 0


def random_edges(seed, n=60, p=0.15, integer=True):
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    mask = rng.random(iu[0].size) < p
    src, dst = iu[0][mask].astype(np.int64), iu[1][mask].astype(np.int64)
    w = rng.integers(1, 20, size=src.size).astype(np.float64) if integer else rng.random(src.size) * 10
    return n, src, dst, w


@needs_compiled
@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("integer", [True, False])
def test_greedy_merges_bitwise_parity(seed, integer):
    args = random_edges(seed, integer=integer)
    a = kernels.greedy_merges(*args, backend="python")
    b = kernels.greedy_merges(*args, backend="cython")
    for x, y in zip(a, b):
        assert x.dtype == y.dtype and np.array_equal(x, y)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_pair_keys_parity(seed):
    rows = random_rows(seed, n_rows=500, n_nodes=300)
    indptr, indices = csr(rows)
    assert np.array_equal(
        kernels.pair_keys(indptr, indices, 300, 0, len(rows), backend="python"),
        kernels.pair_keys(indptr, indices, 300, 0, len(rows), backend="cython"),
    )


@pytest.mark.parametrize("backend", available_backends())
def test_greedy_merges_small_cases(backend):
    # path a-b-c: merge (0,1) and (1,2) tie on gain, smallest pair first
    a, b, g = kernels.greedy_merges(3, np.array([0, 1]), np.array([1, 2]), np.array([1.0, 1.0]), backend=backend)
    assert a.tolist()[0] == 0 and b.tolist()[0] == 1
    assert len(a) == 2
    a, b, g = kernels.greedy_merges(4, np.array([0, 2]), np.array([1, 3]), np.array([1.0, 1.0]), backend=backend)
    assert list(zip(a.tolist(), b.tolist())) == [(0, 1), (2, 3)]
    a, b, g = kernels.greedy_merges(3, np.array([], dtype=np.int64), np.array([], dtype=np.int64), np.array([]), backend=backend)
    assert a.size == 0


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, PROVNET_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from provnet import kernels; print(kernels.BACKEND, kernels.compiled)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.split() == ["python", "None"]
