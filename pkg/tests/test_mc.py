import numpy as np
import pytest

from ergokit import _mc, semigroup, simulate
from ergokit.semigroup import builtin_function


def test_blocks_cover_total():
    b = _mc.blocks(2 * _mc.BLOCK_SIZE + 5)
    assert b == [(0, _mc.BLOCK_SIZE), (1, _mc.BLOCK_SIZE), (2, 5)]
    assert _mc.blocks(0) == []


def test_substreams_distinct_and_reproducible():
    a = _mc.substream(7, 0).random(4)
    assert np.array_equal(a, _mc.substream(7, 0).random(4))
    assert not np.array_equal(a, _mc.substream(7, 1).random(4))
    assert not np.array_equal(a, _mc.substream((7, 1), 0).random(4))


@pytest.mark.parametrize("raw, n", [("3", 3), ("0", 1), ("junk", 1)])
def test_worker_count(monkeypatch, raw, n):
    monkeypatch.setenv("ERGOKIT_THREADS", raw)
    assert _mc.worker_count() == n


def test_run_blocks_order(monkeypatch):
    monkeypatch.setenv("ERGOKIT_THREADS", "4")
    out = _mc.run_blocks(5 * _mc.BLOCK_SIZE, 3, lambda rng, size: size)
    assert out == [_mc.BLOCK_SIZE] * 5


def test_thread_count_invariance(monkeypatch, tanh1):
    results = []
    for threads in ("1", "4"):
        monkeypatch.setenv("ERGOKIT_THREADS", threads)
        r = semigroup.estimate_qt_grad(tanh1, builtin_function("x2"), [0.5], 3, 40_000, seed=11)
        s = simulate.lyapunov_exponent(tanh1, [0.5], 5, 20_000, seed=11)
        results.append((r.value, r.std_error, s))
    (v1, e1, s1), (v4, e4, s4) = results
    assert np.array_equal(v1, v4) and np.array_equal(e1, e4)
    assert s1 == s4


def test_mean_and_se():
    m, se = _mc.mean_and_se(np.array([1.0, 3.0]))
    assert m == 2.0 and se == pytest.approx(1.0)
    m, se = _mc.mean_and_se(np.array([[4.0, 1.0]]))
    assert se.tolist() == [0.0, 0.0]
