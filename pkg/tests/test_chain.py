"""Kernel validation, stepping statistics, determinism, hitting times."""

import numpy as np
import pytest
from scipy.optimize import brentq

from windwalk.chain import (
    KernelError,
    asymmetric_kernel,
    kernel_to_json,
    one_parameter_kernel,
    run_length_paths,
    sample_hitting_time,
    sample_hitting_times,
    simulate,
    step,
    symmetric_kernel,
    validate_kernel,
)
from windwalk.groupoid import Arc, Word, fenced_metric, metric_length, unit, word_metric


def test_symmetric_kernel_valid():
    k = symmetric_kernel(5)
    assert k.prob(1, 2, 1) == pytest.approx(1 / 8)
    assert sum(k.prob(3, j, s) for j in range(1, 6) if j != 3 for s in (1, -1)) == pytest.approx(1.0)


def test_one_parameter_bounds():
    one_parameter_kernel(0.25)
    with pytest.raises(KernelError):
        one_parameter_kernel(0.5)
    with pytest.raises(KernelError):
        one_parameter_kernel(0.0)


def test_asymmetric_rows_sum_to_one():
    k = asymmetric_kernel()
    for i in (1, 2, 3):
        row = sum(k.prob(i, j, s) for j in (1, 2, 3) if j != i for s in (1, -1))
        assert row == pytest.approx(1.0, abs=1e-15)


def test_validation_collects_all_violations():
    p = {(i, j, k): 1 / 8 for i in range(1, 4) for j in range(1, 4) if i != j for k in (1, -1)}
    p[(1, 2, 1)] = 0.99  # breaks both the range-by-row-sum and nothing else
    del p[(2, 3, -1)]
    with pytest.raises(KernelError) as err:
        validate_kernel({"N": 3, "p": [
            {"i": i, "j": j, "k": k, "value": v} for (i, j, k), v in p.items()
        ]})
    text = "; ".join(err.value.violations)
    assert "missing" in text and "sums to" in text


def test_probability_one_rejected():
    p = {(i, j, k): 1e-12 for i in range(1, 4) for j in range(1, 4) if i != j for k in (1, -1)}
    p[(1, 2, 1)] = 1.0
    with pytest.raises(KernelError) as err:
        validate_kernel({"N": 3, "p": [
            {"i": i, "j": j, "k": k, "value": v} for (i, j, k), v in p.items()
        ]})
    assert any("outside (0, 1)" in v for v in err.value.violations)


def test_n_windows_minimum():
    with pytest.raises(KernelError):
        symmetric_kernel(2)


def test_kernel_json_roundtrip():
    k = asymmetric_kernel()
    k2 = validate_kernel(kernel_to_json(k))
    assert k2.p == k.p


def test_step_frequencies_uniform():
    k = symmetric_kernel(3)
    rng = np.random.default_rng(42)
    counts = {}
    n = 4000
    for _ in range(n):
        w = step(unit(1), k, rng)
        counts[w.letters[0]] = counts.get(w.letters[0], 0) + 1
    p = 1 / 4
    se = np.sqrt(p * (1 - p) / n)
    for arc, c in counts.items():
        assert abs(c / n - p) < 3 * se, arc


def test_simulate_streaming_matches_recorded_words():
    k = asymmetric_kernel()
    fm = fenced_metric(3)
    traj = simulate(unit(2), k, 300, seed=9, metric=fm, record_words=True)
    for n, w in enumerate(traj.states):
        assert traj.word_lens[n] == len(w)
        assert traj.metric_lens[n] == pytest.approx(metric_length(w, fm))
    assert traj.states[-1] == traj.final


def test_simulate_deterministic():
    k = symmetric_kernel(4)
    a = simulate(unit(1), k, 500, seed=77)
    b = simulate(unit(1), k, 500, seed=77)
    c = simulate(unit(1), k, 500, seed=78)
    assert np.array_equal(a.word_lens, b.word_lens)
    assert not np.array_equal(a.word_lens, c.word_lens)


def test_simulate_from_nontrivial_word():
    k = symmetric_kernel(3)
    start = Word(1, (Arc(1, 2, 1), Arc(2, 3, -1)))
    traj = simulate(start, k, 50, seed=1)
    assert traj.word_lens[0] == 2
    assert traj.final.source == 1


def test_run_length_paths_deterministic_and_per_path_seeded():
    k = symmetric_kernel(3)
    wm = word_metric(3)
    w1, m1 = run_length_paths(k, wm, 200, 40, seed=5)
    w2, m2 = run_length_paths(k, wm, 200, 40, seed=5)
    assert np.array_equal(w1, w2) and np.array_equal(m1, m2)
    # the first paths depend only on (seed, path index), not on n_paths
    w3, _ = run_length_paths(k, wm, 200, 10, seed=5)
    assert np.array_equal(w1[:10], w3)


def test_batch_matches_scalar_simulation():
    # the vectorised stepper and the scalar one consume the same per-path
    # child streams, so their length traces must coincide
    k = asymmetric_kernel()
    wm = word_metric(3)
    n_steps, n_paths = 150, 8
    wl, ml = run_length_paths(k, wm, n_steps, n_paths, seed=21)
    children = np.random.SeedSequence(21).spawn(n_paths)
    for p in range(n_paths):
        traj = simulate(unit(1), k, n_steps, seed=children[p])
        assert wl[p] == traj.word_lens[-1]
        assert ml[p] == pytest.approx(traj.metric_lens[-1])


def test_hitting_time_expectation_matches_generating_function():
    # E[lam^T] (censored contributions vanish) equals the solved R at lam
    k = symmetric_kernel(3)
    lam = 0.9
    root = brentq(lambda r: r - (lam / 4) * (1 + r + 2 * r * r), 0.0, 0.999)
    times = sample_hitting_times(Arc(1, 2, 1), k, cap=300, seed=123, n_samples=6000)
    vals = np.where(times > 0, lam ** np.where(times > 0, times, 1), 0.0)
    est = vals.mean()
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(est - root) < 4 * se


def test_hitting_time_censoring():
    k = symmetric_kernel(3)
    s = sample_hitting_time(Arc(1, 2, 1), k, cap=1, seed=3)
    assert s.censored or s.time == 1
    many = sample_hitting_times(Arc(1, 2, 1), k, cap=2000, seed=8, n_samples=500)
    # transient chain: a positive fraction of paths never hits
    assert (many == -1).any()
    assert (many[many > 0] >= 1).all()
