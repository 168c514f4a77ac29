"""The Markov chain on the arrow set: kernel validation, stepping, trajectory
generation and hitting-time sampling.

Randomness comes from numpy's PCG64 generator.  Every multi-path routine
derives one child seed per path from the master seed through
``numpy.random.SeedSequence(master).spawn``, so runs are reproducible from
``(seed, path index)`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .groupoid import Arc, Metric, Word, append, unit, word_metric

ROW_SUM_TOL = 1e-12
DEFAULT_HITTING_CAP = 10**6


class KernelError(ValueError):
    """Invalid transition kernel; ``violations`` lists every broken constraint."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TransitionKernel:
    """Validated jump probabilities p[(i, j, k)] for all ordered window pairs.

    The kernel is immutable after construction and safe to share across
    threads.  Per-source cumulative tables for generator sampling are built
    once here.
    """

    def __init__(self, n_windows: int, p: Dict[Tuple[int, int, int], float], name: str = "custom"):
        violations = _check(n_windows, p)
        if violations:
            raise KernelError(violations)
        self.n_windows = n_windows
        self.p = dict(p)
        self.name = name
        n = n_windows
        # Arc enumeration per source window, fixed order: k=+1 then k=-1, j ascending.
        self._arc_j = np.zeros((n + 1, 2 * (n - 1)), dtype=np.int64)
        self._arc_k = np.zeros((n + 1, 2 * (n - 1)), dtype=np.int64)
        self._cum = np.zeros((n + 1, 2 * (n - 1)), dtype=np.float64)
        for i in range(1, n + 1):
            arcs = [(j, k) for k in (1, -1) for j in range(1, n + 1) if j != i]
            probs = np.array([p[(i, j, k)] for j, k in arcs])
            self._arc_j[i] = [j for j, _ in arcs]
            self._arc_k[i] = [k for _, k in arcs]
            self._cum[i] = np.cumsum(probs)
            self._cum[i, -1] = 1.0  # guard against round-off at the top

    def prob(self, i: int, j: int, k: int) -> float:
        return self.p[(i, j, k)]

    def arcs_from(self, i: int) -> List[Tuple[Arc, float]]:
        return [
            (Arc(i, int(j), int(k)), float(self.p[(i, int(j), int(k))]))
            for j, k in zip(self._arc_j[i], self._arc_k[i])
        ]

    def __repr__(self) -> str:
        return f"TransitionKernel(N={self.n_windows}, name={self.name!r})"


def _check(n_windows: int, p: Dict[Tuple[int, int, int], float]) -> List[str]:
    violations = []
    if n_windows < 3:
        violations.append(f"N must be at least 3, got {n_windows}")
        return violations
    for i in range(1, n_windows + 1):
        row = 0.0
        for j in range(1, n_windows + 1):
            if i == j:
                continue
            for k in (1, -1):
                if (i, j, k) not in p:
                    violations.append(f"missing probability for arc ({i},{j},{k:+d})")
                    continue
                value = p[(i, j, k)]
                if not (0.0 < value < 1.0):
                    violations.append(
                        f"probability {value} for arc ({i},{j},{k:+d}) outside (0, 1)"
                    )
                row += value
        if abs(row - 1.0) > ROW_SUM_TOL:
            violations.append(f"row for window {i} sums to {row!r} (deficit {1.0 - row:+.3e})")
    extra = [key for key in p if key[0] == key[1]]
    if extra:
        violations.append(f"entries for degenerate arcs not allowed: {sorted(extra)}")
    return violations


def symmetric_kernel(n_windows: int) -> TransitionKernel:
    """The totally symmetric family: every arc has probability 1/(2N-2)."""
    value = 1.0 / (2 * n_windows - 2)
    p = {
        (i, j, k): value
        for i in range(1, n_windows + 1)
        for j in range(1, n_windows + 1)
        if i != j
        for k in (1, -1)
    }
    return TransitionKernel(n_windows, p, name=f"symmetric(N={n_windows})")


def one_parameter_kernel(q: float) -> TransitionKernel:
    """The N=3 one-parameter family with mirror symmetry, 0 < q < 1/2."""
    if not (0.0 < q < 0.5):
        raise KernelError([f"one-parameter q must lie in (0, 1/2), got {q}"])
    p: Dict[Tuple[int, int, int], float] = {}
    for k in (1, -1):
        p[(2, 1, k)] = p[(2, 3, k)] = 0.25
        p[(1, 2, k)] = p[(3, 2, k)] = q
        p[(1, 3, k)] = p[(3, 1, k)] = 0.5 - q
    return TransitionKernel(3, p, name=f"one_parameter(q={q})")


#: The arbitrary fixed N=3 kernel used as a built-in asymmetric test case.
ASYMMETRIC_PROBS: Dict[Tuple[int, int, int], Fraction] = {
    (2, 1, 1): Fraction(17, 40),
    (2, 3, 1): Fraction(1, 5),
    (2, 1, -1): Fraction(1, 8),
    (2, 3, -1): Fraction(1, 4),
    (1, 2, 1): Fraction(43, 70),
    (3, 2, 1): Fraction(43, 72),
    (1, 2, -1): Fraction(1, 7),
    (3, 2, -1): Fraction(1, 8),
    (1, 3, 1): Fraction(1, 10),
    (3, 1, 1): Fraction(1, 9),
    (1, 3, -1): Fraction(1, 7),
    (3, 1, -1): Fraction(1, 6),
}


def asymmetric_kernel() -> TransitionKernel:
    p = {key: float(val) for key, val in ASYMMETRIC_PROBS.items()}
    return TransitionKernel(3, p, name="asymmetric")


def validate_kernel(raw: dict) -> TransitionKernel:
    """Build a kernel from its JSON form, collecting every violation at once.

    Accepted shapes::

        {"symmetric": {"N": 4}}
        {"one_parameter_q": {"q": 0.25}}
        {"asymmetric": {}}
        {"N": 3, "p": [{"i": 1, "j": 2, "k": 1, "value": 0.25}, ...]}
    """
    if "symmetric" in raw:
        return symmetric_kernel(int(raw["symmetric"]["N"]))
    if "one_parameter_q" in raw:
        return one_parameter_kernel(float(raw["one_parameter_q"]["q"]))
    if "asymmetric" in raw:
        return asymmetric_kernel()
    if "N" not in raw or "p" not in raw:
        raise KernelError(["kernel JSON must contain 'N' and 'p' (or a named family)"])
    n = int(raw["N"])
    p: Dict[Tuple[int, int, int], float] = {}
    for entry in raw["p"]:
        key = (int(entry["i"]), int(entry["j"]), int(entry["k"]))
        if key in p:
            raise KernelError([f"duplicate entry for arc {key}"])
        p[key] = float(entry["value"])
    return TransitionKernel(n, p)


def kernel_to_json(kernel: TransitionKernel) -> dict:
    return {
        "N": kernel.n_windows,
        "p": [
            {"i": i, "j": j, "k": k, "value": v}
            for (i, j, k), v in sorted(kernel.p.items(), key=lambda t: (-t[0][2], t[0][0], t[0][1]))
        ],
    }


@dataclass
class Trajectory:
    """One realisation of the chain.  ``word_lens``/``metric_lens`` hold the
    two lengths after every step; full words are kept only on request."""

    initial: Word
    seed: int
    final: Word
    word_lens: np.ndarray
    metric_lens: np.ndarray
    states: Optional[List[Word]] = None

    def to_csv(self) -> str:
        lines = ["n,word_len,metric_len"]
        for n, (wl, ml) in enumerate(zip(self.word_lens, self.metric_lens)):
            lines.append(f"{n},{int(wl)},{float(ml)!r}")
        return "\n".join(lines) + "\n"


@dataclass
class HittingTimeSample:
    target: Arc
    time: Optional[int]  # None when censored at the cap
    cap: int

    @property
    def censored(self) -> bool:
        return self.time is None


def step(w: Word, kernel: TransitionKernel, rng: np.random.Generator) -> Word:
    """Advance one step: sample an arc leaving the current target window."""
    i = w.target
    u = rng.random()
    idx = int(np.searchsorted(kernel._cum[i], u, side="right"))
    idx = min(idx, kernel._cum.shape[1] - 1)
    g = Arc(i, int(kernel._arc_j[i, idx]), int(kernel._arc_k[i, idx]))
    return append(w, g)


def simulate(
    start: Word,
    kernel: TransitionKernel,
    n_steps: int,
    seed: int,
    metric: Optional[Metric] = None,
    record_words: bool = False,
) -> Trajectory:
    """Run the chain for ``n_steps`` steps from ``start``.

    In the default streaming mode only the word and metric lengths are kept
    per step, so memory stays proportional to the current word length.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    metric = metric or word_metric(kernel.n_windows)
    rng = np.random.default_rng(seed)
    # Internal mutable stack of (source, sign) pairs; the target chains through.
    stack_i = [arc.i for arc in start.letters]
    stack_k = [arc.k for arc in start.letters]
    target = start.target
    mlen = sum(metric.weight(arc) for arc in start.letters)
    word_lens = np.empty(n_steps + 1, dtype=np.int64)
    metric_lens = np.empty(n_steps + 1, dtype=np.float64)
    word_lens[0] = len(stack_i)
    metric_lens[0] = mlen
    states = [start] if record_words else None
    word = start
    cum, arc_j, arc_k = kernel._cum, kernel._arc_j, kernel._arc_k
    wt = metric.weights
    for n in range(1, n_steps + 1):
        u = rng.random()
        idx = min(int(np.searchsorted(cum[target], u, side="right")), cum.shape[1] - 1)
        gj = int(arc_j[target, idx])
        gk = int(arc_k[target, idx])
        if not stack_i or stack_k[-1] != gk:  # push
            mlen += wt[(target, gj, gk)]
            stack_i.append(target)
            stack_k.append(gk)
        elif stack_i[-1] == gj:  # pop (backtrack)
            mlen -= wt[(gj, target, gk)]
            stack_i.pop()
            stack_k.pop()
        else:  # merge with the same-sign last letter
            mlen += wt[(stack_i[-1], gj, gk)] - wt[(stack_i[-1], target, gk)]
        target = gj
        word_lens[n] = len(stack_i)
        metric_lens[n] = mlen
        if record_words:
            word = append(word, Arc(word.target, gj, gk))
            states.append(word)
    final = _stack_to_word(start.source, stack_i, stack_k, target)
    return Trajectory(start, seed, final, word_lens, metric_lens, states)


def _stack_to_word(source: int, stack_i: List[int], stack_k: List[int], target: int) -> Word:
    letters = []
    for idx in range(len(stack_i)):
        j = stack_i[idx + 1] if idx + 1 < len(stack_i) else target
        letters.append(Arc(stack_i[idx], j, stack_k[idx]))
    return Word(source, tuple(letters))


def sample_hitting_time(
    target: Arc,
    kernel: TransitionKernel,
    cap: int = DEFAULT_HITTING_CAP,
    seed: int = 0,
) -> HittingTimeSample:
    """First time the chain started at the unit of ``target.i`` equals the
    one-letter word ``target``; censored (``time=None``) past ``cap``.  The
    chain is transient, so a positive fraction of samples censors."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    times = sample_hitting_times(target, kernel, cap=cap, seed=seed, n_samples=1)
    t = int(times[0])
    return HittingTimeSample(target, None if t < 0 else t, cap)


def sample_hitting_times(
    target: Arc,
    kernel: TransitionKernel,
    cap: int,
    seed: int,
    n_samples: int,
) -> np.ndarray:
    """Vectorised i.i.d. hitting-time samples; -1 marks censoring at ``cap``."""
    state = _BatchState(kernel, word_metric(kernel.n_windows), n_samples,
                        unit(target.i), seed, max_depth=cap + 1)
    times = np.full(n_samples, -1, dtype=np.int64)
    active = np.arange(n_samples)
    for n in range(1, cap + 1):
        state.advance()
        hit = (
            (state.depth == 1)
            & (state.stack_i[:, 0] == target.i)
            & (state.stack_k[:, 0] == target.k)
            & (state.target == target.j)
        )
        if hit.any():
            times[active[hit]] = n
            keep = ~hit
            state.select(keep)
            active = active[keep]
            if active.size == 0:
                break
    return times


class _BatchState:
    """Vectorised stacks for many independent paths of the chain.

    Per path: stacks of (source, sign) per letter, the current target window,
    and the running metric length.  Word length equals stack depth.
    """

    def __init__(self, kernel, metric, n_paths, initial: Word, seed, max_depth):
        self.kernel = kernel
        n = kernel.n_windows
        self.n_paths = n_paths
        d0 = len(initial.letters)
        self.max_depth = max_depth + d0
        cap0 = min(self.max_depth, max(64, 2 * d0))
        self.stack_i = np.zeros((n_paths, cap0), dtype=np.int8)
        self.stack_k = np.zeros((n_paths, cap0), dtype=np.int8)
        for idx, arc in enumerate(initial.letters):
            self.stack_i[:, idx] = arc.i
            self.stack_k[:, idx] = arc.k
        self.depth = np.full(n_paths, d0, dtype=np.int64)
        self.target = np.full(n_paths, initial.target, dtype=np.int64)
        m0 = sum(metric.weight(arc) for arc in initial.letters)
        self.metric_len = np.full(n_paths, m0, dtype=np.float64)
        # Dense weight table indexed [sign_index, i, j] with sign_index 0 for +1.
        self.weights = np.zeros((2, n + 1, n + 1), dtype=np.float64)
        for (i, j, k), wgt in metric.weights.items():
            self.weights[0 if k == 1 else 1, i, j] = wgt
        # One child stream per path, split from the master seed, so path p's
        # randomness depends on (seed, p) alone.  Uniforms are pre-drawn in
        # chunks to keep stepping vectorised.
        self.rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_paths)]
        self._chunk = 512
        self._buf = np.empty((n_paths, 0))
        self._ptr = 0

    def _next_uniforms(self) -> np.ndarray:
        if self._ptr >= self._buf.shape[1]:
            self._buf = (
                np.stack([rng.random(self._chunk) for rng in self.rngs])
                if self.rngs
                else np.empty((0, self._chunk))
            )
            self._ptr = 0
        u = self._buf[:, self._ptr]
        self._ptr += 1
        return u

    def select(self, keep: np.ndarray) -> None:
        self.stack_i = self.stack_i[keep]
        self.stack_k = self.stack_k[keep]
        self.depth = self.depth[keep]
        self.target = self.target[keep]
        self.metric_len = self.metric_len[keep]
        self.rngs = [rng for rng, kept in zip(self.rngs, keep) if kept]
        self._buf = self._buf[keep]
        self.n_paths = int(keep.sum())

    def _ensure_capacity(self) -> None:
        # Stacks grow geometrically; depth increases by at most 1 per step.
        cap = self.stack_i.shape[1]
        if self.n_paths and int(self.depth.max()) + 1 >= cap:
            new_cap = min(self.max_depth, max(2 * cap, cap + 64))
            pad = new_cap - cap
            self.stack_i = np.pad(self.stack_i, ((0, 0), (0, pad)))
            self.stack_k = np.pad(self.stack_k, ((0, 0), (0, pad)))

    def advance(self) -> None:
        self._ensure_capacity()
        kernel = self.kernel
        n_paths = self.n_paths
        rows = np.arange(n_paths)
        u = self._next_uniforms()
        cum = kernel._cum[self.target]
        idx = (u[:, None] > cum).sum(axis=1)
        gj = kernel._arc_j[self.target, idx]
        gk = kernel._arc_k[self.target, idx]
        has_top = self.depth > 0
        top = np.maximum(self.depth - 1, 0)
        top_i = self.stack_i[rows, top].astype(np.int64)
        top_k = self.stack_k[rows, top].astype(np.int64)
        ksel = (1 - gk) // 2  # 0 for +1, 1 for -1
        push = ~has_top | (top_k != gk)
        pop = has_top & (top_k == gk) & (top_i == gj)
        merge = has_top & (top_k == gk) & (top_i != gj)

        if push.any():
            r = rows[push]
            self.metric_len[r] += self.weights[ksel[push], self.target[push], gj[push]]
            self.stack_i[r, self.depth[push]] = self.target[push]
            self.stack_k[r, self.depth[push]] = gk[push]
            self.depth[push] += 1
        if pop.any():
            self.metric_len[pop] -= self.weights[ksel[pop], gj[pop], self.target[pop]]
            self.depth[pop] -= 1
        if merge.any():
            self.metric_len[merge] += (
                self.weights[ksel[merge], top_i[merge], gj[merge]]
                - self.weights[ksel[merge], top_i[merge], self.target[merge]]
            )
        self.target = gj.astype(np.int64)


def run_length_paths(
    kernel: TransitionKernel,
    metric: Metric,
    n_steps: int,
    n_paths: int,
    seed: int,
    initial: Optional[Word] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Final (word_len, metric_len) arrays over ``n_paths`` independent paths."""
    initial = initial or unit(1)
    state = _BatchState(kernel, metric, n_paths, initial, seed,
                        max_depth=n_steps + 1)
    for _ in range(n_steps):
        state.advance()
    return state.depth.copy(), state.metric_len.copy()
