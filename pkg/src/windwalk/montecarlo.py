"""Statistical verification of the limit theorems: law-of-large-numbers and
central-limit checks of the simulated word lengths against the exact drift
and variance, plus the lazy-nearest-neighbour check for the symmetric family.

Band choices: the LLN uses a generous 4-standard-error acceptance band and
the CLT a 99% chi-square band plus the asymptotic 1% Kolmogorov-Smirnov
critical value 1.63/sqrt(n_paths).  At the default sizes the per-suite flake
rate stays below 1e-3; the finite-n bias of the KS threshold is accepted as
an engineering choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import stats

from .chain import TransitionKernel, run_length_paths, simulate
from .groupoid import Arc, Metric, Word, unit

KS_CRITICAL = 1.63  # asymptotic 1% point of the Kolmogorov distribution


@dataclass
class McReport:
    """Aggregated Monte Carlo verdicts; ``passes`` has one flag per check."""

    n_steps: int
    n_paths: int
    seed: int
    gamma_hat: float
    gamma_se: float
    sigma2_hat: float
    normality_stat: float
    passes: Dict[str, bool]
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def to_json(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "gamma_hat": self.gamma_hat,
            "gamma_se": self.gamma_se,
            "sigma2_hat": self.sigma2_hat,
            # None when the check did not compute a KS distance (NaN is not JSON)
            "normality_stat": None if np.isnan(self.normality_stat) else self.normality_stat,
            "passes": dict(self.passes),
            "details": dict(self.details),
        }


def _default_initial(kernel: TransitionKernel) -> Word:
    """A short non-unit word to exercise initial-condition independence."""
    return Word(1, (Arc(1, 2, 1), Arc(2, 3, -1)))


def verify_lln(
    kernel: TransitionKernel,
    metric: Metric,
    gamma_ref: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    sigma2_ref: Optional[float] = None,
) -> McReport:
    """Check that the per-path rate |W_n|/n concentrates on ``gamma_ref``.

    The band is 4 * (sampling SE + sigma_ref / sqrt(n_steps)): the first term
    is the path-to-path spread of the mean, the second the residual bias of
    the finite-n rate.  The run is repeated from a short non-unit initial
    word; the rate must not depend on the starting arrow.
    """
    if n_steps < 10**3 or n_paths < 50:
        raise ValueError("requires n_steps >= 1000 and n_paths >= 50")
    seed2 = int(np.random.SeedSequence(seed).generate_state(2)[1])
    _, ml_unit = run_length_paths(kernel, metric, n_steps, n_paths, seed)
    _, ml_word = run_length_paths(
        kernel, metric, n_steps, n_paths, seed2, initial=_default_initial(kernel)
    )
    z_unit = (ml_unit - gamma_ref * n_steps) / np.sqrt(n_steps)
    sigma_ref = float(np.sqrt(sigma2_ref)) if sigma2_ref is not None else float(np.std(z_unit, ddof=1))
    passes = {}
    details = {}
    gamma_hat = gamma_se = 0.0
    for tag, ml in (("unit", ml_unit), ("nonunit", ml_word)):
        rates = ml / n_steps
        mean = float(rates.mean())
        se = float(rates.std(ddof=1) / np.sqrt(n_paths))
        band = 4.0 * (se + sigma_ref / np.sqrt(n_steps))
        passes[f"lln_{tag}"] = bool(abs(mean - gamma_ref) <= band)
        details[f"gamma_hat_{tag}"] = mean
        details[f"band_{tag}"] = band
        if tag == "unit":
            gamma_hat, gamma_se = mean, se
    sigma2_hat = float(np.var(z_unit, ddof=1))
    return McReport(n_steps, n_paths, seed, gamma_hat, gamma_se, sigma2_hat,
                    normality_stat=float("nan"), passes=passes, details=details)


def verify_clt(
    kernel: TransitionKernel,
    metric: Metric,
    gamma_ref: float,
    sigma2_ref: float,
    n_steps: int,
    n_paths: int,
    seed: int,
) -> McReport:
    """Check the fluctuation law of (|W_n| - gamma n) / sqrt(n).

    Two verdicts: the sample variance must fall in the two-sided 99%
    chi-square band around ``sigma2_ref``, and the KS distance to the
    N(0, sigma2_ref) distribution must stay below 1.63/sqrt(n_paths).
    Centering uses the exact drift, not the empirical mean.
    """
    if n_steps < 10**4 or n_paths < 10**3:
        raise ValueError("requires n_steps >= 1e4 and n_paths >= 1e3")
    if sigma2_ref <= 0:
        raise ValueError("sigma2_ref must be positive")
    _, ml = run_length_paths(kernel, metric, n_steps, n_paths, seed)
    z = (ml - gamma_ref * n_steps) / np.sqrt(n_steps)
    sigma2_hat = float(np.var(z, ddof=1))
    dof = n_paths - 1
    var_lo = sigma2_ref * stats.chi2.ppf(0.005, dof) / dof
    var_hi = sigma2_ref * stats.chi2.ppf(0.995, dof) / dof
    ks = stats.kstest(z, "norm", args=(0.0, np.sqrt(sigma2_ref)))
    ks_threshold = KS_CRITICAL / np.sqrt(n_paths)
    passes = {
        "variance_band": bool(var_lo <= sigma2_hat <= var_hi),
        "ks": bool(ks.statistic < ks_threshold),
    }
    details = {
        "var_lo": float(var_lo),
        "var_hi": float(var_hi),
        "ks_threshold": float(ks_threshold),
        "mean_z": float(z.mean()),
    }
    gamma_hat = float((ml / n_steps).mean())
    gamma_se = float((ml / n_steps).std(ddof=1) / np.sqrt(n_paths))
    return McReport(n_steps, n_paths, seed, gamma_hat, gamma_se, sigma2_hat,
                    normality_stat=float(ks.statistic), passes=passes, details=details)


@dataclass
class LazyWalkReport:
    n_steps: int
    seed: int
    freqs: Dict[str, float]       # empirical up/stay/down from length >= 1
    expected: Dict[str, float]
    passes: Dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.passes.values())


def verify_lazy_walk(kernel: TransitionKernel, n_steps: int, seed: int) -> LazyWalkReport:
    """For the symmetric kernel, |W_n| is a lazy nearest-neighbour walk:
    from positive length it moves up/stays/moves down with probabilities
    (N-1, N-2, 1)/(2(N-1)), and from length zero it always moves up."""
    n = kernel.n_windows
    uniform = 1.0 / (2 * n - 2)
    if any(abs(v - uniform) > 1e-12 for v in kernel.p.values()):
        raise ValueError("the lazy-walk law holds only for the symmetric family")
    traj = simulate(unit(1), kernel, n_steps, seed)
    lens = traj.word_lens
    diffs = np.diff(lens)
    from_zero = diffs[lens[:-1] == 0]
    moves = diffs[lens[:-1] >= 1]
    m = len(moves)
    expected = {
        "up": (n - 1) / (2 * (n - 1)),
        "stay": (n - 2) / (2 * (n - 1)),
        "down": 1 / (2 * (n - 1)),
    }
    observed = {
        "up": float((moves == 1).mean()),
        "stay": float((moves == 0).mean()),
        "down": float((moves == -1).mean()),
    }
    passes = {}
    for key, p_exp in expected.items():
        se = np.sqrt(p_exp * (1 - p_exp) / m)
        passes[key] = bool(abs(observed[key] - p_exp) <= 3 * se)
    passes["up_from_zero"] = bool((from_zero == 1).all())
    return LazyWalkReport(n_steps, seed, observed, expected, passes)


def paths_csv(word_lens: np.ndarray, metric_lens: np.ndarray, z: np.ndarray) -> str:
    lines = ["path_index,final_word_len,final_metric_len,Z"]
    for idx, (wl, ml, zz) in enumerate(zip(word_lens, metric_lens, z)):
        lines.append(f"{idx},{int(wl)},{float(ml)!r},{float(zz)!r}")
    return "\n".join(lines) + "\n"
