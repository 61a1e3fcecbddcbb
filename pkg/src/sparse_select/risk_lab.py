"""Monte Carlo estimates of Hamming risk, phase sweeps and lower-bound diagnostics.

Replication i of an experiment with master seed S always draws from the
generator keyed by (S, i), so reports do not depend on thread count or on the
order in which replications finish.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .ellipsoids import ExtremalProfile, FunctionSpace, SpaceKind, solve_extremal
from .errors import DimensionError, DomainError
from .selectors import (
    SelectorConfig,
    adaptive_exact_profiles,
    adaptive_exact_select,
    almost_full_profile,
    almost_full_select,
    default_config,
    exact_profile,
    exact_select,
    lepski_profiles,
    lepski_select,
    r_star_almost_full,
    r_star_exact,
)
from .signal_model import (
    ObservationMatrix,
    SignMode,
    SparsityPattern,
    embed_signal,
    layout,
    sample_observations,
    sample_pattern,
)

THREADS_ENV = "SPARSE_SELECT_THREADS"
# cap on floats per sampling block, about 32 MB
_BLOCK_FLOATS = 1 << 22
_SWEEP_KEY = 0x5EE9


class SelectorKind(enum.Enum):
    ALMOST_FULL = "almost_full"
    EXACT = "exact"
    LEPSKI = "lepski"
    ADAPTIVE_EXACT = "adaptive_exact"


# selector hook: (observations, true pattern) -> estimated eta
SelectorFn = Callable[[ObservationMatrix, SparsityPattern], np.ndarray]


@dataclass(frozen=True)
class ExperimentSpec:
    space: FunctionSpace
    d: int
    s: int
    eps: float
    rho: float
    selector: SelectorKind
    config: SelectorConfig | None = None
    sign_mode: SignMode = SignMode.RADEMACHER
    reps: int = 200
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "selector", SelectorKind(self.selector))
        object.__setattr__(self, "sign_mode", SignMode(self.sign_mode))
        if not 1 <= self.s < self.d:
            raise DomainError(f"need 1 <= s < d, got s={self.s}, d={self.d}")
        if self.reps < 1:
            raise DomainError("reps must be at least 1")
        if not (self.rho > 0 and self.eps > 0):
            raise DomainError("rho and eps must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.config is None:
            object.__setattr__(self, "config", default_config(self.d))
        elif self.config.grid.d != self.d:
            raise DimensionError("selector grid was built for a different d")


@dataclass(frozen=True, eq=False)
class RiskReport:
    mean_normalized_risk: float
    std_error: float
    reps: int
    spec: ExperimentSpec
    counts: np.ndarray = field(repr=False)

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.std_error
        return self.mean_normalized_risk - half, self.mean_normalized_risk + half


def hamming(a, b) -> int:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def derive_generator(seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=path)))


def derive_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=path).generate_state(1, np.uint64)[0])


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, 0)) or (os.cpu_count() or 1)
    return max(1, int(threads))


def boundary_for(spec: ExperimentSpec) -> float:
    """Detection boundary r*(s) that the selector kind is calibrated against."""
    if spec.selector in (SelectorKind.EXACT, SelectorKind.ADAPTIVE_EXACT):
        return r_star_exact(spec.space, spec.eps, spec.d, spec.s)
    return r_star_almost_full(spec.space, spec.eps, spec.d, spec.s)


def _selector_profiles(spec: ExperimentSpec) -> list[ExtremalProfile]:
    kind, space, eps, d, s = spec.selector, spec.space, spec.eps, spec.d, spec.s
    if kind is SelectorKind.ALMOST_FULL:
        return [almost_full_profile(space, eps, d, s)]
    if kind is SelectorKind.EXACT:
        return [exact_profile(space, eps, d, s)]
    if kind is SelectorKind.LEPSKI:
        return lepski_profiles(space, eps, spec.config.grid)
    return adaptive_exact_profiles(space, eps, spec.config.grid)


def _selector_fn(spec: ExperimentSpec) -> SelectorFn:
    kind, space, config = spec.selector, spec.space, spec.config
    if kind is SelectorKind.ALMOST_FULL:
        return lambda obs, _: almost_full_select(obs, space, spec.s, config.delta).eta_hat
    if kind is SelectorKind.EXACT:
        return lambda obs, _: exact_select(obs, space, spec.s, config.delta).eta_hat
    if kind is SelectorKind.LEPSKI:
        return lambda obs, _: lepski_select(obs, space, config)[1].eta_hat
    if space.kind is not SpaceKind.ANALYTIC:
        raise DomainError("adaptive exact selection is only provided for analytic ellipsoids")
    return lambda obs, _: adaptive_exact_select(obs, space, config.grid, config.delta).eta_hat


def mc_risk(spec: ExperimentSpec, selector: SelectorFn | None = None, threads: int | None = None) -> RiskReport:
    """Estimate s^-1 E|eta_hat - eta| at signal radius rho * r*(s).

    Signals sit on the extremal profile re-solved at the scaled radius.
    ``selector`` replaces the experiment's selector, e.g. with an oracle in tests.
    """
    signal_profile = solve_extremal(spec.space, spec.rho * boundary_for(spec), spec.eps)
    select = selector if selector is not None else _selector_fn(spec)
    profiles = _selector_profiles(spec) if selector is None else []
    width = max([signal_profile.width] + [p.width for p in profiles])

    def replicate(i: int) -> int:
        rng = derive_generator(spec.seed, i)
        pattern = sample_pattern(spec.d, spec.s, rng)
        signal = embed_signal(signal_profile, pattern, spec.sign_mode, rng, width=width)
        obs = sample_observations(signal, spec.eps, rng)
        return hamming(select(obs, pattern), pattern.eta)

    n_workers = min(worker_count(threads), spec.reps)
    if n_workers == 1:
        counts = [replicate(i) for i in range(spec.reps)]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            counts = list(pool.map(replicate, range(spec.reps)))
    counts = np.asarray(counts, dtype=np.int64)
    normalized = counts / spec.s
    mean = math.fsum(normalized) / spec.reps
    stderr = float(np.std(normalized, ddof=1) / math.sqrt(spec.reps)) if spec.reps > 1 else 0.0
    return RiskReport(mean, stderr, spec.reps, spec, counts)


def phase_sweep(spec: ExperimentSpec, rhos, threads: int | None = None) -> list[tuple[float, RiskReport]]:
    """mc_risk over a list of ratios, in increasing rho.

    Point i (in sorted order) runs with seed ``derive_seed(spec.seed, SWEEP, i)``.
    """
    rhos = sorted(float(r) for r in rhos)
    if not rhos:
        raise DomainError("rho list is empty")
    return [
        (rho, mc_risk(replace(spec, rho=rho, seed=sweep_seed(spec.seed, i)), threads=threads))
        for i, rho in enumerate(rhos)
    ]


def sweep_seed(seed: int, index: int) -> int:
    return derive_seed(seed, _SWEEP_KEY, index)


def log_cosh(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def bayes_cutoff(p: float) -> float:
    """Log-likelihood-ratio cutoff H = log((1 - p) / p) of the Bayes test."""
    if not 0 < p < 0.5:
        raise DomainError("need 0 < p < 1/2 so the Bayes cutoff log((1-p)/p) is positive")
    return math.log((1.0 - p) / p)


def bayes_risk_terms(
    v: np.ndarray, p: float, reps: int, rng: np.random.Generator, chunk: int = 50_000
) -> tuple[float, float, float]:
    """Monte Carlo of the Bayes test between pure noise and the sign-mixture prior.

    ``v`` is the signal-to-noise profile theta*/eps over the full support.
    Returns (A, B, A + B) with A = P0(Lambda >= (1-p)/p) / p and
    B = P1(Lambda < (1-p)/p).
    """
    H = bayes_cutoff(p)
    v = np.asarray(v, dtype=float)
    offset = -0.5 * math.fsum(v * v)
    chunk = max(1, min(chunk, _BLOCK_FLOATS // max(v.size, 1)))
    hits0 = misses1 = 0
    done = 0
    while done < reps:
        n = min(chunk, reps - done)
        y0 = rng.standard_normal((n, v.size))
        signs = rng.integers(0, 2, size=(n, v.size)) * 2 - 1
        y1 = signs * v + rng.standard_normal((n, v.size))
        lam0 = offset + log_cosh(v * y0).sum(axis=1)
        lam1 = offset + log_cosh(v * y1).sum(axis=1)
        hits0 += int(np.count_nonzero(lam0 >= H))
        misses1 += int(np.count_nonzero(lam1 < H))
        done += n
    A = hits0 / reps / p
    B = misses1 / reps
    return A, B, A + B


def bayes_lower_bound(
    space: FunctionSpace, d: int, s: int, eps: float, rho: float, reps: int, seed: int
) -> tuple[float, float, float]:
    """Simulated lower bound on normalized minimax risk at radius rho * r*(s)."""
    if not 1 <= s < d:
        raise DomainError(f"need 1 <= s < d, got s={s}, d={d}")
    p = s / d
    if p >= 0.5:
        raise DomainError("need s/d < 1/2")
    profile = solve_extremal(space, rho * r_star_almost_full(space, eps, d, s), eps)
    v = layout(profile.theta_star[: profile.width]) / eps
    return bayes_risk_terms(v, p, reps, derive_generator(seed))


@dataclass(frozen=True)
class TailRow:
    T: float
    mc_tail: float
    bound: float
    ratio: float  # log(mc_tail) / (-T^2 / 2)


def null_statistics(profile: ExtremalProfile, reps: int, rng: np.random.Generator, chunk: int = 100_000) -> np.ndarray:
    """Draws of t under pure noise."""
    w = layout(profile.omega[: profile.width])
    out = np.empty(reps)
    chunk = max(1, min(chunk, _BLOCK_FLOATS // max(w.size, 1)))
    for start in range(0, reps, chunk):
        n = min(chunk, reps - start)
        xi = rng.standard_normal((n, w.size))
        out[start : start + n] = (xi * xi - 1.0) @ w
    return out


def tail_check(profile: ExtremalProfile, T_list, reps: int, seed: int) -> list[TailRow]:
    """Empirical lower tail of the null statistic against exp(-T^2 / 2)."""
    T_list = [float(T) for T in T_list]
    if any(T > 0 for T in T_list):
        raise DomainError("tail levels must be nonpositive")
    if reps < 100_000:
        raise DomainError("tail_check needs at least 1e5 replications")
    t = null_statistics(profile, reps, derive_generator(seed))
    rows = []
    for T in T_list:
        mc = np.count_nonzero(t <= T) / reps
        bound = math.exp(-T * T / 2.0)
        if T == 0:
            ratio = math.nan
        elif mc == 0:
            ratio = math.inf
        else:
            ratio = math.log(mc) / (-T * T / 2.0)
        rows.append(TailRow(T, mc, bound, ratio))
    return rows
