"""Thresholding selectors built on weighted chi-square statistics.

Every statistic has the form t_j = sum_k omega_k [(X_jk / eps)^2 - 1] with
weights from the extremal profile at a detection boundary r*. Boundaries
solve u(r*) = target, with target sqrt(2 log(d/s)) for almost full recovery
and sqrt(2 log d) + sqrt(2 log s) for exact recovery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ellipsoids import ExtremalProfile, FunctionSpace, SpaceKind, boundary_radius, solve_extremal
from .errors import DimensionError, DomainError
from .signal_model import ObservationMatrix, layout

DEFAULT_C_LOW = 0.25
DEFAULT_C_HIGH = 0.75


@dataclass(frozen=True)
class Grid:
    """Geometric grid s_m = d^c_low * d^((m-1) Delta) of candidate sparsities."""

    d: int
    c_low: float
    c_high: float
    delta_step: float
    points: tuple[float, ...]

    @property
    def M(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SelectorConfig:
    delta: float
    tau: float
    grid: Grid

    @property
    def v(self) -> np.ndarray:
        """Lepski tolerances v_i = s_i / tau."""
        return np.asarray(self.grid.points) / self.tau


@dataclass(frozen=True, eq=False)
class SelectionResult:
    eta_hat: np.ndarray
    stats: np.ndarray
    threshold: float
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class LepskiTrace:
    """Diagnostics of a Lepski choice. Grid indices here are 1-based, as in m = 1..M."""

    candidates: np.ndarray  # (M, d) selections eta_hat(s_m)
    distances: np.ndarray  # (M, M) pairwise Hamming distances
    v: np.ndarray
    admissible: np.ndarray  # (M,) bool
    m_hat: int
    m_scan: int  # where a downward scan from M stops


def almost_full_target(d: int, s: float) -> float:
    if not 1 <= s < d:
        raise DomainError(f"need 1 <= s < d, got s={s}, d={d}")
    return math.sqrt(2.0 * math.log(d / s))


def exact_target(d: int, s: float) -> float:
    if not 1 <= s < d:
        raise DomainError(f"need 1 <= s < d, got s={s}, d={d}")
    return math.sqrt(2.0 * math.log(d)) + math.sqrt(2.0 * math.log(s))


def r_star_almost_full(space: FunctionSpace, eps: float, d: int, s: float) -> float:
    return boundary_radius(space, float(eps), almost_full_target(d, s))


def r_star_exact(space: FunctionSpace, eps: float, d: int, s: float) -> float:
    return boundary_radius(space, float(eps), exact_target(d, s))


@lru_cache(maxsize=1024)
def _profile_at(space: FunctionSpace, eps: float, r: float) -> ExtremalProfile:
    return solve_extremal(space, r, eps)


def almost_full_profile(space: FunctionSpace, eps: float, d: int, s: float) -> ExtremalProfile:
    return _profile_at(space, float(eps), r_star_almost_full(space, eps, d, s))


def exact_profile(space: FunctionSpace, eps: float, d: int, s: float) -> ExtremalProfile:
    return _profile_at(space, float(eps), r_star_exact(space, eps, d, s))


def almost_full_threshold(d: int, s: float, delta: float) -> float:
    return math.sqrt(2.0 * math.log(d / s) + delta * math.log(d))


def exact_threshold(d: int, delta: float) -> float:
    return math.sqrt((2.0 + delta) * math.log(d))


def adaptive_exact_threshold(d: int, M: int, delta: float) -> float:
    return math.sqrt((2.0 + delta) * (math.log(d) + math.log(M)))


def _check_width(width: int, profile: ExtremalProfile) -> None:
    if width < profile.width:
        raise DimensionError(f"observations carry {width} frequency pairs, profile needs {profile.width}")


def t_statistic(row, profile: ExtremalProfile, eps: float) -> float:
    """Weighted chi-square statistic of one component's coefficients (column layout)."""
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or row.size % 2:
        raise DimensionError("row must be one-dimensional with even length")
    W = row.size // 2
    _check_width(W, profile)
    weights = layout(profile.omega[: profile.width], W)
    return float(weights @ ((row / eps) ** 2 - 1.0))


def statistics(obs: ObservationMatrix, profiles) -> np.ndarray:
    """t-statistics for every row and every profile, shape (d, len(profiles))."""
    W = obs.width
    for p in profiles:
        _check_width(W, p)
    weights = np.column_stack([layout(p.omega[: p.width], W) for p in profiles])
    z = (obs.x / obs.eps) ** 2 - 1.0
    return z @ weights


def _threshold_select(stats: np.ndarray, threshold: float) -> np.ndarray:
    # strict inequality: ties are not selected
    return (stats > threshold).astype(np.int8)


def almost_full_select(obs: ObservationMatrix, space: FunctionSpace, s: float, delta: float) -> SelectionResult:
    """Known-s selector: threshold sqrt(2 log(d/s) + delta log d)."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    d = obs.d
    profile = almost_full_profile(space, obs.eps, d, s)
    stats = statistics(obs, [profile])[:, 0]
    threshold = almost_full_threshold(d, s, delta)
    return SelectionResult(
        _threshold_select(stats, threshold),
        stats,
        threshold,
        {"selector": "almost_full", "s": s, "delta": delta, "r_star": profile.r},
    )


def exact_select(obs: ObservationMatrix, space: FunctionSpace, s: float, delta: float) -> SelectionResult:
    """Known-s exact selector: profile at the exact boundary, threshold sqrt((2 + delta) log d)."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    d = obs.d
    profile = exact_profile(space, obs.eps, d, s)
    stats = statistics(obs, [profile])[:, 0]
    threshold = exact_threshold(d, delta)
    return SelectionResult(
        _threshold_select(stats, threshold),
        stats,
        threshold,
        {"selector": "exact", "s": s, "delta": delta, "r_star": profile.r},
    )


def build_grid(d: int, c_low: float, c_high: float, delta_step: float) -> Grid:
    if not 0 < c_low <= c_high < 1:
        raise DomainError(f"need 0 < c_low <= c_high < 1, got ({c_low}, {c_high})")
    if not delta_step > 0:
        raise DomainError("grid step must be positive")
    # guard the ceiling against representation error, e.g. 0.5 / 0.1 = 5.000000000000001
    M = math.ceil((c_high - c_low) / delta_step - 1e-9) + 1
    points = tuple(d ** (c_low + m * delta_step) for m in range(M))
    if points[-1] >= d:
        raise DomainError(f"largest grid point {points[-1]:.6g} reaches d = {d}")
    return Grid(d, c_low, c_high, delta_step, points)


def default_schedules(d: int) -> tuple[float, float, float]:
    """(delta, Delta, tau) = ((log d)^-1/2, (log d)^-3/2, (log d)^1/2)."""
    if d < 8:
        raise DomainError("default schedules need d >= 8")
    L = math.log(d)
    return L**-0.5, L**-1.5, L**0.5


def default_config(d: int, c_low: float = DEFAULT_C_LOW, c_high: float = DEFAULT_C_HIGH) -> SelectorConfig:
    delta, step, tau = default_schedules(d)
    return SelectorConfig(delta, tau, build_grid(d, c_low, c_high, step))


def lepski_index(candidates: np.ndarray, v) -> tuple[int, np.ndarray, np.ndarray, int]:
    """Minimal admissible grid index for a stack of candidate selections.

    m is admissible when |eta(s_m) - eta(s_i)| <= v_i for every i >= m; m = M
    always is. Returns (m_hat, distances, admissible, m_scan) with 1-based
    indices; m_scan is where a downward scan from M first fails.
    """
    cand = np.asarray(candidates, dtype=np.int64)
    v = np.asarray(v, dtype=float)
    M = cand.shape[0]
    if v.shape != (M,):
        raise DimensionError("need one tolerance per candidate")
    distances = np.abs(cand[:, None, :] - cand[None, :, :]).sum(-1)
    upper = np.triu(np.ones((M, M), dtype=bool))
    admissible = np.all(~upper | (distances <= v[None, :]), axis=1)
    m_hat = int(np.argmax(admissible)) + 1
    m_scan = M
    while m_scan > 1 and admissible[m_scan - 2]:
        m_scan -= 1
    return m_hat, distances, admissible, m_scan


def lepski_profiles(space: FunctionSpace, eps: float, grid: Grid) -> list[ExtremalProfile]:
    return [almost_full_profile(space, eps, grid.d, s_m) for s_m in grid.points]


def lepski_select(
    obs: ObservationMatrix, space: FunctionSpace, config: SelectorConfig
) -> tuple[int, SelectionResult, LepskiTrace]:
    """Sparsity-adaptive almost full selector; each grid point has its own profile."""
    grid = config.grid
    d = obs.d
    if grid.d != d:
        raise DimensionError(f"grid built for d={grid.d}, observations have d={d}")
    stats = statistics(obs, lepski_profiles(space, obs.eps, grid))
    thresholds = np.array([almost_full_threshold(d, s_m, config.delta) for s_m in grid.points])
    candidates = (stats > thresholds[None, :]).T.astype(np.int8)
    v = config.v
    m_hat, distances, admissible, m_scan = lepski_index(candidates, v)
    m = m_hat - 1
    result = SelectionResult(
        candidates[m].copy(),
        stats[:, m].copy(),
        float(thresholds[m]),
        {"selector": "lepski", "m_hat": m_hat, "s_hat": grid.points[m], "delta": config.delta, "tau": config.tau},
    )
    trace = LepskiTrace(candidates, distances, v, admissible, m_hat, m_scan)
    return m_hat, result, trace


def adaptive_exact_profiles(space: FunctionSpace, eps: float, grid: Grid) -> list[ExtremalProfile]:
    return [exact_profile(space, eps, grid.d, s_m) for s_m in grid.points]


def adaptive_exact_select(obs: ObservationMatrix, space: FunctionSpace, grid: Grid, delta: float) -> SelectionResult:
    """Sparsity-free exact selector for analytic ellipsoids: a component is
    selected when any grid point's statistic clears the common threshold.

    Meant for the regime log d = o(log 1/eps).
    """
    if space.kind is not SpaceKind.ANALYTIC:
        raise DomainError("adaptive exact selection is only provided for analytic ellipsoids")
    if not delta > 0:
        raise DomainError("delta must be positive")
    if grid.d != obs.d:
        raise DimensionError(f"grid built for d={grid.d}, observations have d={obs.d}")
    stats = statistics(obs, adaptive_exact_profiles(space, obs.eps, grid))
    threshold = adaptive_exact_threshold(obs.d, grid.M, delta)
    best = stats.max(axis=1)
    return SelectionResult(
        _threshold_select(best, threshold),
        best,
        threshold,
        {"selector": "adaptive_exact", "M": grid.M, "delta": delta},
    )
