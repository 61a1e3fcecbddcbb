"""Extremal problem on Sobolev and analytic ellipsoids.

Coefficients are indexed by k = +-1, ..., +-K. Both signs share a semi-axis, and
the extremal sequence is symmetric, so every per-coefficient array here stores
the positive half k = 1..K only; sums over the full support are twice the
half-sums.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.special import betaln

from .errors import DomainError

BISECTION_MAX_ITER = 200
BISECTION_RTOL = 1e-8


class SpaceKind(enum.Enum):
    SOBOLEV = "sobolev"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class FunctionSpace:
    """Ellipsoid family and smoothness."""

    kind: SpaceKind
    sigma: float

    def __post_init__(self):
        if not isinstance(self.kind, SpaceKind):
            object.__setattr__(self, "kind", SpaceKind(self.kind))
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def sobolev(cls, sigma: float) -> FunctionSpace:
        return cls(SpaceKind.SOBOLEV, sigma)

    @classmethod
    def analytic(cls, sigma: float) -> FunctionSpace:
        return cls(SpaceKind.ANALYTIC, sigma)

    def semi_axes(self, K: int) -> np.ndarray:
        """Semi-axes c_1, ..., c_K as an array."""
        k = np.arange(1, K + 1, dtype=float)
        if self.kind is SpaceKind.SOBOLEV:
            return (2.0 * np.pi * k) ** self.sigma
        with np.errstate(over="ignore"):
            return np.exp(2.0 * np.pi * self.sigma * k)

    def max_radius(self) -> float:
        """Largest l2 radius that still meets the unit ellipsoid (all mass on |k| = 1)."""
        return 1.0 / semi_axis(self, 1)


def semi_axis(space: FunctionSpace, k: int) -> float:
    if k == 0:
        raise DomainError("k = 0 is excluded: components have zero mean")
    k = abs(int(k))
    if space.kind is SpaceKind.SOBOLEV:
        return (2.0 * math.pi * k) ** space.sigma
    exponent = 2.0 * math.pi * space.sigma * k
    # beyond double range the axis is effectively infinite, as in semi_axes
    return math.exp(exponent) if exponent < 709.0 else math.inf


def bandwidth(space: FunctionSpace, r: float) -> int:
    """Number of frequency pairs K carried by the extremal profile at radius r."""
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    sigma = space.sigma
    if space.kind is SpaceKind.SOBOLEV:
        value = (4.0 * sigma + 1.0) ** (1.0 / (2.0 * sigma)) * r ** (-1.0 / sigma)
    else:
        if r >= 1:
            raise DomainError("radius too large for nondegenerate profile (need r < 1)")
        value = math.log(1.0 / r) / (2.0 * math.pi * sigma)
    K = math.floor(value)
    if K < 1:
        raise DomainError("radius too large for nondegenerate profile")
    return int(K)


def c_sigma(sigma: float) -> float:
    """Leading constant of the Sobolev asymptotics of u."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    beta = math.exp(betaln(1.0 / (2.0 * sigma), 2.0))
    bracket = (1.0 + 1.0 / (4.0 * sigma)) * (1.0 + 4.0 * sigma) ** (1.0 / (2.0 * sigma))
    return 2.0 * sigma / (bracket * beta ** (1.0 / sigma))


def u_asymptotic(space: FunctionSpace, r: float, eps: float) -> float:
    """Leading-order closed form for u. Reference only; thresholds use u_exact."""
    if not (r > 0 and eps > 0):
        raise DomainError("r and eps must be positive")
    sigma = space.sigma
    if space.kind is SpaceKind.SOBOLEV:
        return c_sigma(sigma) * r ** (2.0 + 1.0 / (2.0 * sigma)) / eps**2
    if r >= 1:
        raise DomainError("analytic asymptotics need r < 1")
    return (r / eps) ** 2 * math.sqrt(2.0 * math.pi * sigma) / math.sqrt(math.log(1.0 / r))


@dataclass(frozen=True, eq=False)
class ExtremalProfile:
    """Solved extremal sequence at radius r and noise level eps.

    ``theta_star`` and ``omega`` hold k = 1..K; the values at -k are identical.
    """

    space: FunctionSpace
    r: float
    eps: float
    K: int
    theta_star: np.ndarray
    u: float
    omega: np.ndarray
    width: int = field(init=False)

    def __post_init__(self):
        for name in ("theta_star", "omega"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        nz = np.flatnonzero(self.theta_star)
        object.__setattr__(self, "width", int(nz[-1]) + 1 if nz.size else 0)

    @property
    def theta_sq(self) -> np.ndarray:
        return self.theta_star**2

    def l2_sq(self) -> float:
        return 2.0 * math.fsum(self.theta_sq)

    def ellipsoid_sq(self) -> float:
        return 2.0 * math.fsum(self.space.semi_axes(self.K) ** 2 * self.theta_sq)

    def omega_sq_sum(self) -> float:
        return 2.0 * math.fsum(self.omega**2)


def _profile_from_squares(space, r, eps, x) -> ExtremalProfile:
    # x holds theta_k^2 for k = 1..K; work with v_k^2 = theta_k^2 / eps^2 to keep
    # fourth powers away from underflow.
    x = np.asarray(x, dtype=float)
    v2 = x / eps**2
    u = math.sqrt(2.0 * math.fsum(v2**2) / 2.0)
    omega = v2 / (2.0 * u)
    return ExtremalProfile(space, float(r), float(eps), len(x), np.sqrt(x), u, omega)


def _check_ellipsoid(space, x) -> None:
    value = 2.0 * math.fsum(space.semi_axes(len(x)) ** 2 * x)
    if value > 1.0 + 1e-10:
        raise DomainError(f"radius outside ellipsoid (norm^2 = {value:.6g})")


def _water_fill(a: np.ndarray, r: float) -> np.ndarray:
    """Minimise sum x_k^2 subject to 2 sum x_k = r^2, 2 sum a_k x_k <= 1, x >= 0.

    ``a`` holds squared semi-axes in increasing order. Stationarity gives
    x_k proportional to (1 - a_k / C)_+ for a cutoff C, and the ellipsoid value
    is an increasing function of C, so C is found by bisection; the active set
    then fixes C in closed form.
    """
    K = len(a)
    target = 1.0 / r**2  # required weighted mean of a over the profile
    if a[0] > target * (1.0 + 1e-12):
        raise DomainError("radius outside ellipsoid")
    if math.fsum(a) / K <= target:
        return np.full(K, r**2 / (2.0 * K))

    s1 = np.concatenate([[0.0], np.cumsum(a)])
    s2 = np.concatenate([[0.0], np.cumsum(a * a)])

    def weighted_mean(C):
        n = int(np.searchsorted(a, C, side="left"))
        return (s1[n] - s2[n] / C) / (n - s1[n] / C)

    lo, hi = a[0], 2.0 * a[0]
    while weighted_mean(hi) < target:
        lo, hi = hi, 2.0 * hi
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if weighted_mean(mid) < target:
            lo = mid
        else:
            hi = mid
    n = max(int(np.searchsorted(a, hi, side="left")), 1)
    denom = s1[n] * target - s2[n]
    if n > 1 and denom > 0:
        C = denom / (n * target - s1[n])
        if not a[n - 1] < C:
            C = hi
    else:
        C = hi
    w = np.clip(1.0 - a / C, 0.0, None)
    return w * (r**2 / (2.0 * math.fsum(w)))


def solve_extremal(space: FunctionSpace, r: float, eps: float, K: int | None = None) -> ExtremalProfile:
    """Solve the quartic extremal problem on the support 1 <= |k| <= K.

    K defaults to ``bandwidth(space, r)``; passing it explicitly restricts the
    support, which is only meant for tests and diagnostics.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if K is None:
        K = bandwidth(space, r)
    elif K < 1:
        raise DomainError("K must be at least 1")
    if space.kind is SpaceKind.ANALYTIC:
        x = np.full(K, r**2 / (2.0 * K))
        _check_ellipsoid(space, x)
    else:
        x = _water_fill(space.semi_axes(K) ** 2, r)
        _check_ellipsoid(space, x)
    return _profile_from_squares(space, r, eps, x)


def u_exact(profile: ExtremalProfile) -> float:
    return profile.u


def _u_at(space, r, eps) -> float:
    return solve_extremal(space, r, eps).u


def invert_u(space: FunctionSpace, eps: float, target: float) -> float:
    """Radius r* with u_exact(r*) = target.

    u is nondecreasing in r. For the analytic family it jumps where the
    bandwidth changes; a target inside such a gap returns the smallest radius
    whose u reaches the target.
    """
    if not target > 0:
        raise DomainError(f"target must be positive, got {target!r}")
    if not eps > 0:
        raise DomainError("eps must be positive")
    r_max = space.max_radius() * (1.0 - 1e-12)
    if space.kind is SpaceKind.SOBOLEV:
        guess = (target * eps**2 / c_sigma(space.sigma)) ** (1.0 / (2.0 + 1.0 / (2.0 * space.sigma)))
    else:
        guess = eps * math.sqrt(target)
    guess = min(guess, r_max)

    lo = hi = guess
    while _u_at(space, lo, eps) >= target:
        lo /= 2.0
    while _u_at(space, hi, eps) < target:
        if hi >= r_max:
            raise DomainError("target u not reachable inside the ellipsoid")
        lo = hi
        hi = min(2.0 * hi, r_max)

    # bisect in log r down to a bracket far tighter than BISECTION_RTOL on u
    for _ in range(BISECTION_MAX_ITER):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi or hi / lo - 1.0 < 1e-14:
            break
        if _u_at(space, mid, eps) < target:
            lo = mid
        else:
            hi = mid
    return hi


@lru_cache(maxsize=512)
def boundary_radius(space: FunctionSpace, eps: float, target: float) -> float:
    """Memoised ``invert_u``; profiles at a boundary are reused across replications."""
    return invert_u(space, eps, target)


def oracle_extremal(space: FunctionSpace, r: float, eps: float, K_cap: int) -> ExtremalProfile:
    """Brute-force solution of the extremal problem on 1 <= |k| <= K_cap.

    Independent of ``solve_extremal``. With y_k = theta_k^2 / r^2 the problem is
    min sum y^2 s.t. sum y = 1/2, sum e_k y_k <= 1/2, y >= 0 (half support,
    e_k = r^2 c_k^2). Its Lagrange dual in the two multipliers is concave; a
    dense grid picks a start and L-BFGS-B ascends from there. The primal point
    is read off the optimal multipliers.
    """
    if not 1 <= K_cap <= 16:
        raise DomainError("K_cap must lie in 1..16")
    if not (r > 0 and eps > 0):
        raise DomainError("r and eps must be positive")
    e = r**2 * space.semi_axes(K_cap) ** 2
    if e[0] > 1.0 + 1e-12:
        raise DomainError("radius outside ellipsoid")
    if K_cap == 1:
        return _profile_from_squares(space, r, eps, np.array([r**2 / 2.0]))
    rel = e / e[0]

    def primal(lam, m):
        return 0.5 * np.clip(lam - m * rel, 0.0, None)

    def neg_dual(p):
        lam, m = p
        z = np.clip(lam - m * rel, 0.0, None)
        value = -0.25 * (z @ z) + 0.5 * lam - 0.5 * m / e[0]
        y = 0.5 * z
        grad = np.array([0.5 - y.sum(), y @ rel - 0.5 / e[0]])
        return -value, -grad

    # grid in (lam, beta) with m = beta * lam; beta in log scale since rel spans decades
    lam = np.geomspace(1.0 / (4.0 * K_cap), 2.0, 300)
    beta = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, 400, endpoint=False)])
    L, B = np.meshgrid(lam, beta, indexing="ij")
    Z = np.clip(L[..., None] * (1.0 - B[..., None] * rel), 0.0, None)
    dual = -0.25 * (Z * Z).sum(-1) + 0.5 * L - 0.5 * L * B / e[0]
    i, j = np.unravel_index(np.argmax(dual), dual.shape)
    start = np.array([L[i, j], L[i, j] * B[i, j]])

    res = optimize.minimize(
        neg_dual,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=[(None, None), (0.0, None)],
        options={"ftol": 1e-15, "gtol": 1e-14, "maxiter": 10000},
    )
    y = primal(*res.x)
    y *= 0.5 / y.sum()
    if e @ y > 0.5 * (1.0 + 1e-6):
        raise DomainError("oracle found no feasible point")
    return _profile_from_squares(space, r, eps, r**2 * y)
