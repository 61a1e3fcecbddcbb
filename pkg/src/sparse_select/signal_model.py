"""Sparse additive signals in the Fourier sequence model.

Coefficient matrices use a fixed column layout of width 2W: columns 0..W-1
carry k = 1..W and columns W..2W-1 carry k = -1..-W. A profile with fewer
than W nonzero pairs is zero-padded, which leaves every statistic unchanged.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .ellipsoids import ExtremalProfile, FunctionSpace
from .errors import DimensionError, DomainError


class SignMode(enum.Enum):
    FIXED = "fixed"
    RADEMACHER = "rademacher"


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    eta: np.ndarray
    d: int
    s: int

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.int8)
        if eta.shape != (self.d,):
            raise DimensionError(f"eta has shape {eta.shape}, expected ({self.d},)")
        if not 1 <= self.s <= self.d or int(eta.sum()) != self.s or np.any((eta != 0) & (eta != 1)):
            raise DomainError("pattern must be binary with exactly s ones, 1 <= s <= d")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def from_support(cls, d: int, support) -> SparsityPattern:
        eta = np.zeros(d, dtype=np.int8)
        eta[np.asarray(support, dtype=np.intp)] = 1
        return cls(eta, d, int(eta.sum()))


@dataclass(frozen=True, eq=False)
class SignalMatrix:
    theta: np.ndarray
    pattern: SparsityPattern
    radius: float

    @property
    def width(self) -> int:
        return self.theta.shape[1] // 2


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    x: np.ndarray
    eps: float

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def width(self) -> int:
        return self.x.shape[1] // 2


def sample_pattern(d: int, s: int, rng: np.random.Generator) -> SparsityPattern:
    """Uniform draw from the patterns with exactly s active components."""
    if not 1 <= s <= d:
        raise DomainError(f"need 1 <= s <= d, got s={s}, d={d}")
    support = rng.choice(d, size=s, replace=False, shuffle=False)
    return SparsityPattern.from_support(d, support)


def layout(half: np.ndarray, width: int | None = None) -> np.ndarray:
    """Place per-|k| values into the (k > 0 | k < 0) column layout, zero padded to ``width``."""
    half = np.asarray(half, dtype=float)
    width = len(half) if width is None else width
    if width < len(half) and np.any(half[width:]):
        raise DimensionError(f"width {width} truncates nonzero coefficients")
    out = np.zeros(2 * width)
    n = min(width, len(half))
    out[:n] = half[:n]
    out[width : width + n] = half[:n]
    return out


def embed_signal(
    profile: ExtremalProfile,
    pattern: SparsityPattern,
    sign_mode: SignMode,
    rng: np.random.Generator,
    width: int | None = None,
) -> SignalMatrix:
    """Put +-theta* on every active row; inactive rows stay zero.

    ``width`` defaults to the profile's nonzero width.
    """
    width = profile.width if width is None else width
    row = layout(profile.theta_star[: profile.width], width)
    theta = np.zeros((pattern.d, 2 * width))
    active = np.flatnonzero(pattern.eta)
    theta[active] = row
    if SignMode(sign_mode) is SignMode.RADEMACHER:
        signs = rng.integers(0, 2, size=(active.size, 2 * width), dtype=np.int8) * 2 - 1
        theta[active] *= signs
    return SignalMatrix(theta, pattern, profile.r)


def sample_observations(signal: SignalMatrix, eps: float, rng: np.random.Generator) -> ObservationMatrix:
    if not eps > 0:
        raise DomainError("eps must be positive")
    noise = rng.standard_normal(signal.theta.shape)
    return ObservationMatrix(signal.theta + eps * noise, float(eps))


def basis_eval(k: int, x: float) -> float:
    """Trigonometric orthonormal basis of L2[0, 1]."""
    if k == 0:
        return 1.0
    if k > 0:
        return math.sqrt(2.0) * math.cos(2.0 * math.pi * k * x)
    return math.sqrt(2.0) * math.sin(2.0 * math.pi * -k * x)


def space_norm(coeffs, space: FunctionSpace) -> float:
    """sqrt(sum c_k^2 theta_k^2) over k != 0.

    ``coeffs`` is either a mapping k -> theta_k or an array in column layout.
    """
    if isinstance(coeffs, Mapping):
        if 0 in coeffs and coeffs[0] != 0:
            raise DomainError("the constant coefficient is excluded")
        items = [(abs(int(k)), float(v)) for k, v in coeffs.items() if k != 0]
        if not items:
            return 0.0
        K = max(k for k, _ in items)
        c2 = space.semi_axes(K) ** 2
        return math.sqrt(math.fsum(c2[k - 1] * v * v for k, v in items))
    arr = np.asarray(coeffs, dtype=float)
    if arr.ndim != 1 or arr.size % 2:
        raise DimensionError("layout arrays must be one-dimensional with even length")
    W = arr.size // 2
    if W == 0:
        return 0.0
    c2 = np.tile(space.semi_axes(W) ** 2, 2)
    return math.sqrt(math.fsum(c2 * arr * arr))
