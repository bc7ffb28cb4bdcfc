"""Ring plant, circulant eigensystem, delay augmentation and sensing matrices.

The physical plant is an ``n``-node ring where every node couples to itself
and to its two neighbours with weight ``a / 3``. Sensing delays are modelled
by appending ``d`` shifted copies of the ring state, so a delayed sensor
becomes a memoryless read of the most-delayed copy.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

# Relative slack when comparing eigenvalue magnitudes for ties and unit-circle tests.
_MAG_EPS = 1e-12


@dataclass(frozen=True)
class RingSpec:
    """Physical ring parameters: node count ``n`` and instability scale ``a``."""

    n: int
    a: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"ring needs n >= 3 nodes, got n={self.n!r}")
        if not np.isfinite(self.a) or self.a <= 0:
            raise ValueError(f"instability scale must be positive, got a={self.a!r}")


class SensorMode(str, enum.Enum):
    FAST_ONLY = "fast"
    SLOW_ONLY = "slow"
    DIVERSE = "diverse"


@dataclass(frozen=True)
class SensorConfig:
    """Active sensing architecture.

    ``q`` is the number of fast eigen-direction sensors (ignored for
    slow-only), ``d`` the delay of the dense sensor in steps. Fast-only
    configurations still carry ``d`` so the augmented state has the same
    size across modes.
    """

    mode: SensorMode
    q: Optional[int] = None
    d: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SensorMode(self.mode))
        if int(self.d) != self.d or self.d < 0:
            raise ValueError(f"delay must be a non-negative integer, got d={self.d!r}")
        if self.mode is SensorMode.SLOW_ONLY:
            object.__setattr__(self, "q", None)
        elif self.q is None or int(self.q) != self.q or self.q < 1:
            raise ValueError(f"{self.mode.value} sensing needs q >= 1, got q={self.q!r}")

    @classmethod
    def fast(cls, q: int, d: int = 0) -> "SensorConfig":
        return cls(SensorMode.FAST_ONLY, q, d)

    @classmethod
    def slow(cls, d: int) -> "SensorConfig":
        return cls(SensorMode.SLOW_ONLY, None, d)

    @classmethod
    def diverse(cls, q: int, d: int) -> "SensorConfig":
        return cls(SensorMode.DIVERSE, q, d)

    def with_delay(self, d: int) -> "SensorConfig":
        return SensorConfig(self.mode, self.q, d)

    def validate_for(self, spec: RingSpec) -> None:
        if self.q is not None and self.q > spec.n:
            raise ValueError(f"q={self.q} exceeds ring size n={spec.n}")


@dataclass(frozen=True)
class PlantDims:
    n: int
    d: int
    q_effective: int
    N: int
    p: int


@dataclass(frozen=True)
class AugmentedPlant:
    """Delay-augmented full-control plant ``x+ = A x + B2 u + B1 w``, ``y = C x``."""

    spec: RingSpec
    sensors: SensorConfig
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C: np.ndarray
    dims: PlantDims


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of the ring matrix in canonical order.

    ``vectors[i]`` is the unit eigenvector belonging to ``values[i]``.
    ``labels[i]`` is ``(k, kind)`` with frequency index ``k`` and kind one of
    ``"dc"``, ``"cos"``, ``"sin"``, ``"alt"``.
    """

    values: np.ndarray
    vectors: np.ndarray
    labels: Tuple[Tuple[int, str], ...] = field(default=())

    @property
    def pairs(self) -> List[Tuple[float, np.ndarray]]:
        return [(float(v), vec) for v, vec in zip(self.values, self.vectors)]


def _mode_gains(n: int) -> np.ndarray:
    """Unscaled circulant eigenvalues ``1 + 2 cos(2 pi k / n)`` for k = 0..n-1."""
    k = np.arange(n)
    return 1.0 + 2.0 * np.cos(2.0 * np.pi * k / n)


def ring_eigenvalues(spec: RingSpec) -> np.ndarray:
    """Analytic eigenvalues indexed by frequency k (not canonically ordered)."""
    return spec.a / 3.0 * _mode_gains(spec.n)


def build_ring_matrix(spec: RingSpec) -> np.ndarray:
    n = spec.n
    eye = np.eye(n)
    M = eye + np.roll(eye, 1, axis=1) + np.roll(eye, -1, axis=1)
    return spec.a / 3.0 * M


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def ring_eigensystem(spec: RingSpec) -> EigenSystem:
    """Real Fourier eigenbasis of the ring, ordered by |eigenvalue| descending.

    Ties (the k / n-k degenerate pairs, and equal magnitudes of opposite sign)
    are broken by frequency index ascending, cosine before sine.
    """
    n = spec.n
    lam = ring_eigenvalues(spec)
    j = np.arange(n)
    entries = []
    for k in range(n // 2 + 1):
        theta = 2.0 * np.pi * k * j / n
        if k == 0:
            entries.append((k, 0, "dc", np.full(n, 1.0 / np.sqrt(n))))
        elif 2 * k == n:
            entries.append((k, 0, "alt", np.cos(theta) / np.sqrt(n)))
        else:
            s = np.sqrt(2.0 / n)
            entries.append((k, 0, "cos", s * np.cos(theta)))
            entries.append((k, 1, "sin", s * np.sin(theta)))
    gains = np.abs(_mode_gains(n))
    scale = gains.max()

    def key(e):
        k, sub, _, _ = e
        # quantise so that analytically equal magnitudes compare equal
        return (-np.round(gains[k] / scale, 11), k, sub)

    entries.sort(key=key)
    values = np.array([lam[e[0]] for e in entries])
    vectors = np.array([_fix_sign(e[3]) for e in entries])
    labels = tuple((e[0], e[2]) for e in entries)
    return EigenSystem(values=values, vectors=vectors, labels=labels)


def count_unstable(spec: RingSpec) -> int:
    """Number of ring eigenvalues with magnitude >= 1 (with multiplicity)."""
    return int(np.sum(np.abs(ring_eigenvalues(spec)) >= 1.0 - _MAG_EPS))


def build_fast_sensing(spec: RingSpec, q: int, d: int) -> np.ndarray:
    if not 1 <= q <= spec.n:
        raise ValueError(f"q must lie in [1, {spec.n}], got {q}")
    if d < 0:
        raise ValueError(f"delay must be non-negative, got {d}")
    n = spec.n
    E = ring_eigensystem(spec).vectors[:q]
    C = np.zeros((q, n * (d + 1)))
    C[:, :n] = E
    return C


def build_slow_sensing(spec: RingSpec, d: int) -> np.ndarray:
    if d < 0:
        raise ValueError(f"delay must be non-negative, got {d}")
    n = spec.n
    C = np.zeros((n, n * (d + 1)))
    C[:, n * d:] = np.eye(n)
    return C


def delay_state_matrix(spec: RingSpec, d: int) -> np.ndarray:
    """``[[A_r, 0], [I, 0]]``: ring dynamics followed by a pure shift chain of d copies."""
    n = spec.n
    N = n * (d + 1)
    A = np.zeros((N, N))
    A[:n, :n] = build_ring_matrix(spec)
    if d:
        A[n:, : n * d] = np.eye(n * d)
    return A


def augment(spec: RingSpec, sensors: SensorConfig) -> AugmentedPlant:
    sensors.validate_for(spec)
    n, d = spec.n, sensors.d
    N = n * (d + 1)
    A = delay_state_matrix(spec, d)
    B1 = np.zeros((N, n))
    B1[:n] = np.eye(n)
    B2 = np.eye(N)
    mode = sensors.mode
    if mode is SensorMode.FAST_ONLY:
        C = build_fast_sensing(spec, sensors.q, d)
    elif mode is SensorMode.SLOW_ONLY:
        C = build_slow_sensing(spec, d)
    else:
        C = np.vstack([build_fast_sensing(spec, sensors.q, d), build_slow_sensing(spec, d)])
    q_eff = 0 if mode is SensorMode.SLOW_ONLY else sensors.q
    dims = PlantDims(n=n, d=d, q_effective=q_eff, N=N, p=C.shape[0])
    for M in (A, B1, B2, C):
        M.setflags(write=False)
    return AugmentedPlant(spec=spec, sensors=sensors, A=A, B1=B1, B2=B2, C=C, dims=dims)


def spectral_radius(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))
