"""Impulse-response simulation of the augmented plant and trajectory classification."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .riccati import SynthesisResult
from .ring import AugmentedPlant

TOL_ZERO = 1e-8
TOL_DIVERGE = 1e6
IMPULSE_HORIZON = 20
COST_HORIZON = 200

# envelope change below this relative amount counts as flat
_FLAT = 1e-6


class Kind(str, enum.Enum):
    STABLE = "stable"
    DEADBEAT = "deadbeat"
    DIVERGENT = "divergent"
    OSCILLATORY_DIVERGENT = "oscillatory_divergent"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class Classification:
    kind: Kind
    step: Optional[int] = None

    @property
    def decays(self) -> bool:
        return self.kind in (Kind.STABLE, Kind.DEADBEAT)

    @property
    def divergent(self) -> bool:
        return self.kind in (Kind.DIVERGENT, Kind.OSCILLATORY_DIVERGENT)

    def __str__(self):
        names = {
            Kind.STABLE: "Stable",
            Kind.DEADBEAT: "Deadbeat",
            Kind.DIVERGENT: "Divergent",
            Kind.OSCILLATORY_DIVERGENT: "Oscillatory-Divergent",
            Kind.MARGINAL: "Marginal",
        }
        name = names[self.kind]
        return f"{name}({self.step})" if self.kind is Kind.DEADBEAT else name


@dataclass
class Trajectory:
    """Impulse response ``x(0..T)``, ``u(0..T-1)`` of the full augmented state."""

    states: np.ndarray
    inputs: np.ndarray
    n: int
    classification: Optional[Classification] = None

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    @property
    def ring_slice(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def empirical_cost(self) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.sum(self.ring_slice ** 2))


def impulse_state(plant: AugmentedPlant, node: int) -> np.ndarray:
    """``x(0) = B1 e_node`` with 1-based ``node``."""
    n = plant.dims.n
    if not 1 <= node <= n:
        raise ValueError(f"node must lie in [1, {n}], got {node}")
    return plant.B1[:, node - 1].copy()


def _run(A, B2, feedback, x0, T):
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    N = A.shape[0]
    X = np.empty((T + 1, N))
    U = np.empty((T, B2.shape[1]))
    X[0] = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            u = feedback(X[t])
            U[t] = u
            X[t + 1] = A @ X[t] + B2 @ u
    return X, U


def open_loop_impulse(plant: AugmentedPlant, node: int = 1, T: int = IMPULSE_HORIZON,
                      tol_zero: float = TOL_ZERO, tol_diverge: float = TOL_DIVERGE) -> Trajectory:
    zero = np.zeros(plant.B2.shape[1])
    X, U = _run(plant.A, plant.B2, lambda x: zero, impulse_state(plant, node), T)
    traj = Trajectory(X, U, plant.dims.n)
    traj.classification = classify(traj, tol_zero, tol_diverge)
    return traj


def closed_loop_impulse(plant: AugmentedPlant, gain: np.ndarray, node: int = 1,
                        T: int = IMPULSE_HORIZON, tol_zero: float = TOL_ZERO,
                        tol_diverge: float = TOL_DIVERGE, x0: Optional[np.ndarray] = None) -> Trajectory:
    """Simulate ``u(t) = -gain C x(t)`` from an impulse on ``node`` (or from ``x0``)."""
    gain = np.asarray(gain, dtype=float)
    if gain.shape != (plant.B2.shape[1], plant.C.shape[0]):
        raise ValueError(f"gain shape {gain.shape} does not match plant "
                         f"{(plant.B2.shape[1], plant.C.shape[0])}")
    GC = gain @ plant.C
    start = impulse_state(plant, node) if x0 is None else np.asarray(x0, dtype=float)
    X, U = _run(plant.A, plant.B2, lambda x: -(GC @ x), start, T)
    traj = Trajectory(X, U, plant.dims.n)
    traj.classification = classify(traj, tol_zero, tol_diverge)
    return traj


def recursion_residual(plant: AugmentedPlant, traj: Trajectory) -> float:
    """Largest ``|x(t+1) - A x(t) - B2 u(t)|``; zero for trajectories produced here."""
    worst = 0.0
    for t in range(traj.horizon):
        r = traj.states[t + 1] - (plant.A @ traj.states[t] + plant.B2 @ traj.inputs[t])
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def _norms(M):
    with np.errstate(invalid="ignore"):
        out = np.max(np.abs(M), axis=1)
    return np.where(np.isnan(out), np.inf, out)


def sign_lobes(series: np.ndarray, tol_zero: float = TOL_ZERO) -> np.ndarray:
    """Signed peak of each maximal run of one sign, entries within ``tol_zero`` skipped."""
    s = np.asarray(series, dtype=float)
    peaks = []
    for v in s[np.abs(s) > tol_zero]:
        if peaks and np.sign(v) == np.sign(peaks[-1]):
            if abs(v) > abs(peaks[-1]):
                peaks[-1] = v
        else:
            peaks.append(v)
    return np.array(peaks)


def sign_alternation(series: np.ndarray, tol_zero: float = TOL_ZERO, min_peaks: int = 3):
    """Sign pattern of the series, read lobe by lobe.

    Returns ``(alternating, growing)``: whether the sign changes at least
    ``min_peaks - 1`` times, and whether the successive lobe peaks strictly
    increase in magnitude. A sign flip at every step counts, each step being
    its own lobe.
    """
    peaks = sign_lobes(series, tol_zero)
    if len(peaks) < min_peaks:
        return False, False
    growing = bool(np.all(np.diff(np.abs(peaks)) > 0))
    return True, growing


def detect_alternation(traj: Trajectory, tol_zero: float = TOL_ZERO, require_growth: bool = True) -> bool:
    """Alternation test on the ring state with the largest initial magnitude."""
    ring = traj.ring_slice
    j = int(np.argmax(np.abs(ring[0])))
    alternating, growing = sign_alternation(ring[:, j], tol_zero)
    return alternating and (growing or not require_growth)


def classify(traj: Trajectory, tol_zero: float = TOL_ZERO, tol_diverge: float = TOL_DIVERGE) -> Classification:
    ring = _norms(traj.ring_slice)
    full = _norms(traj.states)

    below = ring <= tol_zero
    if below.all():
        return Classification(Kind.DEADBEAT, 0)
    if below[-1]:
        k = len(below) - int(np.argmin(below[::-1]))
        # finite-time collapse, not a geometric tail slipping under tol_zero
        if ring[k] <= tol_zero * ring[k - 1]:
            return Classification(Kind.DEADBEAT, k)

    q = max(1, len(ring) // 4)
    late = ring[-q:].max()
    prev = ring[-2 * q:-q].max() if len(ring) >= 2 * q else ring[0]
    growing = late > ring[0] and late > (1.0 + _FLAT) * prev
    if full.max() > tol_diverge or not np.isfinite(full.max()) or growing:
        if detect_alternation(traj, tol_zero):
            return Classification(Kind.OSCILLATORY_DIVERGENT)
        return Classification(Kind.DIVERGENT)
    if late < ring[0] and (late <= tol_zero or late < (1.0 - _FLAT) * prev):
        return Classification(Kind.STABLE)
    return Classification(Kind.MARGINAL)


def impulse_costs(plant: AugmentedPlant, gain: np.ndarray, T: int = COST_HORIZON) -> np.ndarray:
    """Empirical ring-state energy of the closed-loop impulse response, per impulse node."""
    return np.array([closed_loop_impulse(plant, gain, node, T).empirical_cost
                     for node in range(1, plant.dims.n + 1)])


def empirical_vs_analytic_cost(plant: AugmentedPlant, gain: np.ndarray,
                               synthesis: SynthesisResult, T: int = COST_HORIZON) -> float:
    """Relative gap between the summed impulse energies and ``Tr(B1' P B1)``.

    The DARE cost is the squared H2 norm from ``w`` to the ring states, i.e.
    the energy of the impulse responses summed over all input nodes, so the
    comparison is against ``cost_total`` with no extra factor.
    """
    if not synthesis.converged or not math.isfinite(synthesis.cost_total):
        raise ValueError("synthesis did not converge")
    total = float(np.sum(impulse_costs(plant, gain, T)))
    return abs(total - synthesis.cost_total) / synthesis.cost_total
