"""Forward / internal-feedback split of full-control gains and IFP knockout."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .riccati import DEFAULT_OPTIONS, DareOptions, SynthesisResult, fc_synthesis
from .ring import RingSpec, SensorConfig, SensorMode, augment, spectral_radius
from .sim import Classification, Trajectory, closed_loop_impulse, detect_alternation

ABLATION_HORIZON = 60


@dataclass(frozen=True)
class GainPartition:
    """Rows of a gain acting on ring states (``forward``) and on delay states (``ifp``)."""

    forward: np.ndarray
    ifp: np.ndarray
    block_norms: tuple

    def restack(self) -> np.ndarray:
        return np.vstack([self.forward, self.ifp])


def _check(gain, n, d):
    gain = np.asarray(gain, dtype=float)
    if gain.ndim != 2 or gain.shape[0] != n * (d + 1):
        raise ValueError(f"gain with {gain.shape[0] if gain.ndim == 2 else '?'} rows "
                         f"does not match n(d+1) = {n * (d + 1)}")
    return gain


def partition(gain: np.ndarray, n: int, d: int) -> GainPartition:
    gain = _check(gain, n, d)
    ifp = gain[n:]
    norms = tuple(float(np.linalg.norm(ifp[k * n:(k + 1) * n], "fro")) for k in range(d))
    return GainPartition(forward=gain[:n].copy(), ifp=ifp.copy(), block_norms=norms)


def ablate(gain: np.ndarray, n: int, d: int, depths: Optional[Iterable[int]] = None) -> np.ndarray:
    """Zero the IFP rows of ``gain``.

    ``depths`` restricts the knockout to the given delay depths (1..d); this
    partial form is exploratory, the default removes every IFP row.
    """
    out = _check(gain, n, d).copy()
    if depths is None:
        out[n:] = 0.0
        return out
    for k in depths:
        if not 1 <= k <= d:
            raise ValueError(f"delay depth must lie in [1, {d}], got {k}")
        out[k * n:(k + 1) * n] = 0.0
    return out


@dataclass
class AblationReport:
    spec: RingSpec
    sensors: SensorConfig
    intact: Classification
    intact_cost: float
    ablated: Classification
    ablated_cost: float
    ablated_radius: float
    alternation_detected: bool
    block_norms: tuple
    synthesis: SynthesisResult = field(repr=False)
    intact_trajectory: Trajectory = field(repr=False)
    ablated_trajectory: Trajectory = field(repr=False)


def ablation_study(spec: RingSpec, sensors: SensorConfig, opts: DareOptions = DEFAULT_OPTIONS,
                   T: int = ABLATION_HORIZON, node: int = 1) -> AblationReport:
    """Synthesize, then compare the intact and IFP-ablated closed loops.

    ``ablated_cost`` is the node-averaged impulse energy over the horizon
    (the per-node convention), or infinity when the ablated loop diverges.
    """
    if sensors.mode is SensorMode.FAST_ONLY:
        raise ValueError("fast-only controllers have no IFP layer to ablate")
    plant = augment(spec, sensors)
    n, d = spec.n, sensors.d
    res = fc_synthesis(plant, opts)
    intact = closed_loop_impulse(plant, res.gain, node, T)
    L_abl = ablate(res.gain, n, d)
    abl = closed_loop_impulse(plant, L_abl, node, T)
    radius = spectral_radius(plant.A - L_abl @ plant.C)
    if abl.classification.divergent or radius >= 1.0:
        abl_cost = math.inf
    else:
        abl_cost = float(np.mean([closed_loop_impulse(plant, L_abl, k, T).empirical_cost
                                  for k in range(1, n + 1)]))
    return AblationReport(
        spec=spec,
        sensors=sensors,
        intact=intact.classification,
        intact_cost=res.cost_per_node,
        ablated=abl.classification,
        ablated_cost=abl_cost,
        ablated_radius=radius,
        alternation_detected=detect_alternation(abl),
        block_norms=partition(res.gain, n, d).block_norms,
        synthesis=res,
        intact_trajectory=intact,
        ablated_trajectory=abl,
    )
