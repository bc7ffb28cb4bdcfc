"""Zero-noise DARE solver, full-control synthesis and its state-feedback dual.

The DARE is solved by the fixed-point (value) iteration started at ``P0 = Q``
with a truncated pseudo-inverse in place of ``(R + B'PB)^-1``. Divergence of
the iteration is a result, not an error: it marks a configuration that no
linear controller can stabilise and is reported as infinite cost.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from . import _kernels
from ._kernels import sym_pinv
from .ring import AugmentedPlant, spectral_radius


class Status(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    MAX_ITER = "max_iter_exceeded"


@dataclass(frozen=True)
class DareOptions:
    """Iteration controls.

    ``accelerate`` enables geometric-tail handling: once successive
    increments shrink or grow at a settled common ratio, a ratio >= 1 is
    reported as divergence immediately, and a ratio < 1 triggers a few
    Newton (Hewer) steps that freeze the current gain and solve its
    closed-loop Lyapunov equation by doubling. Their result is only
    accepted through the ordinary residual test, so the fixed point is the
    one plain iteration converges to.
    """

    tol_rel: float = 1e-11
    max_iter: int = 200_000
    divergence_norm: float = 1e12
    pinv_rel_tol: float = 1e-9
    accelerate: bool = True

    def __post_init__(self):
        for name in ("tol_rel", "divergence_norm", "pinv_rel_tol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if not self.tol_rel < 1 or not self.pinv_rel_tol < 1:
            raise ValueError("tol_rel and pinv_rel_tol must be below 1")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")


DEFAULT_OPTIONS = DareOptions()

_CHUNK = 32
_SETTLE = 8          # consecutive increment ratios that must agree
_RATIO_SPREAD = 1e-9  # relative agreement required between those ratios


@dataclass
class SynthesisResult:
    P: np.ndarray
    gain: np.ndarray
    cost_total: float
    cost_per_node: float
    closed_loop_radius: float
    status: Status
    iterations: int

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def stabilizing(self) -> bool:
        return self.converged and self.closed_loop_radius < 1.0


def riccati_map(A, B, Q, R, P, pinv_rel_tol=DEFAULT_OPTIONS.pinv_rel_tol):
    """``F(P) = A'PA - A'PB (R + B'PB)^+ B'PA + Q`` evaluated with numpy."""
    return _kernels.get_backend("python").riccati_step(A, B, Q, R, P, pinv_rel_tol)


def dare_residual(A, B, Q, R, P, pinv_rel_tol=DEFAULT_OPTIONS.pinv_rel_tol) -> float:
    return float(np.linalg.norm(P - riccati_map(A, B, Q, R, P, pinv_rel_tol), np.inf))


def _settled_ratio(incs) -> Optional[float]:
    incs = np.asarray(incs, dtype=float)
    if incs.size < _SETTLE + 1 or not np.all(np.isfinite(incs)) or np.any(incs <= 0):
        return None
    ratios = incs[1:] / incs[:-1]
    r = ratios[-1]
    spread = np.max(np.abs(ratios - r))
    if spread > _RATIO_SPREAD * r:
        return None
    # increments that have stopped shrinking (a mode on the unit circle gives
    # exactly 1) mean unbounded growth; just below 1 the estimate is too noisy to act on
    if r < 1.0 and 1.0 - r <= 10.0 * spread:
        return None
    return float(r)


def lyapunov_doubling(F, W, max_doublings: int = 64) -> Optional[np.ndarray]:
    """``X = sum_k F'^k W F^k`` by Smith's squaring; ``None`` if it does not settle."""
    X = np.array(W, dtype=float)
    Fk = np.array(F, dtype=float)
    for _ in range(max_doublings):
        dX = Fk.T @ X @ Fk
        X = X + dX
        if not np.all(np.isfinite(X)):
            return None
        if np.linalg.norm(dX, np.inf) <= 1e-16 * np.linalg.norm(X, np.inf):
            return 0.5 * (X + X.T)
        Fk = Fk @ Fk
    return None


def _newton_polish(A, B, Q, R, P, opts: DareOptions, steps: int = 8) -> Optional[np.ndarray]:
    for _ in range(steps):
        K = sym_pinv(R + B.T @ P @ B, opts.pinv_rel_tol) @ (B.T @ P @ A)
        F = A - B @ K
        if spectral_radius(F) >= 1.0:
            return None
        P = lyapunov_doubling(F, Q + K.T @ R @ K)
        if P is None:
            return None
        if dare_residual(A, B, Q, R, P, opts.pinv_rel_tol) <= opts.tol_rel * (1.0 + np.linalg.norm(P, np.inf)):
            return P
    return None


def _as_matrix(M, rows, cols, name):
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim == 0 and rows == cols == 1:
        M = M.reshape(1, 1)
    if M.shape != (rows, cols):
        raise ValueError(f"{name} has shape {M.shape}, expected {(rows, cols)}")
    return M


def solve_dare_sf(A, B, Q, R, opts: DareOptions = DEFAULT_OPTIONS) -> Tuple[np.ndarray, Status, int]:
    """Fixed point of ``P <- A'PA - A'PB (R + B'PB)^+ B'PA + Q`` from ``P0 = Q``.

    Returns ``(P, status, iterations)``. ``P`` is the last iterate whatever
    the status.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    N = A.shape[0]
    A = _as_matrix(A, N, N, "A")
    B = np.asarray(B, dtype=np.float64)
    if B.ndim < 2:
        B = B.reshape(N, -1)
    m = B.shape[1]
    B = _as_matrix(B, N, m, "B")
    Q = _as_matrix(Q, N, N, "Q")
    R = _as_matrix(R, m, m, "R")
    for M, name in ((Q, "Q"), (R, "R")):
        if not np.allclose(M, M.T, rtol=0, atol=1e-12 * (1 + np.abs(M).max(initial=0))):
            raise ValueError(f"{name} must be symmetric")

    P = Q.copy()
    P_prev = np.empty_like(P)
    history = []
    k = 0
    while k < opts.max_iter:
        steps = min(_CHUNK, opts.max_iter - k)
        incs = np.empty(steps)
        done, code = _kernels.riccati_steps(
            A, B, Q, R, P, P_prev, incs, steps,
            opts.tol_rel, opts.divergence_norm, opts.pinv_rel_tol,
        )
        k += done
        if code == _kernels.BLOWUP:
            return P, Status.DIVERGED, k
        if code == _kernels.CONVERGED:
            size = np.linalg.norm(P, np.inf)
            if dare_residual(A, B, Q, R, P, opts.pinv_rel_tol) <= opts.tol_rel * (1.0 + size):
                return P, Status.CONVERGED, k
            history = []
            continue
        if not opts.accelerate:
            continue
        history.extend(incs[:done].tolist())
        del history[: -(_SETTLE + 1)]
        if k < N + _SETTLE + 1:
            continue
        r = _settled_ratio(history)
        if r is None:
            continue
        if r >= 1.0:
            return P, Status.DIVERGED, k
        history = []
        polished = _newton_polish(A, B, Q, R, P, opts)
        if polished is not None:
            return polished, Status.CONVERGED, k
    return P, Status.MAX_ITER, k


def _cost(B1, P, status, n):
    if status is not Status.CONVERGED:
        return math.inf, math.inf
    total = float(np.trace(B1.T @ P @ B1))
    return total, total / n


def fc_synthesis(plant: AugmentedPlant, opts: DareOptions = DEFAULT_OPTIONS, *,
                 sensor_noise: float = 0.0) -> SynthesisResult:
    """Optimal full-control gain ``L`` (``u = -L y``) and its H2 cost.

    Solved through the dual DARE on ``(A', C', B1 B1', R)`` with
    ``R = sensor_noise * I`` (zero by default). ``L = A P C' (C P C' + R)^+``.
    The gain is computed from the last iterate even when the iteration
    diverged, which is what the fast-only impulse experiments simulate.
    """
    A, C, B1 = plant.A, plant.C, plant.B1
    p = C.shape[0]
    R = sensor_noise * np.eye(p)
    P, status, its = solve_dare_sf(A.T, C.T, B1 @ B1.T, R, opts)
    L = A @ P @ C.T @ sym_pinv(C @ P @ C.T + R, opts.pinv_rel_tol)
    radius = spectral_radius(A - L @ C)
    total, per_node = _cost(B1, P, status, plant.dims.n)
    return SynthesisResult(P, L, total, per_node, radius, status, its)


def sf_dual_synthesis(plant: AugmentedPlant, opts: DareOptions = DEFAULT_OPTIONS) -> SynthesisResult:
    """Synthesis for the transposed plant: state ``A'``, actuation ``C'``, full state sensing.

    The gain is ``K = (C P C')^+ C P A'`` (so ``K = L'``). The cost is not
    read off the DARE solution but evaluated independently from the closed
    loop ``A' - C'K`` through its discrete Lyapunov equation.
    """
    A_sf, B_sf, B1 = plant.A.T, plant.C.T, plant.B1
    Q = B1 @ B1.T
    R = np.zeros((B_sf.shape[1],) * 2)
    P, status, its = solve_dare_sf(A_sf, B_sf, Q, R, opts)
    K = sym_pinv(B_sf.T @ P @ B_sf + R, opts.pinv_rel_tol) @ (B_sf.T @ P @ A_sf)
    Acl = A_sf - B_sf @ K
    radius = spectral_radius(Acl)
    if status is Status.CONVERGED and radius < 1.0:
        X = solve_discrete_lyapunov(Acl.T, Q + K.T @ R @ K)
        total = float(np.trace(B1.T @ X @ B1))
        per_node = total / plant.dims.n
    else:
        total = per_node = math.inf
    return SynthesisResult(P, K, total, per_node, radius, status, its)


def classify_stabilizable(plant: AugmentedPlant, opts: DareOptions = DEFAULT_OPTIONS) -> bool:
    return fc_synthesis(plant, opts).stabilizing
