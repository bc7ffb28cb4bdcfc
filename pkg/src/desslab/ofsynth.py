"""Output feedback with delayed actuation and delayed sensing.

State ordering is ``x = [x_r, x_a, x_s]``: ring states, the actuation delay
chain (head first, the last block drives the ring) and the sensing delay
chain (head receives ``C_r x_r``, the last block is what the controller
reads). Inputs are ``u = [u_r, u_s]`` where ``u_s`` writes straight onto the
sensing delay states.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ._kernels import sym_pinv
from .riccati import DEFAULT_OPTIONS, DareOptions, Status, solve_dare_sf
from .ring import RingSpec, build_ring_matrix, spectral_radius

CHEAP = 1e-6

PATHWAYS = ("IFP-Sense-1", "IFP-Act-1", "IFP-Sense-2", "IFP-State", "IFP-Act-2")


def downshift(blocks: int, size: int) -> np.ndarray:
    """Block-downshift ``Z``: identity blocks of ``size`` on the first block sub-diagonal."""
    Z = np.zeros((blocks * size, blocks * size))
    if blocks > 1:
        Z[size:, : (blocks - 1) * size] = np.eye((blocks - 1) * size)
    return Z


@dataclass(frozen=True)
class OFDims:
    n: int
    m: int
    p_r: int
    d_a: int
    d_s: int

    @property
    def N(self) -> int:
        return self.n + self.m * self.d_a + self.p_r * self.d_s

    @property
    def slices(self) -> Tuple[slice, slice, slice]:
        a0 = self.n
        s0 = a0 + self.m * self.d_a
        return slice(0, a0), slice(a0, s0), slice(s0, self.N)


@dataclass(frozen=True)
class OFPlant:
    A: np.ndarray
    B2: np.ndarray
    B1: np.ndarray
    C: np.ndarray
    blocks: Dict[str, np.ndarray]
    dims: OFDims

    @property
    def n_inputs_r(self) -> int:
        return self.dims.m


def build_of_plant(spec: RingSpec, B_2r, C_r, d_a: int = 1, d_s: Optional[int] = None,
                   B_1r=None) -> OFPlant:
    """Assemble the delay-augmented output-feedback plant.

    ``d_a = d_s = 0`` degenerates to the undelayed plant ``(A_r, B_2r, C_r)``.
    """
    d_s = d_a if d_s is None else d_s
    if d_a < 0 or d_s < 0:
        raise ValueError("delays must be non-negative")
    n = spec.n
    A_r = build_ring_matrix(spec)
    B_2r = np.asarray(B_2r, dtype=float).reshape(n, -1)
    C_r = np.asarray(C_r, dtype=float)
    if C_r.ndim == 1:
        C_r = C_r.reshape(1, -1)
    if C_r.shape[1] != n:
        raise ValueError(f"C_r must have {n} columns, got shape {C_r.shape}")
    B_1r = np.eye(n) if B_1r is None else np.asarray(B_1r, dtype=float).reshape(n, -1)
    m, p = B_2r.shape[1], C_r.shape[0]
    dims = OFDims(n=n, m=m, p_r=p, d_a=d_a, d_s=d_s)
    N = dims.N
    sr, sa, ss = dims.slices

    Z_act = downshift(d_a, m)
    Z_sen = downshift(d_s, p)
    B2r_hat = np.zeros((n, m * d_a))
    I_B = np.zeros((m * d_a, m))
    if d_a:
        B2r_hat[:, -m:] = B_2r
        I_B[:m] = np.eye(m)
    C_r_hat = np.zeros((p * d_s, n))
    I_C = np.zeros((p, p * d_s))
    if d_s:
        C_r_hat[:p] = C_r
        I_C[:, -p:] = np.eye(p)

    A = np.zeros((N, N))
    A[sr, sr] = A_r
    A[sr, sa] = B2r_hat
    A[sa, sa] = Z_act
    A[ss, sr] = C_r_hat
    A[ss, ss] = Z_sen

    B2 = np.zeros((N, m + p * d_s))
    if d_a:
        B2[sa, :m] = I_B
    else:
        B2[sr, :m] = B_2r
    B2[ss, m:] = np.eye(p * d_s)

    B1 = np.zeros((N, B_1r.shape[1]))
    B1[sr] = B_1r

    if d_s:
        C = np.zeros((p, N))
        C[:, ss] = I_C
    else:
        C = np.zeros((p, N))
        C[:, sr] = C_r

    blocks = dict(A_r=A_r, B_2r=B_2r, C_r=C_r, B_1r=B_1r, Z_act=Z_act, Z_sen=Z_sen,
                  B2r_hat=B2r_hat, C_r_hat=C_r_hat, I_B=I_B, I_C=I_C)
    return OFPlant(A=A, B2=B2, B1=B1, C=C, blocks=blocks, dims=dims)


@dataclass
class OFGains:
    """Observer gain ``L = [L1; L2; L3]`` (rows) and controller gain ``K = [K1 K2 K3]``.

    ``K`` holds the rows driving ``u_r``; ``K_internal`` the rows driving the
    internal wires ``u_s``.
    """

    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    K3: np.ndarray
    K_internal: np.ndarray
    status_control: Status
    status_filter: Status
    P_control: np.ndarray
    P_filter: np.ndarray

    @property
    def L(self) -> np.ndarray:
        return np.vstack([self.L1, self.L2, self.L3])

    @property
    def K(self) -> np.ndarray:
        return np.hstack([self.K1, self.K2, self.K3])

    @property
    def K_full(self) -> np.ndarray:
        return np.vstack([self.K, self.K_internal])

    @property
    def residual_L2(self) -> float:
        return float(np.linalg.norm(self.L2))

    @property
    def residual_K3(self) -> float:
        return float(np.linalg.norm(self.K3))

    @property
    def converged(self) -> bool:
        return self.status_control is Status.CONVERGED and self.status_filter is Status.CONVERGED


def default_weights(plant: OFPlant, eps: float = CHEAP):
    """``Q`` on ring states only, cheap ``R_u`` and ``V``, ``W = B1 B1'``."""
    N = plant.dims.N
    sr = plant.dims.slices[0]
    Q = np.zeros((N, N))
    Q[sr, sr] = np.eye(plant.dims.n)
    R_u = eps * np.eye(plant.B2.shape[1])
    W = plant.B1 @ plant.B1.T
    V = eps * np.eye(plant.C.shape[0])
    return Q, R_u, W, V


def of_synthesis(plant: OFPlant, Q=None, R_u=None, W=None, V=None,
                 opts: DareOptions = DEFAULT_OPTIONS) -> OFGains:
    """Controller DARE on ``(A, B2, Q, R_u)`` and filter DARE on ``(A', C', W, V)``."""
    dQ, dR, dW, dV = default_weights(plant)
    Q = dQ if Q is None else np.asarray(Q, dtype=float)
    R_u = dR if R_u is None else np.asarray(R_u, dtype=float)
    W = dW if W is None else np.asarray(W, dtype=float)
    V = dV if V is None else np.asarray(V, dtype=float)
    A, B2, C = plant.A, plant.B2, plant.C

    Pc, st_c, _ = solve_dare_sf(A, B2, Q, R_u, opts)
    K_all = sym_pinv(R_u + B2.T @ Pc @ B2, opts.pinv_rel_tol) @ (B2.T @ Pc @ A)
    Pf, st_f, _ = solve_dare_sf(A.T, C.T, W, V, opts)
    L = A @ Pf @ C.T @ sym_pinv(C @ Pf @ C.T + V, opts.pinv_rel_tol)

    sr, sa, ss = plant.dims.slices
    m = plant.dims.m
    K = K_all[:m]
    return OFGains(L1=L[sr], L2=L[sa], L3=L[ss], K1=K[:, sr], K2=K[:, sa], K3=K[:, ss],
                   K_internal=K_all[m:], status_control=st_c, status_filter=st_f,
                   P_control=Pc, P_filter=Pf)


def closed_loop_matrix(plant: OFPlant, gains: OFGains) -> np.ndarray:
    """Joint plant + predictor-observer dynamics on ``[x; x_hat]``."""
    A, B2, C = plant.A, plant.B2, plant.C
    K, L = gains.K_full, gains.L
    return np.block([[A, -B2 @ K], [L @ C, A - B2 @ K - L @ C]])


def separation_radii(plant: OFPlant, gains: OFGains):
    """``(rho(joint), rho(A - B2 K), rho(A - L C))``."""
    A, B2, C = plant.A, plant.B2, plant.C
    return (spectral_radius(closed_loop_matrix(plant, gains)),
            spectral_radius(A - B2 @ gains.K_full),
            spectral_radius(A - gains.L @ C))


@dataclass
class OFTrajectory:
    x_r: np.ndarray
    x_hat_r: np.ndarray
    delta: np.ndarray
    u: np.ndarray


def simulate_of_full(plant: OFPlant, gains: OFGains, T: int, impulse_node: int = 1,
                     x0=None) -> OFTrajectory:
    """Plant and full-order predictor observer, using every block of ``L`` and ``K``."""
    dims = plant.dims
    sr, sa, ss = dims.slices
    A, B2, C = plant.A, plant.B2, plant.C
    K, L = gains.K_full, gains.L
    x = _initial(plant, impulse_node) if x0 is None else np.asarray(x0, dtype=float)
    xh = np.zeros(dims.N)
    xr, xhr, dl, us = [x[sr].copy()], [xh[sr].copy()], [(C @ x - C @ xh)], []
    for _ in range(T):
        u = -(K @ xh)
        innov = C @ x - C @ xh
        x = A @ x + B2 @ u
        xh = A @ xh + B2 @ u + L @ innov
        us.append(u[: dims.m])
        xr.append(x[sr].copy())
        xhr.append(xh[sr].copy())
        dl.append(C @ x - C @ xh)
    return OFTrajectory(np.array(xr), np.array(xhr), np.array(dl), np.array(us))


def simulate_of(plant: OFPlant, gains: OFGains, T: int, impulse_node: int = 1, x0=None) -> OFTrajectory:
    """Reduced one-step-delay controller.

    ``delta`` is the innovation (delayed sensor reading minus its prediction)::

        delta(t+1) = C_r x_r(t) - C_r xh_r(t) - L3 delta(t)
        xh_r(t+1)  = A_r xh_r(t) + B_2r x_a(t) + L1 delta(t)
        u_r(t)     = -(K1 xh_r(t) + K2 x_a(t))

    The controller reads its own actuation delay state directly, which is
    exact because ``L2`` vanishes; ``K3`` vanishing removes the dependence
    on the sensing-state estimate.
    """
    dims = plant.dims
    if dims.d_a != 1 or dims.d_s != 1:
        raise ValueError("the reduced recursion is written for d_a = d_s = 1")
    sr, sa, ss = dims.slices
    A_r, B_2r, C_r = plant.blocks["A_r"], plant.blocks["B_2r"], plant.blocks["C_r"]
    x = _initial(plant, impulse_node) if x0 is None else np.asarray(x0, dtype=float)
    x_r, x_a, x_s = x[sr].copy(), x[sa].copy(), x[ss].copy()
    xh_r = np.zeros(dims.n)
    delta = x_s.copy()
    L1, L3, K1, K2 = gains.L1, gains.L3, gains.K1, gains.K2
    xr, xhr, dl, us = [x_r.copy()], [xh_r.copy()], [delta.copy()], []
    for _ in range(T):
        u_r = -(K1 @ xh_r + K2 @ x_a)
        delta, xh_r = (C_r @ x_r - C_r @ xh_r - L3 @ delta,
                       A_r @ xh_r + B_2r @ x_a + L1 @ delta)
        x_r, x_a = A_r @ x_r + B_2r @ x_a, u_r
        us.append(u_r)
        xr.append(x_r.copy())
        xhr.append(xh_r.copy())
        dl.append(delta.copy())
    return OFTrajectory(np.array(xr), np.array(xhr), np.array(dl), np.array(us))


def _initial(plant: OFPlant, node: int) -> np.ndarray:
    n_w = plant.B1.shape[1]
    if not 1 <= node <= n_w:
        raise ValueError(f"impulse node must lie in [1, {n_w}], got {node}")
    return plant.B1[:, node - 1].copy()


@dataclass(frozen=True)
class Pathway:
    name: str
    dimension: int
    magnitude: float


@dataclass(frozen=True)
class IFPReport:
    pathways: Tuple[Pathway, ...]

    def __getitem__(self, name: str) -> Pathway:
        for p in self.pathways:
            if p.name == name:
                return p
        raise KeyError(name)

    def as_dict(self):
        return {p.name: {"dimension": p.dimension, "magnitude": p.magnitude} for p in self.pathways}


def ifp_report(gains: OFGains, plant: OFPlant) -> IFPReport:
    """Dimensions and Frobenius magnitudes of the five internal feedback pathways.

    Delay-induced: the observer's writes into the sensing delay chain (``L3``)
    and the controller's reads of the actuation delay chain (``K2``).
    Intrinsic to output feedback: the ``A_r`` state prediction, the ``B_2r``
    actuation copy and the ``C_r`` sensor prediction inside the observer.
    """
    dm = plant.dims
    b = plant.blocks
    fro = lambda M: float(np.linalg.norm(M)) if M.size else 0.0
    return IFPReport((
        Pathway("IFP-Sense-1", dm.p_r * dm.d_s, fro(gains.L3)),
        Pathway("IFP-Act-1", dm.m * dm.d_a, fro(gains.K2)),
        Pathway("IFP-Sense-2", dm.n, fro(b["C_r"])),
        Pathway("IFP-State", dm.n, fro(b["A_r"])),
        Pathway("IFP-Act-2", dm.m, fro(b["B_2r"])),
    ))
