"""Pure numpy implementation of the Riccati iteration kernel."""
import numpy as np

RUNNING, CONVERGED, BLOWUP = 0, 1, 2


def sym_pinv(S, rel_tol):
    """Pseudo-inverse of a symmetric PSD matrix, dropping eigenvalues below ``rel_tol * max``."""
    m = S.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    w, V = np.linalg.eigh(S)
    wmax = np.max(np.abs(w))
    if wmax == 0.0:
        return np.zeros_like(S)
    keep = w > rel_tol * wmax
    Vk = V[:, keep]
    return (Vk / w[keep]) @ Vk.T


def riccati_step(A, B, Q, R, P, pinv_rel_tol):
    """One application of ``P -> A'PA - A'PB (R + B'PB)^+ B'PA + Q``."""
    PA = P @ A
    BtPA = B.T @ PA
    S = B.T @ (P @ B) + R
    X = sym_pinv(S, pinv_rel_tol) @ BtPA
    Pn = A.T @ PA - BtPA.T @ X + Q
    return 0.5 * (Pn + Pn.T)


def riccati_steps(A, B, Q, R, P, P_prev, incs, nsteps, tol_rel, div_norm, pinv_rel_tol):
    """Run up to ``nsteps`` iterations in place.

    ``P`` holds the latest iterate on return and ``P_prev`` the one before it.
    ``incs[i]`` receives the infinity norm of the i-th increment. Returns
    ``(steps_done, code)``.
    """
    for i in range(nsteps):
        Pn = riccati_step(A, B, Q, R, P, pinv_rel_tol)
        inc = np.linalg.norm(Pn - P, np.inf)
        size = np.linalg.norm(Pn, np.inf)
        P_prev[...] = P
        P[...] = Pn
        incs[i] = inc
        if not np.isfinite(size) or size > div_norm:
            return i + 1, BLOWUP
        if inc <= tol_rel * (1.0 + size):
            return i + 1, CONVERGED
    return nsteps, RUNNING
