"""Reference computations that share no code path with the DARE solver."""
import numpy as np


def value_iteration_cost(A, B, Q, B1, T=500, rank_tol=1e-10):
    """Finite-horizon optimal cost ``Tr(B1' V_T B1)`` with zero control weight.

    ``V_{k+1}(x) = min_u x'Qx + |M (A x + B u)|^2`` with ``V_k = M'M``; the
    minimum removes the component of ``M A x`` inside ``range(M B)``, so
    ``V_{k+1} = (MA)' (I - U U') (MA) + Q`` with ``U`` an orthonormal basis of
    that range, obtained from an SVD.
    """
    V = np.zeros_like(Q)
    for _ in range(T):
        w, E = np.linalg.eigh(0.5 * (V + V.T))
        keep = w > rank_tol * max(1.0, w.max(initial=0.0))
        M = np.sqrt(w[keep])[:, None] * E[:, keep].T
        MA, MB = M @ A, M @ B
        if MB.size:
            U, s, _ = np.linalg.svd(MB, full_matrices=False)
            U = U[:, s > rank_tol * max(1.0, s.max(initial=0.0))]
            MA = MA - U @ (U.T @ MA)
        V = MA.T @ MA + Q
    return float(np.trace(B1.T @ V @ B1))


def h2_by_impulse(A_cl, B1, C_out, T=2000):
    """``sum_t |C_out A_cl^t B1|_F^2`` by direct powers."""
    total, X = 0.0, B1.copy()
    for _ in range(T):
        total += float(np.sum((C_out @ X) ** 2))
        X = A_cl @ X
    return total


def dense_ring(n, a):
    A = np.zeros((n, n))
    for i in range(n):
        for j in (i - 1, i, i + 1):
            A[i, j % n] = a / 3.0
    return A
