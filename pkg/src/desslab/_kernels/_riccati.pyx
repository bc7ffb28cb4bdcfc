# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Riccati iteration kernel.

Same contract as ``_fallback.riccati_steps``. Products go through BLAS
``dgemm`` and the symmetric eigendecomposition behind the truncated
pseudo-inverse through LAPACK ``dsyev``; the loop itself runs without the GIL.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dsyev

cnp.import_array()

cdef enum:
    RUNNING = 0
    CONVERGED = 1
    BLOWUP = 2


cdef double _inf_norm(double[:, ::1] M) nogil:
    cdef Py_ssize_t i, j
    cdef double best = 0.0, s
    for i in range(M.shape[0]):
        s = 0.0
        for j in range(M.shape[1]):
            s += fabs(M[i, j])
        if s > best or s != s:
            best = s
    return best


cdef inline void _gemm(char ta, char tb, int rows, int cols, int inner, double alpha,
                       const double* X, int ldx, const double* Y, int ldy,
                       double beta, double* Z, int ldz) nogil:
    # row-major Z = alpha op(X) op(Y) + beta Z, as column-major Z' = op(Y)' op(X)'
    dgemm(&tb, &ta, &cols, &rows, &inner, &alpha, <double*>Y, &ldy, <double*>X, &ldx,
          &beta, Z, &ldz)


cdef int _step(const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] Q,
               const double[:, ::1] R, double[:, ::1] P, double[:, ::1] Pn,
               double[:, ::1] PA, double[:, ::1] PB, double[:, ::1] BtPA,
               double[:, ::1] S, double[:, ::1] Z, double[:, ::1] X,
               double[::1] w, double[::1] work, int lwork, double pinv_rel_tol) nogil:
    cdef Py_ssize_t N = A.shape[0], m = B.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double acc, wmax, cut
    cdef int info = 0, n_ = <int>N, m_ = <int>m

    _gemm(b"N", b"N", n_, n_, n_, 1.0, &P[0, 0], n_, &A[0, 0], n_, 0.0, &PA[0, 0], n_)
    Pn[:, :] = Q
    _gemm(b"T", b"N", n_, n_, n_, 1.0, &A[0, 0], n_, &PA[0, 0], n_, 1.0, &Pn[0, 0], n_)

    if m > 0:
        _gemm(b"N", b"N", n_, m_, n_, 1.0, &P[0, 0], n_, &B[0, 0], m_, 0.0, &PB[0, 0], m_)
        _gemm(b"T", b"N", m_, n_, n_, 1.0, &B[0, 0], m_, &PA[0, 0], n_, 0.0, &BtPA[0, 0], n_)
        S[:, :] = R
        _gemm(b"T", b"N", m_, m_, n_, 1.0, &B[0, 0], m_, &PB[0, 0], m_, 1.0, &S[0, 0], m_)
        for i in range(m):
            for j in range(i + 1, m):
                acc = 0.5 * (S[i, j] + S[j, i])
                S[i, j] = acc
                S[j, i] = acc
        # symmetric, so row-major storage is a valid column-major input; on
        # return eigenvector l sits contiguously in S[l, :]
        dsyev(b"V", b"U", &m_, &S[0, 0], &m_, &w[0], &work[0], &lwork, &info)
        if info != 0:
            return info
        wmax = 0.0
        for l in range(m):
            if fabs(w[l]) > wmax:
                wmax = fabs(w[l])
        cut = pinv_rel_tol * wmax
        # X = V diag(1/w) V' BtPA over the kept eigenvalues
        _gemm(b"N", b"N", m_, n_, m_, 1.0, &S[0, 0], m_, &BtPA[0, 0], n_, 0.0, &Z[0, 0], n_)
        for l in range(m):
            acc = 1.0 / w[l] if (wmax > 0.0 and w[l] > cut) else 0.0
            for j in range(N):
                Z[l, j] *= acc
        _gemm(b"T", b"N", m_, n_, m_, 1.0, &S[0, 0], m_, &Z[0, 0], n_, 0.0, &X[0, 0], n_)
        _gemm(b"T", b"N", n_, n_, m_, -1.0, &BtPA[0, 0], n_, &X[0, 0], n_, 1.0, &Pn[0, 0], n_)

    for i in range(N):
        for j in range(i + 1, N):
            acc = 0.5 * (Pn[i, j] + Pn[j, i])
            Pn[i, j] = acc
            Pn[j, i] = acc
    return 0


def riccati_step(A, B, Q, R, P, double pinv_rel_tol):
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    N, m = B.shape[0], B.shape[1]
    lwork = max(1, 3 * m)
    Pn = np.empty((N, N))
    info = _step(A, B, Q, R, P, Pn, np.empty((N, N)), np.empty((N, m)), np.empty((m, N)),
                 np.empty((m, m)), np.empty((m, N)), np.empty((m, N)),
                 np.empty(max(m, 1)), np.empty(lwork), lwork, pinv_rel_tol)
    if info != 0:
        raise np.linalg.LinAlgError(f"dsyev failed with info={info}")
    return Pn


def riccati_steps(const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] Q,
                  const double[:, ::1] R,
                  double[:, ::1] P, double[:, ::1] P_prev, double[::1] incs, int nsteps,
                  double tol_rel, double div_norm, double pinv_rel_tol):
    cdef Py_ssize_t N = A.shape[0], m = B.shape[1]
    cdef int lwork = max(1, 3 * <int>m)
    cdef double[:, ::1] Pn = np.empty((N, N))
    cdef double[:, ::1] PA = np.empty((N, N))
    cdef double[:, ::1] PB = np.empty((N, m))
    cdef double[:, ::1] BtPA = np.empty((m, N))
    cdef double[:, ::1] S = np.empty((m, m))
    cdef double[:, ::1] Z = np.empty((m, N))
    cdef double[:, ::1] X = np.empty((m, N))
    cdef double[::1] w = np.empty(max(m, 1))
    cdef double[::1] work = np.empty(lwork)
    cdef int it, info = 0, code = RUNNING, done = 0
    cdef Py_ssize_t i, j
    cdef double inc, size, s

    with nogil:
        for it in range(nsteps):
            info = _step(A, B, Q, R, P, Pn, PA, PB, BtPA, S, Z, X, w, work, lwork,
                         pinv_rel_tol)
            if info != 0:
                break
            inc = 0.0
            for i in range(N):
                s = 0.0
                for j in range(N):
                    s += fabs(Pn[i, j] - P[i, j])
                if s > inc or s != s:
                    inc = s
            size = _inf_norm(Pn)
            P_prev[:, :] = P
            P[:, :] = Pn
            incs[it] = inc
            done = it + 1
            if not isfinite(size) or size > div_norm:
                code = BLOWUP
                break
            if inc <= tol_rel * (1.0 + size):
                code = CONVERGED
                break
    if info != 0:
        raise np.linalg.LinAlgError(f"dsyev failed with info={info}")
    return done, code
