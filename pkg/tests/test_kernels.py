import numpy as np
import pytest

from desslab import _kernels
from desslab._kernels import _fallback
from desslab.riccati import fc_synthesis, riccati_map
from desslab.ring import RingSpec, SensorConfig, augment

needs_compiled = pytest.mark.skipif(not _kernels.COMPILED_AVAILABLE, reason="extension not built")


def _random_problem(rng, N, m, rank_def=False):
    A = rng.normal(size=(N, N)) / np.sqrt(N)
    B = rng.normal(size=(N, m))
    if rank_def and m > 1:
        B[:, -1] = B[:, 0]
    G = rng.normal(size=(N, N))
    Q = G @ G.T
    P = Q + np.eye(N)
    return A, B, Q, np.zeros((m, m)), P


def test_sym_pinv_truncates_small_modes():
    S = np.diag([4.0, 1e-12, 0.0])
    np.testing.assert_allclose(_kernels.sym_pinv(S, 1e-9), np.diag([0.25, 0.0, 0.0]))
    np.testing.assert_array_equal(_kernels.sym_pinv(np.zeros((2, 2)), 1e-9), 0)


def test_backend_switching():
    prev = _kernels.set_backend("python")
    try:
        assert _kernels.BACKEND == "python"
        assert _kernels.get_backend() is _fallback
    finally:
        _kernels.set_backend(prev)
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")


@needs_compiled
@pytest.mark.parametrize("rank_def", [False, True])
def test_single_step_matches_between_backends(rng, rank_def):
    for N, m in [(4, 1), (9, 3), (20, 6)]:
        A, B, Q, R, P = _random_problem(rng, N, m, rank_def)
        py = _kernels.get_backend("python").riccati_step(A, B, Q, R, P, 1e-9)
        cy = _kernels.get_backend("compiled").riccati_step(A, B, Q, R, P, 1e-9)
        np.testing.assert_allclose(cy, py, rtol=1e-11, atol=1e-11 * np.abs(py).max())


@needs_compiled
@pytest.mark.parametrize("mode", ["fast", "slow", "diverse"])
def test_synthesis_identical_across_backends(mode):
    sensors = {"fast": SensorConfig.fast(1, 3), "slow": SensorConfig.slow(3),
               "diverse": SensorConfig.diverse(1, 3)}[mode]
    plant = augment(RingSpec(5, 1.5), sensors)
    out = {}
    for name in ("python", "compiled"):
        prev = _kernels.set_backend(name)
        try:
            out[name] = fc_synthesis(plant)
        finally:
            _kernels.set_backend(prev)
    a, b = out["python"], out["compiled"]
    assert a.status == b.status
    assert a.cost_total == pytest.approx(b.cost_total, rel=1e-10)
    np.testing.assert_allclose(a.gain, b.gain, atol=1e-8)


def test_steps_report_blowup_and_convergence(backend):
    A = np.array([[2.0]])
    B = np.zeros((1, 1))
    Q = np.eye(1)
    P, Pp, incs = Q.copy(), np.empty((1, 1)), np.empty(100)
    done, code = _kernels.riccati_steps(A, B, Q, np.zeros((1, 1)), P, Pp, incs, 100, 1e-11, 1e6, 1e-9)
    assert code == _kernels.BLOWUP and done < 100
    A = np.array([[0.5]])
    B = np.ones((1, 1))
    P = Q.copy()
    done, code = _kernels.riccati_steps(A, B, Q, np.zeros((1, 1)), P, Pp, incs, 100, 1e-11, 1e6, 1e-9)
    assert code == _kernels.CONVERGED
    assert P[0, 0] == pytest.approx(1.0)


def test_python_step_is_the_riccati_map(rng):
    A, B, Q, R, P = _random_problem(rng, 6, 2)
    R = np.eye(2)
    direct = A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A) + Q
    np.testing.assert_allclose(riccati_map(A, B, Q, R, P), direct, rtol=1e-10)
