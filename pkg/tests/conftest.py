import contextlib

import numpy as np
import pytest

from desslab import _kernels

_RESULTS = {}


@pytest.fixture(params=_kernels.available_backends())
def backend(request):
    prev = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(prev)


@pytest.fixture
def criterion():
    """``with criterion("A3", detail):`` records PASS unless an assertion escapes."""

    @contextlib.contextmanager
    def check(cid, detail=""):
        try:
            yield
        except AssertionError as exc:
            _RESULTS.setdefault(cid, []).append((False, str(exc).splitlines()[0] if str(exc) else detail))
            raise
        _RESULTS.setdefault(cid, []).append((True, detail))

    return check


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: int(c[1:])):
        parts = _RESULTS[cid]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts if p[1] and (ok or not p[0]))
        terminalreporter.write_line(f"{cid}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
