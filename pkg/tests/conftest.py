import pytest

from birlift import _backend

KERNELS = _backend.available()


@pytest.fixture(params=sorted(KERNELS))
def backend(request, monkeypatch):
    """Run the test once per available evaluation kernel."""
    mod = KERNELS[request.param]
    for name in ("eval_expr", "run_stmts", "run_block", "weak_run"):
        monkeypatch.setattr(_backend, name, getattr(mod, name))
    monkeypatch.setattr(_backend, "BACKEND", mod.BACKEND)
    return request.param
