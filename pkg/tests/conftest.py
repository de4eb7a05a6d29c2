import os
import sys

import numpy as np
import pytest
import torch

sys.path.insert(0, os.path.dirname(__file__))

from memaudit import kernels  # noqa: E402

torch.set_num_threads(max(1, min(4, os.cpu_count() or 1)))


@pytest.fixture(params=["compiled", "python"])
def backend(request, monkeypatch):
    """Run a test once with the compiled kernels and once with the fallback."""
    if request.param == "compiled":
        if kernels._ext is None:
            pytest.skip("compiled kernels not built")
        yield "compiled"
    else:
        monkeypatch.setattr(kernels, "_ext", None)
        monkeypatch.setattr(kernels, "BACKEND", "python")
        yield "python"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_SEEN = {"acceptance": False}


def pytest_runtest_logstart(nodeid, location):
    if "test_acceptance" in nodeid:
        _SEEN["acceptance"] = True


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not _SEEN["acceptance"]:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, 12):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            tr.write_line(f"ACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            tr.write_line(f"ACCEPTANCE {n:>2}: FAIL  (not evaluated: the test errored or was deselected)")
