import os

import pytest

from sojourn import kernels


def pytest_report_header(config):
    return f"sojourn kernel backend: {kernels.BACKEND}"


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SOJOURN_SEED", raising=False)
    return tmp_path
