"""
pytest 公共夹具
- 把项目根目录加入 sys.path
- 注册 slow 标记（需要 --runslow 才执行）
"""
import logging
import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from decoq.decoupling import pauli_set  # noqa: E402
from decoq.lindblad import amplitude_damping  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行验收规模的 Monte-Carlo 测试")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 验收规模的 Monte-Carlo 测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def pauli1():
    return pauli_set(1)


@pytest.fixture
def pauli2():
    return pauli_set(2)


@pytest.fixture
def ad_generator():
    return amplitude_damping(1.0)


@pytest.fixture
def configs_dir():
    return project_root / "configs"


@pytest.fixture(autouse=True)
def _release_log_handlers():
    """CLI 测试会替换根日志的 handler，测试结束后关闭文件句柄"""
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, logging.FileHandler):
            handler.close()
            root.removeHandler(handler)
