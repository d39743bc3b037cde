import logging

import numpy as np

from decoq import logger
from decoq.config import LOG_CONFIG


def test_setup_logging_writes_file(tmp_path):
    log_file = logger.setup_logging(str(tmp_path / "logs"), "DEBUG", "simple")
    logging.info("✅ hello")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert logging.getLogger().level == logging.DEBUG
    assert "INFO - ✅ hello" in open(log_file, encoding="utf-8").read()


def test_detail_log_truncates_after_limit(tmp_path):
    path = logger.init_log_file(str(tmp_path), "simulate", {"种子": 7})
    try:
        logger.log_ensemble_start("mc_physical", 0.01, 10, 50, 4)
        for pid in range(LOG_CONFIG["full_display_limit"] + 2):
            logger.log_path_summary(pid, np.array([0.99, 0.98]), 1.0)
        logger.log_event("界与范数", {"gamma": 1.5})
        logger.log_verdict("extrinsic", [{"t": 0.01, "intercept": 1e-9, "intercept_se": 1e-8,
                                          "expected_intrinsic": 4e-4, "label": "extrinsic"}])
    finally:
        logger.close_log_file()
    text = open(path, encoding="utf-8").read()
    assert "种子: 7" in text
    assert text.count("保真度: ") == LOG_CONFIG["full_display_limit"]
    assert "F_end=0.98" in text
    assert "\"gamma\": 1.5" in text
    assert "判定: extrinsic" in text
    assert logger.LOG_FILE is None


def test_writers_are_noops_without_file():
    logger.close_log_file()
    logger.log_path_summary(0, np.array([1.0]), 1.0)
    logger.log_event("x")
