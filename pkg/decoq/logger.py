"""
日志工具：
- setup_logging 配置根日志（控制台 + 文件）
- init_log_file / log_* / close_log_file 管理详细运行日志（逐路径摘要、判定证据）
"""
import json
import logging
import os
import threading
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from decoq.config import LOG_CONFIG

# 全局日志变量与锁（线程安全）
LOG_FILE: Optional[object] = None
log_lock = threading.Lock()

# 前 N 条路径完整记录，之后只记录摘要
_log_full_display_count = {"path": 0}
_LOG_FULL_DISPLAY_LIMIT = LOG_CONFIG["full_display_limit"]


def setup_logging(log_dir: str, log_level: str = "INFO", log_mode: str = "detailed") -> str:
    """
    配置根日志记录器

    Args:
        log_dir: 日志目录
        log_level: 日志级别（DEBUG/INFO/WARNING/ERROR）
        log_mode: 日志模式（simple/detailed）

    Returns:
        日志文件路径
    """
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    log_file = log_dir / f'decoq_{timestamp}.log'

    if log_mode.lower() == "simple":
        # 简化模式：只显示级别和消息
        log_format = '%(levelname)s - %(message)s'
    else:
        log_format = '%(asctime)s - %(levelname)s - %(message)s'

    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format=log_format,
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(log_file, encoding='utf-8'),
        ],
        force=True,
    )
    return str(log_file)


def init_log_file(log_dir: str, command: str, params: Dict[str, Any]) -> str:
    """
    初始化详细运行日志，返回日志路径
    """
    global LOG_FILE, _log_full_display_count

    _log_full_display_count = {"path": 0}
    os.makedirs(log_dir, exist_ok=True)

    timestamp = time.strftime("%Y%m%d_%H%M%S")
    log_path = os.path.join(log_dir, f"{timestamp}_{command}_detail.log")
    LOG_FILE = open(log_path, "w", encoding="utf-8")

    LOG_FILE.write("=" * 80 + "\n")
    LOG_FILE.write(f"📋 {command} 运行参数\n")
    LOG_FILE.write("=" * 80 + "\n")
    LOG_FILE.write(f"运行时间: {time.strftime('%Y-%m-%d %H:%M:%S')}\n")
    for key, value in params.items():
        LOG_FILE.write(f"{key}: {value}\n")
    LOG_FILE.write(f"日志优化: 路径前 {_LOG_FULL_DISPLAY_LIMIT} 条完整记录，后续只记录摘要\n")
    LOG_FILE.write("=" * 80 + "\n")
    LOG_FILE.write("\n")
    LOG_FILE.flush()
    return log_path


def log_ensemble_start(scheme: str, tau: float, paths: int, n_steps: int, set_size: int):
    """记录一个路径集合开始生成"""
    global LOG_FILE
    if LOG_FILE is None:
        return

    with log_lock:
        try:
            LOG_FILE.write("\n" + "=" * 80 + "\n")
            LOG_FILE.write(f"🚀 集合 scheme={scheme}, τ={tau:g}\n")
            LOG_FILE.write(f"路径数: {paths}，增量数: {n_steps}，|J|: {set_size}\n")
            LOG_FILE.write("=" * 80 + "\n")
            LOG_FILE.flush()
        except Exception as e:
            print(f"⚠️ 写入集合开始日志失败: {e}")


def log_path_summary(path_id: int, fidelities: Sequence[float], max_norm: float):
    """
    记录单条路径
    前 N 条完整列出各时间的保真度，之后只记录末时刻
    """
    global LOG_FILE, _log_full_display_count
    if LOG_FILE is None:
        return

    with log_lock:
        try:
            _log_full_display_count["path"] += 1
            if _log_full_display_count["path"] <= _LOG_FULL_DISPLAY_LIMIT:
                LOG_FILE.write("-" * 80 + "\n")
                LOG_FILE.write(f"📝 路径 {path_id}（最大算子范数 {max_norm:.6g}）\n")
                LOG_FILE.write("保真度: " + ", ".join(f"{f:.10g}" for f in fidelities) + "\n")
            else:
                last = fidelities[-1] if len(fidelities) else float("nan")
                LOG_FILE.write(f"📝 路径 {path_id}: F_end={last:.10g}, max_norm={max_norm:.6g}\n")
            LOG_FILE.flush()
        except Exception as e:
            print(f"⚠️ 写入路径日志失败: {e}")


def log_event(title: str, payload: Any = None):
    """记录一个带 JSON 内容的事件（界、分类证据等）"""
    global LOG_FILE
    if LOG_FILE is None:
        return

    with log_lock:
        try:
            LOG_FILE.write("\n" + "-" * 80 + "\n")
            LOG_FILE.write(f"📊 {title}\n")
            if payload is not None:
                LOG_FILE.write(json.dumps(payload, indent=2, ensure_ascii=False, default=str))
                LOG_FILE.write("\n")
            LOG_FILE.write("-" * 80 + "\n")
            LOG_FILE.flush()
        except Exception as e:
            print(f"⚠️ 写入事件日志失败: {e}")


def log_verdict(classification: str, evidence: Sequence[Dict[str, Any]]):
    global LOG_FILE
    if LOG_FILE is None:
        return

    with log_lock:
        try:
            LOG_FILE.write("\n" + "=" * 80 + "\n")
            LOG_FILE.write(f"✅ 判定: {classification}\n")
            LOG_FILE.write("=" * 80 + "\n")
            for item in evidence:
                LOG_FILE.write(
                    f"t={item['t']:.6g}  截距={item['intercept']:.6g} ± {item['intercept_se']:.3g}  "
                    f"预期内禀={item['expected_intrinsic']:.6g}  → {item['label']}\n")
            LOG_FILE.flush()
        except Exception as e:
            print(f"⚠️ 写入判定日志失败: {e}")


def close_log_file():
    """
    关闭详细日志文件
    """
    global LOG_FILE
    if LOG_FILE:
        with log_lock:
            try:
                LOG_FILE.write("=" * 80 + "\n")
                LOG_FILE.write(f"日志结束时间: {time.strftime('%Y-%m-%d %H:%M:%S')}\n")
                LOG_FILE.write("=" * 80 + "\n")
                LOG_FILE.close()
                LOG_FILE = None
            except Exception:
                LOG_FILE = None
