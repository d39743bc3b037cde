"""
工具函数模块
- 线程安全的 JSON / JSONL / CSV 读写
- 复数矩阵编解码（[re, im] 对，按行嵌套）
- 配置摘要（规范化 JSON 的 SHA-256）
"""
import csv
import hashlib
import json
import os
import threading
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

# 全局锁
file_lock = threading.Lock()


def ensure_dir(directory: str):
    """确保目录存在"""
    os.makedirs(directory, exist_ok=True)


def save_json(data: Any, filepath: str, indent: int = 4):
    """
    线程安全地保存JSON文件

    Args:
        data: 要保存的数据
        filepath: 文件路径（如果为None，会抛出错误）
        indent: JSON缩进（默认4）
    """
    if filepath is None:
        raise ValueError("文件路径不能为None")

    dir_path = os.path.dirname(filepath)
    if dir_path:
        ensure_dir(dir_path)
    else:
        filepath = os.path.join(".", filepath)

    with file_lock:
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=indent)
            f.write("\n")


def load_json(filepath: str) -> Any:
    """
    加载JSON或JSONL文件

    自动检测文件格式：
    1. 先尝试按标准JSON格式解析
    2. 如果失败，再尝试按JSONL格式解析（每行一个JSON对象）

    Returns:
        如果是JSON格式，返回解析后的对象
        如果是JSONL格式，返回包含所有行的列表
    """
    if not os.path.exists(filepath):
        raise FileNotFoundError(f"文件不存在: {filepath}")

    with open(filepath, "r", encoding="utf-8") as f:
        content = f.read().strip()

    try:
        return json.loads(content)
    except json.JSONDecodeError:
        items = []
        for line_num, line in enumerate(content.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                items.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{filepath} 第 {line_num} 行JSON解析失败: {e}") from e
        if items:
            return items
        raise ValueError(f"无法解析文件 {filepath}：既不是标准JSON格式，也不是有效的JSONL格式")


def write_jsonl(records: Iterable[Dict], filepath: str):
    """按行写出 JSON 对象（每行一条，键顺序保持插入顺序）"""
    dir_path = os.path.dirname(filepath)
    if dir_path:
        ensure_dir(dir_path)
    with file_lock:
        with open(filepath, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")


def format_float(value: Optional[float], digits: int = 17) -> str:
    """17 位有效数字；None 输出空串"""
    if value is None:
        return ""
    return format(float(value), f".{digits}g")


def write_csv_rows(filepath: str, columns: Sequence[str], rows: Iterable[Sequence[Optional[float]]],
                   digits: int = 17):
    """
    写出数值 CSV

    Args:
        columns: 表头（顺序即输出顺序）
        rows: 每行与 columns 等长，None 写为空单元格
    """
    dir_path = os.path.dirname(filepath)
    if dir_path:
        ensure_dir(dir_path)
    with file_lock:
        with open(filepath, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                if len(row) != len(columns):
                    raise ValueError(f"CSV 行长度 {len(row)} 与表头 {len(columns)} 不一致")
                writer.writerow([format_float(v, digits) for v in row])


def read_csv_rows(filepath: str) -> List[Dict[str, Optional[float]]]:
    """读回 write_csv_rows 的输出，空单元格为 None"""
    with open(filepath, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        return [{k: (float(v) if v != "" else None) for k, v in row.items()} for row in reader]


def matrix_to_pairs(matrix) -> List[List[List[float]]]:
    """复矩阵 → 按行嵌套的 [re, im] 列表"""
    m = np.asarray(matrix, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_pairs(data: Any) -> np.ndarray:
    """
    按行嵌套的数组 → 复矩阵

    元素可以是实数，或 [re, im] 对。

    Raises:
        ValueError: 形状不规则或元素格式不对
    """
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ValueError("矩阵必须是非空的按行嵌套数组")
    n_cols = len(data[0])
    if any(len(r) != n_cols for r in data):
        raise ValueError("矩阵各行长度不一致")
    out = np.zeros((len(data), n_cols), dtype=complex)
    for i, row in enumerate(data):
        for j, z in enumerate(row):
            if isinstance(z, bool):
                raise ValueError(f"元素 [{i}][{j}] 不是数值")
            if isinstance(z, (int, float)):
                out[i, j] = z
            elif (isinstance(z, list) and len(z) == 2
                  and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in z)):
                out[i, j] = complex(z[0], z[1])
            else:
                raise ValueError(f"元素 [{i}][{j}] 应为实数或 [re, im]，实际为 {z!r}")
    if not np.all(np.isfinite(out)):
        raise ValueError("矩阵含有 NaN/Inf")
    return out


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_digest(data: Any) -> str:
    """规范化 JSON 的 SHA-256（用于 manifest）"""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()
