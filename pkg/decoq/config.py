"""
配置文件：存储所有数值容差、模拟预算与输出格式。

📝 使用说明：
1. 数值容差（NUMERIC_CONFIG）：
   - 厄米/幺正判定、指数精度、Choi 特征值下限等
   - 一般不需要修改，改动会影响所有性质测试的阈值

2. 随机游走（WALK_CONFIG）：
   - chunk_size 决定路径分块，分块只与路径编号有关，与线程数无关
   - max_ensemble_bytes 为 paths·|t_grid|·d²·16 字节的上限，超出直接拒绝

3. 环境变量设置方式：
   - 方式1：在项目根目录创建 .env 文件，内容如：DECOQ_SEED=42
   - 方式2：在 shell 中：export DECOQ_SEED=42

💡 种子优先级：命令行 --seed > 环境变量 DECOQ_SEED > 配置文件 seed 字段 > 报错
"""
import os
from typing import Optional

# 自动加载 .env 文件（如果存在 python-dotenv）
try:
    from dotenv import load_dotenv
    load_dotenv(os.path.join(os.path.dirname(os.path.dirname(__file__)), '.env'))
except ImportError:
    pass  # 如果没有安装 python-dotenv，使用 export 方式


def _get_env(key: str, default: str = "") -> str:
    """
    从环境变量读取配置，提供默认值。
    """
    return os.getenv(key, default)


def _get_int_env(key: str, default: int) -> int:
    """从环境变量读取整数配置"""
    value = _get_env(key, "").strip()
    return int(value) if value and value.isdigit() else default


def get_env_seed() -> Optional[int]:
    """
    读取 DECOQ_SEED，未设置时返回 None

    Raises:
        ValueError: 设置了但不是非负整数
    """
    value = _get_env("DECOQ_SEED", "").strip()
    if not value:
        return None
    if not value.isdigit():
        raise ValueError(f"DECOQ_SEED 必须是非负整数，当前为: {value!r}")
    return int(value)


# ==================== 数值容差配置 ====================
NUMERIC_CONFIG = {
    "hermitian_atol": 1e-9,          # 厄米性判定
    "unitary_atol": 1e-9,            # 幺正性判定
    "density_atol": 1e-9,            # 密度矩阵迹/半正定判定
    "expm_tol": 1e-10,               # 指数作用的目标精度
    "cp_eig_floor": -1e-9,           # Choi 矩阵最小特征值下限
    "trace_atol": 1e-10,             # tr∘L = 0 判定
    "classify_rtol": 1e-9,           # 幺正/退相位/退耦条件的相对阈值
    "group_atol": 1e-10,             # 退耦集合闭包与平均性质
    "contraction_slack": 1e-8,       # ‖map‖ ≤ 1 + slack
    "substep_budget": 1e-3,          # 乘积积分每个子步 ‖L‖·Δt 上限
    "smoothness_warn": 0.1,          # 时变生成元光滑性比值告警阈值
    "dense_limit": 4096,             # 提升算子稠密实现的维度上限
    "dense_action_limit": 1024,      # 指数作用走稠密矩阵的维度上限（更大时无矩阵作用）
    "fidelity_eps": 1e-6,            # 解析保真度允许越界量
    "var_floor": -1e-9,              # 解析方差允许的负舍入
}

# ==================== 随机游走配置 ====================
WALK_CONFIG = {
    "min_scheme_n": 100,                                              # 非 physical 方案的最小 n
    "chunk_size": 64,                                                 # 每块路径数（与线程数无关）
    "max_ensemble_bytes": _get_int_env("DECOQ_MAX_ENSEMBLE_MB", 1024) * 1024 * 1024,
    "default_threads": _get_int_env("DECOQ_THREADS", 4),
    "show_progress": True,                                            # 是否显示 tqdm 进度条
}

# ==================== 扩张（热库）配置 ====================
DILATION_CONFIG = {
    "max_total_dim": 64,     # d_H·d_H1 上限
    "max_bath_dim": 32,      # 热库维数上限（有限截断，精度随截断而定）
}

# ==================== 诊断配置 ====================
DIAGNOSE_CONFIG = {
    "regime_factor": 10.0,        # "≪" 的取值：10·τ ≤ t 且 10·t ≤ 1/Γ
    "intercept_sigma": 3.0,       # 截距与合并标准误的倍数阈值
    "band_factor": 3.0,           # 内禀判定的 (1/d)t²‖L̄‖² 容许倍数
    "min_tau_values": 3,          # 外推至少需要的 τ 个数
    "min_tau_span": 10.0,         # τ 取值需覆盖的最小倍数（一个量级）
    "intercept_floor": 1e-12,     # 确定性曲线（标准误为 0）时的绝对下限
}

# ==================== 输出配置 ====================
OUTPUT_CONFIG = {
    "csv_columns": [
        "t",
        "F_mean_analytic",
        "F_var_analytic",
        "F_mean_drift",
        "bound_extrinsic",
        "bound_intrinsic",
        "bound_dephasing",
    ],
    "significant_digits": 17,
    "analytic_csv": "analytic.csv",
    "bounds_file": "bounds.json",
    "manifest_file": "manifest.json",
    "verdict_file": "verdict.json",
    "curves_dir": "curves",
    "paths_dir": "paths",
    "envelope_csv": "envelope.csv",  # Chebyshev 区间（配置了 analysis.confidence 时输出）
    "max_jsonl_indices": 10000,  # 单条路径超过该脉冲数时 JSON-lines 中 pulse_indices 记为 null
}

# ==================== 日志配置 ====================
LOG_CONFIG = {
    "log_dir": _get_env("DECOQ_LOG_DIR", "logs"),
    "log_level": _get_env("DECOQ_LOG_LEVEL", "INFO"),
    "log_mode": "detailed",          # simple / detailed
    "full_display_limit": 3,         # 详细日志中前 N 条路径完整记录
}
