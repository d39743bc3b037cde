"""
配置验证
运行前检查实验配置：字段合法性、生成元与退耦集合的数学性质、集合内存预算、种子来源、输出目录
"""
import os
from pathlib import Path
from typing import List, Optional, Tuple

from decoq.config import WALK_CONFIG
from decoq.decoupling import validate
from decoq.errors import ConfigError
from decoq.experiment import ExperimentConfig, load_experiment_config, resolve_seed
from decoq.lindblad import classify_unitarity, compile, is_cpt_generator
from decoq.walk import ensemble_bytes


# 颜色输出支持
class Colors:
    """ANSI 颜色代码"""
    RED = '\033[91m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    RESET = '\033[0m'
    BOLD = '\033[1m'


def print_error(message: str, suggestion: str = ""):
    """统一错误提示格式"""
    print(f"{Colors.RED}❌ 错误：{message}{Colors.RESET}")
    if suggestion:
        print(f"   {Colors.YELLOW}💡 建议：{suggestion}{Colors.RESET}")


def print_warning(message: str, suggestion: str = ""):
    """统一警告提示格式"""
    print(f"{Colors.YELLOW}⚠️  警告：{message}{Colors.RESET}")
    if suggestion:
        print(f"   {Colors.YELLOW}💡 建议：{suggestion}{Colors.RESET}")


def print_success(message: str):
    print(f"{Colors.GREEN}✅ {message}{Colors.RESET}")


def print_info(message: str):
    print(f"{Colors.CYAN}ℹ️  {message}{Colors.RESET}")


def print_section(title: str):
    """打印章节标题"""
    print(f"\n{Colors.BOLD}{Colors.BLUE}{'='*60}{Colors.RESET}")
    print(f"{Colors.BOLD}{Colors.BLUE}{title}{Colors.RESET}")
    print(f"{Colors.BOLD}{Colors.BLUE}{'='*60}{Colors.RESET}\n")


# ==================== 单项检查 ====================

def check_generator(cfg: ExperimentConfig) -> Tuple[bool, str]:
    """生成元满足 CPT 条件"""
    specs = cfg.lindblad.specs if cfg.lindblad.is_time_dependent else (cfg.lindblad,)
    for i, spec in enumerate(specs):
        ok, report = is_cpt_generator(compile(spec))
        if not ok:
            where = f"采样点 {i} " if cfg.lindblad.is_time_dependent else ""
            return False, f"{where}生成元不满足 {report['check']}（偏差 {report['magnitude']:.3g}）"
    if cfg.lindblad.is_time_dependent:
        return True, f"时变生成元，{len(specs)} 个采样点均为 CPT 生成元"
    return True, f"CPT 生成元，类型 {classify_unitarity(compile(cfg.lindblad))}"


def check_decoupling(cfg: ExperimentConfig) -> Tuple[bool, str]:
    ok, report = validate(cfg.decoupling)
    if not ok:
        return False, f"退耦集合未通过 {report['check']} 检查（残差 {report['residual']:.3g}）"
    return True, f"|J| = {cfg.decoupling.size}，群封闭且满足平均条件"


def check_budget(cfg: ExperimentConfig) -> Tuple[bool, str]:
    """每个 MC 集合的内存需求"""
    if not cfg.mc_schemes:
        return True, "未配置 Monte-Carlo 集合"
    required = ensemble_bytes(cfg.paths, len(cfg.t_grid), cfg.dim * cfg.dim)
    budget = WALK_CONFIG["max_ensemble_bytes"]
    if required > budget:
        return False, f"单个集合需要 {required / 2**20:.1f} MiB，超出预算 {budget / 2**20:.1f} MiB"
    return True, f"单个集合 {required / 2**20:.2f} MiB（预算 {budget / 2**20:.0f} MiB）"


def check_regime(cfg: ExperimentConfig) -> Tuple[bool, str]:
    """最大 τ 与网格的相对尺度（只给提示，不判失败）"""
    tau_max = max(cfg.taus)
    positive = [t for t in cfg.t_grid if t > 0]
    if positive and min(positive) < 10 * tau_max:
        return True, f"⚠️ 部分 t < 10·τ_max={10 * tau_max:g}，这些时间点不参与判定"
    return True, f"τ 取值 {len(cfg.taus)} 个，τ_max = {tau_max:g}"


def check_seed(cfg: ExperimentConfig, cli_seed: Optional[int]) -> Tuple[bool, str]:
    if not cfg.mc_schemes:
        return True, "未配置 Monte-Carlo 集合，不需要种子"
    try:
        seed = resolve_seed(cli_seed, cfg)
    except ConfigError as e:
        return False, str(e)
    return True, f"种子 {seed}"


def check_output_dir(directory: str) -> Tuple[bool, str]:
    """输出目录存在且可写，或其最近的已存在父目录可写"""
    path = Path(directory).resolve()
    existing = path
    while not existing.exists():
        existing = existing.parent
    if not existing.is_dir():
        return False, f"路径不是目录: {existing}"
    if not os.access(existing, os.W_OK):
        return False, f"目录无写入权限: {existing}"
    return True, f"输出目录 {path}"


def check_experiment(config_path: str, cli_seed: Optional[int] = None,
                     out_dir: Optional[str] = None) -> Tuple[bool, List[Tuple[str, bool, str]]]:
    """
    Returns:
        (是否全部通过, [(检查项, 是否通过, 说明), ...])；配置无法解析时只有一项
    """
    try:
        cfg = load_experiment_config(config_path)
    except ConfigError as e:
        return False, [("配置解析", False, str(e))]
    results = [("配置解析", True, f"{config_path} 字段合法")]
    for name, check in (("生成元", check_generator), ("退耦集合", check_decoupling),
                        ("内存预算", check_budget), ("时间尺度", check_regime)):
        ok, message = check(cfg)
        results.append((name, ok, message))
    results.append(("种子", *check_seed(cfg, cli_seed)))
    results.append(("输出目录", *check_output_dir(out_dir or cfg.output_dir)))
    if cfg.dilation is not None:
        results.append(("扩张", True, f"d_H={cfg.dilation.dim_h}, d_H1={cfg.dilation.bath_dim}"))
    return all(ok for _, ok, _ in results), results


def main(config_path: str, cli_seed: Optional[int] = None, out_dir: Optional[str] = None) -> int:
    """打印检查结果；全部通过返回 0，否则返回 2"""
    print_section("实验配置检查")
    print_info(f"配置文件: {config_path}")
    all_passed, results = check_experiment(config_path, cli_seed, out_dir)
    for name, passed, message in results:
        if passed:
            if message.startswith("⚠️"):
                print_warning(f"{name}: {message[2:].strip()}")
            else:
                print_success(f"{name}: {message}")
        else:
            print_error(f"{name}: {message}")

    print_section("验证结果")
    passed_count = sum(1 for _, passed, _ in results if passed)
    print_info(f"总计: {len(results)} 项检查")
    print_success(f"通过: {passed_count} 项")
    if all_passed:
        print_success("🎉 所有配置检查通过！可以开始运行。")
        return 0
    print_error(f"失败: {len(results) - passed_count} 项", "按提示的字段路径修改配置后重试")
    return 2
