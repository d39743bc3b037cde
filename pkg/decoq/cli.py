"""
命令行入口

子命令：
    simulate         生成 Monte-Carlo 路径集合，写出保真度曲线、路径 JSON-lines 与 manifest
    analytic         连续极限的解析均值/方差、drift 均值与各类界，写出 CSV 与 bounds.json
    classify         读取多个 τ 的曲线与 bounds.json，给出内禀/外禀判定
    validate-config  检查配置文件

退出码：0 成功，1 其他错误，2 配置错误，3 超出预算，4 τ 覆盖不足
"""
import argparse
import logging
import os
import platform
import sys
from typing import Dict, List, Optional

import numpy as np
import scipy

from decoq import __version__, check_config
from decoq.config import LOG_CONFIG, OUTPUT_CONFIG
from decoq.diagnose import BoundReport, bounds, classify, dilation_norms
from decoq.dilation import simulate_extrinsic_ensemble
from decoq.errors import (
    EXIT_BUDGET,
    EXIT_CONFIG,
    EXIT_COVERAGE,
    EXIT_FAILURE,
    EXIT_OK,
    BudgetExceededError,
    ConfigError,
    InsufficientCoverageError,
)
from decoq.experiment import (
    ANALYSIS_SCHEMES,
    MC_SCHEMES,
    ExperimentConfig,
    derive_seed,
    load_experiment_config,
    resolve_seed,
)
from decoq.fidelity import FidelityCurve, analytic_curve, chebyshev_band, drift_fidelity, mc_fidelity
from decoq.lindblad import compile
from decoq.limit import build
from decoq.logger import (
    close_log_file,
    init_log_file,
    log_ensemble_start,
    log_event,
    log_path_summary,
    log_verdict,
    setup_logging,
)
from decoq.utils import config_digest, load_json, save_json, write_csv_rows, write_jsonl
from decoq.walk import WalkConfig, WalkPath, simulate_ensemble


def _versions() -> Dict[str, str]:
    return {
        "decoq": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _curve_name(scheme: str, tau: float) -> str:
    return f"{scheme}_tau_{float(tau)!r}"


# ==================== simulate ====================

def run_scheme(cfg: ExperimentConfig, scheme: str, tau: float, master_seed: int,
               threads: Optional[int] = None) -> List[WalkPath]:
    """一个 (方案, τ) 的路径集合"""
    walk_scheme = MC_SCHEMES[scheme]
    wcfg = WalkConfig(
        tau=tau, t_grid=cfg.t_grid, scheme=walk_scheme,
        n=cfg.n if walk_scheme != "physical" else 0,
        paths=cfg.paths, master_seed=master_seed,
    )
    if scheme == "mc_extrinsic":
        return simulate_extrinsic_ensemble(cfg.dilation, cfg.decoupling, wcfg, threads=threads)
    return simulate_ensemble(cfg.lindblad, cfg.decoupling, wcfg, threads=threads)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    out_dir = args.out or cfg.output_dir
    if not cfg.mc_schemes:
        raise ConfigError("analysis.schemes", "没有 Monte-Carlo 方案（mc_physical / mc_diffusion / mc_extrinsic）")
    init_log_file(args.log_dir, "simulate", {
        "配置文件": args.config, "输出目录": out_dir, "种子": seed,
        "方案": ", ".join(cfg.mc_schemes), "τ": ", ".join(f"{t:g}" for t in cfg.taus), "路径数": cfg.paths,
    })

    artifacts = []
    curves_dir = os.path.join(out_dir, OUTPUT_CONFIG["curves_dir"])
    paths_dir = os.path.join(out_dir, OUTPUT_CONFIG["paths_dir"])
    for scheme in cfg.mc_schemes:
        for k, tau in enumerate(cfg.taus):
            master_seed = derive_seed(seed, ANALYSIS_SCHEMES.index(scheme), k)
            ensemble = run_scheme(cfg, scheme, tau, master_seed, args.threads)
            log_ensemble_start(scheme, tau, cfg.paths, ensemble[0].n_steps, cfg.decoupling.size)
            for path in ensemble:
                log_path_summary(path.path_id, path.fidelities, path.max_norm)

            curve = mc_fidelity(ensemble)
            curve.scheme = scheme
            curve.metadata.update({"tau": tau, "paths": cfg.paths, "n": cfg.n if scheme == "mc_diffusion" else None})
            name = _curve_name(scheme, tau)
            if "json" in cfg.formats:
                save_json(curve.to_dict(), os.path.join(curves_dir, f"{name}.json"))
                artifacts.append(f"{OUTPUT_CONFIG['curves_dir']}/{name}.json")
            if "jsonl" in cfg.formats:
                limit = OUTPUT_CONFIG["max_jsonl_indices"]
                write_jsonl((p.to_record(limit) for p in ensemble), os.path.join(paths_dir, f"{name}.jsonl"))
                artifacts.append(f"{OUTPUT_CONFIG['paths_dir']}/{name}.jsonl")
            logging.info(f"✅ {scheme} τ={tau:g}: F̄_end={curve.mc_mean[-1]:.10g} ± {curve.mc_stderr[-1]:.2g}")

    manifest = {
        "command": "simulate",
        "config_digest": config_digest(cfg.raw),
        "seed": seed,
        "versions": _versions(),
        "artifacts": artifacts,
    }
    save_json(manifest, os.path.join(out_dir, OUTPUT_CONFIG["manifest_file"]))
    logging.info(f"📁 输出目录: {os.path.abspath(out_dir)}（{len(artifacts)} 个文件）")
    return EXIT_OK


# ==================== analytic ====================

def analytic_rows(cfg: ExperimentConfig) -> Dict[str, object]:
    """
    逐时间点计算 CSV 各列；未配置的列为 None

    Returns:
        {"rows": [...], "report": BoundReport 或 None, "curve": FidelityCurve 或 None}
    """
    if cfg.lindblad.is_time_dependent:
        raise ConfigError("system.lindblad", "analytic 需要时不变生成元")
    gens = build(compile(cfg.lindblad), cfg.decoupling, cfg.tau)
    n_t = len(cfg.t_grid)

    curve = None
    mean = var = [None] * n_t
    if "analytic" in cfg.schemes or "variance" in cfg.schemes:
        curve = analytic_curve(gens, cfg.t_grid, with_variance="variance" in cfg.schemes)
        if "analytic" in cfg.schemes:
            mean = curve.analytic_mean
        if "variance" in cfg.schemes:
            var = curve.analytic_var
    drift = [drift_fidelity(gens, t)[0] for t in cfg.t_grid] if "drift" in cfg.schemes else [None] * n_t

    report = None
    ext = intr = deph = [None] * n_t
    if "bounds" in cfg.schemes:
        dilated = dilation_norms(cfg.dilation, cfg.decoupling) if cfg.dilation is not None else None
        report = bounds(gens, cfg.tau, cfg.t_grid, cfg.norm_kind, dilated=dilated)
        ext = report.bound_extrinsic or ext
        intr = report.bound_intrinsic
        deph = report.bound_dephasing or deph

    rows = [list(r) for r in zip(cfg.t_grid, mean, var, drift, ext, intr, deph)]
    return {"rows": rows, "report": report, "curve": curve}


def cmd_analytic(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config)
    out_dir = args.out or cfg.output_dir
    init_log_file(args.log_dir, "analytic", {"配置文件": args.config, "输出目录": out_dir, "τ": cfg.tau})

    result = analytic_rows(cfg)
    digits = OUTPUT_CONFIG["significant_digits"]
    if "csv" in cfg.formats:
        write_csv_rows(os.path.join(out_dir, OUTPUT_CONFIG["analytic_csv"]), OUTPUT_CONFIG["csv_columns"],
                       result["rows"], digits)
        logging.info(f"✅ 已写出 {OUTPUT_CONFIG['analytic_csv']}（{len(result['rows'])} 行）")
    report = result["report"]
    if report is not None:
        log_event("界与范数", {"gamma": report.gamma, "norms": report.norms, "notes": report.notes})
        if "json" in cfg.formats:
            save_json(report.to_dict(), os.path.join(out_dir, OUTPUT_CONFIG["bounds_file"]))
    curve = result["curve"]
    if cfg.confidence is not None and curve is not None and curve.analytic_var is not None:
        band = chebyshev_band(curve, cfg.confidence)
        write_csv_rows(os.path.join(out_dir, OUTPUT_CONFIG["envelope_csv"]), ["t", "lower", "upper"],
                       [[t, lo, hi] for t, (lo, hi) in zip(cfg.t_grid, band)], digits)
    return EXIT_OK


# ==================== classify ====================

def load_curves(curves_dir: str, scheme: Optional[str] = None) -> List[FidelityCurve]:
    """读取目录下的曲线文件；未指定方案时要求只有一种"""
    if not os.path.isdir(curves_dir):
        raise ConfigError("--curves", f"目录不存在: {curves_dir}")
    curves = []
    for name in sorted(os.listdir(curves_dir)):
        if not name.endswith(".json"):
            continue
        try:
            curves.append(FidelityCurve.from_dict(load_json(os.path.join(curves_dir, name))))
        except (ValueError, TypeError) as e:
            raise ConfigError(f"--curves/{name}", f"不是有效的曲线文件: {e}") from e
    schemes = sorted({c.scheme for c in curves})
    if scheme is not None:
        curves = [c for c in curves if c.scheme == scheme]
    elif len(schemes) > 1:
        raise ConfigError("--scheme", f"目录中包含多种方案 {schemes}，请指定其一")
    if not curves:
        raise InsufficientCoverageError(f"{curves_dir} 中没有可用的曲线")
    return curves


def cmd_classify(args: argparse.Namespace) -> int:
    curves = load_curves(args.curves, args.scheme)
    try:
        report = BoundReport.from_dict(load_json(args.bounds))
    except (ValueError, TypeError, FileNotFoundError) as e:
        raise ConfigError("--bounds", f"无法读取界文件: {e}") from e
    init_log_file(args.log_dir, "classify", {"曲线目录": args.curves, "界文件": args.bounds, "曲线数": len(curves)})

    verdict = classify(curves, report)
    log_verdict(verdict.classification, verdict.evidence)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.curves.rstrip("/\\")))
    save_json(verdict.to_dict(), os.path.join(out_dir, OUTPUT_CONFIG["verdict_file"]))
    print(verdict.classification)
    return EXIT_OK


def cmd_validate_config(args: argparse.Namespace) -> int:
    return check_config.main(args.config, args.seed, args.out)


# ==================== 入口 ====================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="主种子（优先于 DECOQ_SEED 与配置中的 seed）")
    common.add_argument("--threads", type=int, default=None, help="并发线程数（不影响结果）")
    common.add_argument("--out", type=str, default=None, help="输出目录（覆盖配置 output.directory）")
    common.add_argument("--log_dir", type=str, default=LOG_CONFIG["log_dir"], help="日志目录")
    common.add_argument("--log_level", type=str, default=LOG_CONFIG["log_level"], help="日志级别")

    parser = argparse.ArgumentParser(prog="decoq", description="随机动力学退耦：模拟、解析极限与退相干判定")
    parser.add_argument("--version", action="version", version=f"decoq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="生成 Monte-Carlo 路径集合")
    p.add_argument("config", help="实验配置 JSON")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("analytic", parents=[common], help="解析曲线与界")
    p.add_argument("config", help="实验配置 JSON")
    p.set_defaults(handler=cmd_analytic)

    p = sub.add_parser("classify", parents=[common], help="内禀/外禀判定")
    p.add_argument("--curves", required=True, help="曲线目录（simulate 输出的 curves/）")
    p.add_argument("--bounds", required=True, help="bounds.json（analytic 输出）")
    p.add_argument("--scheme", default=None, help="目录中有多种方案时指定其一")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("validate-config", parents=[common], help="检查配置文件")
    p.add_argument("config", help="实验配置 JSON")
    p.set_defaults(handler=cmd_validate_config)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command != "validate-config":
        setup_logging(args.log_dir, args.log_level, LOG_CONFIG["log_mode"])
    try:
        return args.handler(args)
    except ConfigError as e:
        logging.error(f"❌ 配置错误: {e}")
        return EXIT_CONFIG
    except BudgetExceededError as e:
        logging.error(f"❌ 超出预算: {e}")
        return EXIT_BUDGET
    except InsufficientCoverageError as e:
        logging.error(f"❌ τ 覆盖不足: {e}")
        return EXIT_COVERAGE
    except Exception as e:
        logging.exception(f"❌ 运行失败: {e}")
        return EXIT_FAILURE
    finally:
        close_log_file()


if __name__ == "__main__":
    sys.exit(main())
