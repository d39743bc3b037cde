"""
实验配置（严格 JSON）

{
  "system":     {"dim": 2, "lindblad": {...}},
  "decoupling": {"type": "pauli", "qubits": 1},
  "walk":       {"tau": 1e-3, "taus": [...], "t_grid": [...] 或 {"start", "stop", "num"},
                 "n": 100, "paths": 25},
  "dilation":   {...}（可选）,
  "analysis":   {"schemes": [...], "norm_kind": "spectral", "confidence": 0.9},
  "output":     {"directory": "results/ad", "formats": ["json", "jsonl", "csv"]},
  "seed":       42（可选）
}
未知字段、类型错误与维数不一致均抛出带 JSON 路径的 ConfigError。
"""
import json
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from decoq import decoupling, dilation, lindblad
from decoq.config import WALK_CONFIG, get_env_seed
from decoq.decoupling import DecouplingSet
from decoq.dilation import DilationSpec
from decoq.errors import ConfigError
from decoq.lindblad import LindbladSpec

ANALYSIS_SCHEMES = ("mc_physical", "mc_diffusion", "mc_extrinsic", "analytic", "drift", "variance", "bounds")
MC_SCHEMES = {"mc_physical": "physical", "mc_diffusion": "diffusion", "mc_extrinsic": "physical"}
OUTPUT_FORMATS = ("json", "jsonl", "csv")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    dim: int
    lindblad: LindbladSpec
    decoupling: DecouplingSet
    tau: float
    taus: Tuple[float, ...]
    t_grid: Tuple[float, ...]
    n: int
    paths: int
    dilation: Optional[DilationSpec]
    schemes: Tuple[str, ...]
    norm_kind: str
    confidence: Optional[float]
    output_dir: str
    formats: Tuple[str, ...]
    seed: Optional[int]
    raw: Dict[str, Any]

    @property
    def mc_schemes(self) -> List[str]:
        return [s for s in self.schemes if s in MC_SCHEMES]


# ==================== 字段校验 ====================

def _object(obj: Any, path: str, required: Sequence[str], optional: Sequence[str] = ()) -> Dict[str, Any]:
    if not isinstance(obj, dict):
        raise ConfigError(path, "应为 JSON 对象")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}" if path else key, "缺少必需字段")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "未知字段")
    return obj


def _positive_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(path, f"应为正数，当前为 {value!r}")
    return float(value)


def _positive_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(path, f"应为正整数，当前为 {value!r}")
    return value


def _t_grid(obj: Any, path: str) -> Tuple[float, ...]:
    if isinstance(obj, dict):
        _object(obj, path, ["start", "stop", "num"])
        for key in ("start", "stop"):
            v = obj[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"{path}.{key}", "应为非负数")
        num = _positive_int(obj["num"], f"{path}.num")
        grid = tuple(float(t) for t in np.linspace(obj["start"], obj["stop"], num))
    elif isinstance(obj, list) and obj:
        grid = []
        for i, t in enumerate(obj):
            if isinstance(t, bool) or not isinstance(t, (int, float)) or t < 0:
                raise ConfigError(f"{path}[{i}]", "应为非负数")
            grid.append(float(t))
        grid = tuple(grid)
    else:
        raise ConfigError(path, "应为非空数组或 {start, stop, num}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(path, "必须严格递增")
    return grid


def _seed(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(path, "应为非负整数")
    return value


# ==================== 解析 ====================

def parse_experiment_config(obj: Any) -> ExperimentConfig:
    """
    Raises:
        ConfigError: 任意字段非法
    """
    _object(obj, "", ["system", "decoupling", "walk"], ["dilation", "analysis", "output", "seed"])

    system = _object(obj["system"], "system", ["dim", "lindblad"])
    dim = _positive_int(system["dim"], "system.dim")
    spec = lindblad.from_config(system["lindblad"], "system.lindblad")
    if spec.dim_h != dim:
        raise ConfigError("system.lindblad", f"生成元维数 {spec.dim_h} 与 system.dim={dim} 不一致")

    dset = decoupling.from_config(obj["decoupling"], dim, "decoupling")

    walk = _object(obj["walk"], "walk", ["tau", "t_grid"], ["taus", "n", "paths"])
    tau = _positive_number(walk["tau"], "walk.tau")
    if "taus" in walk:
        if not isinstance(walk["taus"], list) or not walk["taus"]:
            raise ConfigError("walk.taus", "应为非空数组")
        taus = tuple(_positive_number(v, f"walk.taus[{i}]") for i, v in enumerate(walk["taus"]))
        if len(set(taus)) != len(taus):
            raise ConfigError("walk.taus", "不能有重复值")
    else:
        taus = (tau,)
    t_grid = _t_grid(walk["t_grid"], "walk.t_grid")
    n = _positive_int(walk.get("n", WALK_CONFIG["min_scheme_n"]), "walk.n")
    paths = _positive_int(walk.get("paths", 1), "walk.paths")

    dil = None
    if "dilation" in obj:
        dil = dilation.from_config(obj["dilation"], dim, "dilation")

    analysis = _object(obj.get("analysis", {}), "analysis", [], ["schemes", "norm_kind", "confidence"])
    schemes = analysis.get("schemes", ["analytic", "drift", "variance", "bounds"])
    if not isinstance(schemes, list):
        raise ConfigError("analysis.schemes", "应为数组")
    for i, s in enumerate(schemes):
        if s not in ANALYSIS_SCHEMES:
            raise ConfigError(f"analysis.schemes[{i}]", f"未知类型 {s!r}，可选 {list(ANALYSIS_SCHEMES)}")
    if "mc_diffusion" in schemes and n < WALK_CONFIG["min_scheme_n"]:
        raise ConfigError("walk.n", f"mc_diffusion 需要 n ≥ {WALK_CONFIG['min_scheme_n']}")
    if "mc_extrinsic" in schemes and dil is None:
        raise ConfigError("analysis.schemes", "mc_extrinsic 需要 dilation 字段")
    if spec.is_time_dependent:
        unsupported = [s for s in schemes if s not in ("mc_physical", "mc_extrinsic")]
        if unsupported:
            raise ConfigError("analysis.schemes", f"时变生成元不支持 {unsupported}")
    norm_kind = analysis.get("norm_kind", "spectral")
    if norm_kind not in ("spectral", "frobenius"):
        raise ConfigError("analysis.norm_kind", "可选 spectral / frobenius")
    confidence = analysis.get("confidence")
    if confidence is not None and (isinstance(confidence, bool) or not isinstance(confidence, (int, float))
                                   or not 0 < confidence < 1):
        raise ConfigError("analysis.confidence", "应在 (0, 1) 内")

    output = _object(obj.get("output", {}), "output", [], ["directory", "formats"])
    directory = output.get("directory", "results")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", "应为非空字符串")
    formats = output.get("formats", list(OUTPUT_FORMATS))
    if not isinstance(formats, list) or any(f not in OUTPUT_FORMATS for f in formats):
        raise ConfigError("output.formats", f"可选 {list(OUTPUT_FORMATS)}")

    seed = _seed(obj["seed"], "seed") if "seed" in obj else None

    return ExperimentConfig(
        dim=dim, lindblad=spec, decoupling=dset, tau=tau, taus=taus, t_grid=t_grid, n=n, paths=paths,
        dilation=dil, schemes=tuple(schemes), norm_kind=norm_kind,
        confidence=float(confidence) if confidence is not None else None,
        output_dir=directory, formats=tuple(formats), seed=seed, raw=obj,
    )


def load_experiment_config(filepath: str) -> ExperimentConfig:
    """读取并解析配置文件"""
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError("", f"配置文件不存在: {filepath}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("", f"JSON 解析失败（第 {e.lineno} 行）: {e.msg}") from e
    return parse_experiment_config(obj)


def resolve_seed(cli_seed: Optional[int], cfg: ExperimentConfig) -> int:
    """--seed > DECOQ_SEED > 配置 seed，均缺失时报错"""
    if cli_seed is not None:
        if cli_seed < 0:
            raise ConfigError("--seed", "应为非负整数")
        return cli_seed
    try:
        env_seed = get_env_seed()
    except ValueError as e:
        raise ConfigError("DECOQ_SEED", str(e)) from e
    if env_seed is not None:
        return env_seed
    if cfg.seed is not None:
        return cfg.seed
    raise ConfigError("seed", "未指定种子：请使用 --seed、环境变量 DECOQ_SEED 或配置 seed 字段")


def derive_seed(seed: int, *keys: int) -> int:
    """由主种子与 (方案, τ) 编号派生互相独立的子种子"""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
