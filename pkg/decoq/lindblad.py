"""
Lindblad 生成元：构造、CPT 校验与分类

支持的输入形式（LindbladSpec.form）：
- hamiltonian: L = i·ad(H)
- gkls:        L(x) = i[H, x] + Σ_m γ_m (c_m x c_m* − ½{c_m* c_m, x})
- kraus_ce:    L(x) = Σ_i b_i x b_i* + a x + x a*（Christensen–Evans 形式）
- builtin:     amplitude_damping(gamma) / dephasing(gamma)
- table:       按时间采样的生成元表，相邻采样点之间线性插值
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from decoq.config import NUMERIC_CONFIG
from decoq.errors import ConfigError
from decoq.operator_space import (
    SIGMA_1,
    SIGMA_2,
    SIGMA_3,
    SuperOp,
    ad_of,
    expm,
    is_hermitian,
    left_mult,
    matrix_unit,
    right_mult,
    sandwich,
    sup_norm,
    vec,
)
from decoq.utils import matrix_from_pairs

PURELY_UNITARY = "purely_unitary"
PURELY_DEPHASING = "purely_dephasing"
GENERAL = "general"

FORMS = ("hamiltonian", "gkls", "kraus_ce", "builtin", "table")
BUILTINS = ("amplitude_damping", "dephasing")

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class LindbladSpec:
    """
    生成元描述

    Attributes:
        form: FORMS 之一
        hamiltonian: H（hamiltonian / gkls）
        jumps: 跳跃算子 c_m（gkls）
        rates: γ_m ≥ 0（gkls）
        kraus: b_i（kraus_ce）
        drift: a（kraus_ce）
        name / params: builtin 名称与参数
        times / specs: table 形式的采样时间与对应的常数生成元
    """
    form: str
    hamiltonian: Optional[np.ndarray] = None
    jumps: Tuple[np.ndarray, ...] = ()
    rates: Tuple[float, ...] = ()
    kraus: Tuple[np.ndarray, ...] = ()
    drift: Optional[np.ndarray] = None
    name: str = ""
    params: Dict[str, float] = field(default_factory=dict)
    times: Tuple[float, ...] = ()
    specs: Tuple["LindbladSpec", ...] = ()

    @property
    def is_time_dependent(self) -> bool:
        return self.form == "table"

    @property
    def dim_h(self) -> int:
        if self.form in ("hamiltonian", "gkls"):
            if self.hamiltonian is not None:
                return self.hamiltonian.shape[0]
            return self.jumps[0].shape[0]
        if self.form == "kraus_ce":
            return self.drift.shape[0]
        if self.form == "builtin":
            return 2
        return self.specs[0].dim_h


# ==================== 构造辅助 ====================

def hamiltonian_spec(h) -> LindbladSpec:
    return LindbladSpec(form="hamiltonian", hamiltonian=np.asarray(h, dtype=complex))


def gkls_spec(h, jumps: Sequence, rates: Sequence[float]) -> LindbladSpec:
    jumps = tuple(np.asarray(c, dtype=complex) for c in jumps)
    h = np.zeros_like(jumps[0]) if h is None and jumps else h
    return LindbladSpec(
        form="gkls",
        hamiltonian=None if h is None else np.asarray(h, dtype=complex),
        jumps=jumps,
        rates=tuple(float(r) for r in rates),
    )


def kraus_ce_spec(kraus: Sequence, drift) -> LindbladSpec:
    return LindbladSpec(
        form="kraus_ce",
        kraus=tuple(np.asarray(b, dtype=complex) for b in kraus),
        drift=np.asarray(drift, dtype=complex),
    )


def builtin_spec(name: str, **params) -> LindbladSpec:
    return LindbladSpec(form="builtin", name=name, params=dict(params))


def table_spec(times: Sequence[float], specs: Sequence[LindbladSpec]) -> LindbladSpec:
    return LindbladSpec(form="table", times=tuple(float(t) for t in times), specs=tuple(specs))


# ==================== 内置模型 ====================

def amplitude_damping(gamma: float) -> SuperOp:
    """
    振幅阻尼：跳跃算子 σ₋ = |1⟩⟨0|，速率 4γ

    L(x) = −γ(2x + σ₃x + xσ₃ − σ₁xσ₁ − σ₂xσ₂ − iσ₁xσ₂ + iσ₂xσ₁)
    """
    if gamma < 0:
        raise ValueError(f"gamma 必须非负，当前为 {gamma}")
    eye = np.eye(2)
    m = (2 * sandwich(eye, eye) + left_mult(SIGMA_3) + right_mult(SIGMA_3)
         - sandwich(SIGMA_1, SIGMA_1) - sandwich(SIGMA_2, SIGMA_2)
         - 1j * sandwich(SIGMA_1, SIGMA_2) + 1j * sandwich(SIGMA_2, SIGMA_1))
    return SuperOp(2, -gamma * m)


def dephasing(gamma: float) -> SuperOp:
    """L(x) = γ(σ₃xσ₃ − x)"""
    if gamma < 0:
        raise ValueError(f"gamma 必须非负，当前为 {gamma}")
    return SuperOp(2, gamma * (sandwich(SIGMA_3, SIGMA_3) - np.eye(4)))


_BUILTIN_FACTORIES = {
    "amplitude_damping": amplitude_damping,
    "dephasing": dephasing,
}


# ==================== 编译 ====================

def _gkls_matrix(h, jumps, rates) -> np.ndarray:
    dim_h = jumps[0].shape[0] if jumps else h.shape[0]
    m = np.zeros((dim_h * dim_h, dim_h * dim_h), dtype=complex)
    if h is not None:
        m += 1j * ad_of(h).matrix
    for c, rate in zip(jumps, rates):
        cdc = c.conj().T @ c
        m += rate * (sandwich(c, c.conj().T) - 0.5 * left_mult(cdc) - 0.5 * right_mult(cdc))
    return m


def _check_trace_annihilation(m: np.ndarray, dim_h: int) -> float:
    """max |tr L(x)|，即 vec(1)* · M 的最大分量"""
    row = vec(np.eye(dim_h)).conj() @ m
    return float(np.max(np.abs(row), initial=0.0))


def compile(spec: LindbladSpec) -> SuperOp:
    """
    编译为 SuperOp

    Raises:
        ValueError: 速率为负、H 非厄米、维数不一致或 kraus_ce 不保迹
    """
    if spec.form == "hamiltonian":
        h = spec.hamiltonian
        if h is None or not is_hermitian(h):
            raise ValueError("hamiltonian: H is not hermitian")
        return SuperOp(h.shape[0], 1j * ad_of(h).matrix)

    if spec.form == "gkls":
        if len(spec.jumps) != len(spec.rates):
            raise ValueError("gkls: jumps 与 rates 个数不一致")
        for i, rate in enumerate(spec.rates):
            if rate < 0:
                raise ValueError(f"gkls.jumps[{i}].rate: 速率必须非负，当前为 {rate}")
        if spec.hamiltonian is not None and not is_hermitian(spec.hamiltonian):
            raise ValueError("gkls.H: H is not hermitian")
        dim_h = spec.dim_h
        for i, c in enumerate(spec.jumps):
            if c.shape != (dim_h, dim_h):
                raise ValueError(f"gkls.jumps[{i}].c: 形状应为 {(dim_h, dim_h)}，实际为 {c.shape}")
        return SuperOp(dim_h, _gkls_matrix(spec.hamiltonian, spec.jumps, spec.rates))

    if spec.form == "kraus_ce":
        a = spec.drift
        dim_h = a.shape[0]
        m = left_mult(a) + right_mult(a.conj().T)
        for i, b in enumerate(spec.kraus):
            if b.shape != a.shape:
                raise ValueError(f"kraus_ce.kraus[{i}]: 形状应为 {a.shape}，实际为 {b.shape}")
            m = m + sandwich(b, b.conj().T)
        residual = _check_trace_annihilation(m, dim_h)
        if residual > NUMERIC_CONFIG["trace_atol"] * max(sup_norm(m), 1.0):
            raise ValueError(f"kraus_ce: Σ b_i* b_i + a + a* ≠ 0，tr∘L 残差 {residual:.3e}")
        return SuperOp(dim_h, m)

    if spec.form == "builtin":
        if spec.name not in _BUILTIN_FACTORIES:
            raise ValueError(f"builtin: 未知模型 {spec.name!r}，可选 {list(_BUILTIN_FACTORIES)}")
        return _BUILTIN_FACTORIES[spec.name](**spec.params)

    if spec.form == "table":
        raise ValueError("table: 时变生成元请用 compile_table / sample_time_dependent")

    raise ValueError(f"未知的生成元形式: {spec.form!r}")


# ==================== CPT 校验与分类 ====================

def choi_matrix(channel: SuperOp) -> np.ndarray:
    """C = Σ_{k,l} E_kl ⊗ Φ(E_kl)"""
    dim_h = channel.dim_h
    c = np.zeros((dim_h * dim_h, dim_h * dim_h), dtype=complex)
    for k in range(dim_h):
        for l in range(dim_h):
            c += np.kron(matrix_unit(k, l, dim_h), channel.apply(matrix_unit(k, l, dim_h)))
    return c


def is_cpt_generator(L: SuperOp) -> Tuple[bool, Dict[str, Any]]:
    """
    检查 tr∘L = 0 以及 e^{tL}（t = 1/max(‖L‖,1)）的 Choi 矩阵半正定

    Returns:
        (是否通过, witness)；witness 含 check / magnitude
    """
    norm = sup_norm(L)
    residual = _check_trace_annihilation(L.matrix, L.dim_h)
    if residual > NUMERIC_CONFIG["trace_atol"] * max(norm, 1.0):
        return False, {"check": "trace_annihilation", "magnitude": residual}
    t = 1.0 / max(norm, 1.0)
    choi = choi_matrix(expm(L, t))
    min_eig = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2).min())
    if min_eig < NUMERIC_CONFIG["cp_eig_floor"]:
        return False, {"check": "choi_psd", "magnitude": min_eig, "t": t}
    return True, {"check": "ok", "magnitude": min_eig, "t": t}


def classify_unitarity(L: SuperOp) -> str:
    """purely_unitary（L† = −L）/ purely_dephasing（L† = L）/ general"""
    threshold = NUMERIC_CONFIG["classify_rtol"] * max(sup_norm(L), 1.0)
    if sup_norm(L + L.dagger()) <= threshold:
        return PURELY_UNITARY
    if sup_norm(L - L.dagger()) <= threshold:
        return PURELY_DEPHASING
    return GENERAL


# ==================== 时变生成元 ====================

@dataclass(frozen=True, eq=False)
class GeneratorTable:
    """已编译的采样表：times 严格递增，generators 与之一一对应"""
    times: Tuple[float, ...]
    generators: Tuple[SuperOp, ...]

    @property
    def dim_h(self) -> int:
        return self.generators[0].dim_h

    @property
    def domain(self) -> Tuple[float, float]:
        return self.times[0], self.times[-1]

    @property
    def is_single(self) -> bool:
        """单点表视为全时间常数"""
        return len(self.times) == 1

    def _segment(self, t: float) -> int:
        lo, hi = self.domain
        if not lo <= t <= hi:
            raise ValueError(f"t = {t} 超出采样表定义域 [{lo}, {hi}]")
        # 断点处取右侧区间（左端点取样），终点取最后一个区间
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(idx, 0), len(self.times) - 2)

    def at(self, t: float) -> SuperOp:
        if self.is_single:
            return self.generators[0]
        i = self._segment(t)
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return self.generators[i] * (1.0 - w) + self.generators[i + 1] * w

    def derivative(self, t: float) -> SuperOp:
        if self.is_single:
            return SuperOp.zero(self.dim_h)
        i = self._segment(t)
        t0, t1 = self.times[i], self.times[i + 1]
        return (self.generators[i + 1] - self.generators[i]) * (1.0 / (t1 - t0))

    def breakpoints(self, t_start: float, t_stop: float) -> List[float]:
        """[t_start, t_stop] 内的采样点（含两端）"""
        inner = [s for s in self.times if t_start < s < t_stop]
        return [t_start] + inner + [t_stop]

    def max_norm(self) -> float:
        return max(sup_norm(g) for g in self.generators)

    def is_constant(self) -> bool:
        first = self.generators[0].matrix
        return all(np.array_equal(first, g.matrix) for g in self.generators[1:])


def compile_table(spec: LindbladSpec) -> GeneratorTable:
    if spec.form != "table":
        generator = compile(spec)
        return GeneratorTable((0.0,), (generator,))
    if len(spec.times) != len(spec.specs) or not spec.times:
        raise ValueError("table: times 与 specs 个数不一致或为空")
    if any(b <= a for a, b in zip(spec.times, spec.times[1:])):
        raise ValueError("table: times 必须严格递增")
    generators = tuple(compile(s) for s in spec.specs)
    if len({g.dim_h for g in generators}) != 1:
        raise ValueError("table: 各采样点维数不一致")
    return GeneratorTable(spec.times, generators)


def smoothness_ratio(table: GeneratorTable, t: float, tau: float) -> float:
    """τ·‖dL/dt‖ / ‖L(t)‖；L(t) = 0 且导数非零时为 inf"""
    deriv = sup_norm(table.derivative(t))
    if deriv == 0.0:
        return 0.0
    norm = sup_norm(table.at(t))
    return float(tau * deriv / norm) if norm > 0 else float("inf")


def sample_time_dependent(spec: LindbladSpec, t: float, tau: float = 1.0) -> Tuple[SuperOp, float]:
    """
    采样时变生成元

    Args:
        spec: table 形式（常数形式按单点表处理）
        t: 时间，须在采样表定义域内
        tau: 光滑性比值中的脉冲间隔

    Returns:
        (L(t), 光滑性比值 τ·‖dL/dt‖/‖L(t)‖)
    """
    table = compile_table(spec)
    if table.is_single:
        return table.generators[0], 0.0
    generator = table.at(t)
    ratio = smoothness_ratio(table, t, tau)
    if ratio > NUMERIC_CONFIG["smoothness_warn"]:
        logging.warning(f"⚠️ 时变生成元在 t={t:.4g} 处光滑性比值 {ratio:.3g} 超过 {NUMERIC_CONFIG['smoothness_warn']}")
    return generator, ratio


# ==================== 配置解析 ====================

def _matrix(obj: Any, path: str) -> np.ndarray:
    try:
        m = matrix_from_pairs(obj)
    except ValueError as e:
        raise ConfigError(path, str(e)) from e
    if m.shape[0] != m.shape[1]:
        raise ConfigError(path, f"需要方阵，实际形状为 {m.shape}")
    return m


def _require_keys(obj: Any, path: str, required: Sequence[str], optional: Sequence[str] = ()):
    if not isinstance(obj, dict):
        raise ConfigError(path, "应为 JSON 对象")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "未知字段")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}" if path else key, "缺少必需字段")


def _number(obj: Any, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, f"应为数值，实际为 {obj!r}")
    return float(obj)


def from_config(obj: Any, path: str = "system.lindblad") -> LindbladSpec:
    """
    解析配置中的 lindblad 对象（严格模式）

    Raises:
        ConfigError: 未知字段、类型错误、速率为负、H 非厄米等，附带 JSON 路径
    """
    if not isinstance(obj, dict) or "form" not in obj:
        raise ConfigError(f"{path}.form", f"缺少 form 字段，可选 {list(FORMS)}")
    form = obj["form"]

    if form == "hamiltonian":
        _require_keys(obj, path, ["form", "H"])
        h = _matrix(obj["H"], f"{path}.H")
        if not is_hermitian(h):
            raise ConfigError(f"{path}.H", "not hermitian")
        return hamiltonian_spec(h)

    if form == "gkls":
        _require_keys(obj, path, ["form", "jumps"], ["H"])
        h = _matrix(obj["H"], f"{path}.H") if "H" in obj else None
        if h is not None and not is_hermitian(h):
            raise ConfigError(f"{path}.H", "not hermitian")
        if not isinstance(obj["jumps"], list) or not obj["jumps"]:
            raise ConfigError(f"{path}.jumps", "应为非空数组")
        jumps, rates = [], []
        for i, item in enumerate(obj["jumps"]):
            item_path = f"{path}.jumps[{i}]"
            _require_keys(item, item_path, ["c", "rate"])
            c = _matrix(item["c"], f"{item_path}.c")
            rate = _number(item["rate"], f"{item_path}.rate")
            if rate < 0:
                raise ConfigError(f"{item_path}.rate", f"速率必须非负，当前为 {rate}")
            if jumps and c.shape != jumps[0].shape:
                raise ConfigError(f"{item_path}.c", "维数与其他跳跃算子不一致")
            jumps.append(c)
            rates.append(rate)
        if h is not None and h.shape != jumps[0].shape:
            raise ConfigError(f"{path}.H", "维数与跳跃算子不一致")
        return gkls_spec(h, jumps, rates)

    if form == "kraus_ce":
        _require_keys(obj, path, ["form", "kraus", "a"])
        a = _matrix(obj["a"], f"{path}.a")
        if not isinstance(obj["kraus"], list):
            raise ConfigError(f"{path}.kraus", "应为数组")
        kraus = [_matrix(b, f"{path}.kraus[{i}]") for i, b in enumerate(obj["kraus"])]
        spec = kraus_ce_spec(kraus, a)
        try:
            compile(spec)
        except ValueError as e:
            raise ConfigError(path, str(e)) from e
        return spec

    if form == "builtin":
        _require_keys(obj, path, ["form", "name"], ["params"])
        name = obj["name"]
        if name not in BUILTINS:
            raise ConfigError(f"{path}.name", f"未知模型 {name!r}，可选 {list(BUILTINS)}")
        params = obj.get("params", {})
        _require_keys(params, f"{path}.params", [], ["gamma"])
        gamma = _number(params.get("gamma", 1.0), f"{path}.params.gamma")
        if gamma < 0:
            raise ConfigError(f"{path}.params.gamma", "gamma 必须非负")
        return builtin_spec(name, gamma=gamma)

    if form == "table":
        _require_keys(obj, path, ["form", "times", "specs"])
        times = obj["times"]
        if not isinstance(times, list) or not times:
            raise ConfigError(f"{path}.times", "应为非空数组")
        times = [_number(t, f"{path}.times[{i}]") for i, t in enumerate(times)]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"{path}.times", "必须严格递增")
        if not isinstance(obj["specs"], list) or len(obj["specs"]) != len(times):
            raise ConfigError(f"{path}.specs", "个数必须与 times 一致")
        specs = []
        for i, sub in enumerate(obj["specs"]):
            if isinstance(sub, dict) and sub.get("form") == "table":
                raise ConfigError(f"{path}.specs[{i}].form", "采样表不能嵌套")
            specs.append(from_config(sub, f"{path}.specs[{i}]"))
        if len({s.dim_h for s in specs}) != 1:
            raise ConfigError(f"{path}.specs", "各采样点维数不一致")
        return table_spec(times, specs)

    raise ConfigError(f"{path}.form", f"未知形式 {form!r}，可选 {list(FORMS)}")
