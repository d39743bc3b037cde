"""
连续极限：L̂、L̂^(drift)、时变 L̂(t) 与提升生成元

- L̂ = L̄ + (τ/|J|) Σ_j L_j²，L̂^(drift) = L̄
- 槽位签名 s ∈ {+,−}ⁿ 的提升生成元：
      G_s = Σ_k L̂^{(s_k)} 作用在第 k 槽 + 2(τ/|J|) Σ_j Σ_{k<l} L_j^{(s_k)} ⊗ L_j^{(s_l)}
  mode="conj" 时 '−' 槽取复共轭（混合矩 E[α⊗ᾱ⊗…] 的生成元），
  mode="dagger" 时 '−' 槽取伴随（带伴随的展示形式）
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from decoq.config import NUMERIC_CONFIG
from decoq.decoupling import DecouplingSet, averaged_generator, fluctuation_generators
from decoq.lindblad import GeneratorTable, compile_table, smoothness_ratio
from decoq.operator_space import LiftedOp, SuperOp, expm, is_density, sup_norm, unvec, vec

# 混合提升的槽位签名
MIXED_KINDS = {
    "check2": "+-",
    "check4": "++--",
    "c11": "++",
    "c12": "-+",
    "c31": "++-",
    "c32": "-+-",
}


@dataclass(frozen=True, eq=False)
class LimitGenerators:
    """连续极限所需的全部生成元"""
    L: SuperOp
    L_bar: SuperOp
    L_list: Tuple[SuperOp, ...]
    L_hat: SuperOp
    L_hat_drift: SuperOp
    tau: float
    set_size: int

    @property
    def dim_h(self) -> int:
        return self.L.dim_h

    @property
    def d(self) -> int:
        return self.L.d

    @property
    def diffusion_part(self) -> SuperOp:
        """(τ/|J|) Σ_j L_j²"""
        return self.L_hat - self.L_bar


def build(L: SuperOp, dset: DecouplingSet, tau: float) -> LimitGenerators:
    """
    Raises:
        ValueError: tau ≤ 0 或维数不一致
    """
    if not tau > 0:
        raise ValueError(f"tau 必须为正，当前为 {tau}")
    L_bar = averaged_generator(L, dset)
    L_list = tuple(fluctuation_generators(L, dset))
    square_sum = sum((L_j.matrix @ L_j.matrix for L_j in L_list), np.zeros_like(L.matrix))
    L_hat = SuperOp(L.dim_h, L_bar.matrix + (tau / dset.size) * square_sum)
    return LimitGenerators(
        L=L, L_bar=L_bar, L_list=L_list, L_hat=L_hat, L_hat_drift=L_bar,
        tau=float(tau), set_size=dset.size,
    )


def expected_state(gens: LimitGenerators, rho0, t: float, scheme: str = "diffusion") -> np.ndarray:
    """E[ρ_t] = e^{tL̂}(ρ₀)（diffusion）或 e^{tL̄}(ρ₀)（drift）"""
    rho0 = np.asarray(rho0, dtype=complex)
    if not is_density(rho0):
        raise ValueError("rho0 不是密度矩阵")
    if t < 0:
        raise ValueError(f"t 必须非负，当前为 {t}")
    if scheme == "diffusion":
        gen = gens.L_hat
    elif scheme == "drift":
        gen = gens.L_hat_drift
    else:
        raise ValueError(f"未知 scheme {scheme!r}，可选 ['diffusion', 'drift']")
    return expm(gen, t).apply(rho0)


@dataclass(frozen=True)
class TimeDependentResult:
    """时变期望态及其元数据"""
    state: np.ndarray
    max_smoothness_ratio: float
    flagged: bool
    n_factors: int
    sampling: str = "left_endpoint"


def hat_generator_at(table: GeneratorTable, dset: DecouplingSet, tau: float, t: float) -> SuperOp:
    """L̂(t) = L̄(t) + (τ/|J|) Σ_j Ad(v_j)∘(L(t) − L̄(t))²∘Ad(v_j*)"""
    return build(table.at(t), dset, tau).L_hat


def expected_state_time_dependent(spec, dset: DecouplingSet, tau: float, rho0, t: float) -> TimeDependentResult:
    """
    T exp(∫₀ᵗ L̂(t′)dt′)(ρ₀) 的乘积积分实现

    每段按采样表断点切分，子步满足 ‖L̂‖·Δt ≤ substep_budget，子步取左端点的 L̂。
    光滑性比值 τ·‖dL/dt‖/‖L‖ 超过阈值时照常计算，只在结果中标记。
    """
    table = spec if isinstance(spec, GeneratorTable) else compile_table(spec)
    rho0 = np.asarray(rho0, dtype=complex)
    if not is_density(rho0):
        raise ValueError("rho0 不是密度矩阵")
    if t < 0:
        raise ValueError(f"t 必须非负，当前为 {t}")
    if not table.is_single:
        lo, hi = table.domain
        if not lo <= t <= hi or lo > 0:
            raise ValueError(f"[0, {t}] 超出采样表定义域 [{lo}, {hi}]")

    v = vec(rho0)
    budget = NUMERIC_CONFIG["substep_budget"]
    max_ratio = 0.0
    n_factors = 0
    points = [0.0, t] if table.is_single else table.breakpoints(0.0, t)
    for a, b in zip(points, points[1:]):
        if b <= a:
            continue
        gen_a = hat_generator_at(table, dset, tau, a)
        gen_b = hat_generator_at(table, dset, tau, b)
        n_sub = max(1, math.ceil(max(sup_norm(gen_a), sup_norm(gen_b)) * (b - a) / budget))
        dt = (b - a) / n_sub
        for k in range(n_sub):
            s = a + k * dt
            gen = gen_a if k == 0 else hat_generator_at(table, dset, tau, s)
            v = scipy.linalg.expm(dt * gen.matrix) @ v
            max_ratio = max(max_ratio, smoothness_ratio(table, s, tau))
            n_factors += 1

    flagged = max_ratio > NUMERIC_CONFIG["smoothness_warn"]
    if flagged:
        logging.warning(f"⚠️ 时变期望态：光滑性比值 {max_ratio:.3g} 超过 {NUMERIC_CONFIG['smoothness_warn']}，结果仅供参考")
    return TimeDependentResult(
        state=unvec(v, table.dim_h), max_smoothness_ratio=max_ratio, flagged=flagged, n_factors=n_factors)


# ==================== 提升生成元 ====================

def _slot_map(m: SuperOp, sign: str, mode: str) -> np.ndarray:
    if sign == "+":
        return m.matrix
    if mode == "conj":
        return m.matrix.conj()
    if mode == "dagger":
        return m.matrix.conj().T
    raise ValueError(f"未知模式 {mode!r}，可选 ['conj', 'dagger']")


def signature_lift(gens: LimitGenerators, signature: str, mode: str = "conj") -> LiftedOp:
    """
    槽位签名对应的提升生成元

    Args:
        signature: '+'/'-' 组成的串，长度即槽位数
        mode: '−' 槽取复共轭（conj）或伴随（dagger）
    """
    if not signature or set(signature) - {"+", "-"}:
        raise ValueError(f"非法签名 {signature!r}")
    n = len(signature)
    terms = [(1.0, ((k, _slot_map(gens.L_hat, s, mode)),)) for k, s in enumerate(signature)]
    cross = 2.0 * gens.tau / gens.set_size
    for L_j in gens.L_list:
        for k in range(n):
            for l in range(k + 1, n):
                terms.append((cross, ((k, _slot_map(L_j, signature[k], mode)),
                                      (l, _slot_map(L_j, signature[l], mode)))))
    return LiftedOp(gens.d, n, tuple(terms))


def lift_moment_generator(gens: LimitGenerators, n: int) -> LiftedOp:
    """L̂⁽ⁿ⁾：单槽 L̂ 与有序对上的 2(τ/|J|) L_j⊗L_j；n = 1 即 L̂"""
    if n < 1:
        raise ValueError(f"arity 必须 ≥ 1，当前为 {n}")
    return signature_lift(gens, "+" * n)


def lift_mixed_generators(gens: LimitGenerators, kind: str, mode: str = "dagger") -> LiftedOp:
    """
    混合提升 check2 / check4 / c11 / c12 / c31 / c32

    默认 mode="dagger" 给出带伴随的展示形式；保真度解析计算使用 mode="conj"。
    """
    if kind not in MIXED_KINDS:
        raise ValueError(f"未知类型 {kind!r}，可选 {list(MIXED_KINDS)}")
    return signature_lift(gens, MIXED_KINDS[kind], mode)
