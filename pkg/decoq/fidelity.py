"""
门保真度

F = 1 − (1/d) Σ_{k,l} |⟨e_l, (id − α)e_k⟩|² = 1 − (1/d)‖id − α‖²_F

记 T = tr α，N = ‖α‖²_F，X = d − 2Re T + N，则 F = 1 − X/d。
E[F]、Var[F] 由以下混合矩拼出（'+' 槽为 α，'−' 槽为 ᾱ）：
    E[T]   ← '+'      E[N]   ← '+-'（check2）
    E[T²]  ← '++'（c11）  E[TT̄] ← '+-'   E[T̄T] ← '-+'（c12）
    E[TN]  ← '++-'（c31） E[T̄N] ← '-+-'（c32）
    E[N²]  ← '++--'（check4）
矩的来源可以是连续极限（提升生成元的指数）或离散游走的精确矩。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from decoq.config import NUMERIC_CONFIG
from decoq.decoupling import DecouplingSet
from decoq.limit import LimitGenerators, lift_mixed_generators, signature_lift
from decoq.operator_space import SuperOp, expm, expm_action, flip_trace, sup_norm
from decoq.walk import WalkPath, grid_schedule, step_measure, walk_moment_operator

# (signature, V) → E[⊗α^{(s)}] V
MomentAction = Callable[[str, np.ndarray], np.ndarray]


@dataclass
class FidelityCurve:
    """
    保真度曲线

    mc_* 字段来自路径集合，analytic_* 来自解析计算；缺失时为 None。
    """
    t_grid: List[float]
    scheme: str
    mc_mean: Optional[List[float]] = None
    mc_stderr: Optional[List[float]] = None
    mc_var: Optional[List[float]] = None
    mc_paths: int = 0
    analytic_mean: Optional[List[float]] = None
    analytic_var: Optional[List[float]] = None
    analytic_var_raw: Optional[List[float]] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t_grid": list(self.t_grid),
            "scheme": self.scheme,
            "mc_mean": self.mc_mean,
            "mc_stderr": self.mc_stderr,
            "mc_var": self.mc_var,
            "mc_paths": self.mc_paths,
            "analytic_mean": self.analytic_mean,
            "analytic_var": self.analytic_var,
            "analytic_var_raw": self.analytic_var_raw,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FidelityCurve":
        known = {"t_grid", "scheme", "mc_mean", "mc_stderr", "mc_var", "mc_paths",
                 "analytic_mean", "analytic_var", "analytic_var_raw", "metadata"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"FidelityCurve 含未知字段: {sorted(unknown)}")
        return cls(**{k: data[k] for k in known if k in data})


# ==================== 单路径 ====================

def path_fidelity(path_map: SuperOp, basis: Optional[Sequence[np.ndarray]] = None) -> float:
    """
    单个映射的门保真度

    Args:
        basis: A 的正交归一基；None 时使用 Frobenius 恒等式（与基无关）
    """
    d = path_map.d
    if basis is None:
        return float(1.0 - np.sum(np.abs(np.eye(d) - path_map.matrix) ** 2) / d)
    total = 0.0
    for e_k in basis:
        image = e_k - path_map.apply(e_k)
        for e_l in basis:
            total += abs(np.vdot(e_l, image)) ** 2
    return float(1.0 - total / d)


# ==================== 矩拼装 ====================

def _omega(d: int) -> np.ndarray:
    """Ω = Σ_b e_b⊗e_b"""
    return np.eye(d, dtype=complex).reshape(d * d)


def fidelity_moments(action: MomentAction, d: int) -> Dict[str, float]:
    """
    由混合矩作用拼出 E[F] 与 Var[F]

    Returns:
        {"mean", "var_raw", "E_T", "E_N", ...}；var_raw 未截断
    """
    eye = np.eye(d, dtype=complex)
    omega = _omega(d)

    e_t = complex(np.trace(action("+", eye)))
    e_n = float(np.real(np.vdot(omega, action("+-", omega))))

    e_tt = complex(np.trace(action("++", np.eye(d * d, dtype=complex))))
    e_t_tbar = float(np.real(np.trace(action("+-", np.eye(d * d, dtype=complex)))))
    e_tbar_t = float(np.real(np.trace(action("-+", np.eye(d * d, dtype=complex)))))

    # V_c = e_c ⊗ Ω，共 d 列
    v3 = np.kron(eye, omega[None, :]).T
    e_tn = complex(np.sum(v3.conj() * action("++-", v3)))
    e_tbar_n = complex(np.sum(v3.conj() * action("-+-", v3)))

    # W = Σ_{b,f} e_b⊗e_f⊗e_b⊗e_f
    w = np.einsum("bB,fF->bfBF", eye, eye).reshape(d ** 4)
    e_nn = float(np.real(np.vdot(w, action("++--", w))))

    e_re_t = e_t.real
    e_re_t_sq = 0.25 * (2.0 * e_tt.real + e_t_tbar + e_tbar_t)
    e_re_t_n = 0.5 * (e_tn + e_tbar_n).real

    e_x = d - 2.0 * e_re_t + e_n
    e_x2 = (d * d + 4.0 * e_re_t_sq + e_nn - 4.0 * d * e_re_t + 2.0 * d * e_n - 4.0 * e_re_t_n)
    var_raw = (e_x2 - e_x * e_x) / (d * d)
    return {
        "mean": 1.0 - e_x / d,
        "var_raw": var_raw,
        "E_T": e_t,
        "E_N": e_n,
        "E_X": e_x,
        "E_X2": e_x2,
    }


class ContinuumMoments:
    """
    连续极限的混合矩：E[⊗α^{(s)}] = exp(t·G_s)

    提升生成元按签名缓存，同一对象可在多个时间点复用。
    """

    def __init__(self, gens: LimitGenerators):
        self.gens = gens
        self._lifts = {}

    def lift(self, signature: str):
        if signature not in self._lifts:
            self._lifts[signature] = signature_lift(self.gens, signature, mode="conj")
        return self._lifts[signature]

    def action_at(self, t: float) -> MomentAction:
        def action(signature: str, v: np.ndarray) -> np.ndarray:
            return expm_action(self.lift(signature), t, v)
        return action


def _clamp_mean(value: float) -> float:
    eps = NUMERIC_CONFIG["fidelity_eps"]
    if value < -eps or value > 1.0 + eps:
        logging.warning(f"⚠️ 解析保真度 {value:.6g} 超出 [−{eps}, 1+{eps}]")
    return value


def analytic_mean_fidelity(gens: LimitGenerators, t: float, pairing: str = "direct") -> float:
    """
    连续极限下的 E[F_t]

    Args:
        pairing: "direct" 用复共轭槽与直接配对 ⟨Ω, e^{tG_{+-}}Ω⟩；
                 "flip" 用带伴随的 check2 与交换迹 tr(Φ·e^{tĽ⁽²⁾})

    两种配对在 t 的一阶一致，没有涨落交叉项（L_j = 0）时对任意 t 相等。
    E[α⊗ᾱ] 是半群，direct 对任意 t 精确；伴随槽的乘积次序相反，flip 的高阶项一般不同。
    """
    if t < 0:
        raise ValueError(f"t 必须非负，当前为 {t}")
    d = gens.d
    if t == 0:
        return 1.0
    tr_mean = np.trace(expm(gens.L_hat, t).matrix)
    if pairing == "direct":
        omega = _omega(d)
        e_n = np.vdot(omega, expm_action(signature_lift(gens, "+-", mode="conj"), t, omega))
    elif pairing == "flip":
        check2 = lift_mixed_generators(gens, "check2", mode="dagger")
        if check2.is_dense_available:
            e_n = flip_trace(scipy.linalg.expm(t * check2.dense), d)
        else:
            e_n = flip_trace_matrix_free(check2, t, d)
    else:
        raise ValueError(f"未知配对 {pairing!r}，可选 ['direct', 'flip']")
    x = d - 2.0 * tr_mean.real + e_n
    if abs(np.imag(x)) > 1e-9 * max(1.0, abs(x)):
        logging.warning(f"⚠️ E[F] 虚部残差 {np.imag(x):.3e}")
    return _clamp_mean(float(1.0 - np.real(x) / d))


def flip_trace_matrix_free(op, t: float, d: int) -> complex:
    """Σ_{k,l} ⟨e_l⊗e_k, e^{tM}(e_k⊗e_l)⟩，逐列作用"""
    total = 0j
    for k in range(d):
        cols = np.zeros((d * d, d), dtype=complex)
        for l in range(d):
            cols[k * d + l, l] = 1.0
        image = expm_action(op, t, cols)
        for l in range(d):
            total += image[l * d + k, l]
    return complex(total)


def analytic_fidelity(gens: LimitGenerators, t: float) -> Dict[str, float]:
    """同时给出 E[F_t] 与 Var[F_t]（var 截断到 ≥ 0，var_raw 为原值）"""
    if t < 0:
        raise ValueError(f"t 必须非负，当前为 {t}")
    if t == 0:
        return {"mean": 1.0, "var": 0.0, "var_raw": 0.0}
    result = fidelity_moments(ContinuumMoments(gens).action_at(t), gens.d)
    var_raw = result["var_raw"]
    if var_raw < NUMERIC_CONFIG["var_floor"]:
        logging.warning(f"⚠️ 解析方差为负 {var_raw:.3e}（t={t:g}），已截断为 0")
    return {"mean": _clamp_mean(result["mean"]), "var": max(var_raw, 0.0), "var_raw": var_raw}


def analytic_var_fidelity(gens: LimitGenerators, t: float) -> float:
    """连续极限下的 Var[F_t]，负舍入截断为 0"""
    return analytic_fidelity(gens, t)["var"]


def analytic_curve(gens: LimitGenerators, t_grid: Sequence[float], with_variance: bool = True) -> FidelityCurve:
    """逐时间点计算解析均值（与方差），提升生成元只构造一次"""
    moments = ContinuumMoments(gens)
    means, variances, raws = [], [], []
    for t in t_grid:
        if t == 0:
            means.append(1.0)
            variances.append(0.0)
            raws.append(0.0)
            continue
        if with_variance:
            result = fidelity_moments(moments.action_at(t), gens.d)
            means.append(_clamp_mean(result["mean"]))
            raws.append(result["var_raw"])
            variances.append(max(result["var_raw"], 0.0))
        else:
            means.append(analytic_mean_fidelity(gens, t))
    return FidelityCurve(
        t_grid=list(t_grid),
        scheme="analytic",
        analytic_mean=means,
        analytic_var=variances if with_variance else None,
        analytic_var_raw=raws if with_variance else None,
        metadata={"tau": gens.tau, "set_size": gens.set_size},
    )


def drift_fidelity(gens: LimitGenerators, t: float) -> Tuple[float, float]:
    """(1 − (1/d)‖id − e^{tL̄}‖²_F, 0)"""
    if t < 0:
        raise ValueError(f"t 必须非负，当前为 {t}")
    alpha = expm(gens.L_hat_drift, t)
    mean = 1.0 - np.sum(np.abs(np.eye(gens.d) - alpha.matrix) ** 2) / gens.d
    return float(mean), 0.0


def unitary_short_time_slope(gens: LimitGenerators) -> float:
    """d/dt (1 − E[F_t]) 在 t = 0 处：(2τ/(d|J|)) Σ_j ‖L_j‖²_F"""
    total = sum(sup_norm(L_j, "frobenius") ** 2 for L_j in gens.L_list)
    return 2.0 * gens.tau * total / (gens.d * gens.set_size)


# ==================== 离散游走的精确保真度 ====================

def exact_walk_fidelity(L: SuperOp, dset: DecouplingSet, tau: float, t: float,
                        scheme: str = "physical", n: int = 0) -> Dict[str, float]:
    """
    离散游走在时间 t 的精确 E[F] 与 Var[F]（不做 Monte-Carlo）

    physical 的剩余时间因子 α_{t−mτ} 最后作用；单比特之外受稠密上限约束。
    """
    steps = step_measure(L, dset, tau, scheme, n)
    (m, r), = grid_schedule([t], tau, scheme, n)
    post = expm(L, r).matrix if r > 0 else None
    cache = {}

    def action(signature: str, v: np.ndarray) -> np.ndarray:
        if signature not in cache:
            cache[signature] = walk_moment_operator(steps, signature, m, post)
        return cache[signature] @ v

    result = fidelity_moments(action, L.d)
    return {"mean": result["mean"], "var": max(result["var_raw"], 0.0), "var_raw": result["var_raw"]}


# ==================== Monte-Carlo 与区间 ====================

def mc_fidelity(ensemble: Sequence[WalkPath]) -> FidelityCurve:
    """逐时间的样本均值、标准误与样本方差"""
    if not ensemble:
        raise ValueError("路径集合为空")
    t_grid = ensemble[0].t_grid
    if any(p.t_grid != t_grid for p in ensemble):
        raise ValueError("路径的 t_grid 不一致")
    fids = np.stack([p.fidelities for p in ensemble])
    n = len(ensemble)
    mean = fids.mean(axis=0)
    if n > 1:
        var = fids.var(axis=0, ddof=1)
        stderr = np.sqrt(var / n)
    else:
        var = np.zeros_like(mean)
        stderr = np.zeros_like(mean)
    first = ensemble[0]
    return FidelityCurve(
        t_grid=list(t_grid),
        scheme=first.scheme,
        mc_mean=mean.tolist(),
        mc_stderr=stderr.tolist(),
        mc_var=var.tolist(),
        mc_paths=n,
        metadata={"master_seed": first.master_seed, "n_steps": first.n_steps},
    )


def variance_stderr(samples: np.ndarray) -> float:
    """样本方差的标准误 sqrt((m₄ − σ⁴(n−3)/(n−1))/n)"""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 4:
        return float("inf")
    centered = x - x.mean()
    var = centered.var(ddof=1)
    m4 = np.mean(centered ** 4)
    return float(math.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n))


def chebyshev_envelope(mean: float, var: float, confidence: float) -> Tuple[float, float]:
    """半宽 sqrt(var/(1 − confidence))，截断到 [0, 1]"""
    if var < 0:
        raise ValueError(f"var 必须非负，当前为 {var}")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence 必须在 (0, 1) 内，当前为 {confidence}")
    half = math.sqrt(var / (1.0 - confidence))
    return max(0.0, mean - half), min(1.0, mean + half)


def chebyshev_band(curve: FidelityCurve, confidence: float) -> List[Tuple[float, float]]:
    """逐时间的 Chebyshev 区间（需要解析均值与方差）"""
    if curve.analytic_mean is None or curve.analytic_var is None:
        raise ValueError("曲线缺少解析均值或方差")
    return [chebyshev_envelope(m, v, confidence) for m, v in zip(curve.analytic_mean, curve.analytic_var)]
