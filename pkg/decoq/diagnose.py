"""
诊断：保真度界与内禀/外禀判定

界（d = dim A，|J| 为退耦集合大小）：
- 外禀:     1 − (2d/|J|)·τ·∫₀ᵗ‖L′₀‖²      （另给出不除 |J| 的 2d 版本）
- 内禀:     1 − (2/(d|J|))·τ·t·‖L − L̄‖² − (1/d)·t²·‖L̄‖²
- 纯退相位: 1 − (1/d)(1 − e^{−t‖L‖/|J|})²
- drift 内禀: 1 − (1/d)·t²·‖L̄‖²
谱范数为默认，每个界同时给出 Frobenius 范数版本。

判定：在 10·τ_max ≤ t 且 10·t ≤ 1/Γ 的时间点上把 1 − F̄_t 对 τ 做加权线性拟合，
看 τ → 0 的截距是否与 0 相容。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate

from decoq.config import DIAGNOSE_CONFIG
from decoq.decoupling import DecouplingSet
from decoq.dilation import (
    DilationSpec,
    averaged_hamiltonian,
    hamiltonian_ad_norm,
    total_hamiltonian,
)
from decoq.errors import InsufficientCoverageError
from decoq.fidelity import FidelityCurve
from decoq.lindblad import PURELY_DEPHASING, classify_unitarity
from decoq.limit import LimitGenerators
from decoq.operator_space import sup_norm

NORM_KINDS = ("spectral", "frobenius")

EXTRINSIC = "extrinsic"
INTRINSIC_OR_MIXED = "intrinsic_or_mixed"
INCONCLUSIVE = "inconclusive"


@dataclass
class BoundReport:
    """各时间点上的界与范数；不适用的界为 None"""
    gamma: float
    tau: float
    t_grid: List[float]
    d: int
    set_size: int
    norm_kind: str
    bound_extrinsic: Optional[List[float]]
    bound_extrinsic_2d: Optional[List[float]]
    bound_intrinsic: List[float]
    bound_dephasing: Optional[List[float]]
    bound_drift_intrinsic: List[float]
    regime_flags: List[bool]
    norms: Dict[str, Dict[str, float]]
    frobenius: Dict[str, Optional[List[float]]] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma,
            "tau": self.tau,
            "t_grid": self.t_grid,
            "d": self.d,
            "set_size": self.set_size,
            "norm_kind": self.norm_kind,
            "bound_extrinsic": self.bound_extrinsic,
            "bound_extrinsic_2d": self.bound_extrinsic_2d,
            "bound_intrinsic": self.bound_intrinsic,
            "bound_dephasing": self.bound_dephasing,
            "bound_drift_intrinsic": self.bound_drift_intrinsic,
            "regime_flags": self.regime_flags,
            "norms": self.norms,
            "frobenius": self.frobenius,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoundReport":
        return cls(**data)


@dataclass
class Verdict:
    classification: str
    evidence: List[Dict[str, Any]]
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"classification": self.classification, "evidence": self.evidence, "notes": self.notes}


# ==================== 范数 ====================

def dilation_norms(spec: DilationSpec, dset: DecouplingSet) -> Dict[str, Dict[str, float]]:
    """‖L′‖ 与 ‖L′₀‖ = ‖i·ad(H′ − H̄′)‖，两种范数"""
    h = total_hamiltonian(spec)
    centered = h - averaged_hamiltonian(spec, dset)
    return {
        "L_prime": {kind: hamiltonian_ad_norm(h, kind) for kind in NORM_KINDS},
        "L0_prime": {kind: hamiltonian_ad_norm(centered, kind) for kind in NORM_KINDS},
    }


def generator_norms(gens: LimitGenerators) -> Dict[str, Dict[str, float]]:
    return {
        "L": {kind: sup_norm(gens.L, kind) for kind in NORM_KINDS},
        "L_bar": {kind: sup_norm(gens.L_bar, kind) for kind in NORM_KINDS},
        "L_minus_L_bar": {kind: sup_norm(gens.L - gens.L_bar, kind) for kind in NORM_KINDS},
        "L_hat_drift": {kind: sup_norm(gens.L_hat_drift, kind) for kind in NORM_KINDS},
    }


def regime_flags(t_grid: Sequence[float], tau: float, gamma: float) -> List[bool]:
    """10·τ ≤ t 且 10·t ≤ 1/Γ（Γ = 0 时只检查前者）"""
    factor = DIAGNOSE_CONFIG["regime_factor"]
    horizon = math.inf if gamma == 0 else 1.0 / gamma
    return [bool(factor * tau <= t and factor * t <= horizon) for t in t_grid]


def _trapezoid(times: Sequence[float], values: Sequence[float], t: float) -> float:
    """∫₀ᵗ 的梯形积分（超出采样范围时用端点值延拓）"""
    xs = np.asarray(times, dtype=float)
    ys = np.asarray(values, dtype=float)
    grid = np.concatenate(([0.0], xs[(xs > 0) & (xs < t)], [t]))
    return float(scipy.integrate.trapezoid(np.interp(grid, xs, ys), grid))


def bounds(gens: LimitGenerators, tau: float, t_grid: Sequence[float], norm_kind: str = "spectral",
           dilated: Optional[Dict[str, Dict[str, float]]] = None,
           extrinsic_profile: Optional[Tuple[Sequence[float], Sequence[float]]] = None) -> BoundReport:
    """
    计算全部界

    Args:
        dilated: dilation_norms 的结果；缺失时外禀界为 None 并记录说明
        extrinsic_profile: (时间, ‖L′₀(t′)‖²)，时变情形下梯形积分；按 norm_kind 给出
    """
    if not tau > 0:
        raise ValueError(f"tau 必须为正，当前为 {tau}")
    if norm_kind not in NORM_KINDS:
        raise ValueError(f"未知范数类型 {norm_kind!r}，可选 {list(NORM_KINDS)}")
    t_grid = [float(t) for t in t_grid]
    d, size = gens.d, gens.set_size
    norms = generator_norms(gens)
    notes = []
    if dilated is not None:
        norms.update(dilated)

    candidates = [norms["L"][norm_kind], norms["L_bar"][norm_kind]]
    if dilated is not None:
        candidates.append(norms["L_prime"][norm_kind])
    gamma = max(candidates)

    dephasing = classify_unitarity(gens.L) == PURELY_DEPHASING and sup_norm(gens.L) > 0

    def compute(kind: str) -> Dict[str, Optional[List[float]]]:
        out: Dict[str, Optional[List[float]]] = {}
        if dilated is not None:
            if extrinsic_profile is not None:
                integrals = [_trapezoid(extrinsic_profile[0], extrinsic_profile[1], t) for t in t_grid]
            else:
                integrals = [t * norms["L0_prime"][kind] ** 2 for t in t_grid]
            out["bound_extrinsic"] = [1.0 - (2.0 * d / size) * tau * v for v in integrals]
            out["bound_extrinsic_2d"] = [1.0 - 2.0 * d * tau * v for v in integrals]
        else:
            out["bound_extrinsic"] = None
            out["bound_extrinsic_2d"] = None
        fluct = norms["L_minus_L_bar"][kind]
        lbar = norms["L_bar"][kind]
        out["bound_intrinsic"] = [1.0 - (2.0 / (d * size)) * tau * t * fluct ** 2 - t * t * lbar ** 2 / d
                                  for t in t_grid]
        if dephasing:
            l_norm = norms["L"][kind]
            out["bound_dephasing"] = [1.0 - (1.0 - math.exp(-t * l_norm / size)) ** 2 / d for t in t_grid]
        else:
            out["bound_dephasing"] = None
        drift = norms["L_hat_drift"][kind]
        out["bound_drift_intrinsic"] = [1.0 - t * t * drift ** 2 / d for t in t_grid]
        return out

    main = compute(norm_kind)
    frob = compute("frobenius")
    if dilated is None:
        notes.append("extrinsic bound absent: no dilation given")
    if not dephasing:
        notes.append("dephasing bound absent: generator is not purely dephasing")

    return BoundReport(
        gamma=gamma,
        tau=float(tau),
        t_grid=t_grid,
        d=d,
        set_size=size,
        norm_kind=norm_kind,
        bound_extrinsic=main["bound_extrinsic"],
        bound_extrinsic_2d=main["bound_extrinsic_2d"],
        bound_intrinsic=main["bound_intrinsic"],
        bound_dephasing=main["bound_dephasing"],
        bound_drift_intrinsic=main["bound_drift_intrinsic"],
        regime_flags=regime_flags(t_grid, tau, gamma),
        norms=norms,
        frobenius=frob,
        notes=notes,
    )


# ==================== 判定 ====================

def fit_intercept(taus: Sequence[float], values: Sequence[float], stderrs: Sequence[float]) -> Dict[str, float]:
    """
    y = b₀ + b₁·τ 的加权最小二乘

    标准误全为正时权重 1/se²，否则等权；截距标准误按协方差夹心公式传播。
    """
    x = np.asarray(taus, dtype=float)
    y = np.asarray(values, dtype=float)
    se = np.asarray(stderrs, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    weights = 1.0 / se ** 2 if np.all(se > 0) else np.ones_like(x)
    xtw = design.T * weights
    inv = np.linalg.inv(xtw @ design)
    coef = inv @ (xtw @ y)
    cov = inv @ (xtw * se ** 2) @ xtw.T @ inv
    residual = y - design @ coef
    return {
        "intercept": float(coef[0]),
        "slope": float(coef[1]),
        "intercept_se": float(math.sqrt(max(cov[0, 0], 0.0))),
        "residual_rms": float(np.sqrt(np.mean(residual ** 2))),
    }


def _curve_values(curve: FidelityCurve) -> Tuple[List[float], List[float]]:
    if curve.mc_mean is not None:
        stderr = curve.mc_stderr if curve.mc_stderr is not None else [0.0] * len(curve.mc_mean)
        return [1.0 - f for f in curve.mc_mean], list(stderr)
    if curve.analytic_mean is not None:
        return [1.0 - f for f in curve.analytic_mean], [0.0] * len(curve.analytic_mean)
    raise ValueError("曲线既没有 MC 均值也没有解析均值")


def _curve_tau(curve: FidelityCurve) -> float:
    tau = curve.metadata.get("tau")
    if tau is None:
        raise ValueError("曲线 metadata 缺少 tau")
    return float(tau)


def classify(curves: Sequence[FidelityCurve], report: BoundReport) -> Verdict:
    """
    按 τ → 0 截距判定退相干类型

    Raises:
        InsufficientCoverageError: τ 少于 3 个或跨度不足一个量级
        ValueError: 曲线时间网格不一致
    """
    if not curves:
        raise InsufficientCoverageError("没有可用的曲线")
    ordered = sorted(curves, key=_curve_tau)
    taus = [_curve_tau(c) for c in ordered]
    distinct = sorted(set(taus))
    if len(distinct) < DIAGNOSE_CONFIG["min_tau_values"]:
        raise InsufficientCoverageError(f"需要至少 {DIAGNOSE_CONFIG['min_tau_values']} 个不同的 τ，当前为 {len(distinct)}")
    if distinct[-1] < DIAGNOSE_CONFIG["min_tau_span"] * distinct[0] * (1 - 1e-9):
        raise InsufficientCoverageError(f"τ 跨度 {distinct[-1] / distinct[0]:.3g} 不足一个量级")
    t_grid = [float(t) for t in ordered[0].t_grid]
    for c in ordered[1:]:
        if len(c.t_grid) != len(t_grid) or not np.allclose(c.t_grid, t_grid, rtol=1e-12, atol=0.0):
            raise ValueError("各曲线的 t_grid 不一致")

    flags = regime_flags(t_grid, max(taus), report.gamma)
    values = [_curve_values(c) for c in ordered]
    lbar = report.norms["L_bar"][report.norm_kind]
    evidence = []
    labels = []
    for g, t in enumerate(t_grid):
        if not flags[g]:
            continue
        ys = [v[0][g] for v in values]
        ses = [v[1][g] for v in values]
        fit = fit_intercept(taus, ys, ses)
        threshold = DIAGNOSE_CONFIG["intercept_sigma"] * fit["intercept_se"] + DIAGNOSE_CONFIG["intercept_floor"]
        expected = t * t * lbar ** 2 / report.d
        band = DIAGNOSE_CONFIG["band_factor"]
        if fit["intercept"] <= threshold:
            label = EXTRINSIC
        elif expected > 0 and expected / band <= fit["intercept"] <= expected * band:
            label = INTRINSIC_OR_MIXED
        else:
            label = INCONCLUSIVE
        labels.append(label)
        evidence.append({"t": t, **fit, "threshold": threshold, "expected_intrinsic": expected, "label": label})

    notes = []
    if not labels:
        notes.append("no time point satisfies the regime window")
        classification = INCONCLUSIVE
    else:
        counts = {label: labels.count(label) for label in set(labels)}
        best = max(sorted(counts), key=lambda k: counts[k])
        classification = best if counts[best] * 2 > len(labels) else INCONCLUSIVE
    logging.info(f"📊 判定结果: {classification}（{len(labels)} 个时间点参与拟合）")
    return Verdict(classification=classification, evidence=evidence, notes=notes)
