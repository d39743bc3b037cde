"""
外禀退相干模型：系统 H 与有限维热库 H₁ 的幺正耦合

H′ = Σ_k H₀ₖ ⊗ H₁ₖ + 1 ⊗ H₁，L′ = i·ad(H′)，热库处于 ρ^θ = e^{−βH₁}/Z（β = inf 时为基态投影）。
脉冲为 v_j ⊗ 1。约化映射 x ↦ tr₁(W (x ⊗ ρ^θ) W*) 以 Kraus 形式直接由总幺正 W 得到，
路径上只保存 d×d 的约化超算子。
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Any, List, Optional, Tuple

import numpy as np
import scipy.linalg

from decoq.config import DILATION_CONFIG
from decoq.decoupling import DecouplingSet
from decoq.errors import ConfigError
from decoq.operator_space import (
    SIGMA_1,
    SIGMA_2,
    SIGMA_3,
    SuperOp,
    ad_of,
    expm,
    is_density,
    is_hermitian,
    partial_trace,
)
from decoq.utils import matrix_from_pairs
from decoq.walk import (
    WalkConfig,
    WalkPath,
    apply_to_state,
    build_paths,
    check_budget,
    grid_schedule,
    run_walk_engine,
)


@dataclass(frozen=True, eq=False)
class DilationSpec:
    """
    Attributes:
        dim_h: 系统维数 d_H
        bath_dim: 热库维数 d_H1
        couplings: ((H₀ₖ, H₁ₖ), ...)
        bath_hamiltonian: H₁
        beta: 逆温度，math.inf 表示基态
    """
    dim_h: int
    bath_dim: int
    couplings: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    bath_hamiltonian: np.ndarray
    beta: float = math.inf

    def __post_init__(self):
        if self.bath_dim > DILATION_CONFIG["max_bath_dim"]:
            raise ValueError(f"热库维数 {self.bath_dim} 超过上限 {DILATION_CONFIG['max_bath_dim']}")
        if self.dim_h * self.bath_dim > DILATION_CONFIG["max_total_dim"]:
            raise ValueError(f"总维数 {self.dim_h * self.bath_dim} 超过上限 {DILATION_CONFIG['max_total_dim']}")
        if self.beta < 0:
            raise ValueError(f"beta 必须非负，当前为 {self.beta}")
        h1 = np.asarray(self.bath_hamiltonian, dtype=complex)
        if h1.shape != (self.bath_dim, self.bath_dim) or not is_hermitian(h1):
            raise ValueError("bath_hamiltonian: 形状不符或 not hermitian")
        terms = []
        for k, (h0, hb) in enumerate(self.couplings):
            h0 = np.asarray(h0, dtype=complex)
            hb = np.asarray(hb, dtype=complex)
            if h0.shape != (self.dim_h, self.dim_h) or not is_hermitian(h0):
                raise ValueError(f"couplings[{k}].system: 形状不符或 not hermitian")
            if hb.shape != (self.bath_dim, self.bath_dim) or not is_hermitian(hb):
                raise ValueError(f"couplings[{k}].bath: 形状不符或 not hermitian")
            terms.append((h0, hb))
        object.__setattr__(self, "couplings", tuple(terms))
        object.__setattr__(self, "bath_hamiltonian", h1)

    @property
    def total_dim(self) -> int:
        return self.dim_h * self.bath_dim


def amplitude_damping_bath(g: float = 1.0, omega: float = 1.0, chi: float = 0.0) -> DilationSpec:
    """
    单比特系统耦合单比特热库：(g/2)(σ₁⊗σ₁ + σ₂⊗σ₂) + (χ/2)σ₃⊗σ₃ + 1⊗(ω/2)σ₃，β = inf

    ω > 0 时热库基态为 |1⟩，交换耦合把系统 |0⟩ 搬到 |1⟩，短时约化信道是振幅阻尼（转移概率 ≈ g²t²）。
    交换项在热库基态下没有一阶约化哈密顿量，退耦后的不保真度 ∝ τ²；
    色散项 χ 给出一阶约化哈密顿量 −(χ/2)σ₃，不保真度 ≈ χ²τt/2，随 τ 线性下降。
    """
    if omega == 0:
        logging.warning("⚠️ omega = 0 时热库基态简并，β = inf 的热库态为 1/2，约化信道不是振幅阻尼")
    couplings = [(g / 2 * SIGMA_1, SIGMA_1), (g / 2 * SIGMA_2, SIGMA_2)]
    if chi:
        couplings.append((chi / 2 * SIGMA_3, SIGMA_3))
    return DilationSpec(
        dim_h=2,
        bath_dim=2,
        couplings=tuple(couplings),
        bath_hamiltonian=omega / 2 * SIGMA_3,
        beta=math.inf,
    )


# ==================== 哈密顿量与热库态 ====================

def total_hamiltonian(spec: DilationSpec) -> np.ndarray:
    """H′ = Σ_k H₀ₖ⊗H₁ₖ + 1⊗H₁"""
    h = np.kron(np.eye(spec.dim_h), spec.bath_hamiltonian)
    for h0, hb in spec.couplings:
        h = h + np.kron(h0, hb)
    return h


def thermal_state(h1, beta: float) -> np.ndarray:
    """e^{−βH₁}/Z；β = inf 时为（归一化的）基态空间投影"""
    h1 = np.asarray(h1, dtype=complex)
    evals, evecs = np.linalg.eigh((h1 + h1.conj().T) / 2)
    if math.isinf(beta):
        ground = np.isclose(evals, evals.min(), atol=1e-12, rtol=0.0)
        weights = ground.astype(float)
    else:
        # 平移最小本征值，避免 e^{−βλ} 溢出
        weights = np.exp(-beta * (evals - evals.min()))
    weights = weights / weights.sum()
    return (evecs * weights) @ evecs.conj().T


def averaged_hamiltonian(spec: DilationSpec, dset: DecouplingSet) -> np.ndarray:
    """H̄′ = (1/|J|) Σ_j (v_j⊗1) H′ (v_j⊗1)*"""
    big = dset.dilate(spec.bath_dim)
    h = total_hamiltonian(spec)
    return sum(v @ h @ v.conj().T for v in big.unitaries) / big.size


def hamiltonian_ad_norm(k, kind: str = "spectral") -> float:
    """
    ‖i·ad(K)‖（K 厄米）

    spectral = λ_max − λ_min；frobenius² = 2(d·tr K² − (tr K)²)
    """
    k = np.asarray(k, dtype=complex)
    evals = np.linalg.eigvalsh((k + k.conj().T) / 2)
    if kind == "spectral":
        return float(evals.max() - evals.min())
    if kind == "frobenius":
        d = k.shape[0]
        return float(math.sqrt(max(2.0 * (d * np.sum(evals ** 2) - np.sum(evals) ** 2), 0.0)))
    raise ValueError(f"未知范数类型: {kind}")


# ==================== 扩张生成元 ====================

def _check_dims(spec: DilationSpec, dset: DecouplingSet):
    if dset.dim_h != spec.dim_h:
        raise ValueError(f"维数不一致：退耦集合 d_H={dset.dim_h}，扩张系统 d_H={spec.dim_h}")


def build_dilated_generator(spec: DilationSpec) -> SuperOp:
    """L′ = i·ad(H′)，作用于 B(H⊗H₁)"""
    return SuperOp(spec.total_dim, 1j * ad_of(total_hamiltonian(spec)).matrix)


def dilated_averaged_generator(spec: DilationSpec, dset: DecouplingSet) -> SuperOp:
    """L̄′ = i·ad(H̄′)"""
    _check_dims(spec, dset)
    return SuperOp(spec.total_dim, 1j * ad_of(averaged_hamiltonian(spec, dset)).matrix)


def dilated_fluctuation_hamiltonians(spec: DilationSpec, dset: DecouplingSet) -> List[np.ndarray]:
    """K_j = (v_j⊗1)(H′ − H̄′)(v_j⊗1)*，L′_j = i·ad(K_j)"""
    _check_dims(spec, dset)
    centered = total_hamiltonian(spec) - averaged_hamiltonian(spec, dset)
    return [v @ centered @ v.conj().T for v in dset.dilate(spec.bath_dim).unitaries]


def dilated_limit_generator(spec: DilationSpec, dset: DecouplingSet, tau: float) -> SuperOp:
    """L̂′ = i·ad(H̄′) − (τ/|J|) Σ_j ad(K_j)²"""
    if not tau > 0:
        raise ValueError(f"tau 必须为正，当前为 {tau}")
    m = dilated_averaged_generator(spec, dset).matrix.copy()
    for k_j in dilated_fluctuation_hamiltonians(spec, dset):
        ad = ad_of(k_j).matrix
        m -= (tau / dset.size) * (ad @ ad)
    return SuperOp(spec.total_dim, m)


def reduced_expected_state(spec: DilationSpec, dset: DecouplingSet, tau: float, rho0, t: float) -> np.ndarray:
    """tr₁(e^{tL̂′}(ρ₀ ⊗ ρ^θ))"""
    rho0 = np.asarray(rho0, dtype=complex)
    if not is_density(rho0):
        raise ValueError("rho0 不是密度矩阵")
    joint = np.kron(rho0, thermal_state(spec.bath_hamiltonian, spec.beta))
    evolved = expm(dilated_limit_generator(spec, dset, tau), t).apply(joint)
    return partial_trace(evolved, (spec.dim_h, spec.bath_dim), keep="system")


# ==================== 约化映射 ====================

def _bath_purification(spec: DilationSpec) -> np.ndarray:
    """ρ^θ = Σ_b |g_b⟩⟨g_b| p_b 的 G·sqrt(p)，只保留 p_b > 0 的列"""
    rho = thermal_state(spec.bath_hamiltonian, spec.beta)
    evals, evecs = np.linalg.eigh(rho)
    keep = evals > 1e-15
    return evecs[:, keep] * np.sqrt(evals[keep])


def reduce_unitaries(unitaries: np.ndarray, spec: DilationSpec, purification: Optional[np.ndarray] = None) -> np.ndarray:
    """
    总幺正 W → 约化超算子 x ↦ tr₁(W (x⊗ρ^θ) W*)

    Args:
        unitaries: (C, D, D) 或 (D, D)，D = d_H·d_H1
    Returns:
        (C, d, d) 或 (d, d)，d = d_H²
    """
    single = unitaries.ndim == 2
    w = unitaries[None] if single else unitaries
    d_h, d_b = spec.dim_h, spec.bath_dim
    g = _bath_purification(spec) if purification is None else purification
    w4 = w.reshape(w.shape[0], d_h, d_b, d_h, d_b)
    # K[a, b] = (1⊗⟨a|) W (1⊗|g_b⟩)·sqrt(p_b)
    kraus = np.einsum("niajc,cb->nabij", w4, g)
    # Σ_ab conj(K_ab) ⊗ K_ab（按列堆叠）
    sup = np.einsum("nablm,nabij->nlimj", kraus.conj(), kraus).reshape(w.shape[0], d_h * d_h, d_h * d_h)
    return sup[0] if single else sup


def dilated_step_unitary(spec: DilationSpec, dset: DecouplingSet, j: int, tau: float) -> np.ndarray:
    """(v_j⊗1) e^{iτH′} (v_j⊗1)*"""
    v = np.kron(dset.unitaries[j], np.eye(spec.bath_dim))
    return v @ scipy.linalg.expm(1j * tau * total_hamiltonian(spec)) @ v.conj().T


def simulate_extrinsic_ensemble(spec: DilationSpec, dset: DecouplingSet, cfg: WalkConfig, rho0=None,
                                threads: Optional[int] = None,
                                show_progress: Optional[bool] = None) -> List[WalkPath]:
    """
    扩张空间上的 physical 游走，路径保存约化映射

    约化映射与初态无关；给出 rho0 时每条路径另存约化态 tr₁(W(ρ₀⊗ρ^θ)W*)。
    """
    _check_dims(spec, dset)
    if cfg.scheme != "physical":
        raise ValueError("扩张游走只支持 physical")
    if rho0 is not None:
        rho0 = np.asarray(rho0, dtype=complex)
        if not is_density(rho0):
            raise ValueError("rho0 不是密度矩阵")
    d = spec.dim_h * spec.dim_h
    check_budget(cfg, d)
    plan = grid_schedule(cfg.t_grid, cfg.tau, "physical")
    counts = [m for m, _ in plan]
    n_total = max(counts)
    logging.info(f"🚀 开始扩张游走: paths={cfg.paths}, τ={cfg.tau:g}, d_H={spec.dim_h}, d_H1={spec.bath_dim}")

    steps = np.stack([dilated_step_unitary(spec, dset, j, cfg.tau) for j in range(dset.size)])
    h = total_hamiltonian(spec)
    purification = _bath_purification(spec)

    def step_fn(s, idx):
        return steps[idx]

    def post_fn(g):
        m, r = plan[g]
        return scipy.linalg.expm(1j * r * h) if r > 0 else None

    trajectories = run_walk_engine(
        cfg, spec.total_dim, dset.size, counts, step_fn, post_fn,
        finalize=lambda w: reduce_unitaries(w, spec, purification),
        threads=threads, show_progress=show_progress, desc="Walk[extrinsic]")
    paths = build_paths(cfg, trajectories, n_total, dset.size)
    if rho0 is None:
        return paths
    return [replace(p, states=np.stack(apply_to_state(p, rho0))) for p in paths]


# ==================== 配置解析 ====================

def _matrix(obj: Any, path: str, dim: int) -> np.ndarray:
    try:
        m = matrix_from_pairs(obj)
    except ValueError as e:
        raise ConfigError(path, str(e)) from e
    if m.shape != (dim, dim):
        raise ConfigError(path, f"形状应为 {(dim, dim)}，实际为 {m.shape}")
    if not is_hermitian(m):
        raise ConfigError(path, "not hermitian")
    return m


def _beta(value: Any, path: str) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
        raise ConfigError(path, "应为非负数或 \"inf\"")
    return float(value)


def from_config(obj: Any, dim_h: int, path: str = "dilation") -> DilationSpec:
    """
    {"builtin": "amplitude_damping_bath", "params": {...}} 或
    {"bath_dim", "coupling": [{"system", "bath"}], "bath_hamiltonian", "beta"}
    """
    if not isinstance(obj, dict):
        raise ConfigError(path, "应为 JSON 对象")
    if "builtin" in obj:
        unknown = sorted(set(obj) - {"builtin", "params"})
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}", "未知字段")
        if obj["builtin"] != "amplitude_damping_bath":
            raise ConfigError(f"{path}.builtin", f"未知内置扩张 {obj['builtin']!r}")
        params = obj.get("params", {})
        if not isinstance(params, dict) or set(params) - {"g", "omega", "chi"}:
            raise ConfigError(f"{path}.params", "只允许 g、omega、chi")
        for key, value in params.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.params.{key}", "应为数值")
        if dim_h != 2:
            raise ConfigError(f"{path}.builtin", "amplitude_damping_bath 只适用于单比特系统")
        return amplitude_damping_bath(**params)

    allowed = {"bath_dim", "coupling", "bath_hamiltonian", "beta"}
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}", "未知字段")
    for key in ("bath_dim", "coupling", "bath_hamiltonian"):
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "缺少必需字段")
    bath_dim = obj["bath_dim"]
    if isinstance(bath_dim, bool) or not isinstance(bath_dim, int) or bath_dim < 1:
        raise ConfigError(f"{path}.bath_dim", "应为正整数")
    if bath_dim > DILATION_CONFIG["max_bath_dim"] or bath_dim * dim_h > DILATION_CONFIG["max_total_dim"]:
        raise ConfigError(f"{path}.bath_dim", f"超过维数上限（热库 ≤ {DILATION_CONFIG['max_bath_dim']}，"
                                              f"总维数 ≤ {DILATION_CONFIG['max_total_dim']}）")
    if not isinstance(obj["coupling"], list):
        raise ConfigError(f"{path}.coupling", "应为数组")
    couplings = []
    for k, term in enumerate(obj["coupling"]):
        term_path = f"{path}.coupling[{k}]"
        if not isinstance(term, dict) or set(term) != {"system", "bath"}:
            raise ConfigError(term_path, "应为 {\"system\": ..., \"bath\": ...}")
        couplings.append((_matrix(term["system"], f"{term_path}.system", dim_h),
                          _matrix(term["bath"], f"{term_path}.bath", bath_dim)))
    h1 = _matrix(obj["bath_hamiltonian"], f"{path}.bath_hamiltonian", bath_dim)
    beta = _beta(obj.get("beta", "inf"), f"{path}.beta")
    return DilationSpec(dim_h=dim_h, bath_dim=bath_dim, couplings=tuple(couplings),
                        bath_hamiltonian=h1, beta=beta)
