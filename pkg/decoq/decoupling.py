"""
退耦集合

- pauli_set(n): n 比特 Pauli 组合（4ⁿ 个，v_0 = 1）
- validate: v_0 = 1、幺正性、Ad 闭包（模相位）、平均性质 (1/|J|)Σ v_j x v_j* = tr(x)/d_H·1
- averaged_generator: L̄ = (1/|J|) Σ_j Ad(v_j)∘L∘Ad(v_j*)
- fluctuation_generators: L_j = Ad(v_j)∘(L − L̄)∘Ad(v_j*)
"""
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from decoq.config import NUMERIC_CONFIG
from decoq.errors import ConfigError
from decoq.operator_space import PAULIS, SuperOp, is_unitary, matrix_unit, sup_norm
from decoq.utils import matrix_from_pairs


@dataclass(frozen=True, eq=False)
class DecouplingSet:
    """
    有限幺正群 (v_j)_{j∈J}，下标 0 为恒等

    构造时只做形状检查，群性质由 validate 给出报告。
    """
    dim_h: int
    unitaries: Tuple[np.ndarray, ...]

    def __post_init__(self):
        frozen = []
        for i, v in enumerate(self.unitaries):
            m = np.array(v, dtype=complex)
            if m.shape != (self.dim_h, self.dim_h):
                raise ValueError(f"unitaries[{i}] 形状应为 {(self.dim_h, self.dim_h)}，实际为 {m.shape}")
            m.flags.writeable = False
            frozen.append(m)
        if not frozen:
            raise ValueError("退耦集合不能为空")
        object.__setattr__(self, "unitaries", tuple(frozen))

    @property
    def size(self) -> int:
        return len(self.unitaries)

    def __len__(self) -> int:
        return self.size

    @cached_property
    def ad_maps(self) -> Tuple[SuperOp, ...]:
        """Ad(v_j)，矩阵 v̄_j ⊗ v_j"""
        return tuple(SuperOp(self.dim_h, np.kron(v.conj(), v)) for v in self.unitaries)

    @cached_property
    def ad_inverse_maps(self) -> Tuple[SuperOp, ...]:
        """Ad(v_j*)"""
        return tuple(a.dagger() for a in self.ad_maps)

    def conjugate(self, L: SuperOp, j: int) -> SuperOp:
        """Ad(v_j)∘L∘Ad(v_j*)"""
        return self.ad_maps[j] @ L @ self.ad_inverse_maps[j]

    def dilate(self, bath_dim: int) -> "DecouplingSet":
        """脉冲 v_j ⊗ 1 作用于 H⊗H₁"""
        eye = np.eye(bath_dim)
        return DecouplingSet(self.dim_h * bath_dim, tuple(np.kron(v, eye) for v in self.unitaries))


def pauli_set(n_qubits: int) -> DecouplingSet:
    """
    n 比特 Pauli 组合 {1, σ₁, σ₂, σ₃}^{⊗n}，按字典序排列（全恒等在首位）
    """
    if n_qubits < 1:
        raise ValueError(f"n_qubits 必须 ≥ 1，当前为 {n_qubits}")
    members = []
    for combo in itertools.product(PAULIS, repeat=n_qubits):
        m = np.array([[1.0 + 0j]])
        for p in combo:
            m = np.kron(m, p)
        members.append(m)
    return DecouplingSet(2 ** n_qubits, tuple(members))


def validate(dset: DecouplingSet) -> Tuple[bool, Dict[str, Any]]:
    """
    检查退耦集合

    检查顺序：identity_first → unitary → closure → averaging，报告第一个失败项。

    Returns:
        (是否通过, {"check": 名称, "residual": 残差, "index": 相关下标})
    """
    atol = NUMERIC_CONFIG["group_atol"]
    d_h = dset.dim_h
    residual = float(np.max(np.abs(dset.unitaries[0] - np.eye(d_h))))
    if residual > atol:
        return False, {"check": "identity_first", "residual": residual, "index": 0}

    for i, v in enumerate(dset.unitaries):
        if not is_unitary(v):
            residual = float(np.max(np.abs(v @ v.conj().T - np.eye(d_h))))
            return False, {"check": "unitary", "residual": residual, "index": i}

    ads = np.stack([a.matrix for a in dset.ad_maps])
    for j, k in itertools.product(range(dset.size), repeat=2):
        vjk = dset.unitaries[j] @ dset.unitaries[k]
        target = np.kron(vjk.conj(), vjk)
        residuals = np.max(np.abs(ads - target), axis=(1, 2))
        if residuals.min() > atol:
            return False, {"check": "closure", "residual": float(residuals.min()), "index": [j, k]}

    for k in range(d_h):
        for l in range(d_h):
            x = matrix_unit(k, l, d_h)
            avg = sum(v @ x @ v.conj().T for v in dset.unitaries) / dset.size
            expected = np.trace(x) / d_h * np.eye(d_h)
            residual = float(np.linalg.norm(avg - expected))
            if residual > atol:
                return False, {"check": "averaging", "residual": residual, "index": [k, l]}

    return True, {"check": "ok", "residual": 0.0, "index": None}


def from_unitaries(unitaries: Sequence) -> DecouplingSet:
    """用户给定的集合，必须通过 validate"""
    mats = [np.asarray(v, dtype=complex) for v in unitaries]
    if not mats:
        raise ValueError("退耦集合不能为空")
    dset = DecouplingSet(mats[0].shape[0], tuple(mats))
    ok, report = validate(dset)
    if not ok:
        raise ValueError(f"退耦集合校验失败: {report['check']}（残差 {report['residual']:.3e}，位置 {report['index']}）")
    return dset


def _check_dim(L: SuperOp, dset: DecouplingSet):
    if L.dim_h != dset.dim_h:
        raise ValueError(f"维数不一致：生成元 d_H={L.dim_h}，退耦集合 d_H={dset.dim_h}")


def averaged_generator(L: SuperOp, dset: DecouplingSet) -> SuperOp:
    """L̄ = (1/|J|) Σ_j Ad(v_j)∘L∘Ad(v_j*)"""
    _check_dim(L, dset)
    total = np.zeros_like(L.matrix)
    for j in range(dset.size):
        total += dset.conjugate(L, j).matrix
    return SuperOp(L.dim_h, total / dset.size)


def fluctuation_generators(L: SuperOp, dset: DecouplingSet) -> List[SuperOp]:
    """L_j = Ad(v_j)∘(L − L̄)∘Ad(v_j*)，满足 Σ_j L_j = 0"""
    _check_dim(L, dset)
    centered = L - averaged_generator(L, dset)
    return [dset.conjugate(centered, j) for j in range(dset.size)]


def decoupling_condition_holds(L: SuperOp, dset: DecouplingSet) -> bool:
    """‖L̄‖ ≤ 1e-9·max(‖L‖, 1)"""
    threshold = NUMERIC_CONFIG["classify_rtol"] * max(sup_norm(L), 1.0)
    return sup_norm(averaged_generator(L, dset)) <= threshold


def from_config(obj: Any, dim_h: int, path: str = "decoupling") -> DecouplingSet:
    """
    解析 {"type": "pauli", "qubits": n} 或 {"type": "explicit", "unitaries": [...]}

    Raises:
        ConfigError: 字段错误、维数不符或校验失败
    """
    if not isinstance(obj, dict):
        raise ConfigError(path, "应为 JSON 对象")
    kind = obj.get("type")
    if kind == "pauli":
        unknown = sorted(set(obj) - {"type", "qubits"})
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}", "未知字段")
        qubits = obj.get("qubits")
        if isinstance(qubits, bool) or not isinstance(qubits, int) or qubits < 1:
            raise ConfigError(f"{path}.qubits", "应为正整数")
        if 2 ** qubits != dim_h:
            raise ConfigError(f"{path}.qubits", f"2^{qubits} 与系统维数 {dim_h} 不一致")
        return pauli_set(qubits)
    if kind == "explicit":
        unknown = sorted(set(obj) - {"type", "unitaries"})
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}", "未知字段")
        raw = obj.get("unitaries")
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{path}.unitaries", "应为非空数组")
        mats = []
        for i, item in enumerate(raw):
            try:
                m = matrix_from_pairs(item)
            except ValueError as e:
                raise ConfigError(f"{path}.unitaries[{i}]", str(e)) from e
            if m.shape != (dim_h, dim_h):
                raise ConfigError(f"{path}.unitaries[{i}]", f"形状应为 {(dim_h, dim_h)}，实际为 {m.shape}")
            mats.append(m)
        try:
            return from_unitaries(mats)
        except ValueError as e:
            raise ConfigError(f"{path}.unitaries", str(e)) from e
    raise ConfigError(f"{path}.type", f"未知类型 {kind!r}，可选 ['pauli', 'explicit']")
