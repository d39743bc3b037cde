"""
算子空间基础设施
- 向量化约定：矩阵单位基，按列堆叠，vec(x)[l·d_H + k] = x[k, l]
- SuperOp：A = B(H) 上的线性映射（d×d 复矩阵，d = d_H²）
- LiftedOp：A^{⊗n} 上若干初等张量积之和，可稠密展开，也可无矩阵作用
- Hilbert–Schmidt 几何：伴随、指数、范数、偏迹

所有对象构造后不可变，所有函数无副作用，可在多线程中直接共享。
"""
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, expm_multiply

from decoq.config import NUMERIC_CONFIG


BASIS_TAG = "matrix_units_colstack"

# ==================== Pauli 矩阵 ====================
SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_0, SIGMA_1, SIGMA_2, SIGMA_3)


# ==================== 基本判定 ====================

def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"需要方阵，实际形状为 {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("矩阵含有 NaN/Inf")
    return arr


def is_hermitian(x, atol: Optional[float] = None) -> bool:
    atol = NUMERIC_CONFIG["hermitian_atol"] if atol is None else atol
    x = np.asarray(x)
    return bool(np.max(np.abs(x - x.conj().T), initial=0.0) <= atol)


def is_unitary(x, atol: Optional[float] = None) -> bool:
    atol = NUMERIC_CONFIG["unitary_atol"] if atol is None else atol
    x = np.asarray(x)
    eye = np.eye(x.shape[0])
    return bool(np.max(np.abs(x @ x.conj().T - eye), initial=0.0) <= atol)


def is_density(x, atol: Optional[float] = None) -> bool:
    """半正定、迹为 1（容差内）"""
    atol = NUMERIC_CONFIG["density_atol"] if atol is None else atol
    x = np.asarray(x)
    if not is_hermitian(x, atol):
        return False
    if abs(np.trace(x) - 1.0) > atol:
        return False
    evals = np.linalg.eigvalsh((x + x.conj().T) / 2)
    return bool(evals.min() >= -atol)


# ==================== 向量化 ====================

def vec(x) -> np.ndarray:
    """按列堆叠"""
    return np.asarray(x, dtype=complex).reshape(-1, order="F")


def unvec(v, dim_h: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if dim_h is None:
        dim_h = int(round(np.sqrt(v.shape[0])))
    return v.reshape((dim_h, dim_h), order="F")


def matrix_unit(k: int, l: int, dim_h: int) -> np.ndarray:
    e = np.zeros((dim_h, dim_h), dtype=complex)
    e[k, l] = 1.0
    return e


def left_mult(a) -> np.ndarray:
    """x ↦ a x"""
    a = np.asarray(a, dtype=complex)
    return np.kron(np.eye(a.shape[0]), a)


def right_mult(b) -> np.ndarray:
    """x ↦ x b"""
    b = np.asarray(b, dtype=complex)
    return np.kron(b.T, np.eye(b.shape[0]))


def sandwich(a, b) -> np.ndarray:
    """x ↦ a x b 的矩阵：bᵀ ⊗ a"""
    return np.kron(np.asarray(b, dtype=complex).T, np.asarray(a, dtype=complex))


# ==================== SuperOp ====================

@dataclass(frozen=True, eq=False)
class SuperOp:
    """
    A 上的线性映射

    Attributes:
        dim_h: 底层 Hilbert 空间维数 d_H
        matrix: d×d 复矩阵（d = d_H²），作用于 vec(x)
        basis_tag: 向量化基的标识
    """
    dim_h: int
    matrix: np.ndarray
    basis_tag: str = BASIS_TAG

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.dim_h * self.dim_h
        if m.shape != (d, d):
            raise ValueError(f"SuperOp 矩阵形状应为 {(d, d)}，实际为 {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("SuperOp 矩阵含有 NaN/Inf")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.dim_h * self.dim_h

    @classmethod
    def identity(cls, dim_h: int) -> "SuperOp":
        return cls(dim_h, np.eye(dim_h * dim_h, dtype=complex))

    @classmethod
    def zero(cls, dim_h: int) -> "SuperOp":
        return cls(dim_h, np.zeros((dim_h * dim_h, dim_h * dim_h), dtype=complex))

    @classmethod
    def from_map(cls, func: Callable[[np.ndarray], np.ndarray], dim_h: int) -> "SuperOp":
        """按矩阵单位逐列构造：第 l·d_H + k 列为 vec(func(E_kl))"""
        d = dim_h * dim_h
        m = np.zeros((d, d), dtype=complex)
        for l in range(dim_h):
            for k in range(dim_h):
                m[:, l * dim_h + k] = vec(func(matrix_unit(k, l, dim_h)))
        return cls(dim_h, m)

    def apply(self, x) -> np.ndarray:
        return unvec(self.matrix @ vec(x), self.dim_h)

    def dagger(self) -> "SuperOp":
        return SuperOp(self.dim_h, self.matrix.conj().T)

    def conj(self) -> "SuperOp":
        return SuperOp(self.dim_h, self.matrix.conj())

    def _check(self, other: "SuperOp"):
        if not isinstance(other, SuperOp) or other.dim_h != self.dim_h:
            raise ValueError("SuperOp 维数不一致")

    def __matmul__(self, other: "SuperOp") -> "SuperOp":
        self._check(other)
        return SuperOp(self.dim_h, self.matrix @ other.matrix)

    def __add__(self, other: "SuperOp") -> "SuperOp":
        self._check(other)
        return SuperOp(self.dim_h, self.matrix + other.matrix)

    def __sub__(self, other: "SuperOp") -> "SuperOp":
        self._check(other)
        return SuperOp(self.dim_h, self.matrix - other.matrix)

    def __neg__(self) -> "SuperOp":
        return SuperOp(self.dim_h, -self.matrix)

    def __mul__(self, scalar) -> "SuperOp":
        return SuperOp(self.dim_h, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SuperOp(dim_h={self.dim_h}, ‖·‖={np.linalg.norm(self.matrix, 2):.4g})"


def ad_of(h) -> SuperOp:
    """ad(H)(x) = Hx − xH，矩阵为 1⊗H − Hᵀ⊗1"""
    h = _as_matrix(h)
    if not is_hermitian(h):
        raise ValueError("ad_of: H is not hermitian")
    return SuperOp(h.shape[0], left_mult(h) - right_mult(h))


def Ad_of(v) -> SuperOp:
    """Ad(v)(x) = v x v*，矩阵为 v̄⊗v"""
    v = _as_matrix(v)
    if not is_unitary(v):
        raise ValueError("Ad_of: v is not unitary")
    return SuperOp(v.shape[0], np.kron(v.conj(), v))


def dagger(m: SuperOp) -> SuperOp:
    return m.dagger()


def expm(m: SuperOp, t: float = 1.0) -> SuperOp:
    """e^{tM}，scipy 的缩放平方 Padé"""
    return SuperOp(m.dim_h, scipy.linalg.expm(t * m.matrix))


def sup_norm(m: Union[SuperOp, np.ndarray], kind: str = "spectral") -> float:
    mat = m.matrix if isinstance(m, SuperOp) else np.asarray(m)
    if kind == "spectral":
        return float(np.linalg.norm(mat, 2)) if mat.size else 0.0
    if kind == "frobenius":
        return float(np.linalg.norm(mat, "fro"))
    raise ValueError(f"未知范数类型: {kind}")


def hs_inner(x, y) -> complex:
    """⟨x, y⟩ = tr(x* y)"""
    return complex(np.vdot(vec(x), vec(y)))


def partial_trace(x, dims: Tuple[int, int], keep: str = "system") -> np.ndarray:
    """
    H⊗H₁ 上算子的偏迹

    Args:
        x: (d_H·d_H1)×(d_H·d_H1) 矩阵，Kronecker 顺序为 系统⊗热库
        dims: (d_H, d_H1)
        keep: "system" 保留系统（迹掉热库），"bath" 保留热库
    """
    x = np.asarray(x, dtype=complex)
    d_h, d_b = dims
    if x.shape != (d_h * d_b, d_h * d_b):
        raise ValueError(f"维数 {x.shape} 无法分解为 {d_h}×{d_b}")
    x4 = x.reshape(d_h, d_b, d_h, d_b)
    if keep == "system":
        return np.einsum("iaja->ij", x4)
    if keep == "bath":
        return np.einsum("iaib->ab", x4)
    raise ValueError(f"未知子系统: {keep}")


def swap_operator(d: int) -> np.ndarray:
    """A⊗A 上的交换算子 Φ(x⊗y) = y⊗x"""
    phi = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            phi[j * d + i, i * d + j] = 1.0
    return phi


def flip_trace(m: np.ndarray, d: int) -> complex:
    """Σ_{k,l} ⟨e_l⊗e_k, M(e_k⊗e_l)⟩ = tr(Φ·M)"""
    m4 = np.asarray(m).reshape(d, d, d, d)
    return complex(np.einsum("lkkl->", m4))


# ==================== 提升算子 ====================

Term = Tuple[complex, Tuple[Tuple[int, np.ndarray], ...]]


@dataclass(frozen=True, eq=False)
class LiftedOp:
    """
    A^{⊗n} 上的算子 Σ_terms coef · (⊗_slot M_slot)，未列出的槽位为恒等

    Attributes:
        d: 单个槽位的维数（A 的维数）
        arity: 槽位个数 n
        terms: ((coef, ((slot, matrix), ...)), ...)
    """
    d: int
    arity: int
    terms: Tuple[Term, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("LiftedOp 的槽位数必须 ≥ 1")
        frozen_terms = []
        for coef, factors in self.terms:
            fs = []
            for slot, mat in factors:
                if not 0 <= slot < self.arity:
                    raise ValueError(f"槽位 {slot} 超出范围 [0, {self.arity})")
                m = np.array(mat, dtype=complex)
                if m.shape != (self.d, self.d):
                    raise ValueError(f"槽位矩阵形状应为 {(self.d, self.d)}")
                m.flags.writeable = False
                fs.append((int(slot), m))
            frozen_terms.append((complex(coef), tuple(fs)))
        object.__setattr__(self, "terms", tuple(frozen_terms))

    @property
    def dim(self) -> int:
        return self.d ** self.arity

    @property
    def is_dense_available(self) -> bool:
        return self.dim <= NUMERIC_CONFIG["dense_limit"]

    def apply(self, w) -> np.ndarray:
        """无矩阵作用；w 的形状为 (dim,) 或 (dim, k)"""
        w = np.asarray(w, dtype=complex)
        extra = w.shape[1:]
        tensor = w.reshape((self.d,) * self.arity + extra)
        out = np.zeros_like(tensor)
        for coef, factors in self.terms:
            v = tensor
            for slot, mat in factors:
                v = np.moveaxis(np.tensordot(mat, v, axes=([1], [slot])), 0, slot)
            out += coef * v
        return out.reshape(w.shape)

    def apply_product(self, xs: Sequence[np.ndarray]) -> np.ndarray:
        """在乘积向量 x₁⊗…⊗x_n 上逐因子求值"""
        if len(xs) != self.arity:
            raise ValueError("乘积向量的因子个数与槽位数不符")
        xs = [np.asarray(x, dtype=complex) for x in xs]
        out = np.zeros(self.dim, dtype=complex)
        for coef, factors in self.terms:
            parts = list(xs)
            for slot, mat in factors:
                parts[slot] = mat @ parts[slot]
            kron = parts[0]
            for p in parts[1:]:
                kron = np.kron(kron, p)
            out += coef * kron
        return out

    @cached_property
    def dense(self) -> np.ndarray:
        """稠密展开（只在 d^n ≤ dense_limit 时可用，写一次后缓存）"""
        if not self.is_dense_available:
            raise ValueError(f"维数 {self.dim} 超过稠密上限 {NUMERIC_CONFIG['dense_limit']}")
        eye = np.eye(self.d, dtype=complex)
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for coef, factors in self.terms:
            per_slot = [eye] * self.arity
            for slot, mat in factors:
                # 同一槽位按列出顺序依次作用
                per_slot[slot] = mat if per_slot[slot] is eye else mat @ per_slot[slot]
            kron = per_slot[0]
            for p in per_slot[1:]:
                kron = np.kron(kron, p)
            total += coef * kron
        total.flags.writeable = False
        return total

    def trace(self) -> complex:
        total = 0j
        for coef, factors in self.terms:
            used = {}
            for slot, mat in factors:
                used[slot] = mat @ used[slot] if slot in used else mat
            value = coef * self.d ** (self.arity - len(used))
            for mat in used.values():
                value *= np.trace(mat)
            total += value
        return complex(total)

    def dagger(self) -> "LiftedOp":
        terms = []
        for coef, factors in self.terms:
            # 同一槽位上的多个因子逆序
            terms.append((np.conj(coef), tuple((s, m.conj().T) for s, m in reversed(factors))))
        return LiftedOp(self.d, self.arity, tuple(terms))

    def scaled(self, scalar) -> "LiftedOp":
        return LiftedOp(self.d, self.arity, tuple((c * scalar, f) for c, f in self.terms))

    def as_linear_operator(self) -> LinearOperator:
        adj = self.dagger()
        return LinearOperator(
            (self.dim, self.dim),
            matvec=self.apply,
            rmatvec=adj.apply,
            matmat=self.apply,
            rmatmat=adj.apply,
            dtype=complex,
        )


def expm_action(m: Union[LiftedOp, SuperOp, np.ndarray], t: float, w,
                matrix_free: Optional[bool] = None) -> np.ndarray:
    """
    e^{tM} w，Al-Mohy–Higham 截断 Taylor（按范数缩放）

    维数不超过 dense_action_limit 时用稠密矩阵，否则走 LinearOperator；w 可以是多列。
    matrix_free 显式指定时覆盖默认选择。
    """
    w = np.asarray(w, dtype=complex)
    if t == 0:
        return w.copy()
    if isinstance(m, SuperOp):
        return expm_multiply(t * m.matrix, w)
    if isinstance(m, np.ndarray):
        return expm_multiply(t * m, w)
    if matrix_free is None:
        matrix_free = m.dim > NUMERIC_CONFIG["dense_action_limit"]
    if not matrix_free:
        return expm_multiply(t * m.dense, w)
    op = m.as_linear_operator() * t
    return expm_multiply(op, w, traceA=t * m.trace())


# ==================== 随机对象（测试与示例用） ====================

def random_hermitian(dim_h: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim_h, dim_h)) + 1j * rng.normal(size=(dim_h, dim_h))
    return scale * (a + a.conj().T) / 2


def random_unitary(dim_h: int, rng: np.random.Generator) -> np.ndarray:
    """QR 采样的 Haar 幺正"""
    z = (rng.normal(size=(dim_h, dim_h)) + 1j * rng.normal(size=(dim_h, dim_h))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_density(dim_h: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim_h, dim_h)) + 1j * rng.normal(size=(dim_h, dim_h))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def orthonormal_pauli_basis(n_qubits: int) -> List[np.ndarray]:
    """归一化 Pauli 基（A 的另一组正交归一基）"""
    basis = []
    for combo in itertools.product(PAULIS, repeat=n_qubits):
        m = np.array([[1.0 + 0j]])
        for p in combo:
            m = np.kron(m, p)
        basis.append(m / np.sqrt(2 ** n_qubits))
    return basis
