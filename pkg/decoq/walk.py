"""
随机脉冲游走

四种步进方式：
- physical:  第 i 个脉冲区间上的增量 Ad(v_j)∘α_τ∘Ad(v_j*)，网格点落在脉冲之间时
             再作用未共轭的 α_{t−nτ}
- diffusion: 单步 exp(τ·√(2/n)·L_j + (τ/n)·L̄)，每步推进时间 τ/n；一步的 k 槽矩平均为
             1 + (τ/n)·L̂^(k) + O(n^{-3/2})，与 limit 中的提升生成元一致
- centered:  单步 exp((τ/√n)L_j + (τ/n)(L̄ − (τ/2)L_j²))，一阶矩收敛到 e^{tL̄}，
             槽间交叉系数只有 L̂ 的一半，只用于对照
- drift:     单步 exp((τ/n)·Ad(v_j)∘L∘Ad(v_j*))，每步推进时间 τ/n

每条路径的随机流由 (master_seed, path_id) 经 SeedSequence 派生（Philox 计数器生成器），
路径按固定大小分块并行，分块只取决于路径编号，结果与线程数无关。
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from decoq.config import NUMERIC_CONFIG, WALK_CONFIG
from decoq.decoupling import DecouplingSet, averaged_generator, fluctuation_generators
from decoq.errors import BudgetExceededError
from decoq.lindblad import GeneratorTable, LindbladSpec, compile, compile_table, smoothness_ratio
from decoq.operator_space import SuperOp, expm, is_density, sup_norm, unvec, vec

# 尝试导入 tqdm 用于显示进度条
try:
    from tqdm import tqdm
except ImportError:
    tqdm = None

SCHEMES = ("physical", "diffusion", "drift", "centered")

# floor(t/τ) 的舍入保护
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class WalkConfig:
    """
    游走参数

    Attributes:
        tau: 脉冲间隔 τ > 0
        t_grid: 递增、非负的采样时间
        scheme: physical / diffusion / drift / centered
        n: 非 physical 方案的缩放参数（≥ 100）
        paths: 路径数
        master_seed: 主种子
    """
    tau: float
    t_grid: Tuple[float, ...]
    scheme: str = "physical"
    n: int = 0
    paths: int = 1
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if not self.tau > 0:
            raise ValueError(f"tau 必须为正，当前为 {self.tau}")
        if not self.t_grid:
            raise ValueError("t_grid 不能为空")
        if self.t_grid[0] < 0 or any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ValueError("t_grid 必须非负且严格递增")
        if self.scheme not in SCHEMES:
            raise ValueError(f"未知 scheme {self.scheme!r}，可选 {list(SCHEMES)}")
        if self.scheme != "physical" and self.n < WALK_CONFIG["min_scheme_n"]:
            raise ValueError(f"{self.scheme} 需要 n ≥ {WALK_CONFIG['min_scheme_n']}，当前为 {self.n}")
        if self.paths < 1:
            raise ValueError(f"paths 必须 ≥ 1，当前为 {self.paths}")
        if self.master_seed < 0:
            raise ValueError("master_seed 必须非负")


@dataclass(frozen=True, eq=False)
class WalkPath:
    """
    单条路径：各网格时间的映射与路径保真度

    maps 为 (|t_grid|, d, d) 的只读数组；pulse_indices 由种子按需重建，不常驻内存。
    states 只在给定初态时填充，形状 (|t_grid|, d_H, d_H)。
    """
    path_id: int
    t_grid: Tuple[float, ...]
    maps: np.ndarray
    fidelities: np.ndarray
    max_norm: float
    n_steps: int
    set_size: int
    master_seed: int
    scheme: str
    states: Optional[np.ndarray] = None

    @property
    def dim_h(self) -> int:
        return int(round(math.sqrt(self.maps.shape[-1])))

    @property
    def pulse_indices(self) -> np.ndarray:
        return draw_indices(self.master_seed, self.path_id, self.n_steps, self.set_size)

    def map_at(self, g: int) -> SuperOp:
        return SuperOp(self.dim_h, self.maps[g])

    def to_record(self, max_indices: Optional[int] = None) -> Dict:
        """JSON-lines 记录"""
        indices = None
        if max_indices is None or self.n_steps <= max_indices:
            indices = self.pulse_indices.tolist()
        return {
            "path_id": self.path_id,
            "scheme": self.scheme,
            "n_steps": self.n_steps,
            "pulse_indices": indices,
            "t": list(self.t_grid),
            "fidelity": [float(f) for f in self.fidelities],
            "max_norm": self.max_norm,
        }


# ==================== 随机流 ====================

def path_rng(master_seed: int, path_id: int) -> np.random.Generator:
    """(master_seed, path_id) → 独立的 Philox 流"""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(path_id,))
    return np.random.Generator(np.random.Philox(seq))


def draw_indices(master_seed: int, path_id: int, n_steps: int, set_size: int) -> np.ndarray:
    """一条路径的全部脉冲下标（一次性抽取）"""
    return path_rng(master_seed, path_id).integers(0, set_size, size=n_steps, dtype=np.uint16)


# ==================== 单步 ====================

def product_integral(table: GeneratorTable, t0: float, t1: float,
                     conjugation: Optional[Tuple[SuperOp, SuperOp]] = None) -> SuperOp:
    """
    时序乘积 Π e^{Δt·L(t_k)}，左端点取样，较晚的因子在左

    区间先按采样表断点切段，每段再细分使 ‖L‖·Δt ≤ substep_budget。
    conjugation=(A, A_inv) 时对每个因子取 A∘L∘A_inv。
    """
    d = table.dim_h * table.dim_h
    out = np.eye(d, dtype=complex)
    if t1 <= t0:
        return SuperOp(table.dim_h, out)
    points = [t0, t1] if table.is_single else table.breakpoints(t0, t1)
    budget = NUMERIC_CONFIG["substep_budget"]
    for a, b in zip(points, points[1:]):
        norm = max(sup_norm(table.at(a)), sup_norm(table.at(b)))
        n_sub = max(1, math.ceil(norm * (b - a) / budget))
        dt = (b - a) / n_sub
        for k in range(n_sub):
            gen = table.at(a + k * dt)
            if conjugation is not None:
                gen = conjugation[0] @ gen @ conjugation[1]
            out = scipy.linalg.expm(dt * gen.matrix) @ out
    return SuperOp(table.dim_h, out)


def physical_step(L: Union[SuperOp, GeneratorTable], dset: DecouplingSet, j: int, tau: float,
                  t_start: float = 0.0) -> SuperOp:
    """
    第 j 个脉冲下长度 τ 的增量

    常数生成元：exp(τ·Ad(v_j)∘L∘Ad(v_j*))；时变生成元：[t_start, t_start+τ] 上的乘积积分
    """
    if not 0 <= j < dset.size:
        raise ValueError(f"脉冲下标 {j} 超出范围 [0, {dset.size})")
    if isinstance(L, GeneratorTable):
        return product_integral(L, t_start, t_start + tau,
                                conjugation=(dset.ad_maps[j], dset.ad_inverse_maps[j]))
    return expm(dset.conjugate(L, j), tau)


def pulse_form_map(L: SuperOp, dset: DecouplingSet, indices: Sequence[int], tau: float) -> SuperOp:
    """
    脉冲夹心形式 Ad(v_{j_n})∘α_τ∘Ad(v_{j_n}* v_{j_{n−1}})∘…∘α_τ∘Ad(v_{j_1}*)
    """
    alpha = expm(L, tau).matrix
    v = dset.unitaries
    if len(indices) == 0:
        return SuperOp.identity(L.dim_h)
    out = dset.ad_inverse_maps[indices[0]].matrix
    for prev, cur in zip(indices, indices[1:]):
        out = alpha @ out
        w = v[cur].conj().T @ v[prev]
        out = np.kron(w.conj(), w) @ out
    out = dset.ad_maps[indices[-1]].matrix @ (alpha @ out)
    return SuperOp(L.dim_h, out)


def scheme_step(L_bar: SuperOp, L_j: SuperOp, tau: float, n: int, scheme: str) -> SuperOp:
    """
    diffusion: exp(τ·√(2/n)·L_j + (τ/n)·L̄)
    centered:  exp((τ/√n)L_j + (τ/n)(L̄ − (τ/2)L_j²))
    drift:     exp((τ/n)(L̄ + L_j))，即 exp((τ/n)·Ad(v_j)∘L∘Ad(v_j*))
    """
    if n < 1:
        raise ValueError(f"n 必须 ≥ 1，当前为 {n}")
    if scheme == "diffusion":
        gen = L_j * (tau * math.sqrt(2.0 / n)) + L_bar * (tau / n)
    elif scheme == "centered":
        gen = L_j * (tau / math.sqrt(n)) + (L_bar - (L_j @ L_j) * (tau / 2)) * (tau / n)
    elif scheme == "drift":
        gen = (L_bar + L_j) * (tau / n)
    else:
        raise ValueError(f"未知 scheme {scheme!r}，可选 ['diffusion', 'centered', 'drift']")
    return expm(gen)


def step_measure(L: SuperOp, dset: DecouplingSet, tau: float, scheme: str, n: int = 0) -> np.ndarray:
    """等概率步进集合，形状 (|J|, d, d)"""
    if scheme == "physical":
        return np.stack([physical_step(L, dset, j, tau).matrix for j in range(dset.size)])
    L_bar = averaged_generator(L, dset)
    return np.stack([scheme_step(L_bar, L_j, tau, n, scheme).matrix
                     for L_j in fluctuation_generators(L, dset)])


def grid_schedule(t_grid: Sequence[float], tau: float, scheme: str, n: int = 0) -> List[Tuple[int, float]]:
    """
    每个网格时间对应的 (增量个数 m, 剩余时间 r)

    physical: m = floor(t/τ)，r = t − mτ；其他方案: m = round(t·n/τ)，r = 0
    """
    schedule = []
    for t in t_grid:
        if scheme == "physical":
            m = int(math.floor(t / tau + _GRID_EPS))
            r = max(t - m * tau, 0.0)
            # 舍入保护后 r 可能是 -1e-18 量级
            schedule.append((m, r if r > _GRID_EPS * tau else 0.0))
        else:
            schedule.append((int(round(t * n / tau)), 0.0))
    return schedule


def ensemble_bytes(paths: int, n_times: int, d: int) -> int:
    return paths * n_times * d * d * 16


def check_budget(cfg: WalkConfig, d: int, budget: Optional[int] = None):
    """paths·|t_grid|·d²·16 字节超出预算时拒绝"""
    budget = WALK_CONFIG["max_ensemble_bytes"] if budget is None else budget
    required = ensemble_bytes(cfg.paths, len(cfg.t_grid), d)
    if required > budget:
        raise BudgetExceededError(
            f"集合需要 {required / 2**20:.1f} MiB，超出预算 {budget / 2**20:.1f} MiB"
            f"（paths={cfg.paths}, |t_grid|={len(cfg.t_grid)}, d={d}）",
            required=required, budget=budget)


# ==================== 并行引擎 ====================

StepFn = Callable[[int, np.ndarray], np.ndarray]


def run_walk_engine(cfg: WalkConfig, dim: int, set_size: int, schedule: Sequence[int], step_fn: StepFn,
                    post_fn: Callable[[int], Optional[np.ndarray]],
                    finalize: Callable[[np.ndarray], np.ndarray],
                    threads: Optional[int] = None, show_progress: Optional[bool] = None,
                    desc: str = "Walk") -> List[np.ndarray]:
    """
    分块批量推进路径

    Args:
        dim: 被推进矩阵的维数（超算子为 d，幺正扩张为 d_H·d_H1）
        schedule: 每个网格点需要的累计增量个数（非降）
        step_fn: (第 s 个增量, 每条路径的下标 (C,)) → (C, dim, dim)
        post_fn: 网格点 g 的剩余因子（dim×dim）或 None
        finalize: (C, dim, dim) → (C, d, d)，输出存储的映射

    Returns:
        每条路径的 (|t_grid|, d, d) 数组，按 path_id 排列
    """
    threads = WALK_CONFIG["default_threads"] if threads is None else threads
    show_progress = WALK_CONFIG["show_progress"] if show_progress is None else show_progress
    n_total = max(schedule) if schedule else 0
    chunk = WALK_CONFIG["chunk_size"]
    chunks = [list(range(s, min(s + chunk, cfg.paths))) for s in range(0, cfg.paths, chunk)]
    posts = [post_fn(g) for g in range(len(schedule))]

    def run_chunk(ids: List[int]) -> np.ndarray:
        idx = np.stack([draw_indices(cfg.master_seed, pid, n_total, set_size) for pid in ids]) \
            if n_total else np.zeros((len(ids), 0), dtype=np.uint16)
        current = np.broadcast_to(np.eye(dim, dtype=complex), (len(ids), dim, dim)).copy()
        frames = []
        done = 0
        for g, m in enumerate(schedule):
            for s in range(done, m):
                current = step_fn(s, idx[:, s]) @ current
            done = m
            frame = current if posts[g] is None else posts[g] @ current
            frames.append(finalize(frame))
        return np.stack(frames, axis=1)

    results: List[Optional[np.ndarray]] = [None] * len(chunks)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        future_to_chunk = {executor.submit(run_chunk, ids): c for c, ids in enumerate(chunks)}
        pbar = tqdm(total=cfg.paths, desc=desc, unit="path") if (tqdm and show_progress) else None
        for future in as_completed(future_to_chunk):
            c = future_to_chunk[future]
            results[c] = future.result()
            if pbar:
                pbar.update(len(chunks[c]))
        if pbar:
            pbar.close()

    out = []
    for block in results:
        out.extend(list(block))
    return out


def _as_generator(L_or_spec) -> Union[SuperOp, GeneratorTable]:
    if isinstance(L_or_spec, (SuperOp, GeneratorTable)):
        if isinstance(L_or_spec, GeneratorTable) and L_or_spec.is_single:
            return L_or_spec.generators[0]
        return L_or_spec
    if isinstance(L_or_spec, LindbladSpec):
        if L_or_spec.is_time_dependent:
            return compile_table(L_or_spec)
        return compile(L_or_spec)
    raise TypeError(f"无法识别的生成元类型: {type(L_or_spec).__name__}")


def path_fidelities(maps: np.ndarray) -> np.ndarray:
    """1 − ‖id − map‖²_F / d，对最后两维批量计算"""
    d = maps.shape[-1]
    diff = np.eye(d) - maps
    return 1.0 - np.sum(np.abs(diff) ** 2, axis=(-2, -1)) / d


def build_paths(cfg: WalkConfig, trajectories: List[np.ndarray], n_total: int, set_size: int) -> List[WalkPath]:
    """把引擎输出包装为 WalkPath，并检查收缩性"""
    slack = NUMERIC_CONFIG["contraction_slack"]
    paths = []
    worst = 0.0
    for pid, maps in enumerate(trajectories):
        maps = np.ascontiguousarray(maps)
        maps.flags.writeable = False
        norms = np.linalg.norm(maps, 2, axis=(1, 2))
        max_norm = float(norms.max())
        worst = max(worst, max_norm)
        fids = path_fidelities(maps)
        fids.flags.writeable = False
        paths.append(WalkPath(
            path_id=pid, t_grid=cfg.t_grid, maps=maps, fidelities=fids, max_norm=max_norm,
            n_steps=n_total, set_size=set_size, master_seed=cfg.master_seed, scheme=cfg.scheme))
    if worst > 1.0 + slack:
        logging.warning(f"⚠️ 路径映射的 Hilbert–Schmidt 算子范数最大为 {worst:.6g}，超过 1 + {slack}（非幺正生成元可能出现）")
    return paths


def simulate_ensemble(L_or_spec, dset: DecouplingSet, cfg: WalkConfig, threads: Optional[int] = None,
                      show_progress: Optional[bool] = None) -> List[WalkPath]:
    """
    生成路径集合

    Args:
        L_or_spec: SuperOp、GeneratorTable 或 LindbladSpec
        dset: 退耦集合
        cfg: 游走参数

    Raises:
        BudgetExceededError: paths·|t_grid|·d²·16 超出预算
        ValueError: 维数不一致，或对时变生成元使用 非 physical 方案
    """
    gen = _as_generator(L_or_spec)
    if gen.dim_h != dset.dim_h:
        raise ValueError(f"维数不一致：生成元 d_H={gen.dim_h}，退耦集合 d_H={dset.dim_h}")
    d = gen.dim_h * gen.dim_h
    check_budget(cfg, d)
    plan = grid_schedule(cfg.t_grid, cfg.tau, cfg.scheme, cfg.n)
    counts = [m for m, _ in plan]
    n_total = max(counts)
    logging.info(f"🚀 开始 {cfg.scheme} 游走: paths={cfg.paths}, τ={cfg.tau:g}, 增量数={n_total}, |J|={dset.size}")

    if isinstance(gen, GeneratorTable):
        if cfg.scheme != "physical":
            raise ValueError("时变生成元只支持 physical 游走")
        ratios = [smoothness_ratio(gen, min(max(s * cfg.tau, gen.domain[0]), gen.domain[1]), cfg.tau)
                  for s in range(n_total + 1)]
        if ratios and max(ratios) > NUMERIC_CONFIG["smoothness_warn"]:
            logging.warning(f"⚠️ 时变生成元光滑性比值最大 {max(ratios):.3g}，超过 {NUMERIC_CONFIG['smoothness_warn']}")
        blocks = [product_integral(gen, s * cfg.tau, (s + 1) * cfg.tau).matrix for s in range(n_total)]
        ads = np.stack([a.matrix for a in dset.ad_maps])
        ads_inv = np.stack([a.matrix for a in dset.ad_inverse_maps])

        def step_fn(s, idx):
            return ads[idx] @ blocks[s] @ ads_inv[idx]

        def post_fn(g):
            m, r = plan[g]
            return product_integral(gen, m * cfg.tau, m * cfg.tau + r).matrix if r > 0 else None
    else:
        steps = step_measure(gen, dset, cfg.tau, cfg.scheme, cfg.n)

        def step_fn(s, idx):
            return steps[idx]

        def post_fn(g):
            m, r = plan[g]
            return expm(gen, r).matrix if r > 0 else None

    trajectories = run_walk_engine(cfg, d, dset.size, counts, step_fn, post_fn, finalize=lambda x: x,
                                   threads=threads, show_progress=show_progress, desc=f"Walk[{cfg.scheme}]")
    return build_paths(cfg, trajectories, n_total, dset.size)


def apply_to_state(path: WalkPath, rho0) -> List[np.ndarray]:
    """ρ_t = map_t(ρ₀)，每个网格时间一个"""
    rho0 = np.asarray(rho0, dtype=complex)
    if not is_density(rho0):
        raise ValueError("rho0 不是密度矩阵")
    v = vec(rho0)
    return [unvec(m @ v, path.dim_h) for m in path.maps]


def ensemble_map_moments(paths: Sequence[WalkPath]) -> Tuple[np.ndarray, np.ndarray]:
    """逐元素样本均值与标准误，形状 (|t_grid|, d, d)"""
    if not paths:
        raise ValueError("路径集合为空")
    stack = np.stack([p.maps for p in paths])
    mean = stack.mean(axis=0)
    if len(paths) < 2:
        return mean, np.zeros(mean.shape)
    # 复数元素按实部、虚部分别估计标准误，取较大者
    se_re = stack.real.std(axis=0, ddof=1) / math.sqrt(len(paths))
    se_im = stack.imag.std(axis=0, ddof=1) / math.sqrt(len(paths))
    return mean, np.maximum(se_re, se_im)


# ==================== 离散游走的精确矩 ====================

def _signature_kron(mats: Sequence[np.ndarray], signature: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m, s in zip(mats, signature):
        out = np.kron(out, m if s == "+" else m.conj())
    return out


def walk_moment_operator(steps: np.ndarray, signature: str, m: int,
                         post: Optional[np.ndarray] = None) -> np.ndarray:
    """
    m 步离散游走的精确混合矩 E[α^{(s_1)} ⊗ … ⊗ α^{(s_n)}]（'+' 为映射本身，'-' 为其复共轭）

    Args:
        steps: (|J|, d, d) 等概率步进集合
        signature: '+'/'-' 串
        m: 增量个数
        post: 最后作用的确定性因子（physical 的剩余 α_r）

    Raises:
        BudgetExceededError: dⁿ 超过稠密上限
    """
    d = steps.shape[-1]
    dim = d ** len(signature)
    if dim > NUMERIC_CONFIG["dense_limit"]:
        raise BudgetExceededError(f"精确矩维数 {dim} 超过稠密上限 {NUMERIC_CONFIG['dense_limit']}",
                                  required=dim, budget=NUMERIC_CONFIG["dense_limit"])
    one_step = sum(_signature_kron([s] * len(signature), signature) for s in steps) / len(steps)
    moment = np.linalg.matrix_power(one_step, m) if m > 0 else np.eye(dim, dtype=complex)
    if post is not None:
        moment = _signature_kron([post] * len(signature), signature) @ moment
    return moment
