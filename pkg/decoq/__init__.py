"""
decoq：随机动力学退耦工具包

算子空间与超算子、Lindblad 生成元、退耦集合、随机脉冲游走、连续极限、
门保真度、扩张（外禀）模型与内禀/外禀判定。
"""
__version__ = "0.1.0"

from decoq.decoupling import DecouplingSet, pauli_set
from decoq.diagnose import BoundReport, Verdict, bounds, classify
from decoq.dilation import DilationSpec, amplitude_damping_bath
from decoq.errors import BudgetExceededError, ConfigError, InsufficientCoverageError
from decoq.fidelity import FidelityCurve, analytic_fidelity, mc_fidelity, path_fidelity
from decoq.lindblad import LindbladSpec, amplitude_damping, compile, dephasing
from decoq.limit import LimitGenerators, build
from decoq.operator_space import SuperOp
from decoq.walk import WalkConfig, WalkPath, simulate_ensemble

__all__ = [
    "__version__",
    "BoundReport",
    "BudgetExceededError",
    "ConfigError",
    "DecouplingSet",
    "DilationSpec",
    "FidelityCurve",
    "InsufficientCoverageError",
    "LimitGenerators",
    "LindbladSpec",
    "SuperOp",
    "Verdict",
    "WalkConfig",
    "WalkPath",
    "amplitude_damping",
    "amplitude_damping_bath",
    "analytic_fidelity",
    "bounds",
    "build",
    "classify",
    "compile",
    "dephasing",
    "mc_fidelity",
    "path_fidelity",
    "pauli_set",
    "simulate_ensemble",
]
