"""
异常类型：CLI 按类型映射退出码
- ConfigError               → 2（配置非法，附带 JSON 路径）
- BudgetExceededError       → 3（集合规模超出内存预算）
- InsufficientCoverageError → 4（τ 取值不足，无法外推）
"""


class ConfigError(ValueError):
    """配置错误，path 为出错字段的 JSON 路径"""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class BudgetExceededError(RuntimeError):
    """集合规模或稠密维度超出预算"""

    def __init__(self, message: str, required: int = 0, budget: int = 0):
        self.required = required
        self.budget = budget
        super().__init__(message)


class InsufficientCoverageError(ValueError):
    """分类所需的 τ 覆盖不足"""


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_COVERAGE = 4
