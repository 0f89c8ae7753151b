"""项目内统一使用的异常类型

全部派生自内置异常，调用方既可以按具体类型捕获，也可以按
ValueError / RuntimeError / FileNotFoundError 统一处理。
"""


class ConfigError(ValueError):
    """配置错误：超参数、消融开关或张量形状与配置不符。"""


class InputError(ValueError):
    """输入错误：图像尺寸不合法、缺少光流等。"""


class ShapeError(ValueError):
    """形状错误：金字塔相邻层之间不是严格的 2 倍关系等。"""


class DomainError(ValueError):
    """取值域错误：掩码不在 [0,1]、光流场含非有限值等。"""


class IngestionError(FileNotFoundError):
    """数据读取错误：目录布局缺文件或文件集合不匹配。"""


class EmptySequenceError(ValueError):
    """序列帧数不足 2，丢弃首帧后没有可用样本。"""


class CheckpointMismatchError(ConfigError):
    """检查点清单与其记录的配置哈希或调用方期望的配置不一致。"""


class TrainingDivergenceError(RuntimeError):
    """训练发散：损失或 logits 出现 NaN / Inf。

    Attributes:
        step: 出现发散的全局步数。
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
