"""分段指数衰减学习率：lr(e) = base_lr · decay^⌊e / period⌋"""

from torch.optim import Optimizer
from torch.optim.lr_scheduler import LambdaLR

from config.run_config import TrainConfig
from src.errors import ConfigError


def lr_schedule(
    epoch: int, base_lr: float = 1e-4, decay: float = 0.1, period: int = 25
) -> float:
    """第 epoch 轮（从 0 开始）的学习率。

    Examples:
        >>> lr_schedule(0)
        0.0001
    """
    if epoch < 0:
        raise ConfigError(f"epoch 必须非负，收到 {epoch}")
    return base_lr * decay ** (epoch // period)


def make_scheduler(optimizer: Optimizer, config: TrainConfig) -> LambdaLR:
    """按轮调用 step() 的调度器，学习率与 lr_schedule 一致。"""
    return LambdaLR(optimizer, lambda epoch: config.lr_decay ** (epoch // config.decay_period))
