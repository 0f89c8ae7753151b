"""深度监督的二元交叉熵损失

    teacher: L = BCE(Z^M)
    student: L = BCE(Z^A)
    joint:   L = BCE(Z^A) + λ · BCE(Z^M)

BCE 为逐像素平均，在 logit 域以数值稳定的形式计算。
"""

import torch
import torch.nn.functional as F

from src.errors import ConfigError, ShapeError, TrainingDivergenceError


def bce(logits: torch.Tensor, gt: torch.Tensor, step: int | None = None) -> torch.Tensor:
    """单张（批）显著图的平均 BCE。

    Raises:
        ShapeError: logits 与 gt 形状不一致。
        TrainingDivergenceError: logits 含 NaN / Inf。
    """
    if logits.shape != gt.shape:
        raise ShapeError(f"logits {tuple(logits.shape)} 与真值 {tuple(gt.shape)} 形状不一致")
    if not torch.isfinite(logits).all():
        raise TrainingDivergenceError(f"第 {step} 步 logits 出现 NaN / Inf", step=step)
    return F.binary_cross_entropy_with_logits(logits, gt.to(logits.dtype))


def gtnet_loss(
    z_a_logits: torch.Tensor | None,
    z_m_logits: torch.Tensor | None,
    gt: torch.Tensor,
    stage: str,
    lambda_teacher: float = 1.0,
    step: int | None = None,
) -> torch.Tensor:
    """按训练阶段组合损失。

    Args:
        z_a_logits: 学生输出 logits，(B, 1, H, W)。
        z_m_logits: 教师输出 logits，(B, 1, H, W)。
        gt: 二值真值，(B, 1, H, W)。
        stage: teacher / student / joint。
        lambda_teacher: joint 阶段 Z^M 项的权重。
        step: 当前全局步数，用于发散报错。

    Returns:
        标量损失。

    Raises:
        ConfigError: 阶段未知，或该阶段所需的输出缺失。

    Examples:
        >>> z = torch.zeros(1, 1, 2, 2)
        >>> round(gtnet_loss(z, z, torch.ones_like(z), "joint").item(), 4)
        1.3863
    """
    required = {"teacher": (z_m_logits,), "student": (z_a_logits,), "joint": (z_a_logits, z_m_logits)}
    if stage not in required:
        raise ConfigError(f"未知的训练阶段: {stage}")
    if any(t is None for t in required[stage]):
        raise ConfigError(f"{stage} 阶段缺少所需的输出 (Z^A / Z^M)")

    if stage == "teacher":
        return bce(z_m_logits, gt, step)
    if stage == "student":
        return bce(z_a_logits, gt, step)
    return bce(z_a_logits, gt, step) + lambda_teacher * bce(z_m_logits, gt, step)
