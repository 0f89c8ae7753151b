"""各子模块共用的小部件"""

import torch
import torch.nn.functional as F
from torch import nn


def make_activation(name: str) -> nn.Module:
    """按名称构造非线性层。"""
    if name == "silu":
        return nn.SiLU()
    if name == "relu":
        return nn.ReLU()
    raise ValueError(f"不支持的非线性: {name}")


def resize_to(x: torch.Tensor, size: tuple[int, int] | torch.Size) -> torch.Tensor:
    """双线性缩放到给定空间尺寸；尺寸相同时原样返回。"""
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    return F.interpolate(x, size=tuple(size), mode="bilinear", align_corners=False)


class ConvAct(nn.Sequential):
    """3×3 卷积（保持空间尺寸）+ 非线性。"""

    def __init__(self, in_channels: int, out_channels: int, activation: str):
        super().__init__(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
            make_activation(activation),
        )
