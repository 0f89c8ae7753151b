"""时间调制器：运动特征先做通道注意力、再做空间注意力，随后逐元素加到外观特征上

    F_TM(f^M) = A_S(A_C(f^M))
    A_C(x) = σ[g(P_max(x))] ⊙ x          g 为 FC → ReLU → FC
    A_S(x) = σ[conv7×7(pool_ch(x))] ⊗ x  pool_ch 为通道最大值（+ 通道均值）
    f^tm = f^A ⊕ F_TM(f^M)
"""

import torch
import torch.nn.functional as F
from torch import nn

from src.errors import ConfigError


class ChannelAttention(nn.Module):
    """通道注意力：空间自适应最大池化到 1×1，双全连接层生成每通道一个门控。

    Args:
        channels: 输入通道数 C。
        reduction: 压缩比 r，隐藏层宽度为 C / r。
    """

    def __init__(self, channels: int, reduction: int):
        super().__init__()
        if reduction <= 0 or channels % reduction != 0:
            raise ConfigError(f"压缩比 {reduction} 不能整除通道数 {channels}")
        self.channels = channels
        self.fc1 = nn.Linear(channels, channels // reduction)
        self.fc2 = nn.Linear(channels // reduction, channels)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C, 1, 1) 的通道门控，取值 (0, 1)。"""
        _check_channels(x, self.channels, "通道注意力")
        pooled = F.adaptive_max_pool2d(x, 1).flatten(1)
        weights = torch.sigmoid(self.fc2(F.relu(self.fc1(pooled))))
        return weights[:, :, None, None]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.gate(x) * x


class SpatialAttention(nn.Module):
    """空间注意力：沿通道池化后经 7×7 卷积生成每像素一个门控，广播到全部通道。

    Args:
        pool: max_mean 时池化描述子为 [通道最大值, 通道均值] 两通道；
            max 时只用通道最大值。
    """

    def __init__(self, pool: str = "max_mean"):
        super().__init__()
        if pool not in ("max_mean", "max"):
            raise ConfigError(f"不支持的空间池化方式: {pool}")
        self.pool = pool
        in_channels = 2 if pool == "max_mean" else 1
        self.conv = nn.Conv2d(in_channels, 1, kernel_size=7, padding=3)

    def descriptor(self, x: torch.Tensor) -> torch.Tensor:
        channel_max = x.amax(dim=1, keepdim=True)
        if self.pool == "max":
            return channel_max
        return torch.cat([channel_max, x.mean(dim=1, keepdim=True)], dim=1)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 1, H, W) 的空间门控，取值 (0, 1)。"""
        return torch.sigmoid(self.conv(self.descriptor(x)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.gate(x) * x


class TemporalModulator(nn.Module):
    """单个金字塔层级上的时间调制器。

    ca / sa 任一为 False 时对应的注意力被跳过；两者都关闭时退化为恒等映射
    （此时上层直接不创建调制器，见 GTNet）。

    Args:
        channels: 该层特征通道数。
        reduction: 通道注意力压缩比。
        pool: 空间注意力的池化方式。
        ca: 是否启用通道注意力。
        sa: 是否启用空间注意力。
    """

    def __init__(
        self,
        channels: int,
        reduction: int,
        pool: str = "max_mean",
        ca: bool = True,
        sa: bool = True,
    ):
        super().__init__()
        self.channels = channels
        self.channel_attention = ChannelAttention(channels, reduction) if ca else None
        self.spatial_attention = SpatialAttention(pool) if sa else None

    def forward(self, f_m: torch.Tensor) -> torch.Tensor:
        _check_channels(f_m, self.channels, "时间调制器")
        x = f_m
        if self.channel_attention is not None:
            x = self.channel_attention(x)
        if self.spatial_attention is not None:
            x = self.spatial_attention(x)
        return x


def channel_attention(x: torch.Tensor, module: ChannelAttention) -> torch.Tensor:
    return module(x)


def spatial_attention(x: torch.Tensor, module: SpatialAttention) -> torch.Tensor:
    return module(x)


def temporal_modulate(f_m: torch.Tensor, module: TemporalModulator | None) -> torch.Tensor:
    """F_TM(f^M)；module 为 None 表示 CA、SA 都被消融，F_TM 为恒等映射。"""
    return f_m if module is None else module(f_m)


def implicit_guidance_fuse(
    f_a: torch.Tensor,
    f_m: torch.Tensor,
    module: TemporalModulator | None,
) -> torch.Tensor:
    """隐式引导：f^tm = f^A ⊕ F_TM(f^M)。

    Args:
        f_a: 外观分支第 k 级特征。
        f_m: 运动分支第 k 级特征，形状必须与 f_a 相同。
        module: 第 k 级的时间调制器，None 表示恒等映射。

    Returns:
        融合后的特征 f^tm，形状与输入相同。

    Raises:
        ConfigError: 两个分支的特征形状不一致。
    """
    if f_a.shape != f_m.shape:
        raise ConfigError(
            f"外观特征 {tuple(f_a.shape)} 与运动特征 {tuple(f_m.shape)} 形状不一致"
        )
    return f_a + temporal_modulate(f_m, module)


def _check_channels(x: torch.Tensor, expected: int, where: str) -> None:
    if x.ndim != 4 or x.shape[1] != expected:
        raise ConfigError(f"{where}期望 {expected} 个通道，收到形状 {tuple(x.shape)}")
