"""部分解码器：只聚合顶部三级（步长 8/16/32）特征

流程为 感受野块 → 特征广播（Step-I）→ 截断的 UNet 自顶向下通路（Step-II），
输出步长 8 的单通道 logits。教师与学生各持有一个实例，结构相同、参数独立。

    Step-I:  p_k = r_k ⊗ Π_{i=k+1..5} g(δ(r_i); W_i^k)，p_5 = r_5
    Step-II: Z = F_U[p_3, p_4, p_5]
"""

import torch
from torch import nn

from config.model_config import DECODED_LEVELS
from src.errors import ConfigError, ShapeError
from src.gtnet.layers import ConvAct, make_activation, resize_to

# 特征广播中 (k, i) 组合：第 i 级语义经变换后乘到第 k 级
BROADCAST_PAIRS: tuple[tuple[int, int], ...] = ((4, 5), (3, 4), (3, 5))


class RFBlock(nn.Module):
    """感受野块：四个并行分支拼接后 1×1 融合，再加 1×1 残差捷径。

    分支为 1×1；1×1→3×3 空洞 3；1×1→3×3 空洞 5；1×1→3×3 空洞 7。
    空间尺寸保持不变，通道映射到 out_channels。
    """

    DILATIONS: tuple[int, ...] = (3, 5, 7)

    def __init__(self, in_channels: int, out_channels: int, activation: str):
        super().__init__()
        self.branch0 = nn.Conv2d(in_channels, out_channels, kernel_size=1)
        self.dilated = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(in_channels, out_channels, kernel_size=1),
                nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=d, dilation=d),
            )
            for d in self.DILATIONS
        )
        self.fuse = nn.Conv2d(4 * out_channels, out_channels, kernel_size=1)
        self.shortcut = nn.Conv2d(in_channels, out_channels, kernel_size=1)
        self.act = make_activation(activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        branches = [self.branch0(x), *(branch(x) for branch in self.dilated)]
        return self.act(self.fuse(torch.cat(branches, dim=1)) + self.shortcut(x))


class FeatureBroadcast(nn.Module):
    """特征广播：高层特征上采样、经 3×3 卷积 + 非线性变换后逐元素乘到低层特征上。

    transforms 以 "k_i" 为键保存 g(·; W_i^k)，测试中可替换为 nn.Identity。
    """

    def __init__(self, width: int, activation: str):
        super().__init__()
        self.transforms = nn.ModuleDict(
            {f"{k}_{i}": ConvAct(width, width, activation) for k, i in BROADCAST_PAIRS}
        )

    def transform(self, k: int, i: int, r_i: torch.Tensor, size: torch.Size) -> torch.Tensor:
        """g(δ(r_i); W_i^k)：δ 为双线性上采样到第 k 级尺寸。"""
        return self.transforms[f"{k}_{i}"](resize_to(r_i, size))

    def forward(
        self, r3: torch.Tensor, r4: torch.Tensor, r5: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        check_triple(r3, r4, r5)
        p5 = r5
        p4 = r4 * self.transform(4, 5, r5, r4.shape[-2:])
        p3 = r3 * self.transform(3, 4, r4, r3.shape[-2:]) * self.transform(3, 5, r5, r3.shape[-2:])
        return p3, p4, p5


class UNetAggregator(nn.Module):
    """去掉底部两层的 UNet 自顶向下通路。

    p_5 → 上采样 ⊕ p_4 → 卷积 → 上采样 ⊕ p_3 → 卷积 → 1 通道输出头。
    """

    def __init__(self, width: int, activation: str):
        super().__init__()
        self.conv4 = ConvAct(width, width, activation)
        self.conv3 = ConvAct(width, width, activation)
        self.head = nn.Conv2d(width, 1, kernel_size=1)

    def forward(self, p3: torch.Tensor, p4: torch.Tensor, p5: torch.Tensor) -> torch.Tensor:
        x = self.conv4(resize_to(p5, p4.shape[-2:]) + p4)
        x = self.conv3(resize_to(x, p3.shape[-2:]) + p3)
        return self.head(x)


class PartialDecoder(nn.Module):
    """部分解码器（教师实例对应 Z^M，学生实例对应 Z^A）。

    Args:
        in_channels: 第 3、4、5 级输入特征的通道数。
        width: 感受野块输出及解码器内部通道数。
        activation: 非线性名称。
    """

    def __init__(self, in_channels: tuple[int, int, int], width: int, activation: str):
        super().__init__()
        self.width = width
        self.rfb = nn.ModuleDict(
            {str(k): RFBlock(c, width, activation) for k, c in zip(DECODED_LEVELS, in_channels, strict=True)}
        )
        self.broadcast = FeatureBroadcast(width, activation)
        self.aggregate = UNetAggregator(width, activation)

    def refine(self, level: int, f_k: torch.Tensor) -> torch.Tensor:
        """r_k = F_RF(f_k)。"""
        if level not in DECODED_LEVELS:
            raise ConfigError(f"感受野块只作用于第 3~5 级，收到第 {level} 级")
        return self.rfb[str(level)](f_k)

    def forward(self, f3: torch.Tensor, f4: torch.Tensor, f5: torch.Tensor) -> torch.Tensor:
        r3, r4, r5 = self.refine(3, f3), self.refine(4, f4), self.refine(5, f5)
        return self.aggregate(*self.broadcast(r3, r4, r5))


class CoarseHead(nn.Module):
    """去掉 T-PD 的替代头：r_5 上的 1×1 卷积，再上采样到步长 8。"""

    def __init__(self, in_channels: int, width: int, activation: str):
        super().__init__()
        self.rfb = RFBlock(in_channels, width, activation)
        self.head = nn.Conv2d(width, 1, kernel_size=1)

    def forward(self, f3: torch.Tensor, f4: torch.Tensor, f5: torch.Tensor) -> torch.Tensor:
        return resize_to(self.head(self.rfb(f5)), f3.shape[-2:])


class NaiveAggregator(nn.Module):
    """去掉 S-PD 的替代头：三级特征 1×1 降维、上采样相加、卷积后输出。"""

    def __init__(self, in_channels: tuple[int, int, int], width: int, activation: str):
        super().__init__()
        self.reduce = nn.ModuleDict(
            {str(k): nn.Conv2d(c, width, kernel_size=1) for k, c in zip(DECODED_LEVELS, in_channels, strict=True)}
        )
        self.fuse = ConvAct(width, width, activation)
        self.head = nn.Conv2d(width, 1, kernel_size=1)

    def forward(self, f3: torch.Tensor, f4: torch.Tensor, f5: torch.Tensor) -> torch.Tensor:
        size = f3.shape[-2:]
        x = (
            self.reduce["3"](f3)
            + resize_to(self.reduce["4"](f4), size)
            + resize_to(self.reduce["5"](f5), size)
        )
        return self.head(self.fuse(x))


def check_triple(r3: torch.Tensor, r4: torch.Tensor, r5: torch.Tensor) -> None:
    """三级特征通道数相同、空间尺寸逐级严格减半。"""
    if not r3.shape[1] == r4.shape[1] == r5.shape[1]:
        raise ShapeError(
            f"三级特征通道数不一致: {r3.shape[1]}, {r4.shape[1]}, {r5.shape[1]}"
        )
    for (name_hi, hi), (name_lo, lo) in (((3, r3), (4, r4)), ((4, r4), (5, r5))):
        if tuple(hi.shape[-2:]) != (2 * lo.shape[-2], 2 * lo.shape[-1]):
            raise ShapeError(
                f"r_{name_hi} {tuple(hi.shape[-2:])} 与 r_{name_lo} {tuple(lo.shape[-2:])} 不是 2 倍关系"
            )


def rf_block(f_k: torch.Tensor, decoder: PartialDecoder, level: int) -> torch.Tensor:
    return decoder.refine(level, f_k)


def feature_broadcast(
    r3: torch.Tensor, r4: torch.Tensor, r5: torch.Tensor, decoder: PartialDecoder
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    return decoder.broadcast(r3, r4, r5)


def unet_aggregate(
    p3: torch.Tensor, p4: torch.Tensor, p5: torch.Tensor, decoder: PartialDecoder
) -> torch.Tensor:
    return decoder.aggregate(p3, p4, p5)


def partial_decode(
    f3: torch.Tensor, f4: torch.Tensor, f5: torch.Tensor, decoder: PartialDecoder
) -> torch.Tensor:
    """部分解码，返回步长 8 的 logits（sigmoid 由使用方在需要概率时施加）。"""
    return decoder(f3, f4, f5)
