"""五级卷积编码器

教师（运动）与学生（外观）两个分支结构相同、参数独立。每一级为两层 3×3
卷积加非线性，随后 2 倍下采样，得到步长 (2, 4, 8, 16, 32) 的特征金字塔。
编码器提供两种钩子，让外部融合后的特征替换下一级的输入。
"""

from collections.abc import Callable, Mapping

import torch
from torch import nn

from src.errors import ConfigError, InputError
from src.gtnet.layers import make_activation
from src.my_dtypes import Branch, FeaturePyramid

# (level, f_k) -> 下一级实际消费的特征
StageHook = Callable[[int, torch.Tensor], torch.Tensor]


class ConvStage(nn.Module):
    """编码器的一级：conv3×3 → 非线性 → conv3×3 → 非线性 → 2 倍平均池化。"""

    def __init__(self, in_channels: int, out_channels: int, activation: str):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1)
        self.act = make_activation(activation)
        self.down = nn.AvgPool2d(kernel_size=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.down(self.act(self.conv2(self.act(self.conv1(x)))))


class Encoder(nn.Module):
    """单个分支的五级编码器。

    Attributes:
        branch: appearance 或 motion。
        widths: 五级输出通道数。
        stages: 五个 ConvStage。
    """

    def __init__(self, widths: tuple[int, ...], activation: str, branch: Branch):
        super().__init__()
        self.branch: Branch = branch
        self.widths = tuple(widths)
        channels = (3, *self.widths)
        self.stages = nn.ModuleList(
            ConvStage(channels[i], channels[i + 1], activation) for i in range(5)
        )

    def forward(
        self,
        image: torch.Tensor,
        stage_inputs: Mapping[int, torch.Tensor] | None = None,
        stage_hook: StageHook | None = None,
    ) -> FeaturePyramid:
        """提取特征金字塔。

        第 k 级给出替换特征时，第 k+1 级消费替换特征而不是 f_k；金字塔中记录的
        仍是第 k 级自身的输出 f_k，因此替换只影响 f_{k+1} ~ f_5。

        Args:
            image: (B, 3, S, S) 图像，S 为 32 的整数倍，取值 [0,1]。
            stage_inputs: 静态替换，层号 → 与 f_k 同形状的张量。
            stage_hook: 动态替换，在 f_k 算出后调用，返回值作为下一级输入；
                与 stage_inputs 同时给出时，stage_inputs 优先。

        Returns:
            五级特征金字塔。

        Raises:
            InputError: 图像不是 3 通道正方形或边长不能被 32 整除。
            ConfigError: 替换特征的形状与 f_k 不一致，或层号不在 1~5。
        """
        check_image(image)
        overrides = dict(stage_inputs or {})
        unknown = sorted(set(overrides) - {1, 2, 3, 4, 5})
        if unknown:
            raise ConfigError(f"替换特征的层号必须在 1~5 之间，收到 {unknown}")

        levels: list[torch.Tensor] = []
        x = image
        for k, stage in enumerate(self.stages, start=1):
            f_k = stage(x)
            levels.append(f_k)
            if k in overrides:
                override = overrides[k]
                if override.shape != f_k.shape:
                    raise ConfigError(
                        f"第 {k} 级替换特征形状 {tuple(override.shape)} "
                        f"与 f_{k} 的形状 {tuple(f_k.shape)} 不一致"
                    )
                x = override
            elif stage_hook is not None:
                x = stage_hook(k, f_k)
            else:
                x = f_k
        return FeaturePyramid(levels=tuple(levels), branch=self.branch)


def check_image(image: torch.Tensor) -> None:
    """校验输入为 (B, 3, S, S) 且 S 能被 32 整除。"""
    if image.ndim != 4 or image.shape[1] != 3:
        raise InputError(f"输入必须为 (B, 3, H, W) 张量，收到 {tuple(image.shape)}")
    height, width = image.shape[-2:]
    if height != width:
        raise InputError(f"输入必须为正方形，收到 {height}×{width}")
    if height % 32 != 0:
        raise InputError(f"输入边长必须能被 32 整除，收到 {height}")
