"""数值计算常用的工具函数"""

import random
from collections.abc import Callable, Hashable

import numpy as np
import torch


def seed_everything(seed: int) -> torch.Generator:
    """统一设置 python / numpy / torch 的随机种子，并打开确定性算法。

    Args:
        seed: 随机种子。

    Returns:
        以同一种子初始化的 torch.Generator，供 DataLoader 等显式使用。
    """
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    """梯度检验用的相对误差 |a - n| / max(|a|, |n|, floor)。

    floor 防止真实梯度接近 0 时舍入误差被放大成巨大的相对误差。
    """
    scale = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / scale


@torch.no_grad()
def central_difference(
    loss_fn: Callable[[], torch.Tensor],
    param: torch.Tensor,
    index: tuple[int, ...],
    step: float,
) -> float:
    """对参数的单个元素做中心差分 [L(θ+h) - L(θ-h)] / 2h。

    参数在原地扰动，返回前恢复原值。

    Args:
        loss_fn: 无参可调用对象，返回标量损失。
        param: 被扰动的参数张量。
        index: 元素下标。
        step: 差分步长 h。

    Returns:
        数值偏导数。
    """
    original = param[index].item()
    try:
        param[index] = original + step
        plus = loss_fn().item()
        param[index] = original - step
        minus = loss_fn().item()
    finally:
        param[index] = original
    return (plus - minus) / (2.0 * step)


@torch.no_grad()
def kink_aware_difference(
    loss_fn: Callable[[], torch.Tensor],
    param: torch.Tensor,
    index: tuple[int, ...],
    step: float,
    pattern_fn: Callable[[], Hashable] | None = None,
    extrapolate: bool = True,
) -> tuple[float, bool]:
    """Richardson 外推的中心差分，并检查扰动区间内是否跨过不可导点。

    数值导数取 (4·D(h/2) - D(h)) / 3，其中 D 为中心差分，截断误差为 O(h⁴)；
    extrapolate=False 时只在 θ±h 处求值，直接返回 D(h)。
    pattern_fn 在每次 loss_fn 之后调用，返回 max / ReLU 的选择模式；
    θ±h、θ±h/2 任一处的模式与 θ 处不同，说明区间内存在切换点。

    Args:
        loss_fn: 无参可调用对象，返回标量损失。
        param: 被扰动的参数张量。
        index: 元素下标。
        step: 差分步长 h。
        pattern_fn: 可选，返回最近一次前向的选择模式。
        extrapolate: 是否做 Richardson 外推。

    Returns:
        (数值偏导数, 是否判定为光滑)。
    """
    original = param[index].item()
    values: dict[float, float] = {}
    patterns: list[Hashable] = []
    offsets = (0.0, step, -step, step / 2.0, -step / 2.0) if extrapolate else (0.0, step, -step)
    try:
        for offset in offsets:
            param[index] = original + offset
            values[offset] = loss_fn().item()
            if pattern_fn is not None:
                patterns.append(pattern_fn())
    finally:
        param[index] = original
    full = (values[step] - values[-step]) / (2.0 * step)
    smooth = all(p == patterns[0] for p in patterns[1:])
    if not extrapolate:
        return full, smooth
    half = (values[step / 2.0] - values[-step / 2.0]) / step
    return (4.0 * half - full) / 3.0, smooth
