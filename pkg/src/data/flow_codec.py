"""光流场与 3 通道 8 位图像之间的线性编解码

    R = round(127.5 · (clamp(dx / m, -1, 1) + 1))
    G = round(127.5 · (clamp(dy / m, -1, 1) + 1))
    B = 128

round 为远离零方向的四舍五入（参数非负，等价于 floor(x + 0.5)）。
解码误差每个分量不超过 m / 255。
"""

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.errors import DomainError, ShapeError

FLOW_BLUE = 128


def encode_flow(dx: ArrayLike, dy: ArrayLike, max_mag: float) -> NDArray[np.uint8]:
    """把光流场编码为 (H, W, 3) 的 uint8 图像。

    Args:
        dx: 水平位移场 (H, W)，单位像素。
        dy: 竖直位移场 (H, W)，单位像素。
        max_mag: 归一化幅值 m，超过 ±m 的分量被截断。

    Returns:
        编码后的光流图像。

    Raises:
        DomainError: max_mag 不为正，或光流场含 NaN / Inf。
        ShapeError: dx 与 dy 形状不一致。

    Examples:
        >>> encode_flow(np.zeros((1, 1)), np.zeros((1, 1)), 8.0)[0, 0].tolist()
        [128, 128, 128]
    """
    if not np.isfinite(max_mag) or max_mag <= 0:
        raise DomainError(f"max_mag 必须为正的有限值，收到 {max_mag}")
    dx = np.asarray(dx, dtype=np.float64)
    dy = np.asarray(dy, dtype=np.float64)
    if dx.shape != dy.shape:
        raise ShapeError(f"dx {dx.shape} 与 dy {dy.shape} 形状不一致")
    if not (np.isfinite(dx).all() and np.isfinite(dy).all()):
        raise DomainError("光流场含有非有限值 (NaN / Inf)")

    image = np.empty((*dx.shape, 3), dtype=np.uint8)
    image[..., 0] = _quantize(dx / max_mag)
    image[..., 1] = _quantize(dy / max_mag)
    image[..., 2] = FLOW_BLUE
    return image


def decode_flow(image: ArrayLike, max_mag: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """encode_flow 的逆映射，返回 (dx, dy)。"""
    if not np.isfinite(max_mag) or max_mag <= 0:
        raise DomainError(f"max_mag 必须为正的有限值，收到 {max_mag}")
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[-1] != 3:
        raise ShapeError(f"光流图像必须为 (H, W, 3)，收到 {image.shape}")
    rg = image[..., :2].astype(np.float64) / 127.5 - 1.0
    return rg[..., 0] * max_mag, rg[..., 1] * max_mag


def _quantize(normalized: NDArray[np.float64]) -> NDArray[np.uint8]:
    scaled = 127.5 * (np.clip(normalized, -1.0, 1.0) + 1.0)
    return np.floor(scaled + 0.5).astype(np.uint8)
