"""PNG 读写（Pillow）

所有图像在内存中为 float32、取值 [0,1]；写出时量化为 8 位。
"""

from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from src.errors import IngestionError

# 真值掩码二值化阈值（8 位灰度）
GT_THRESHOLD = 128


def _open(path: Path) -> Image.Image:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"文件不存在: {path}")
    return Image.open(path)


def read_rgb(path: Path, size: int | None = None) -> NDArray[np.float32]:
    """读取 RGB 图像为 (H, W, 3) float32，可选双线性缩放到 size×size。"""
    with _open(path) as img:
        img = img.convert("RGB")
        if size is not None and img.size != (size, size):
            img = img.resize((size, size), Image.Resampling.BILINEAR)
        return np.asarray(img, dtype=np.float32) / 255.0


def read_gray(path: Path, size: int | None = None) -> NDArray[np.uint8]:
    """读取 8 位灰度图，可选双线性缩放。"""
    with _open(path) as img:
        img = img.convert("L")
        if size is not None and img.size != (size, size):
            img = img.resize((size, size), Image.Resampling.BILINEAR)
        return np.asarray(img, dtype=np.uint8)


def read_mask(path: Path, size: int | None = None) -> NDArray[np.float32]:
    """读取真值掩码，以 128 为阈值二值化为 {0,1}。"""
    return (read_gray(path, size) >= GT_THRESHOLD).astype(np.float32)


def read_prob(path: Path) -> NDArray[np.float64]:
    """读取预测显著图为 [0,1] 概率。"""
    return read_gray(path).astype(np.float64) / 255.0


def to_uint8(values: NDArray) -> NDArray[np.uint8]:
    """[0,1] 浮点图量化为 uint8（四舍五入）。"""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_png(path: Path, array: NDArray) -> Path:
    """写出 uint8 图像（(H, W) 灰度或 (H, W, 3) RGB），浮点输入先量化。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if array.dtype != np.uint8:
        array = to_uint8(array)
    Image.fromarray(array).save(path, format="PNG")
    return path
