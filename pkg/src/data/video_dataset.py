"""数据集目录读取

目录布局：
    root/<sequence>/frames/0001.png ... 000T.png
    root/<sequence>/gt/0001.png     ... 000T.png
    root/<sequence>/flow/0002.png   ... 000T.png

第 t 帧的光流描述第 t-1 帧到第 t 帧的运动，因此首帧没有光流，被丢弃：
T 帧序列恰好产生 T-1 个样本，t = 2..T。
"""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from src.data.image_io import read_mask, read_rgb
from src.errors import ConfigError, EmptySequenceError, IngestionError
from src.my_dtypes import VideoSample

FRAME_PATTERN = "{:04d}.png"
SUBDIRS = ("frames", "gt", "flow")


def frame_name(t: int) -> str:
    return FRAME_PATTERN.format(t)


def sequence_length(seq_dir: Path) -> int:
    """frames/ 下的帧数，要求编号从 0001 起连续。

    Raises:
        IngestionError: frames/ 不存在或编号不连续。
    """
    frames_dir = Path(seq_dir) / "frames"
    if not frames_dir.is_dir():
        raise IngestionError(f"缺少帧目录: {frames_dir}")
    names = sorted(p.name for p in frames_dir.glob("*.png"))
    expected = [frame_name(t) for t in range(1, len(names) + 1)]
    if names != expected:
        missing = sorted(set(expected) - set(names)) or sorted(set(names) - set(expected))
        raise IngestionError(f"{frames_dir} 中帧编号不连续: {missing[:5]}")
    return len(names)


def load_sequence(
    seq_dir: Path, size: int | None = None, use_flow: bool = True
) -> list[VideoSample]:
    """读取单个序列，丢弃首帧。

    Args:
        seq_dir: 序列目录。
        size: 可选，把所有图像缩放到 size×size。
        use_flow: False 时不读取光流（外观分支的单帧训练）。

    Returns:
        按 t 升序排列的 T-1 个样本。

    Raises:
        EmptySequenceError: 帧数少于 2。
        IngestionError: 某个 t ≥ 2 的真值或光流文件缺失（报出文件路径）。

    Examples:
        >>> samples = load_sequence(Path("data/train/seq000"))  # doctest: +SKIP
        >>> [s.t for s in samples][:3]                            # doctest: +SKIP
        [2, 3, 4]
    """
    seq_dir = Path(seq_dir)
    length = sequence_length(seq_dir)
    if length < 2:
        raise EmptySequenceError(f"序列 {seq_dir} 只有 {length} 帧，丢弃首帧后没有样本")

    samples: list[VideoSample] = []
    for t in range(2, length + 1):
        name = frame_name(t)
        for sub in ("gt", "flow") if use_flow else ("gt",):
            path = seq_dir / sub / name
            if not path.exists():
                raise IngestionError(f"序列 {seq_dir.name} 缺少 t={t} 的文件: {path}")
        samples.append(
            VideoSample(
                frame=read_rgb(seq_dir / "frames" / name, size),
                flow=read_rgb(seq_dir / "flow" / name, size) if use_flow else None,
                gt=read_mask(seq_dir / "gt" / name, size),
                t=t,
                sequence_id=seq_dir.name,
                name=Path(name).stem,
            )
        )
    return samples


def list_sequences(root: Path) -> list[Path]:
    """root 下所有含 frames/ 的子目录，按名称排序。"""
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"数据目录不存在: {root}")
    sequences = sorted(p for p in root.iterdir() if (p / "frames").is_dir())
    if not sequences:
        raise IngestionError(f"{root} 下没有任何序列（缺少 <sequence>/frames/）")
    return sequences


def load_dataset(
    root: Path, size: int | None = None, use_flow: bool = True
) -> dict[str, list[VideoSample]]:
    """读取 root 下全部序列，样本总数为 Σ(T_s - 1)。"""
    return {p.name: load_sequence(p, size, use_flow) for p in list_sequences(root)}


def resolve_split(data_dir: Path, split: str) -> Path:
    """data_dir/<split> 存在时使用它，否则退回 data_dir 本身。"""
    candidate = Path(data_dir) / split
    return candidate if candidate.is_dir() else Path(data_dir)


class VideoSaliencyDataset(Dataset):
    """把样本列表包装成 torch Dataset。

    __getitem__ 返回字典：frame (3,H,W)、gt (1,H,W)、sequence、name、t，
    带光流时还有 flow (3,H,W)。批次组装时跨序列打乱帧。
    """

    def __init__(self, samples: Sequence[VideoSample]):
        if not samples:
            raise EmptySequenceError("数据集没有任何样本")
        self.samples = list(samples)
        self.has_flow = all(s.flow is not None for s in self.samples)

    @classmethod
    def from_root(cls, root: Path, size: int | None = None, use_flow: bool = True):
        dataset = load_dataset(root, size, use_flow)
        return cls([s for seq in dataset.values() for s in seq])

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> dict[str, object]:
        s = self.samples[index]
        item: dict[str, object] = {
            "frame": _chw(s.frame),
            "gt": torch.from_numpy(s.gt)[None],
            "sequence": s.sequence_id,
            "name": s.name,
            "t": s.t,
        }
        if self.has_flow:
            assert s.flow is not None
            item["flow"] = _chw(s.flow)
        return item

    def check_stage(self, stage: str) -> None:
        """teacher / joint 阶段需要光流；否则为阶段与数据不匹配。"""
        if stage in ("teacher", "joint") and not self.has_flow:
            raise ConfigError(f"{stage} 阶段需要 (光流, 真值) 样本，但数据集不含光流")


def make_loader(
    dataset: VideoSaliencyDataset,
    batch_size: int,
    shuffle: bool,
    generator: torch.Generator | None = None,
) -> DataLoader:
    return DataLoader(
        dataset, batch_size=batch_size, shuffle=shuffle, generator=generator, num_workers=0
    )


def _chw(image: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1)))
