"""测试共用的夹具：toy 模型配置、小规模合成数据、写入自定义序列的工具函数"""

from pathlib import Path

import numpy as np
import pytest
import torch

from config.model_config import ModelConfig
from config.run_config import SynthSpec
from src.data.flow_codec import encode_flow
from src.data.image_io import write_png
from src.data.synth import synth_generate, synth_split
from src.data.video_dataset import frame_name


@pytest.fixture
def toy_config() -> ModelConfig:
    return ModelConfig.toy()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def generator() -> torch.Generator:
    return torch.Generator().manual_seed(0)


def small_spec(**overrides) -> SynthSpec:
    values = {"num_sequences": 2, "frames_per_sequence": 4, "canvas_size": 64, "seed": 3}
    values.update(overrides)
    return SynthSpec(**values)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory) -> Path:
    """2 个序列 × 4 帧，64² 画布，共 6 个样本。"""
    root = tmp_path_factory.mktemp("synth") / "data"
    synth_generate(small_spec(), root, verbose=False)
    return root


@pytest.fixture(scope="session")
def split_root(tmp_path_factory) -> Path:
    """train 2 个序列 + test 1 个序列，每个序列 5 帧。"""
    root = tmp_path_factory.mktemp("split") / "data"
    synth_split(small_spec(frames_per_sequence=5), root, test_sequences=1, verbose=False)
    return root


def write_sequence(
    root: Path,
    name: str,
    frames: int,
    size: int = 64,
    skip_flow: tuple[int, ...] = (),
    skip_gt: tuple[int, ...] = (),
) -> Path:
    """按数据目录布局写一个随机序列，可选跳过部分光流 / 真值文件。"""
    rng = np.random.default_rng(len(name) + frames)
    seq = Path(root) / name
    for t in range(1, frames + 1):
        write_png(seq / "frames" / frame_name(t), rng.integers(0, 256, (size, size, 3), dtype=np.uint8))
        if t not in skip_gt:
            gt = np.zeros((size, size), dtype=np.uint8)
            gt[size // 4 : size // 2, size // 4 : size // 2] = 255
            write_png(seq / "gt" / frame_name(t), gt)
        if t >= 2 and t not in skip_flow:
            dx = rng.uniform(-4, 4, (size, size))
            dy = rng.uniform(-4, 4, (size, size))
            write_png(seq / "flow" / frame_name(t), encode_flow(dx, dy, 8.0))
    return seq
