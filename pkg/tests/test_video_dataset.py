import pytest
import torch

from src.data.video_dataset import (
    VideoSaliencyDataset,
    load_dataset,
    load_sequence,
    make_loader,
    resolve_split,
)
from src.errors import ConfigError, EmptySequenceError, IngestionError
from tests.conftest import write_sequence


@pytest.mark.parametrize("frames", [2, 3, 5, 16])
def test_first_frame_is_discarded(tmp_path, frames):
    seq = write_sequence(tmp_path, "seq", frames, size=32)
    samples = load_sequence(seq)
    assert [s.t for s in samples] == list(range(2, frames + 1))
    assert [s.name for s in samples] == [f"{t:04d}" for t in range(2, frames + 1)]
    s = samples[0]
    assert s.frame.shape == (32, 32, 3) and s.flow.shape == (32, 32, 3) and s.gt.shape == (32, 32)
    assert 0 <= s.frame.min() and s.frame.max() <= 1
    assert set(s.gt.ravel().tolist()) <= {0.0, 1.0}


def test_single_frame_is_empty(tmp_path):
    with pytest.raises(EmptySequenceError):
        load_sequence(write_sequence(tmp_path, "seq", 1, size=32))


def test_missing_flow_names_the_file(tmp_path):
    seq = write_sequence(tmp_path, "seq", 5, size=32, skip_flow=(3,))
    with pytest.raises(IngestionError, match="0003.png"):
        load_sequence(seq)
    # 单帧训练不读取光流
    assert len(load_sequence(seq, use_flow=False)) == 4


def test_missing_gt_and_gaps(tmp_path):
    with pytest.raises(IngestionError):
        load_sequence(write_sequence(tmp_path, "a", 4, size=32, skip_gt=(4,)))
    seq = write_sequence(tmp_path, "b", 4, size=32)
    (seq / "frames" / "0002.png").unlink()
    with pytest.raises(IngestionError):
        load_sequence(seq)


def test_sample_count_is_sum_over_sequences(tmp_path):
    for name, frames in (("a", 3), ("b", 5), ("c", 2)):
        write_sequence(tmp_path, name, frames, size=32)
    data = load_dataset(tmp_path)
    assert sum(len(v) for v in data.values()) == 2 + 4 + 1
    assert len(VideoSaliencyDataset.from_root(tmp_path)) == 7


def test_resize_on_load(tmp_path):
    write_sequence(tmp_path, "seq", 3, size=32)
    dataset = VideoSaliencyDataset.from_root(tmp_path, size=64)
    item = dataset[0]
    assert item["frame"].shape == (3, 64, 64)
    assert item["flow"].shape == (3, 64, 64)
    assert item["gt"].shape == (1, 64, 64)
    assert item["sequence"] == "seq" and item["t"] == 2


def test_stage_check_and_loader(tmp_path):
    write_sequence(tmp_path, "seq", 5, size=32)
    frames_only = VideoSaliencyDataset.from_root(tmp_path, use_flow=False)
    assert "flow" not in frames_only[0]
    frames_only.check_stage("student")
    with pytest.raises(ConfigError):
        frames_only.check_stage("teacher")
    with pytest.raises(ConfigError):
        frames_only.check_stage("joint")

    loader = make_loader(VideoSaliencyDataset.from_root(tmp_path), 3, shuffle=True, generator=torch.Generator().manual_seed(0))
    batch = next(iter(loader))
    assert batch["frame"].shape == (3, 3, 32, 32) and batch["flow"].shape == (3, 3, 32, 32)


def test_missing_root_and_split_resolution(tmp_path):
    with pytest.raises(IngestionError):
        load_dataset(tmp_path / "nope")
    with pytest.raises(IngestionError):
        load_dataset(tmp_path)
    (tmp_path / "train").mkdir()
    assert resolve_split(tmp_path, "train") == tmp_path / "train"
    assert resolve_split(tmp_path, "test") == tmp_path
