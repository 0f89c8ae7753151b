import json

import pytest
import torch

from src.errors import CheckpointMismatchError, IngestionError
from src.gtnet.checkpoint import (
    MANIFEST_FILE,
    WEIGHTS_FILE,
    load_checkpoint,
    load_submodules,
    read_manifest,
    save_checkpoint,
)
from src.gtnet.gtnet import STUDENT_MODULES, TEACHER_MODULES, apply_ablation, init_parameters


def test_round_trip_restores_outputs(toy_config, tmp_path, generator):
    model = init_parameters(toy_config, seed=2)
    ckpt = save_checkpoint(model, tmp_path / "ckpt", stage="joint", epoch=3, verbose=False)
    loaded, manifest = load_checkpoint(ckpt, expected=toy_config)

    assert manifest.stage == "joint" and manifest.epoch == 3
    assert manifest.config_hash == toy_config.config_hash()
    frame, flow = torch.rand(1, 3, 64, 64, generator=generator), torch.rand(1, 3, 64, 64, generator=generator)
    assert torch.equal(model(frame, flow).z_a_logits, loaded(frame, flow).z_a_logits)

    data = json.loads((ckpt / MANIFEST_FILE).read_text(encoding="utf-8"))
    assert {"config", "ablation", "seed", "stage", "epoch", "config_hash"} <= set(data)


def test_expected_config_mismatch(toy_config, tmp_path):
    ckpt = save_checkpoint(init_parameters(toy_config), tmp_path / "ckpt", "teacher", 1, verbose=False)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(ckpt, expected=toy_config.model_copy(update={"decoder_width": 8}))


def test_tampered_manifest_is_rejected(toy_config, tmp_path):
    ckpt = save_checkpoint(init_parameters(toy_config), tmp_path / "ckpt", "teacher", 1, verbose=False)
    path = ckpt / MANIFEST_FILE
    data = json.loads(path.read_text(encoding="utf-8"))
    data["config"]["decoder_width"] = 8
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(CheckpointMismatchError):
        read_manifest(ckpt)


def test_missing_files(toy_config, tmp_path):
    ckpt = save_checkpoint(init_parameters(toy_config), tmp_path / "ckpt", "teacher", 1, verbose=False)
    (ckpt / WEIGHTS_FILE).unlink()
    with pytest.raises(IngestionError):
        load_checkpoint(ckpt)


def test_load_submodules_copies_only_named(toy_config, tmp_path):
    source = init_parameters(toy_config, seed=1)
    ckpt = save_checkpoint(source, tmp_path / "ckpt", "teacher", 1, verbose=False)
    target = init_parameters(toy_config, seed=2)
    before = {k: v.clone() for k, v in target.state_dict().items()}

    copied = load_submodules(target, ckpt, TEACHER_MODULES)
    assert copied == list(TEACHER_MODULES)
    for key, value in target.state_dict().items():
        if key.startswith(TEACHER_MODULES):
            assert torch.equal(value, source.state_dict()[key])
        else:
            assert torch.equal(value, before[key])


def test_load_submodules_across_variants(toy_config, tmp_path):
    student = apply_ablation(toy_config, "A", seed=3)
    ckpt = save_checkpoint(student, tmp_path / "student", "student", 1, verbose=False)
    full = init_parameters(toy_config)
    assert load_submodules(full, ckpt, STUDENT_MODULES) == list(STUDENT_MODULES)
    # +A 检查点中没有教师侧参数
    with pytest.raises(CheckpointMismatchError):
        load_submodules(full, ckpt, TEACHER_MODULES)
    # 结构不同的学生解码器
    with pytest.raises(CheckpointMismatchError):
        load_submodules(apply_ablation(toy_config, "5"), ckpt, STUDENT_MODULES)
