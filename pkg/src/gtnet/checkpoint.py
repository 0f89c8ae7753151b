"""检查点读写

检查点是一个目录：
    model.pt        state_dict
    manifest.json   {config, ablation, seed, stage, epoch, config_hash, version, parameters}

加载时先核对 manifest 中配置与其哈希是否一致，再（可选）与调用方期望的配置比对。
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import torch

from config.model_config import ModelConfig
from src import __version__
from src.errors import CheckpointMismatchError, IngestionError
from src.gtnet.gtnet import GTNet, count_parameters, init_parameters

WEIGHTS_FILE = "model.pt"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class CheckpointManifest:
    """检查点清单。

    Attributes:
        config: 生成该检查点的模型配置。
        seed: 参数初始化种子。
        stage: 训练阶段（teacher / student / joint），未训练时为 init。
        epoch: 已完成的轮数。
        config_hash: config 的 SHA-256。
        version: 写出时的包版本。
        parameters: 参数总数。
    """

    config: ModelConfig
    seed: int
    stage: str
    epoch: int
    config_hash: str
    version: str
    parameters: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json"),
            "ablation": self.config.ablation.model_dump(mode="json"),
            "seed": self.seed,
            "stage": self.stage,
            "epoch": self.epoch,
            "config_hash": self.config_hash,
            "version": self.version,
            "parameters": self.parameters,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CheckpointManifest":
        try:
            config = ModelConfig.from_dict(data["config"])
            return cls(
                config=config,
                seed=int(data["seed"]),
                stage=str(data["stage"]),
                epoch=int(data["epoch"]),
                config_hash=str(data["config_hash"]),
                version=str(data.get("version", "")),
                parameters=int(data.get("parameters", 0)),
            )
        except KeyError as e:
            raise CheckpointMismatchError(f"检查点清单缺少字段 {e}") from e


def save_checkpoint(
    model: GTNet, out_dir: Path, stage: str, epoch: int, verbose: bool = True
) -> Path:
    """把模型参数与清单写入 out_dir。

    Args:
        model: 待保存的模型。
        out_dir: 检查点目录，不存在时自动创建。
        stage: 训练阶段名。
        epoch: 已完成的轮数。
        verbose: 是否打印保存信息。

    Returns:
        检查点目录。
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = CheckpointManifest(
        config=model.config,
        seed=model.config.seed,
        stage=stage,
        epoch=epoch,
        config_hash=model.config.config_hash(),
        version=__version__,
        parameters=count_parameters(model),
    )
    torch.save(model.state_dict(), out_dir / WEIGHTS_FILE)
    (out_dir / MANIFEST_FILE).write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )
    if verbose:
        print(f"✓ 检查点已保存: {out_dir} (stage={stage}, epoch={epoch})")
    return out_dir


def read_manifest(ckpt_dir: Path) -> CheckpointManifest:
    """读取并自检清单：记录的哈希必须与记录的配置一致。

    Raises:
        IngestionError: 目录或文件缺失。
        CheckpointMismatchError: 清单损坏或哈希不一致。
    """
    ckpt_dir = Path(ckpt_dir)
    for name in (WEIGHTS_FILE, MANIFEST_FILE):
        if not (ckpt_dir / name).exists():
            raise IngestionError(f"检查点缺少文件: {ckpt_dir / name}")
    try:
        data = json.loads((ckpt_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CheckpointMismatchError(f"检查点清单不是合法的 JSON: {ckpt_dir}: {e}") from e
    manifest = CheckpointManifest.from_dict(data)
    if manifest.config.config_hash() != manifest.config_hash:
        raise CheckpointMismatchError(
            f"检查点 {ckpt_dir} 的配置哈希与记录不符，清单可能被改动"
        )
    return manifest


def load_checkpoint(
    ckpt_dir: Path, expected: ModelConfig | None = None
) -> tuple[GTNet, CheckpointManifest]:
    """加载检查点并重建模型。

    Args:
        ckpt_dir: 检查点目录。
        expected: 调用方期望的模型配置；给出时其哈希必须与检查点一致。

    Returns:
        (模型, 清单)，模型处于 eval 模式。

    Raises:
        CheckpointMismatchError: 配置哈希不一致。
    """
    manifest = read_manifest(ckpt_dir)
    if expected is not None and expected.config_hash() != manifest.config_hash:
        raise CheckpointMismatchError(
            f"检查点 {ckpt_dir} 的配置哈希 {manifest.config_hash[:12]} "
            f"与当前配置 {expected.config_hash()[:12]} 不一致"
        )
    model = init_parameters(manifest.config)
    state = torch.load(Path(ckpt_dir) / WEIGHTS_FILE, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, manifest


def load_submodules(model: GTNet, ckpt_dir: Path, names: tuple[str, ...]) -> list[str]:
    """只从检查点中拷贝指定子模块的参数（joint 阶段分别继承教师、学生权重）。

    检查点的配置可以是不同的消融变体，但对应子模块的键与形状必须一致。

    Args:
        model: 目标模型，原地修改。
        ckpt_dir: 来源检查点目录。
        names: 子模块名，如 ("motion_encoder", "teacher_decoder")。

    Returns:
        实际拷贝的子模块名。

    Raises:
        CheckpointMismatchError: 子模块在来源中缺失，或键、形状不一致。
    """
    read_manifest(ckpt_dir)
    state = torch.load(Path(ckpt_dir) / WEIGHTS_FILE, map_location="cpu", weights_only=True)
    copied: list[str] = []
    for name in names:
        target = getattr(model, name)
        if target is None:
            continue
        prefix = f"{name}."
        sub = {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
        own = target.state_dict()
        if set(sub) != set(own):
            raise CheckpointMismatchError(
                f"检查点 {ckpt_dir} 中 {name} 的参数键与当前模型不一致"
            )
        bad = [k for k, v in sub.items() if v.shape != own[k].shape]
        if bad:
            raise CheckpointMismatchError(f"检查点 {ckpt_dir} 中 {name} 的参数形状不一致: {bad}")
        target.load_state_dict(sub)
        copied.append(name)
    return copied
