"""三阶段训练

    teacher  只更新运动编码器与教师解码器，输入 (光流, 真值)，监督 Z^M
    student  只更新外观编码器与学生解码器，输入 (单帧, 真值)，不融合不教学，监督 Z^A
    joint    更新全部参数，输入完整样本，监督 Z^A + λ·Z^M；
             教师侧权重来自 teacher 检查点，学生侧权重来自 student 检查点

三个阶段共用同一个模型实例（同一份配置），未参与训练的参数逐位保持不变。
"""

import warnings
from dataclasses import dataclass
from pathlib import Path

import pandas as pd
import torch
from torch import nn
from tqdm import tqdm

from config.run_config import TrainConfig
from src.data.video_dataset import VideoSaliencyDataset, make_loader
from src.errors import ConfigError
from src.gtnet.checkpoint import load_submodules, save_checkpoint
from src.gtnet.gtnet import STUDENT_MODULES, TEACHER_MODULES, GTNet
from src.gtnet.layers import resize_to
from src.numerical import seed_everything
from src.training.losses import gtnet_loss
from src.training.schedule import make_scheduler

TRACE_COLUMNS = ("step", "epoch", "lr", "loss")


def stage_parameters(model: GTNet, stage: str) -> list[nn.Parameter]:
    """某一训练阶段需要更新的参数。

    Raises:
        ConfigError: 阶段未知，或模型不包含该阶段需要的分支。
    """
    ab = model.ablation
    if stage == "teacher":
        if not ab.uses_motion:
            raise ConfigError(f"mode={ab.mode} 的模型没有运动分支，不能进行 teacher 阶段训练")
        return model.submodule_parameters(TEACHER_MODULES)
    if stage == "student":
        if not ab.uses_appearance:
            raise ConfigError(f"mode={ab.mode} 的模型没有外观分支，不能进行 student 阶段训练")
        return model.submodule_parameters(STUDENT_MODULES)
    if stage == "joint":
        if ab.mode != "MA":
            raise ConfigError(f"joint 阶段需要双分支模型，当前 mode={ab.mode}")
        return list(model.parameters())
    raise ConfigError(f"未知的训练阶段: {stage}")


def stage_forward(
    model: GTNet, batch: dict[str, torch.Tensor], stage: str
) -> tuple[torch.Tensor | None, torch.Tensor | None]:
    """按阶段前向，返回输入分辨率的 (Z^A logits, Z^M logits)。"""
    size = batch["gt"].shape[-2:]
    if stage == "teacher":
        z_m, _ = model.teacher_logits(batch["flow"])
        return None, resize_to(z_m, size)
    if stage == "student":
        return resize_to(model.student_logits(batch["frame"]), size), None
    output = model(batch["frame"], batch["flow"])
    return output.z_a_logits, output.z_m_logits


@dataclass
class TrainResult:
    """单个阶段的训练结果。

    Attributes:
        stage: 训练阶段。
        checkpoint: 检查点目录。
        trace: 损失轨迹表，列为 step, epoch, lr, loss。
        trace_path: 轨迹 CSV 路径。
    """

    stage: str
    checkpoint: Path
    trace: pd.DataFrame
    trace_path: Path

    @property
    def steps(self) -> int:
        return len(self.trace)

    @property
    def initial_loss(self) -> float:
        return float(self.trace["loss"].iloc[0])

    @property
    def final_loss(self) -> float:
        return float(self.trace["loss"].iloc[-1])


def train_stage(
    stage: str,
    dataset: VideoSaliencyDataset,
    model: GTNet,
    config: TrainConfig,
    out_dir: Path,
    teacher_ckpt: Path | None = None,
    student_ckpt: Path | None = None,
    verbose: bool = True,
) -> TrainResult:
    """训练一个阶段并写出检查点与损失轨迹。

    Args:
        stage: teacher / student / joint。
        dataset: 训练样本；teacher 与 joint 阶段要求带光流。
        model: 待训练模型，原地更新。
        config: 训练超参数。
        out_dir: 输出目录，写入 checkpoint/ 与 loss_trace.csv。
        teacher_ckpt: joint 阶段的教师检查点。
        student_ckpt: joint 阶段的学生检查点。
        verbose: 是否打印进度。

    Returns:
        TrainResult。

    Raises:
        ConfigError: 阶段与数据集或模型不匹配。
        TrainingDivergenceError: 损失出现 NaN / Inf。
    """
    dataset.check_stage(stage)
    params = stage_parameters(model, stage)
    if not params:
        raise ConfigError(f"{stage} 阶段没有可训练的参数")
    out_dir = Path(out_dir)

    if stage == "joint":
        _inherit(model, teacher_ckpt, TEACHER_MODULES, "教师", verbose)
        _inherit(model, student_ckpt, STUDENT_MODULES, "学生", verbose)

    generator = seed_everything(config.seed)
    device = torch.device(config.device)
    model.to(device)
    trainable = {id(p) for p in params}
    saved_flags = [(p, p.requires_grad) for p in model.parameters()]
    for p in model.parameters():
        p.requires_grad_(id(p) in trainable)

    optimizer = torch.optim.Adam(params, lr=config.base_lr, betas=config.betas)
    scheduler = make_scheduler(optimizer, config)
    loader = make_loader(dataset, config.batch_size, shuffle=True, generator=generator)

    if verbose:
        print("=" * 70)
        print(f"训练阶段: {stage}  样本数: {len(dataset)}  可训练参数: {sum(p.numel() for p in params)}")
        print("=" * 70)

    rows: list[dict[str, float]] = []
    step = 0
    epoch = 0
    model.train()
    try:
        progress = tqdm(range(config.epochs), desc=stage, disable=not verbose)
        for epoch in progress:
            lr = optimizer.param_groups[0]["lr"]
            for batch in loader:
                batch = {k: v.to(device) if torch.is_tensor(v) else v for k, v in batch.items()}
                z_a, z_m = stage_forward(model, batch, stage)
                loss = gtnet_loss(z_a, z_m, batch["gt"], stage, config.lambda_teacher, step=step)
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                rows.append({"step": step, "epoch": epoch, "lr": lr, "loss": loss.item()})
                step += 1
                if config.max_steps is not None and step >= config.max_steps:
                    break
            scheduler.step()
            progress.set_postfix(loss=f"{rows[-1]['loss']:.4f}", lr=f"{lr:.1e}")
            if config.max_steps is not None and step >= config.max_steps:
                break
    finally:
        for p, flag in saved_flags:
            p.requires_grad_(flag)
    model.eval()

    trace = pd.DataFrame(rows, columns=list(TRACE_COLUMNS))
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "loss_trace.csv"
    trace.to_csv(trace_path, index=False, float_format="%.8g")
    checkpoint = save_checkpoint(model, out_dir / "checkpoint", stage, epoch + 1, verbose=verbose)
    if verbose:
        print(f"✓ {stage} 阶段完成: {step} 步, 损失 {trace['loss'].iloc[0]:.4f} → {trace['loss'].iloc[-1]:.4f}")
    return TrainResult(stage=stage, checkpoint=checkpoint, trace=trace, trace_path=trace_path)


def _inherit(
    model: GTNet, ckpt: Path | None, names: tuple[str, ...], label: str, verbose: bool
) -> None:
    if ckpt is None:
        warnings.warn(f"joint 阶段未提供{label}检查点，{label}侧从随机初始化开始", stacklevel=3)
        return
    copied = load_submodules(model, ckpt, names)
    if verbose:
        print(f"✓ 已从 {ckpt} 继承{label}侧参数: {', '.join(copied)}")
