"""桌面级验收运行：toy 过拟合与 +M / +A / +M+A 排序

两个运行都只依赖合成数据与固定种子，scripts/gtnet/ 下的编号脚本与 slow 测试共用这里的实现。
"""

import shutil
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from config.model_config import ModelConfig
from config.run_config import RunConfig, SynthSpec, TrainConfig
from src.cli import predict_dataset, run_ablate
from src.data.synth import synth_generate, synth_split
from src.data.video_dataset import VideoSaliencyDataset
from src.gtnet.gtnet import init_parameters
from src.metrics import evaluate_dataset
from src.my_dtypes import MetricReport
from src.training.trainer import TrainResult, train_stage

OVERFIT_MAE = 0.05
OVERFIT_SEED = 7
ORDERING_SEED = 11


@dataclass
class OverfitResult:
    """toy 过拟合运行的结果。

    Attributes:
        report: 训练集上的评价报告。
        stages: 三个阶段的训练结果，键为阶段名。
    """

    report: MetricReport
    stages: dict[str, TrainResult]

    @property
    def mae(self) -> float:
        return float(self.report.aggregate["mae"])

    @property
    def passed(self) -> bool:
        return self.mae < OVERFIT_MAE


def toy_overfit(
    out: Path,
    seed: int = OVERFIT_SEED,
    num_sequences: int = 8,
    frames: int = 16,
    joint_steps: int = 500,
    verbose: bool = True,
) -> OverfitResult:
    """在小规模合成数据上依次训练三个阶段，然后在训练集上评价。

    Args:
        out: 输出目录，已存在时先清空。
        seed: 数据与模型共用的种子。
        num_sequences: 合成序列数。
        frames: 每个序列的帧数。
        joint_steps: 联合阶段步数上限；教师与学生阶段各 300 步。
        verbose: 是否打印进度。

    Returns:
        OverfitResult，passed 表示训练集 MAE < 0.05。
    """
    out = Path(out)
    if out.exists():
        shutil.rmtree(out)
    spec = SynthSpec(num_sequences=num_sequences, frames_per_sequence=frames, canvas_size=64, seed=seed)
    synth_generate(spec, out / "data", verbose=verbose)

    model_config = ModelConfig.toy(seed=seed)
    flow_set = VideoSaliencyDataset.from_root(out / "data", size=model_config.input_size)
    frame_set = VideoSaliencyDataset.from_root(out / "data", size=model_config.input_size, use_flow=False)

    model = init_parameters(model_config)
    # 小数据集上提高学习率以便在数百步内收敛
    base = TrainConfig(batch_size=8, base_lr=1e-3, epochs=40, seed=seed)
    teacher = train_stage(
        "teacher", flow_set, model, base.model_copy(update={"stage": "teacher", "max_steps": 300}),
        out / "teacher", verbose=verbose,
    )
    student = train_stage(
        "student", frame_set, model, base.model_copy(update={"stage": "student", "max_steps": 300}),
        out / "student", verbose=verbose,
    )
    joint = train_stage(
        "joint", flow_set, model, base.model_copy(update={"stage": "joint", "max_steps": joint_steps}),
        out / "joint", teacher_ckpt=teacher.checkpoint, student_ckpt=student.checkpoint, verbose=verbose,
    )

    predict_dataset(model, out / "data", out / "pred", verbose=verbose)
    report = evaluate_dataset(out / "pred", out / "data", dataset="train")
    return OverfitResult(report=report, stages={"teacher": teacher, "student": student, "joint": joint})


@dataclass
class OrderingResult:
    """+M / +A / +M+A 三种模式在测试划分上的比较。"""

    table: pd.DataFrame

    def _column(self, name: str) -> pd.Series:
        return self.table.set_index(self.table["variant"].astype(str))[name]

    @property
    def f_ordered(self) -> bool:
        f = self._column("test_f_beta")
        return bool(f["MA"] > max(f["M"], f["A"]))

    @property
    def mae_ordered(self) -> bool:
        mae = self._column("test_mae")
        return bool(mae["MA"] < min(mae["M"], mae["A"]))

    @property
    def passed(self) -> bool:
        return self.f_ordered and self.mae_ordered


def variant_ordering(
    out: Path,
    seed: int = ORDERING_SEED,
    num_sequences: int = 8,
    frames: int = 16,
    test_sequences: int = 4,
    max_steps: int = 400,
    verbose: bool = True,
) -> OrderingResult:
    """在含静止干扰目标与移动背景杂斑的数据上分别训练 M / A / MA 并在测试划分上评价。"""
    out = Path(out)
    if out.exists():
        shutil.rmtree(out)
    spec = SynthSpec(
        num_sequences=num_sequences,
        frames_per_sequence=frames,
        static_distractor=True,
        background_clutter=True,
        seed=seed,
    )
    synth_split(spec, out / "data", test_sequences=test_sequences, verbose=verbose)
    config = RunConfig(
        model=ModelConfig.toy(seed=seed),
        train=TrainConfig(batch_size=8, base_lr=1e-3, epochs=40, max_steps=max_steps, seed=seed),
        synth=spec,
    )
    table = run_ablate(config, ["M", "A", "MA"], out / "data", out / "ablation", verbose=verbose)
    return OrderingResult(table=table)
