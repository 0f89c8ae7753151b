"""命令行入口：gtnet <verb> [选项]

    synth      生成合成运动目标视频（可选 train / test 划分）
    train      训练一个阶段（teacher / student / joint）
    predict    对数据目录逐帧输出显著图
    eval       评价预测目录，输出 MAE / F-beta / S-measure 报告
    ablate     按消融变体逐个训练并评价，输出消融表
    gradcheck  toy 档位有限差分梯度检验
    viz        导出逐帧对比图
    bench      推理速度测量

只要 --out 目录已建立（成功或运行期失败），都会写出 run_manifest.json（命令行、配置哈希、种子、版本、退出码）；
用法错误不触碰输出目录。
退出码：0 成功；1 运行期失败（训练发散、梯度检验不通过）；2 用法 / 配置 / 输入错误。
"""

import argparse
import json
import shutil
import sys
from pathlib import Path

import pandas as pd
import torch

from config.model_config import VARIANTS, AblationSpec
from config.run_config import RunConfig
from src import __version__
from src.bench import run_bench
from src.data.image_io import read_gray, to_uint8, write_png
from src.data.synth import synth_generate, synth_split
from src.data.video_dataset import (
    VideoSaliencyDataset,
    list_sequences,
    load_sequence,
    resolve_split,
)
from src.errors import (
    ConfigError,
    DomainError,
    EmptySequenceError,
    IngestionError,
    InputError,
    ShapeError,
    TrainingDivergenceError,
)
from src.gradcheck import ESTIMATORS, GRAD_FLOOR, run_gradcheck
from src.gtnet.checkpoint import load_checkpoint, read_manifest
from src.gtnet.gtnet import GTNet, init_parameters
from src.gtnet.layers import resize_to
from src.metrics import evaluate_dataset
from src.my_dtypes import METRIC_COLUMNS
from src.training.trainer import train_stage
from src.visualize import run_viz

# 用法 / 配置 / 输入类错误，退出码 2
USAGE_ERRORS = (
    ConfigError,
    InputError,
    ShapeError,
    DomainError,
    IngestionError,
    EmptySequenceError,
    FileExistsError,
)

# 各分支模式需要经过的训练阶段
STAGES_FOR_MODE: dict[str, tuple[str, ...]] = {
    "M": ("teacher",),
    "A": ("student",),
    "MA": ("teacher", "student", "joint"),
}


# ----------------------------------------------------------------------
# 预测与消融
# ----------------------------------------------------------------------
def native_size(seq_dir: Path) -> tuple[int, int]:
    frame = read_gray(Path(seq_dir) / "frames" / "0001.png")
    return frame.shape[0], frame.shape[1]


@torch.no_grad()
def predict_dataset(
    model: GTNet,
    data_root: Path,
    out: Path,
    emit_teacher: bool = False,
    resize: bool = False,
    verbose: bool = True,
) -> list[Path]:
    """逐帧推理并写出 8 位显著图。

    Args:
        model: 已加载的模型。
        data_root: 数据目录，布局 <sequence>/frames|flow|gt。
        out: 输出目录，写入 <sequence>/NNNN.png，emit_teacher 时另写 <sequence>/teacher/NNNN.png。
        emit_teacher: 是否同时写出教师分支的 Z^M。
        resize: 数据分辨率与模型输入不一致时是否缩放（输出缩放回原分辨率）。
        verbose: 是否打印汇总。

    Returns:
        写出的文件路径。

    Raises:
        InputError: 分辨率不一致且未开启 resize。
        ConfigError: 要求输出 Z^M 但模型没有教师分支。
    """
    model.eval()
    size = model.config.input_size
    if emit_teacher and not model.ablation.uses_motion:
        raise ConfigError(f"mode={model.ablation.mode} 的模型没有教师分支，无法输出 Z^M")
    written: list[Path] = []
    for seq_dir in list_sequences(data_root):
        native = native_size(seq_dir)
        if native != (size, size) and not resize:
            raise InputError(
                f"序列 {seq_dir.name} 的分辨率 {native} 与模型输入 {size}×{size} 不一致，"
                "请使用 --resize"
            )
        samples = load_sequence(seq_dir, size=size, use_flow=model.ablation.uses_motion)
        for s in samples:
            frame = torch.from_numpy(s.frame.transpose(2, 0, 1).copy())[None]
            flow = None if s.flow is None else torch.from_numpy(s.flow.transpose(2, 0, 1).copy())[None]
            output = model(frame, flow)
            logits = {"": output.z_a_logits if output.z_a_logits is not None else output.z_m_logits}
            if emit_teacher:
                logits["teacher"] = output.z_m_logits
            for sub, z in logits.items():
                prob = torch.sigmoid(resize_to(z, native))
                path = out / seq_dir.name / sub / f"{s.name}.png"
                written.append(write_png(path, to_uint8(prob[0, 0].double().numpy())))
    if verbose:
        print(f"✓ 已写出 {len(written)} 张显著图 → {out}")
    return written


def run_predict(
    ckpt: Path,
    data_dir: Path,
    out_dir: Path,
    emit_teacher: bool = False,
    resize: bool = False,
    expected: RunConfig | None = None,
    verbose: bool = True,
) -> list[Path]:
    """加载检查点并对 data_dir 逐帧预测；给出 expected 时先核对配置哈希。"""
    model, _ = load_checkpoint(ckpt, None if expected is None else expected.model)
    return predict_dataset(model, data_dir, out_dir, emit_teacher, resize, verbose)


def _train_or_load(
    stage: str,
    model: GTNet,
    dataset: VideoSaliencyDataset,
    config: RunConfig,
    stage_dir: Path,
    ckpts: dict[str, Path],
    reuse: bool,
    verbose: bool,
) -> Path:
    ckpt = stage_dir / "checkpoint"
    if reuse and ckpt.exists() and read_manifest(ckpt).config_hash == model.config.config_hash():
        loaded, _ = load_checkpoint(ckpt, model.config)
        model.load_state_dict(loaded.state_dict())
        if verbose:
            print(f"✓ 复用已有检查点: {ckpt}")
        return ckpt
    train_config = config.train.model_copy(update={"stage": stage})
    result = train_stage(
        stage,
        dataset,
        model,
        train_config,
        stage_dir,
        teacher_ckpt=ckpts.get("teacher"),
        student_ckpt=ckpts.get("student"),
        verbose=verbose,
    )
    return result.checkpoint


def run_ablate(
    config: RunConfig,
    variants: list[str],
    data_dir: Path,
    out_dir: Path,
    reuse: bool = False,
    verbose: bool = True,
) -> pd.DataFrame:
    """按变体逐个训练并评价，返回消融表。

    训练数据取 data_dir/train（不存在时取 data_dir），评价数据取 data_dir/test
    （不存在时取训练数据）。所有变体使用同一个种子。

    Returns:
        每个变体一行：variant, DB, CA, SA, T-PD, S-PD, Teaching，
        随后为每个评价数据集的 <dataset>_mae / _f_beta / _s_measure。

    Raises:
        ConfigError: 存在未知的变体编号（在任何训练开始前检查）。
    """
    specs = {v: AblationSpec.from_variant(v) for v in variants}
    train_root = resolve_split(data_dir, "train")
    test_root = resolve_split(data_dir, "test")
    eval_sets = {"test": test_root} if test_root != Path(data_dir) else {train_root.name: train_root}
    size = config.model.input_size
    datasets = {
        use_flow: VideoSaliencyDataset.from_root(train_root, size=size, use_flow=use_flow)
        for use_flow in (True, False)
    }

    rows = []
    for variant, spec in specs.items():
        if verbose:
            print("=" * 70)
            print(f"消融变体 {variant}: {spec.checkmarks()}")
            print("=" * 70)
        variant_dir = Path(out_dir) / variant
        model = init_parameters(config.model.with_ablation(spec))
        ckpts: dict[str, Path] = {}
        for stage in STAGES_FOR_MODE[spec.mode]:
            dataset = datasets[stage != "student"]
            ckpts[stage] = _train_or_load(
                stage, model, dataset, config, variant_dir / stage, ckpts, reuse, verbose
            )
        row: dict[str, object] = {"variant": variant, **spec.checkmarks()}
        for name, root in eval_sets.items():
            pred_dir = variant_dir / "pred" / name
            if pred_dir.exists():
                shutil.rmtree(pred_dir)
            predict_dataset(model, root, pred_dir, verbose=verbose)
            report = evaluate_dataset(pred_dir, root, dataset=name)
            for metric in METRIC_COLUMNS:
                row[f"{name}_{metric}"] = report.aggregate[metric]
        rows.append(row)

    table = pd.DataFrame(rows)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "ablation.csv", index=False, float_format="%.6f")
    (out_dir / "ablation.json").write_text(table.to_json(orient="records", indent=2), encoding="utf-8")
    if verbose:
        print(table.to_string(index=False))
    return table


# ----------------------------------------------------------------------
# 各子命令
# ----------------------------------------------------------------------
def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    updates = {
        k: v
        for k, v in {
            "num_sequences": args.num_sequences,
            "frames_per_sequence": args.frames,
            "canvas_size": args.canvas,
        }.items()
        if v is not None
    }
    data = config.model_dump(mode="json")
    data["synth"].update(updates)
    spec = RunConfig.from_dict(data).synth
    if args.test_sequences:
        synth_split(spec, args.out, args.test_sequences, verbose=not args.quiet)
    else:
        synth_generate(spec, args.out, verbose=not args.quiet)
    return 0


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    model = init_parameters(config.model.with_ablation(args.variant))
    root = resolve_split(args.data, "train")
    dataset = VideoSaliencyDataset.from_root(
        root, size=config.model.input_size, use_flow=args.stage != "student"
    )
    train_config = config.train.model_copy(update={"stage": args.stage})
    train_stage(
        args.stage,
        dataset,
        model,
        train_config,
        args.out,
        teacher_ckpt=args.teacher_ckpt,
        student_ckpt=args.student_ckpt,
        verbose=not args.quiet,
    )
    return 0


def cmd_predict(args: argparse.Namespace, config: RunConfig) -> int:
    expected = config if args.config is not None else None
    run_predict(
        args.ckpt, args.data, args.out, args.emit_teacher, args.resize, expected, verbose=not args.quiet
    )
    return 0


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    report = evaluate_dataset(
        args.pred, args.data, dataset=args.dataset, f_mode=args.f_mode, sweep=args.sweep
    )
    csv_path, _ = report.write(Path(args.out))
    if not args.quiet:
        print(report.to_frame().to_string(index=False))
        print(f"✓ 报告已写出: {csv_path}")
    return 0


def cmd_ablate(args: argparse.Namespace, config: RunConfig) -> int:
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    if not variants:
        raise ConfigError("--variants 不能为空")
    run_ablate(config, variants, args.data, args.out, reuse=args.reuse, verbose=not args.quiet)
    return 0


def cmd_gradcheck(args: argparse.Namespace, config: RunConfig) -> int:
    report = run_gradcheck(
        config.model,
        samples=args.samples,
        step=args.step,
        tolerance=args.tol,
        estimator=args.estimator,
        floor=args.floor,
        seed=config.model.seed,
        verbose=not args.quiet,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.table.to_csv(out / "gradcheck.csv", index=False)
    return 0 if report.passed else 1


def cmd_viz(args: argparse.Namespace, config: RunConfig) -> int:
    sources: dict[str, Path] = {}
    for item in args.pred:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).name, item
        sources[label] = Path(path)
    run_viz(sources, args.data, args.out, verbose=not args.quiet)
    return 0


def cmd_bench(args: argparse.Namespace, config: RunConfig) -> int:
    if args.ckpt is not None:
        model, _ = load_checkpoint(args.ckpt)
    else:
        model = init_parameters(config.model)
    report = run_bench(
        model,
        size=args.size,
        iterations=args.iterations,
        warmup=args.warmup,
        device=config.train.device,
        verbose=not args.quiet,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.json").write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    return 0



# ----------------------------------------------------------------------
# 参数解析
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="RunConfig JSON 文件")
    common.add_argument("--seed", type=int, default=None, help="覆盖配置中的种子")
    common.add_argument("--out", type=Path, required=True, help="输出目录")
    common.add_argument("--epochs", type=int, default=None, help="覆盖训练轮数")
    common.add_argument("--max-steps", type=int, default=None, help="覆盖训练总步数上限")
    common.add_argument("--quiet", action="store_true", help="不打印进度")

    parser = argparse.ArgumentParser(prog="gtnet", description="双分支视频显著性检测")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synth", parents=[common], help="生成合成数据")
    p.add_argument("--num-sequences", type=int, default=None)
    p.add_argument("--frames", type=int, default=None, help="每个序列的帧数")
    p.add_argument("--canvas", type=int, default=None, help="画布边长")
    p.add_argument("--test-sequences", type=int, default=0, help="额外生成的测试序列数")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="训练一个阶段")
    p.add_argument("--stage", choices=("teacher", "student", "joint"), required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--variant", default="OUR", help=f"消融变体: {', '.join(VARIANTS)}")
    p.add_argument("--teacher-ckpt", type=Path, default=None)
    p.add_argument("--student-ckpt", type=Path, default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="逐帧预测")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--emit-teacher", action="store_true", help="同时写出 Z^M")
    p.add_argument("--resize", action="store_true", help="分辨率不一致时缩放")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="评价预测结果")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--dataset", default=None, help="报告中的数据集名")
    p.add_argument("--f-mode", choices=("max", "mean", "adaptive"), default="max")
    p.add_argument("--sweep", choices=("uniform", "exact"), default="uniform")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("ablate", parents=[common], help="消融实验")
    p.add_argument("--variants", default="1,2,3,4,5,6,OUR")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--reuse", action="store_true", help="复用输出目录中配置一致的检查点")
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("gradcheck", parents=[common], help="有限差分梯度检验")
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--estimator", choices=ESTIMATORS, default="richardson", help="数值导数估计方式")
    p.add_argument("--floor", type=float, default=GRAD_FLOOR, help="相对误差分母下限")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("viz", parents=[common], help="导出对比图")
    p.add_argument("--pred", action="append", required=True, help="label=DIR，可重复")
    p.add_argument("--data", type=Path, required=True)
    p.set_defaults(handler=cmd_viz)

    p = sub.add_parser("bench", parents=[common], help="推理速度")
    p.add_argument("--ckpt", type=Path, default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--warmup", type=int, default=3)
    p.set_defaults(handler=cmd_bench)
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """读取 --config 并应用 --seed / --epochs / --max-steps 覆盖。"""
    config = RunConfig.from_json(args.config) if args.config is not None else RunConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    updates = {
        k: v for k, v in {"epochs": args.epochs, "max_steps": args.max_steps}.items() if v is not None
    }
    if updates:
        data = config.model_dump(mode="json")
        data["train"].update(updates)
        config = RunConfig.from_dict(data)
    return config


def write_run_manifest(
    out: Path, argv: list[str], verb: str, config: RunConfig, exit_code: int = 0
) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": verb,
        "argv": argv,
        "exit_code": exit_code,
        "config": config.model_dump(mode="json"),
        "config_hash": config.config_hash(),
        "model_config_hash": config.model.config_hash(),
        "seed": config.model.seed,
        "version": __version__,
    }
    path = out / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def main(argv: list[str] | None = None) -> int:
    """命令行入口，返回退出码。"""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = load_run_config(args)
        code = args.handler(args, config)
    except USAGE_ERRORS as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except (TrainingDivergenceError, RuntimeError) as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        code = 1
    # 失败的运行可能已留下部分产物，清单照写
    if code == 0 or Path(args.out).is_dir():
        write_run_manifest(args.out, argv, args.verb, config, exit_code=code)
    return code


if __name__ == "__main__":
    sys.exit(main())
