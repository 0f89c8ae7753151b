"""可执行的端到端演示：合成数据 → 教师 → 学生 → 联合 → 预测与评价 → 消融

每一步是一组 gtnet 命令行调用，以及该步完成后应当存在的产物清单。
文档 docs/WALKTHROUGH.md 与这里的步骤一一对应；

    python -m src.walkthrough --list          输出步骤的 JSON 描述
    python -m src.walkthrough SCRATCH_DIR     在空目录中依次执行全部步骤
"""

import argparse
import json
import sys
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from src import cli
from src.gtnet.checkpoint import MANIFEST_FILE, WEIGHTS_FILE

# toy 规模：4 个训练序列 + 2 个测试序列，每个序列 8 帧
TRAIN_SEQUENCES = 4
TEST_SEQUENCES = 2
FRAMES = 8
TRAIN_FLAGS = ["--epochs", "2", "--max-steps", "12", "--quiet"]

Check = Callable[[Path], bool]


def _count(root: Path, pattern: str) -> int:
    return len(list(root.glob(pattern)))


def _has_checkpoint(run: str) -> Check:
    def check(scratch: Path) -> bool:
        ckpt = scratch / "runs" / run / "checkpoint"
        return (ckpt / WEIGHTS_FILE).exists() and (ckpt / MANIFEST_FILE).exists()

    return check


def _file(rel: str) -> Check:
    return lambda scratch: (scratch / rel).exists()


def _glob_count(pattern: str, expected: int) -> Check:
    return lambda scratch: _count(scratch, pattern) == expected


def _ablation_rows(expected: int) -> Check:
    def check(scratch: Path) -> bool:
        path = scratch / "ablation" / "ablation.csv"
        return path.exists() and len(pd.read_csv(path)) == expected

    return check


@dataclass
class Step:
    """演示中的一步。

    Attributes:
        name: 步骤名。
        commands: gtnet 参数列表，{scratch} 会被替换为临时目录。
        expects: (说明, 检查函数) 的产物清单。
    """

    name: str
    commands: list[list[str]]
    expects: list[tuple[str, Check]] = field(default_factory=list)

    def argv(self, scratch: Path) -> list[list[str]]:
        return [[arg.replace("{scratch}", str(scratch)) for arg in cmd] for cmd in self.commands]


def steps() -> list[Step]:
    train_flows = TRAIN_SEQUENCES * (FRAMES - 1)
    test_samples = TEST_SEQUENCES * (FRAMES - 1)
    return [
        Step(
            "synth",
            [[
                "synth", "--out", "{scratch}", "--num-sequences", str(TRAIN_SEQUENCES),
                "--frames", str(FRAMES), "--test-sequences", str(TEST_SEQUENCES), "--quiet",
            ]],
            [
                ("train/manifest.json 存在", _file("train/manifest.json")),
                (f"训练集 {TRAIN_SEQUENCES * FRAMES} 帧", _glob_count("train/*/frames/*.png", TRAIN_SEQUENCES * FRAMES)),
                (f"训练集 {train_flows} 张光流", _glob_count("train/*/flow/*.png", train_flows)),
                (f"测试集 {TEST_SEQUENCES} 个序列", _glob_count("test/*/frames", TEST_SEQUENCES)),
            ],
        ),
        Step(
            "teacher",
            [["train", "--stage", "teacher", "--data", "{scratch}", "--out", "{scratch}/runs/teacher", *TRAIN_FLAGS]],
            [
                ("教师检查点", _has_checkpoint("teacher")),
                ("教师损失轨迹", _file("runs/teacher/loss_trace.csv")),
            ],
        ),
        Step(
            "student",
            [["train", "--stage", "student", "--data", "{scratch}", "--out", "{scratch}/runs/student", *TRAIN_FLAGS]],
            [
                ("学生检查点", _has_checkpoint("student")),
                ("学生损失轨迹", _file("runs/student/loss_trace.csv")),
            ],
        ),
        Step(
            "joint",
            [[
                "train", "--stage", "joint", "--data", "{scratch}", "--out", "{scratch}/runs/joint",
                "--teacher-ckpt", "{scratch}/runs/teacher/checkpoint",
                "--student-ckpt", "{scratch}/runs/student/checkpoint", *TRAIN_FLAGS,
            ]],
            [
                ("联合检查点", _has_checkpoint("joint")),
                ("运行清单", _file("runs/joint/run_manifest.json")),
            ],
        ),
        Step(
            "predict+eval",
            [
                [
                    "predict", "--ckpt", "{scratch}/runs/joint/checkpoint", "--data", "{scratch}/test",
                    "--out", "{scratch}/pred", "--emit-teacher", "--quiet",
                ],
                ["eval", "--pred", "{scratch}/pred", "--data", "{scratch}/test", "--out", "{scratch}/eval", "--quiet"],
            ],
            [
                (f"{test_samples} 张 Z^A 显著图", _glob_count("pred/*/*.png", test_samples)),
                (f"{test_samples} 张 Z^M 显著图", _glob_count("pred/*/teacher/*.png", test_samples)),
                ("评价报告 CSV", _file("eval/report.csv")),
                ("评价报告 JSON", _file("eval/report.json")),
            ],
        ),
        Step(
            "ablate",
            [["ablate", "--variants", "1,6,OUR", "--data", "{scratch}", "--out", "{scratch}/ablation", *TRAIN_FLAGS]],
            [
                ("消融表 3 行", _ablation_rows(3)),
                ("消融表 JSON", _file("ablation/ablation.json")),
            ],
        ),
    ]


@dataclass
class StepResult:
    name: str
    exit_codes: list[int]
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(code == 0 for code in self.exit_codes) and all(self.checks.values())


def run_walkthrough(scratch: Path, verbose: bool = True) -> list[StepResult]:
    """在 scratch 中依次执行全部步骤，遇到第一个失败的步骤即停止。

    Returns:
        已执行步骤的结果；全部通过时长度等于步骤数。
    """
    scratch = Path(scratch)
    results: list[StepResult] = []
    for i, step in enumerate(steps(), start=1):
        codes = []
        for argv in step.argv(scratch):
            codes.append(cli.main(argv))
            if codes[-1] != 0:
                break
        checks = {desc: check(scratch) for desc, check in step.expects} if all(c == 0 for c in codes) else {}
        result = StepResult(step.name, codes, checks)
        results.append(result)
        if verbose:
            mark = "✓" if result.passed else "✗"
            print(f"{mark} 第 {i} 步 {step.name}: 退出码 {codes}")
            for desc, ok in checks.items():
                print(f"    {'✓' if ok else '✗'} {desc}")
        if not result.passed:
            break
    return results


def describe() -> list[dict[str, object]]:
    """机器可读的步骤列表。"""
    return [
        {
            "step": i,
            "name": step.name,
            "commands": [["gtnet", *cmd] for cmd in step.commands],
            "expects": [desc for desc, _ in step.expects],
        }
        for i, step in enumerate(steps(), start=1)
    ]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="python -m src.walkthrough")
    parser.add_argument("scratch", nargs="?", type=Path, help="空的临时目录")
    parser.add_argument("--list", action="store_true", help="输出步骤的 JSON 描述")
    args = parser.parse_args(argv)
    if args.list:
        print(json.dumps(describe(), indent=2, ensure_ascii=False))
        return 0
    if args.scratch is None:
        parser.error("需要给出临时目录，或使用 --list")
    results = run_walkthrough(args.scratch)
    if len(results) == len(steps()) and results[-1].passed:
        print("✓ 全部步骤通过")
        return 0
    failed = results[-1]
    print(f"✗ 第 {len(results)} 步 {failed.name} 失败")
    return max(failed.exit_codes) if any(failed.exit_codes) else 1


if __name__ == "__main__":
    sys.exit(main())
