"""合成运动显著目标视频

每个序列由以下图层自下而上叠加：
    1. 纹理背景（高斯平滑噪声，静止）
    2. 背景杂斑：缓慢移动的低对比度小椭圆
    3. 静止干扰目标：与运动目标颜色相近的高饱和度形状，不计入真值
    4. 运动显著目标：椭圆或多边形，真值即其并集

运动目标在每一步前按边界反射速度分量，位移幅值保持不变，且始终完整位于
画布内。第 t 帧的光流为 t-1 → t 的已知位移场：目标像素取目标速度，杂斑像素取
杂斑速度，其余为 0，按 flow_codec 编码为图像。
"""

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib.colors import hsv_to_rgb
from matplotlib.path import Path as MplPath
from numpy.typing import NDArray
from scipy.ndimage import gaussian_filter
from tqdm import tqdm

from config.run_config import SynthSpec
from src import __version__
from src.data.flow_codec import encode_flow
from src.data.image_io import to_uint8, write_png
from src.data.video_dataset import frame_name

# 真值前景面积占画布比例的硬性边界
AREA_BOUNDS: tuple[float, float] = (0.02, 0.30)
# 多边形顶点数范围（闭区间），过少的边数会让外接圆过大
POLYGON_SIDES: tuple[int, int] = (5, 8)
# 椭圆长短轴比的上限
MAX_ASPECT = 4 / 3
MAX_ATTEMPTS = 50


@dataclass
class Shape:
    """画布上的一个可移动形状。

    Attributes:
        kind: ellipse 或 polygon。
        center: 中心 (x, y)，像素坐标。
        extent: 外接圆半径，用于边界反射。
        velocity: 每帧位移 (vx, vy)。
        color: RGB，取值 [0,1]。
        semi_axes: 椭圆半轴 (a, b)。
        angle: 旋转角（弧度）。
        sides: 多边形边数。
    """

    kind: str
    center: NDArray[np.float64]
    extent: float
    velocity: NDArray[np.float64]
    color: NDArray[np.float64]
    semi_axes: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0
    sides: int = 0

    def mask(self, size: int) -> NDArray[np.bool_]:
        """在 size×size 画布上按像素中心栅格化。"""
        ys, xs = np.mgrid[0:size, 0:size] + 0.5
        if self.kind == "ellipse":
            dx, dy = xs - self.center[0], ys - self.center[1]
            c, s = np.cos(self.angle), np.sin(self.angle)
            u, v = c * dx + s * dy, -s * dx + c * dy
            a, b = self.semi_axes
            return (u / a) ** 2 + (v / b) ** 2 <= 1.0
        theta = self.angle + 2 * np.pi * np.arange(self.sides) / self.sides
        vertices = self.center + self.extent * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        points = np.stack([xs.ravel(), ys.ravel()], axis=1)
        return MplPath(vertices).contains_points(points).reshape(size, size)

    def step(self, size: int) -> None:
        """反射越界的速度分量后前进一步。"""
        lo, hi = self.extent, size - self.extent
        for axis in (0, 1):
            target = self.center[axis] + self.velocity[axis]
            if target < lo or target > hi:
                self.velocity[axis] = -self.velocity[axis]
        self.center = self.center + self.velocity


def random_shape(
    rng: np.random.Generator, size: int, area: float, speed: float, color: NDArray[np.float64]
) -> Shape:
    """面积为 area（像素²）、速度为 speed 的随机形状，初始位置保证完整在画布内。"""
    angle = float(rng.uniform(0, np.pi))
    if rng.random() < 0.5:
        aspect = float(rng.uniform(1.0, MAX_ASPECT))
        b = np.sqrt(area / (np.pi * aspect))
        a = aspect * b
        shape = Shape("ellipse", np.zeros(2), float(a), np.zeros(2), color, (float(a), float(b)), angle)
    else:
        sides = int(rng.integers(POLYGON_SIDES[0], POLYGON_SIDES[1] + 1))
        radius = np.sqrt(2 * area / (sides * np.sin(2 * np.pi / sides)))
        shape = Shape("polygon", np.zeros(2), float(radius), np.zeros(2), color, angle=angle, sides=sides)
    shape.center = rng.uniform(shape.extent, size - shape.extent, size=2)
    heading = rng.uniform(0, 2 * np.pi)
    shape.velocity = speed * np.array([np.cos(heading), np.sin(heading)])
    return shape


def textured_background(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
    noise = rng.normal(size=(size, size, 3))
    smooth = gaussian_filter(noise, sigma=(size / 16, size / 16, 0))
    smooth = (smooth - smooth.min()) / max(np.ptp(smooth), 1e-12)
    base = rng.uniform(0.3, 0.6, size=3)
    return np.clip(base + 0.25 * (smooth - 0.5), 0.0, 1.0)


def saturated_color(rng: np.random.Generator, hue: float | None = None) -> NDArray[np.float64]:
    hue = float(rng.uniform(0, 1)) if hue is None else hue % 1.0
    return hsv_to_rgb(np.array([hue, 0.9, 0.95]))


@dataclass
class RenderedSequence:
    frames: list[NDArray[np.uint8]]
    gts: list[NDArray[np.uint8]]
    flows: list[NDArray[np.uint8]]
    area_fractions: list[float]


def render_sequence(spec: SynthSpec, rng: np.random.Generator) -> RenderedSequence:
    """渲染一个序列；若某帧前景面积越出 AREA_BOUNDS 则用同一随机流重抽。

    Raises:
        RuntimeError: 连续 MAX_ATTEMPTS 次都无法满足面积约束。
    """
    for _ in range(MAX_ATTEMPTS):
        rendered = _render_once(spec, rng)
        if all(AREA_BOUNDS[0] <= a <= AREA_BOUNDS[1] for a in rendered.area_fractions):
            return rendered
    raise RuntimeError(f"{MAX_ATTEMPTS} 次尝试后仍无法满足前景面积约束 {AREA_BOUNDS}")


def _render_once(spec: SynthSpec, rng: np.random.Generator) -> RenderedSequence:
    size = spec.canvas_size
    canvas_area = size * size
    background = textured_background(rng, size)

    hue = float(rng.uniform(0, 1))
    total_area = rng.uniform(*spec.object_area_range) * canvas_area
    objects = [
        random_shape(
            rng,
            size,
            total_area / spec.object_count,
            rng.uniform(*spec.speed_range) * size,
            saturated_color(rng, hue + rng.uniform(-0.05, 0.05)),
        )
        for _ in range(spec.object_count)
    ]
    distractor = None
    if spec.static_distractor:
        distractor = random_shape(
            rng, size, total_area / spec.object_count, 0.0,
            saturated_color(rng, hue + rng.uniform(-0.08, 0.08)),
        )
    clutter = []
    if spec.background_clutter:
        for _ in range(spec.clutter_count):
            tint = np.clip(background.mean(axis=(0, 1)) + rng.uniform(-0.15, 0.15, size=3), 0, 1)
            clutter.append(random_shape(rng, size, 0.006 * canvas_area, spec.clutter_speed * size, tint))

    frames, gts, flows, areas = [], [], [], []
    for t in range(1, spec.frames_per_sequence + 1):
        if t > 1:
            for shape in (*clutter, *objects):
                shape.step(size)
        image = background.copy()
        dx = np.zeros((size, size))
        dy = np.zeros((size, size))
        gt = np.zeros((size, size), dtype=bool)
        layers = [*clutter, *([distractor] if distractor else []), *objects]
        for shape in layers:
            m = shape.mask(size)
            image[m] = shape.color
            dx[m], dy[m] = shape.velocity
        for shape in objects:
            gt |= shape.mask(size)
        image = np.clip(image + rng.normal(0, 0.02, size=image.shape), 0, 1)

        frames.append(to_uint8(image))
        gts.append(gt.astype(np.uint8) * 255)
        areas.append(float(gt.mean()))
        if t > 1:
            flows.append(encode_flow(dx, dy, spec.flow_max_mag))
    return RenderedSequence(frames, gts, flows, areas)


def synth_generate(
    spec: SynthSpec, out: Path, stream: int = 0, verbose: bool = True
) -> dict[str, object]:
    """渲染并写出全部序列与 manifest.json。

    每个序列使用由 (seed, stream) 派生的独立随机流，结果只由规格决定。

    Args:
        spec: 生成规格。
        out: 输出目录，必须不存在或为空。
        stream: 随机流编号，训练 / 测试划分使用不同的流。
        verbose: 是否显示进度条。

    Returns:
        写入 manifest.json 的内容。

    Raises:
        FileExistsError: 输出目录非空。
    """
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        raise FileExistsError(f"输出目录非空，拒绝覆盖: {out}")
    out.mkdir(parents=True, exist_ok=True)

    children = np.random.SeedSequence(spec.seed, spawn_key=(stream,)).spawn(spec.num_sequences)
    sequences = []
    iterator = tqdm(enumerate(children), total=spec.num_sequences, desc=f"合成 {out.name}", disable=not verbose)
    for i, child in iterator:
        name = f"seq{i:03d}"
        rendered = render_sequence(spec, np.random.default_rng(child))
        seq_dir = out / name
        for t, (frame, gt) in enumerate(zip(rendered.frames, rendered.gts, strict=True), start=1):
            write_png(seq_dir / "frames" / frame_name(t), frame)
            write_png(seq_dir / "gt" / frame_name(t), gt)
        for t, flow in enumerate(rendered.flows, start=2):
            write_png(seq_dir / "flow" / frame_name(t), flow)
        sequences.append({"name": name, "frames": len(rendered.frames)})

    manifest = {
        "sequences": sequences,
        "spec": spec.model_dump(mode="json"),
        "seed": spec.seed,
        "stream": stream,
        "flow_max_mag": spec.flow_max_mag,
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    if verbose:
        print(f"✓ 已生成 {len(sequences)} 个序列 → {out}")
    return manifest


def synth_split(
    spec: SynthSpec, out: Path, test_sequences: int, verbose: bool = True
) -> dict[str, dict[str, object]]:
    """生成 out/train 与 out/test 两个互不重叠的随机流划分。"""
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        raise FileExistsError(f"输出目录非空，拒绝覆盖: {out}")
    try:
        train = synth_generate(spec, out / "train", stream=0, verbose=verbose)
        test_spec = spec.model_copy(update={"num_sequences": test_sequences})
        test = synth_generate(test_spec, out / "test", stream=1, verbose=verbose)
    except Exception:
        shutil.rmtree(out / "train", ignore_errors=True)
        shutil.rmtree(out / "test", ignore_errors=True)
        raise
    return {"train": train, "test": test}
