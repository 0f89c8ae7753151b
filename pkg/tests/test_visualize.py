import matplotlib.pyplot as plt
import pandas as pd
import pytest

from src.data.image_io import read_gray, write_png
from src.data.video_dataset import frame_name
from src.errors import IngestionError
from src.visualize import aligned_frames, comparison_figure, plot_loss_traces, run_viz
from tests.conftest import write_sequence


@pytest.fixture
def viz_inputs(tmp_path):
    data = tmp_path / "data"
    write_sequence(data, "seq000", 5, size=32)
    sources = {}
    for label, invert in (("OUR", False), ("+A", True), ("+M", False)):
        pred_dir = tmp_path / "pred" / label
        for t in range(2, 6):
            gt = read_gray(data / "seq000" / "gt" / frame_name(t))
            write_png(pred_dir / "seq000" / frame_name(t), 255 - gt if invert else gt)
        sources[label] = pred_dir
    return data, sources


def test_one_figure_per_frame(viz_inputs, tmp_path):
    data, sources = viz_inputs
    written = run_viz(sources, data, tmp_path / "viz", verbose=False)
    assert [p.name for p in written] == [frame_name(t) for t in range(2, 6)]
    assert all(p.exists() for p in written)


def test_figure_has_a_column_per_source(viz_inputs):
    data, sources = viz_inputs
    fig = comparison_figure("seq000/0002", sources, data)
    assert len(fig.axes) == 3 + 3
    assert [ax.get_title() for ax in fig.axes] == ["frame", "flow", "gt", "OUR", "+A", "+M"]
    plt.close(fig)


def test_same_inputs_same_bytes(viz_inputs, tmp_path):
    data, sources = viz_inputs
    a = run_viz(sources, data, tmp_path / "a", verbose=False)
    b = run_viz(sources, data, tmp_path / "b", verbose=False)
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_missing_files(viz_inputs):
    data, sources = viz_inputs
    (data / "seq000" / "gt" / frame_name(3)).unlink()
    with pytest.raises(IngestionError, match="seq000/0003"):
        aligned_frames(sources, data)


def test_mismatched_sources(viz_inputs):
    data, sources = viz_inputs
    (sources["+M"] / "seq000" / frame_name(4)).unlink()
    with pytest.raises(IngestionError, match="0004"):
        aligned_frames(sources, data)
    with pytest.raises(IngestionError):
        aligned_frames({}, data)


def test_plot_loss_traces(tmp_path):
    traces = {
        "teacher": pd.DataFrame({"step": [0, 1, 2], "loss": [0.7, 0.5, 0.3]}),
        "joint": pd.DataFrame({"step": [0, 1], "loss": [1.4, 1.0]}),
    }
    out = plot_loss_traces(traces, tmp_path / "plots" / "loss.png")
    assert out.exists() and out.read_bytes()[:4] == b"\x89PNG"
