import pytest
import torch

from config.model_config import ModelConfig
from src.errors import ConfigError
from src.gradcheck import GROUPS, run_gradcheck, submodule_strata
from src.gtnet.gtnet import init_parameters
from src.numerical import central_difference, kink_aware_difference, relative_error


def test_relative_error_floor():
    assert relative_error(1.0, 1.1) == pytest.approx(0.1 / 1.1)
    assert relative_error(1e-9, 2e-9, floor=1e-5) == pytest.approx(1e-4)


def test_differences_on_smooth_and_kinked_functions():
    x = torch.tensor([0.3, -0.2], dtype=torch.float64)
    assert central_difference(lambda: (x**3).sum(), x, (0,), 1e-4) == pytest.approx(3 * 0.09, rel=1e-7)
    value, smooth = kink_aware_difference(lambda: (x**3).sum(), x, (0,), 1e-2)
    assert smooth and value == pytest.approx(3 * 0.09, rel=1e-10)
    assert x.tolist() == [0.3, -0.2]

    y = torch.tensor([1e-4], dtype=torch.float64)
    _, smooth = kink_aware_difference(lambda: torch.relu(y).sum(), y, (0,), 1e-3, lambda: bool(y[0] > 0))
    assert not smooth


def test_plain_central_estimate():
    x = torch.tensor([0.3, -0.2], dtype=torch.float64)
    value, smooth = kink_aware_difference(lambda: (x**3).sum(), x, (1,), 1e-3, extrapolate=False)
    assert smooth
    assert value == central_difference(lambda: (x**3).sum(), x, (1,), 1e-3)
    assert x.tolist() == [0.3, -0.2]


def test_strata_follow_submodules(toy_config):
    model = init_parameters(toy_config)
    strata = submodule_strata(model)
    assert {f"modulators.{k}" for k in range(5)} <= set(strata)
    assert {"appearance_encoder", "motion_encoder", "teacher_decoder", "student_decoder"} <= set(strata)
    assert sum(len(m) for m in strata.values()) == len(list(model.parameters()))
    assert set(submodule_strata(model.teacher_decoder)) == {"rfb.3", "rfb.4", "rfb.5", "broadcast", "aggregate"}
    assert set(submodule_strata(model.appearance_encoder)) == {f"stages.{k}" for k in range(5)}


def test_every_submodule_is_sampled():
    report = run_gradcheck(samples=5, groups=("modulator", "decoder"), verbose=False)
    assert report.table["submodules"].tolist() == [5, 5]
    assert report.passed


def test_quick_pass():
    report = run_gradcheck(samples=4, groups=("modulator", "decoder"), verbose=False)
    assert report.passed
    assert report.table["module"].tolist() == ["modulator", "decoder"]
    assert (report.table["samples"] == 4).all()
    assert (report.table["max_rel_error"] < 1e-4).all()


def test_plain_central_difference_passes():
    report = run_gradcheck(samples=4, groups=("modulator", "decoder"), estimator="central", verbose=False)
    assert report.passed, report.table.to_string()


def test_fault_injection_is_caught():
    def corrupt(group, grads):
        if group != "decoder":
            return None
        return {name: g + 1.0 for name, g in grads.items()}

    report = run_gradcheck(samples=3, groups=("modulator", "decoder"), grad_hook=corrupt, verbose=False)
    assert not report.passed
    assert report.failed_groups() == ["decoder"]


def test_rejects_unsupported_configs():
    with pytest.raises(ConfigError):
        run_gradcheck(ModelConfig.full(), samples=1, verbose=False)
    with pytest.raises(ConfigError):
        run_gradcheck(ModelConfig.toy().with_ablation("1"), samples=1, verbose=False)
    with pytest.raises(ConfigError):
        run_gradcheck(samples=1, groups=("encoder",), verbose=False)
    with pytest.raises(ConfigError):
        run_gradcheck(samples=1, groups=("decoder",), estimator="forward", verbose=False)


@pytest.mark.slow
def test_all_groups_pass():
    report = run_gradcheck(samples=32, verbose=False)
    assert report.table["module"].tolist() == list(GROUPS)
    assert report.passed, report.table.to_string()
