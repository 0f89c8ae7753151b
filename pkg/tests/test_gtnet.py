import numpy as np
import pytest
import torch

from src.errors import ConfigError, DomainError, InputError
from src.gtnet.backbone import Encoder
from src.gtnet.decoder import CoarseHead, NaiveAggregator
from src.gtnet.gtnet import apply_ablation, count_parameters, explicit_teach, init_parameters
from src.gtnet.modulator import implicit_guidance_fuse
from tests import oracles


@pytest.fixture
def inputs(generator):
    return torch.rand(1, 3, 64, 64, generator=generator), torch.rand(1, 3, 64, 64, generator=generator)


def test_encoder_pyramid_shapes(toy_config, generator):
    encoder = Encoder(toy_config.widths, "silu", branch="appearance")
    pyramid = encoder(torch.rand(2, 3, 64, 64, generator=generator))
    assert pyramid.shapes == toy_config.pyramid_shapes()
    assert pyramid.branch == "appearance"
    assert pyramid[5].shape == (2, 128, 2, 2)


@pytest.mark.parametrize("shape", [(1, 3, 64, 48), (1, 3, 48, 48), (1, 1, 64, 64)])
def test_encoder_rejects_bad_images(toy_config, shape):
    encoder = Encoder(toy_config.widths, "silu", branch="motion")
    with pytest.raises(InputError):
        encoder(torch.zeros(shape))


def test_stage_override_only_affects_later_levels(toy_config, generator):
    model = init_parameters(toy_config)
    image = torch.rand(1, 3, 64, 64, generator=generator)
    base = model.extract_pyramid(image, "appearance")
    override = {2: torch.randn(1, 16, 16, 16, generator=generator)}
    changed = model.extract_pyramid(image, "appearance", stage_inputs=override)
    for k in (1, 2):
        assert torch.equal(base[k], changed[k])
    for k in (3, 4, 5):
        assert not torch.equal(base[k], changed[k])
    with pytest.raises(ConfigError):
        model.extract_pyramid(image, "appearance", stage_inputs={2: torch.zeros(1, 16, 8, 8)})


def test_full_model_output_shapes_and_range(toy_config, inputs):
    model = init_parameters(toy_config)
    out = model(*inputs)
    for saliency in (out.z_a, out.z_m):
        assert saliency.values.shape == (1, 1, 64, 64)
        assert saliency.domain == "prob"
        assert (saliency.values >= 0).all() and (saliency.values <= 1).all()
    assert out.z_a_logits.shape == out.z_m_logits.shape == (1, 1, 64, 64)
    assert out.prediction is out.z_a


@pytest.mark.parametrize("variant", ["1", "2", "3", "4", "5", "6", "OUR", "M", "A"])
def test_every_variant_runs(toy_config, inputs, variant):
    model = apply_ablation(toy_config, variant)
    out = model(*inputs)
    assert out.prediction.values.shape == (1, 1, 64, 64)
    assert 0 <= out.prediction.values.min() and out.prediction.values.max() <= 1


def test_mode_a_has_only_student(toy_config, inputs):
    model = apply_ablation(toy_config, "A")
    assert model.motion_encoder is None and model.teacher_decoder is None and model.modulators is None
    out = model(inputs[0])
    assert out.z_m is None and out.z_m_logits is None
    out.z_a_logits.sum().backward()
    names = [n for n, _ in model.named_parameters()]
    assert not any(n.startswith(("motion_encoder", "teacher_decoder", "modulators")) for n in names)
    assert all(p.grad is not None for p in model.parameters())


def test_mode_m_predicts_teacher_map(toy_config, inputs):
    model = apply_ablation(toy_config, "M")
    out = model(None, inputs[1])
    assert out.z_a is None and out.prediction is out.z_m
    with pytest.raises(InputError):
        model(inputs[0])


def test_variant_one_has_no_modulator_parameters(toy_config, inputs):
    model = apply_ablation(toy_config, "1")
    assert model.modulators is None
    assert not any("modulators" in n for n, _ in model.named_parameters())
    assert model.graph_summary()["fusion"] == "identity"
    assert count_parameters(model) < count_parameters(apply_ablation(toy_config, "OUR"))


def test_variant_four_and_five_substitutes(toy_config):
    assert isinstance(apply_ablation(toy_config, "4").teacher_decoder, CoarseHead)
    assert isinstance(apply_ablation(toy_config, "5").student_decoder, NaiveAggregator)


def test_no_teaching_equals_zero_mask(toy_config, inputs):
    full = apply_ablation(toy_config, "OUR", seed=11)
    no_teaching = apply_ablation(toy_config, "6", seed=11)
    frame, flow = inputs
    masked = full(frame, flow, teaching_mask=torch.zeros(1, 1, 8, 8))
    assert torch.equal(masked.z_a_logits, no_teaching(frame, flow).z_a_logits)


def test_teacher_decoder_does_not_touch_student_with_fixed_mask(toy_config, inputs):
    model = init_parameters(toy_config)
    frame, flow = inputs
    mask = torch.full((1, 1, 8, 8), 0.5)
    before = model(frame, flow, teaching_mask=mask)
    with torch.no_grad():
        for p in model.teacher_decoder.parameters():
            p.add_(0.1)
    after = model(frame, flow, teaching_mask=mask)
    assert torch.equal(before.z_a_logits, after.z_a_logits)
    assert not torch.equal(before.z_m_logits, after.z_m_logits)


def test_guided_pyramid_fuses_every_level(toy_config, inputs):
    model = init_parameters(toy_config)
    frame, flow = inputs
    _, motion = model.teacher_logits(flow)
    pyramid, fused = model.guided_pyramid(frame, motion)
    assert sorted(fused) == [1, 2, 3, 4, 5]
    expected = implicit_guidance_fuse(pyramid[1], motion[1], model.modulator(1))
    torch.testing.assert_close(fused[1], expected)


def test_missing_or_mismatched_inputs(toy_config, generator):
    model = init_parameters(toy_config)
    frame = torch.rand(1, 3, 64, 64, generator=generator)
    with pytest.raises(InputError):
        model(frame)
    with pytest.raises(InputError):
        model(frame, torch.rand(1, 3, 32, 32, generator=generator))


def test_same_seed_same_output(toy_config, inputs):
    a = init_parameters(toy_config, seed=4)(*inputs)
    b = init_parameters(toy_config, seed=4)(*inputs)
    assert torch.equal(a.z_a_logits, b.z_a_logits)
    c = init_parameters(toy_config, seed=5)(*inputs)
    assert not torch.equal(a.z_a_logits, c.z_a_logits)


def test_init_does_not_disturb_global_rng(toy_config):
    torch.manual_seed(0)
    expected = torch.rand(3)
    torch.manual_seed(0)
    init_parameters(toy_config, seed=123)
    assert torch.equal(torch.rand(3), expected)


def test_explicit_teach_identities(generator):
    f = torch.randn(2, 16, 8, 8, generator=generator)
    assert torch.equal(explicit_teach(f, torch.zeros(2, 1, 8, 8), 3), f)
    assert torch.equal(explicit_teach(f, torch.ones(2, 1, 8, 8), 4), 2 * f)


def test_explicit_teach_resizes_mask(generator):
    f = torch.randn(1, 4, 2, 2, generator=generator)
    out = explicit_teach(f, torch.ones(1, 1, 8, 8), 5)
    assert out.shape == f.shape
    torch.testing.assert_close(out, 2 * f)


def test_explicit_teach_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        f = rng.normal(size=(3, 4, 4))
        m = rng.uniform(size=(1, 4, 4))
        got = explicit_teach(torch.from_numpy(f)[None], torch.from_numpy(m)[None], 3)[0].numpy()
        np.testing.assert_allclose(got, oracles.explicit_teach(f, m), atol=1e-12)


def test_explicit_teach_errors():
    f = torch.zeros(1, 4, 8, 8)
    with pytest.raises(DomainError):
        explicit_teach(f, torch.full((1, 1, 8, 8), 1.5), 3)
    with pytest.raises(DomainError):
        explicit_teach(f, torch.full((1, 1, 8, 8), -0.1), 3)
    with pytest.raises(ConfigError):
        explicit_teach(f, torch.zeros(1, 1, 8, 8), 2)


def test_graph_summary(toy_config):
    summary = apply_ablation(toy_config, "5").graph_summary()
    assert summary["mode"] == "MA"
    assert summary["student_decoder"] == "NaiveAggregator"
    assert summary["teaching"] == "on"
    assert apply_ablation(toy_config, "A").graph_summary()["motion_encoder"] == "-"
