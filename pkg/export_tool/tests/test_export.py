"""Export-tool tests. The consumer-side checks drive the installed sonodet
package through its public interfaces (ONNX files, replay fixtures, CLI)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from yolo11export import (
    BuildSpec,
    TorchModel,
    build_graph,
    export,
    preprocess_image,
    synthetic_frames,
    tensor_key,
)

from sonodet.engine import (
    estimate_model_cost,
    preprocess as engine_preprocess,
    replay_backend,
    validate_onnx_contract,
)
from sonodet.engine.decode import DecodeConfig, run_decode
from sonodet.datakit.imgio import Frame


PUBLISHED_PARAMS = {
    ("n", "detect"): 2.59e6,
    ("s", "detect"): 9.43e6,
    ("m", "detect"): 20.05e6,
    ("l", "detect"): 25.31e6,
    ("x", "detect"): 56.87e6,
    ("n", "segment"): 2.83e6,
    ("s", "segment"): 10.07e6,
}


class TestParameterCounts:
    @pytest.mark.parametrize("variant,task", sorted(PUBLISHED_PARAMS))
    def test_within_2pct_of_published(self, variant, task):
        graph = build_graph(BuildSpec(variant=variant, task=task, classes=80))
        params = graph.parameter_count()
        target = PUBLISHED_PARAMS[(variant, task)]
        assert abs(params - target) / target < 0.02

    def test_single_class_head_shrinks(self):
        g80 = build_graph(BuildSpec(variant="n", classes=80))
        g1 = build_graph(BuildSpec(variant="n", classes=1))
        assert g1.parameter_count() < g80.parameter_count()


@pytest.fixture(scope="module")
def n_export(tmp_path_factory):
    out = tmp_path_factory.mktemp("n_export")
    frames = synthetic_frames(1, 640, seed=3)
    return export(out, variant="n", task="detect", classes=80,
                  input_size=640, seed=3, sample_frames=frames), frames


@pytest.fixture(scope="module")
def s_export(tmp_path_factory):
    out = tmp_path_factory.mktemp("s_export")
    frames = synthetic_frames(1, 640, seed=4)
    return export(out, variant="s", task="detect", classes=80,
                  input_size=640, seed=4, sample_frames=frames), frames


class TestEngineContract:
    def test_n_loads_and_matches_contract(self, n_export):
        result, _ = n_export
        info = validate_onnx_contract(result.onnx_path, class_count=80)
        assert info["input_size"] == 640
        assert info["columns"] == 8400
        assert info["has_masks"] is False
        assert info["opset"] == 12

    def test_s_loads_and_matches_contract(self, s_export):
        result, _ = s_export
        info = validate_onnx_contract(result.onnx_path, class_count=80)
        assert info["columns"] == 8400

    def test_engine_cost_agrees_with_card(self, n_export):
        result, _ = n_export
        cost = estimate_model_cost(result.onnx_path)
        assert cost.parameters == result.card.parameters
        assert abs(cost.parameters - 2.59e6) / 2.59e6 < 0.02
        # Conv+gemm MACs of the n variant at 640 are ~3.2 G.
        assert 2.5e9 < cost.macs < 4.0e9

    def test_s_cost_within_2pct(self, s_export):
        result, _ = s_export
        cost = estimate_model_cost(result.onnx_path)
        assert abs(cost.parameters - 9.43e6) / 9.43e6 < 0.02

    def test_primary_cli_cost_subcommand(self, n_export):
        result, _ = n_export
        proc = subprocess.run(
            [sys.executable, "-m", "sonodet.cli", "cost", str(result.onnx_path)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        assert payload["parameters"] == result.card.parameters


class TestReplayFixture:
    def test_keyed_fixture_replays_through_engine(self, n_export):
        result, frames = n_export
        backend = replay_backend(result.fixture_path)
        assert backend.mode == "keyed"
        # The engine's own preprocessing must hit the recorded key.
        frame = Frame(frames[0])
        tensor, scales = engine_preprocess(frame, DecodeConfig(input_size=640))
        outputs = backend.infer(tensor)
        assert outputs[0].shape == (1, 84, 8400)
        # And the replayed tensors decode through the full engine path.
        dets = run_decode(
            outputs, DecodeConfig(conf_threshold=0.01), scales, 640, 640
        )
        for d in dets:
            assert 0.0 <= d.score <= 1.0
            assert 0 <= d.box.x1 <= d.box.x2 <= 640

    def test_fixture_outputs_bit_exact_vs_torch(self, n_export):
        result, frames = n_export
        graph = build_graph(BuildSpec(variant="n", task="detect", classes=80, seed=3))
        model = TorchModel(graph)
        tensor = preprocess_image(frames[0], 640)
        expected = model.forward(tensor)[0]
        backend = replay_backend(result.fixture_path)
        from sonodet.core import RawTensor

        (out,) = backend.infer(RawTensor(tensor))
        assert out.tobytes() == np.ascontiguousarray(expected, dtype="<f4").tobytes()

    def test_preprocessing_parity_with_engine(self):
        frames = synthetic_frames(2, 640, seed=9) + [
            (np.random.Generator(np.random.PCG64(1)).integers(
                0, 255, size=(480, 720), dtype=np.uint8)).astype(np.uint8)
        ]
        for pixels in frames:
            ours = preprocess_image(pixels, 640)
            theirs, _ = engine_preprocess(Frame(pixels), DecodeConfig(input_size=640))
            assert tensor_key(ours) == tensor_key(theirs.array)


class TestSegmentExport:
    def test_segment_contract_and_masks(self, tmp_path):
        frames = synthetic_frames(1, 320, seed=5)
        result = export(
            tmp_path, variant="n", task="segment", classes=80,
            input_size=320, seed=5, sample_frames=frames,
        )
        info = validate_onnx_contract(result.onnx_path, class_count=80)
        assert info["has_masks"] is True
        backend = replay_backend(result.fixture_path)
        tensor, scales = engine_preprocess(Frame(frames[0]), DecodeConfig(input_size=320))
        outputs = backend.infer(tensor)
        assert outputs[0].shape == (1, 4 + 80 + 32, 2100)
        assert outputs[1].shape == (1, 32, 80, 80)
        dets = run_decode(
            outputs, DecodeConfig(conf_threshold=0.01, input_size=320),
            scales, 320, 320,
        )
        for d in dets:
            assert d.mask is not None
            assert d.mask.width == 320 and d.mask.height == 320


class TestDeterminism:
    def test_same_seed_identical_artifacts(self, tmp_path):
        frames = synthetic_frames(1, 320, seed=6)
        a = export(tmp_path / "a", variant="n", classes=4, input_size=320,
                   seed=6, sample_frames=frames)
        b = export(tmp_path / "b", variant="n", classes=4, input_size=320,
                   seed=6, sample_frames=frames)
        assert a.onnx_path.read_bytes() == b.onnx_path.read_bytes()
        assert a.fixture_path.read_bytes() == b.fixture_path.read_bytes()
        assert a.card.parameters == b.card.parameters

    def test_cli_runs(self, tmp_path):
        from yolo11export.cli import main

        code = main([
            "--variant", "n", "--task", "detect", "--classes", "2",
            "--input-size", "320", "--out", str(tmp_path), "--seed", "1",
        ])
        assert code == 0
        assert (tmp_path / "yolo11n.onnx").exists()
        assert (tmp_path / "yolo11n.card.json").exists()
        assert (tmp_path / "yolo11n.replay.bin").exists()


class TestLocalWeights:
    def test_state_dict_round_trip(self, tmp_path):
        import torch

        graph = build_graph(BuildSpec(variant="n", classes=2, input_size=320, seed=7))
        # Perturb one weight, save as a local state dict, re-export with it.
        name = next(iter(graph.weights))
        state = {name: np.ones_like(graph.weights[name])}
        weights_path = tmp_path / "weights.pt"
        torch.save({k: torch.from_numpy(v) for k, v in state.items()}, weights_path)
        from yolo11export import load_local_weights

        loaded = load_local_weights(weights_path)
        frames = synthetic_frames(1, 320, seed=7)
        result = export(
            tmp_path, variant="n", classes=2, input_size=320, seed=7,
            sample_frames=frames, weights=loaded,
        )
        assert result.card.pretrained is True

    def test_unknown_weight_rejected(self, tmp_path):
        frames = synthetic_frames(1, 320, seed=8)
        with pytest.raises(KeyError):
            export(
                tmp_path, variant="n", classes=2, input_size=320, seed=8,
                sample_frames=frames, weights={"nope": np.zeros(3, dtype=np.float32)},
            )
