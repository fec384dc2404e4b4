import json

import numpy as np
import pytest

from hypermesh.cli import main
from hypermesh.config import PipelineConfig
from hypermesh.errors import ConfigError, ContractError
from hypermesh.synth import load_scene, save_scene, synth_generate
from hypermesh.tensor import Tensor
from hypermesh.tensor_io import (load_checkpoint, load_tensor, save_checkpoint,
                                 save_tensor)
from hypermesh.train import build_pipeline, train_toy

SMALL = dict(t_frames=4, n_joints=3, feat_dim=8, model_dim=8, heads=2,
             n_coarse=6, n_fine=10, steps=0)


def _small_cfg(**kw):
    return PipelineConfig(**{**SMALL, **kw})


# ---------------------------------------------------------------- config

def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        PipelineConfig.from_dict({"t_frames": 4, "learning_rte": 0.1})


def test_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(t_frames=5)
    with pytest.raises(ConfigError):
        PipelineConfig(model_dim=10, heads=4)
    with pytest.raises(ConfigError):
        PipelineConfig(float_width="double")
    with pytest.raises(ConfigError):
        PipelineConfig(n_coarse=2, n_joints=5)


def test_config_save_load_roundtrip(tmp_path):
    cfg = _small_cfg(seed=7, learning_rate=0.01)
    path = tmp_path / "config.json"
    cfg.save(path)
    assert PipelineConfig.load(path) == cfg


def test_config_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        PipelineConfig.load(path)


def test_float_width_policies():
    wide = _small_cfg(float_width="wide").ball_params()
    narrow = _small_cfg(float_width="narrow").ball_params()
    assert (wide.eps_ball, wide.eps_norm) == (1e-5, 1e-12)
    assert (narrow.eps_ball, narrow.eps_norm) == (1e-4, 1e-7)


# ---------------------------------------------------------------- tensor io

def test_tensor_io_bit_exact_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(3, 4, 5))
    path = tmp_path / "t.gymt"
    save_tensor(path, arr)
    back = load_tensor(path)
    assert back.tobytes() == arr.tobytes()
    save_tensor(path, back)
    assert path.read_bytes() == path.read_bytes()


def test_tensor_io_bad_magic(tmp_path):
    path = tmp_path / "bad.gymt"
    path.write_bytes(b"WRONGMAG" + b"\x00" * 16)
    with pytest.raises(ContractError, match="magic"):
        load_tensor(path)


def test_tensor_io_truncated(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "t.gymt"
    save_tensor(path, rng.normal(size=(4, 4)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ContractError, match="truncated"):
        load_tensor(path)


def test_checkpoint_roundtrip_and_byte_identity(tmp_path):
    rng = np.random.default_rng(2)
    params = {"a.w": rng.normal(size=(3, 2)), "b": rng.normal(size=5)}
    m1 = save_checkpoint(tmp_path / "c1", params)
    m2 = save_checkpoint(tmp_path / "c2", load_checkpoint(m1))
    assert m1.read_bytes() == m2.read_bytes()
    for entry in json.loads(m1.read_text()).values():
        f1 = (tmp_path / "c1" / entry["file"]).read_bytes()
        f2 = (tmp_path / "c2" / entry["file"]).read_bytes()
        assert f1 == f2


# ---------------------------------------------------------------- synth

def test_synth_deterministic_given_seed():
    a = synth_generate(_small_cfg(seed=3))
    b = synth_generate(_small_cfg(seed=3))
    assert np.array_equal(a.poses, b.poses)
    assert np.array_equal(a.feats, b.feats)
    c = synth_generate(_small_cfg(seed=4))
    assert not np.array_equal(a.poses, c.poses)


def test_scene_save_load_roundtrip(tmp_path):
    scene = synth_generate(_small_cfg(seed=6))
    save_scene(scene, tmp_path / "scene")
    back = load_scene(tmp_path / "scene")
    assert np.array_equal(back.poses, scene.poses)
    assert np.array_equal(back.fine_meshes, scene.fine_meshes)
    assert np.array_equal(back.topology.upsampler, scene.topology.upsampler)
    assert np.array_equal(back.regressor.matrix, scene.regressor.matrix)


def test_fine_mesh_is_upsampled_coarse():
    scene = synth_generate(_small_cfg(seed=8))
    for t in range(scene.poses.shape[0]):
        np.testing.assert_allclose(
            scene.fine_meshes[t],
            scene.topology.upsampler @ scene.coarse_meshes[t], atol=1e-12)


# ---------------------------------------------------------------- training

def test_train_smoke_writes_artifacts(tmp_path):
    cfg = _small_cfg(steps=3, learning_rate=0.001)
    result = train_toy(cfg, out_dir=tmp_path / "run")
    assert len(result.losses) == 3
    assert result.checkpoint_path.exists()
    lines = result.loss_curve_path.read_text().splitlines()
    assert lines[0] == "step,loss"
    assert len(lines) == 4


def test_train_checkpoint_reproduces_forward(tmp_path):
    cfg = _small_cfg(steps=2, learning_rate=0.001)
    scene = synth_generate(cfg)
    result = train_toy(cfg, scene=scene, out_dir=tmp_path / "run")
    pipe = build_pipeline(cfg, scene)
    pipe.load_state_dict(load_checkpoint(result.checkpoint_path))
    out = pipe.run_sequence(Tensor(scene.poses), Tensor(scene.feats))
    assert np.all(np.isfinite(out[0].m_out.vertices.data))


# ---------------------------------------------------------------- cli

def _write_cfg(tmp_path, **kw):
    cfg = _small_cfg(**kw)
    path = tmp_path / "config.json"
    cfg.save(path)
    return path


def test_cli_synth_train_eval_export(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path, steps=2, learning_rate=0.001)
    assert main(["synth", "--config", str(cfg_path),
                 "--out", str(tmp_path / "scene")]) == 0
    assert main(["train", "--config", str(cfg_path),
                 "--out", str(tmp_path / "run")]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    train_info = json.loads(out[-1])
    ckpt = train_info["checkpoint"]
    assert main(["eval", "--config", str(cfg_path), "--checkpoint", ckpt,
                 "--report", str(tmp_path / "report.csv"),
                 "--scene", str(tmp_path / "scene")]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert set(summary) == {"mpjpe_mm", "pa_mpjpe_mm", "mpvpe_mm",
                            "accel_error_mm"}
    assert (tmp_path / "report.csv").exists()
    assert main(["export-mesh", "--config", str(cfg_path),
                 "--checkpoint", ckpt, "--frame", "0",
                 "--out", str(tmp_path / "frame0.obj"),
                 "--scene", str(tmp_path / "scene")]) == 0
    assert (tmp_path / "frame0.obj").read_text().startswith("v ")


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text('{"t_frames": 5}\n')
    assert main(["synth", "--config", str(path),
                 "--out", str(tmp_path / "scene")]) == 3
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config"


def test_cli_missing_file_exit_code(tmp_path, capsys):
    assert main(["synth", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "scene")]) == 4
    assert json.loads(capsys.readouterr().err.strip())["error"] == "io"


def test_cli_propcheck_filtered(capsys):
    assert main(["propcheck", "--module", "temporal", "--cases", "3"]) == 0
    out = capsys.readouterr().out
    assert "PASS temporal/gru_vs_loop_oracle" in out


def test_cli_gradcheck_filtered(capsys):
    assert main(["gradcheck", "--module", "temporal"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
