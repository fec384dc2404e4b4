"""Run configuration: one strict JSON document drives a whole experiment."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .manifold import BallParams


@dataclass
class PipelineConfig:
    # sequence / model dimensions
    t_frames: int = 4
    n_joints: int = 5
    feat_dim: int = 16
    model_dim: int = 32
    heads: int = 2
    n_coarse: int = 8
    n_fine: int = 24
    # training
    seed: int = 0
    learning_rate: float = 0.005
    momentum: float = 0.9
    steps: int = 1500
    disable_hmo: bool = False
    # loss weights
    lambda_mesh: float = 1.0
    lambda_joint: float = 1.0
    lambda_hyper: float = 1.0
    lambda_normal: float = 0.1
    lambda_edge: float = 20.0
    hymesh_scale: float = 1.0
    # numerics
    float_width: str = "wide"
    eps_ball: float | None = None
    eps_norm: float | None = None
    # synthetic scene shaping
    motion_amplitude: float = 0.15
    feature_noise: float = 0.01
    # evaluation
    root_joint: int = 0
    # paths
    topology_path: str = ""
    template_mesh_path: str = ""
    output_dir: str = "out"

    def __post_init__(self):
        if self.t_frames < 2 or self.t_frames % 2 != 0:
            raise ConfigError(f"t_frames must be even and >= 2, got {self.t_frames}")
        for name in ("n_joints", "feat_dim", "model_dim", "heads", "n_coarse",
                     "n_fine"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.model_dim % self.heads != 0:
            raise ConfigError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.feat_dim % self.heads != 0:
            raise ConfigError(
                f"feat_dim {self.feat_dim} not divisible by heads {self.heads}")
        if self.n_coarse < self.n_joints:
            raise ConfigError("n_coarse must be >= n_joints")
        if self.n_fine < self.n_coarse:
            raise ConfigError("n_fine must be >= n_coarse")
        if self.float_width not in ("wide", "narrow"):
            raise ConfigError(f"float_width must be 'wide' or 'narrow', got {self.float_width!r}")
        if not (0 <= self.root_joint < self.n_joints):
            raise ConfigError(f"root_joint {self.root_joint} out of range")
        if self.steps < 0 or self.learning_rate < 0:
            raise ConfigError("steps and learning_rate must be nonnegative")

    def ball_params(self) -> BallParams:
        if self.eps_ball is None and self.eps_norm is None:
            if self.float_width == "wide":
                return BallParams(eps_ball=1e-5, eps_norm=1e-12)
            return BallParams(eps_ball=1e-4, eps_norm=1e-7)
        eps_ball = self.eps_ball if self.eps_ball is not None else 1e-5
        eps_norm = self.eps_norm if self.eps_norm is not None else eps_ball * 1e-7
        return BallParams(eps_ball=eps_ball, eps_norm=eps_norm)

    def loss_weights(self):
        from .losses import LossWeights
        return LossWeights(lambda_mesh=self.lambda_mesh,
                           lambda_joint=self.lambda_joint,
                           lambda_hyper=self.lambda_hyper,
                           lambda_normal=self.lambda_normal,
                           lambda_edge=self.lambda_edge)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)
