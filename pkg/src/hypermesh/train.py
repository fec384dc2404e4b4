"""Toy training harness: full-batch gradient descent on one synthetic scene,
with ball re-projection after every parameter update, loss-curve CSV, and
bit-exact checkpointing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .config import PipelineConfig
from .errors import NumericError
from .losses import euclidean_losses, hyperbolic_mesh_loss, total_loss
from .manifold import BallParams
from .metrics import write_metric_report
from .pipeline import MeshPipeline
from .synth import SyntheticScene, fibonacci_sphere, synth_generate
from .tensor import Tensor
from .tensor_io import load_checkpoint, load_tensor, save_checkpoint


class SGD:
    """Plain SGD with optional momentum; ball-constrained parameters are
    re-projected onto the ball after every update."""

    def __init__(self, params, ball_params_list, lr: float, momentum: float = 0.0,
                 ball: BallParams = BallParams()):
        self.params = list(params)
        self.ball_set = {id(p) for p in ball_params_list}
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]
        self.ball = ball

    def step(self) -> None:
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            p.data = p.data - self.lr * v
            if id(p) in self.ball_set:
                self._reproject(p)

    def _reproject(self, p) -> None:
        max_norm = 1.0 - self.ball.eps_ball
        norms = np.sqrt((p.data * p.data).sum(axis=-1, keepdims=True))
        scale = np.where(norms > max_norm, max_norm / np.maximum(norms, 1e-300), 1.0)
        p.data = p.data * scale

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def build_pipeline(cfg: PipelineConfig, scene: SyntheticScene) -> MeshPipeline:
    rng = np.random.default_rng(cfg.seed + 1)
    if cfg.template_mesh_path:
        template = load_tensor(cfg.template_mesh_path)
    else:
        template = fibonacci_sphere(cfg.n_coarse)
    return MeshPipeline(n_joints=cfg.n_joints, feat_dim=cfg.feat_dim,
                        dim=cfg.model_dim, heads=cfg.heads,
                        topology=scene.topology, template=template,
                        rng=rng, params=cfg.ball_params())


def scene_loss(pipeline: MeshPipeline, scene: SyntheticScene, cfg: PipelineConfig,
               disable_hmo: bool = False) -> Tensor:
    """Mean over frames of the full weighted loss against the scene's ground truth."""
    weights = cfg.loss_weights()
    ball = cfg.ball_params()
    results = pipeline.run_sequence(Tensor(scene.poses), Tensor(scene.feats),
                                    disable_hmo=disable_hmo)
    per_frame = []
    for t, frame in enumerate(results):
        gt_fine = Tensor(scene.fine_meshes[t])
        gt_coarse = Tensor(scene.coarse_meshes[t])
        eu = euclidean_losses(frame.m_out.vertices, gt_fine,
                              frame.m_opt.vertices, gt_coarse,
                              scene.regressor, scene.topology)
        hy = hyperbolic_mesh_loss(frame.m_out.vertices, gt_fine, ball,
                                  scale=cfg.hymesh_scale)
        per_frame.append(total_loss(eu, hy, weights))
    total = per_frame[0]
    for term in per_frame[1:]:
        total = total + term
    return total * (1.0 / len(per_frame))


def _diagnose_nonfinite(pipeline, scene, cfg, disable_hmo) -> str:
    T.set_finite_checks(True)
    try:
        scene_loss(pipeline, scene, cfg, disable_hmo)
    except NumericError as exc:
        return str(exc)
    finally:
        T.set_finite_checks(False)
    return "loss non-finite but forward re-run was finite"


@dataclass
class TrainResult:
    losses: list[float]
    checkpoint_path: Path
    loss_curve_path: Path

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def train_toy(cfg: PipelineConfig, scene: SyntheticScene | None = None,
              out_dir: str | Path | None = None) -> TrainResult:
    if scene is None:
        scene = synth_generate(cfg)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    pipeline = build_pipeline(cfg, scene)
    opt = SGD(pipeline.parameters(), pipeline.ball_parameters(),
              lr=cfg.learning_rate, momentum=cfg.momentum,
              ball=cfg.ball_params())

    losses: list[float] = []
    for step in range(cfg.steps):
        # cosine decay: full-batch descent oscillates at a constant rate,
        # annealing to zero lets the loss settle instead of cycling
        opt.lr = cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / cfg.steps))
        opt.zero_grad()
        loss = scene_loss(pipeline, scene, cfg, disable_hmo=cfg.disable_hmo)
        value = loss.item()
        if not np.isfinite(value):
            detail = _diagnose_nonfinite(pipeline, scene, cfg, cfg.disable_hmo)
            raise NumericError(f"training aborted at step {step}: {detail}")
        losses.append(value)
        loss.backward()
        opt.step()
    if not losses:
        losses.append(scene_loss(pipeline, scene, cfg,
                                 disable_hmo=cfg.disable_hmo).item())

    curve_path = out / "loss_curve.csv"
    with open(curve_path, "w", newline="") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(losses):
            fh.write(f"{i},{v:.12g}\n")

    ckpt_path = save_checkpoint(out / "checkpoint", pipeline.state_dict())
    return TrainResult(losses=losses, checkpoint_path=ckpt_path,
                       loss_curve_path=curve_path)


def evaluate(cfg: PipelineConfig, checkpoint_manifest: str | Path,
             report_path: str | Path, scene: SyntheticScene | None = None) -> dict:
    """Load a checkpoint, run the pipeline, and write the per-frame metric CSV."""
    if scene is None:
        scene = synth_generate(cfg)
    pipeline = build_pipeline(cfg, scene)
    pipeline.load_state_dict(load_checkpoint(checkpoint_manifest))
    results = pipeline.run_sequence(Tensor(scene.poses), Tensor(scene.feats),
                                    disable_hmo=cfg.disable_hmo)
    pred_fine = np.stack([f.m_out.vertices.data for f in results])
    pred_joints = np.einsum("jf,tfx->tjx", scene.regressor.matrix, pred_fine)
    write_metric_report(report_path, pred_joints, scene.poses,
                        pred_fine, scene.fine_meshes, root_idx=cfg.root_joint)
    from .metrics import accel_error, mpjpe, mpvpe, pa_mpjpe
    return {
        "mpjpe_mm": mpjpe(pred_joints, scene.poses, cfg.root_joint),
        "pa_mpjpe_mm": pa_mpjpe(pred_joints, scene.poses, cfg.root_joint),
        "mpvpe_mm": mpvpe(pred_fine, scene.fine_meshes),
        "accel_error_mm": accel_error(pred_joints, scene.poses),
    }
