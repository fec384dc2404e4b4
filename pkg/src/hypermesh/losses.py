"""Training losses: Euclidean mesh/joint/normal/edge terms plus the
hyperbolic mesh loss computed after lifting both vertex sets onto the ball."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError
from .manifold import BallParams, DEFAULT_PARAMS, expmap0
from .pipeline import MeshTopology
from .tensor import Tensor


@dataclass(frozen=True)
class LossWeights:
    """Scalar weights of the total loss; defaults follow the training recipe."""

    lambda_mesh: float = 1.0
    lambda_joint: float = 1.0
    lambda_hyper: float = 1.0
    lambda_normal: float = 0.1
    lambda_edge: float = 20.0

    def __post_init__(self):
        for name, v in vars(self).items():
            if v < 0:
                raise ContractError(f"{name} must be nonnegative, got {v}")


@dataclass
class JointRegressor:
    """Row-stochastic map [J, n_fine] from fine vertices to joints."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ShapeError("joint regressor must be 2-D")
        if np.any(np.abs(self.matrix.sum(axis=1) - 1.0) > 1e-9):
            raise ContractError("joint regressor rows must sum to 1 within 1e-9")

    def __call__(self, vertices: Tensor) -> Tensor:
        return Tensor(self.matrix) @ vertices


@dataclass
class EuclideanLosses:
    mesh: Tensor
    joint: Tensor
    normal: Tensor
    edge: Tensor
    degenerate_faces: int


def hyperbolic_mesh_loss(pred: Tensor, gt: Tensor,
                         params: BallParams = DEFAULT_PARAMS,
                         scale: float = 1.0) -> Tensor:
    """Mean per-vertex L1 distance after mapping both meshes onto the ball.

    ``scale`` rescales meter coordinates before the exponential map; the
    default assumes O(1) vertex coordinates.
    """
    if pred.shape != gt.shape:
        raise ShapeError(f"mesh shapes differ: {pred.shape} vs {gt.shape}")
    e_pred = expmap0(pred * scale, params)
    e_gt = expmap0(gt * scale, params)
    return T.tabs(e_gt - e_pred).sum(axis=-1).mean()


def _mean_l1(pred: Tensor, gt: Tensor) -> Tensor:
    return T.tabs(pred - gt).sum(axis=-1).mean()


def euclidean_losses(pred_fine: Tensor, gt_fine: Tensor,
                     pred_coarse: Tensor, gt_coarse: Tensor,
                     regressor: JointRegressor,
                     topology: MeshTopology) -> EuclideanLosses:
    """Mesh/joint L1, face-normal, and coarse-edge-length losses.

    Normals use ground-truth unit face normals against unit predicted edge
    vectors; zero-area ground-truth faces are skipped and tallied. Edge
    lengths are compared on the coarse topology edges.
    """
    if pred_fine.shape != gt_fine.shape:
        raise ShapeError(f"fine mesh shapes differ: {pred_fine.shape} vs {gt_fine.shape}")
    if pred_coarse.shape != gt_coarse.shape:
        raise ShapeError(
            f"coarse mesh shapes differ: {pred_coarse.shape} vs {gt_coarse.shape}")

    l_mesh = _mean_l1(pred_fine, gt_fine)
    l_joint = _mean_l1(regressor(pred_fine), regressor(gt_fine))

    faces = topology.faces
    degenerate = 0
    if faces.size:
        gt_np = gt_fine.data
        v0, v1, v2 = gt_np[faces[:, 0]], gt_np[faces[:, 1]], gt_np[faces[:, 2]]
        normals = np.cross(v1 - v0, v2 - v0)
        areas = np.linalg.norm(normals, axis=-1)
        keep = areas > 1e-12
        degenerate = int((~keep).sum())
        faces = faces[keep]
    if faces.size:
        n_hat = Tensor(normals[keep] / areas[keep, None])
        terms = []
        cycle = [(0, 1), (1, 2), (2, 0)]
        for a, b in cycle:
            e = pred_fine[faces[:, b]] - pred_fine[faces[:, a]]
            e_hat = e / T.l2norm(e, axis=-1, keepdims=True, eps=1e-12)
            terms.append(T.tabs((e_hat * n_hat).sum(axis=-1)))
        l_normal = sum(terms[1:], terms[0]).mean()
    else:
        l_normal = Tensor(0.0)

    edges = topology.edges
    if edges.size:
        e_pred = pred_coarse[edges[:, 0]] - pred_coarse[edges[:, 1]]
        e_gt = gt_coarse[edges[:, 0]] - gt_coarse[edges[:, 1]]
        len_pred = T.l2norm(e_pred, axis=-1, keepdims=False, eps=1e-12)
        len_gt = T.l2norm(e_gt, axis=-1, keepdims=False, eps=1e-12)
        l_edge = T.tabs(len_pred - len_gt).mean()
    else:
        l_edge = Tensor(0.0)

    return EuclideanLosses(mesh=l_mesh, joint=l_joint, normal=l_normal,
                           edge=l_edge, degenerate_faces=degenerate)


def total_loss(losses: EuclideanLosses, hymesh: Tensor,
               weights: LossWeights = LossWeights()) -> Tensor:
    """Weighted sum of the Euclidean terms and the hyperbolic mesh loss."""
    return (weights.lambda_mesh * losses.mesh
            + weights.lambda_joint * losses.joint
            + weights.lambda_normal * losses.normal
            + weights.lambda_edge * losses.edge
            + weights.lambda_hyper * hymesh)
