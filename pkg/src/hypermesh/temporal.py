"""Temporal motion prior extraction.

Pose stream: frame differences + sequence average -> GRU -> per-frame motion
code. Feature stream: split at the middle frame, one GRU per half, concat,
Euclidean multi-head self-attention. The fused prior is the attention output
plus a learned projection of the pose motion codes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError
from .layers import Linear, _uniform
from .module import Module
from .tensor import Tensor


@dataclass
class MotionPrior:
    """Fused temporal prior: tm_pr [T, D_f] and pose motion codes [T, J, 3]."""

    tm_pr: Tensor
    p_motion: Tensor


class GruCell(Module):
    """Single-layer GRU over a [T, input] sequence, zero initial state.

    Gate convention: z = sigmoid, r = sigmoid, candidate = tanh,
    h' = (1 - z) * candidate + z * h.
    """

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.w_z = _uniform(rng, (hidden_dim, input_dim))
        self.u_z = _uniform(rng, (hidden_dim, hidden_dim))
        self.b_z = Tensor(np.zeros(hidden_dim), requires_grad=True)
        self.w_r = _uniform(rng, (hidden_dim, input_dim))
        self.u_r = _uniform(rng, (hidden_dim, hidden_dim))
        self.b_r = Tensor(np.zeros(hidden_dim), requires_grad=True)
        self.w_h = _uniform(rng, (hidden_dim, input_dim))
        self.u_h = _uniform(rng, (hidden_dim, hidden_dim))
        self.b_h = Tensor(np.zeros(hidden_dim), requires_grad=True)
        self.hidden_dim = hidden_dim
        self.input_dim = input_dim

    def step(self, x_t: Tensor, h: Tensor) -> Tensor:
        z = T.sigmoid(x_t @ self.w_z.T + h @ self.u_z.T + self.b_z)
        r = T.sigmoid(x_t @ self.w_r.T + h @ self.u_r.T + self.b_r)
        cand = T.tanh(x_t @ self.w_h.T + (r * h) @ self.u_h.T + self.b_h)
        return (1.0 - z) * cand + z * h

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"GRU expects [T, {self.input_dim}], got {x.shape}")
        t_frames = x.shape[0]
        h = Tensor(np.zeros((1, self.hidden_dim)))
        outputs = []
        for t in range(t_frames):
            h = self.step(x[t:t + 1], h)
            outputs.append(h)
        return T.concat(outputs, axis=0)


class EuclideanAttention(Module):
    """Standard multi-head self/cross attention over token rows."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads != 0:
            raise ShapeError(f"dim {dim} not divisible by heads {heads}")
        self.w_q = _uniform(rng, (dim, dim))
        self.w_k = _uniform(rng, (dim, dim))
        self.w_v = _uniform(rng, (dim, dim))
        self.w_o = _uniform(rng, (dim, dim))
        self.heads = heads
        self.dim = dim

    def _split_heads(self, t: Tensor) -> Tensor:
        n = t.shape[0]
        hd = self.dim // self.heads
        return t.reshape(n, self.heads, hd).transpose((1, 0, 2))

    def __call__(self, queries_src: Tensor, keys_src: Tensor | None = None) -> Tensor:
        if keys_src is None:
            keys_src = queries_src
        nq = queries_src.shape[0]
        hd = self.dim // self.heads
        q = self._split_heads(queries_src @ self.w_q.T)
        k = self._split_heads(keys_src @ self.w_k.T)
        v = self._split_heads(keys_src @ self.w_v.T)
        scores = (q @ k.transpose((0, 2, 1))) * (1.0 / math.sqrt(hd))
        alpha = T.softmax(scores, axis=-1)
        ctx = (alpha @ v).transpose((1, 0, 2)).reshape(nq, self.dim)
        return ctx @ self.w_o.T


class PoseMotionExtractor(Module):
    """Pose-difference + average stream through a GRU; output is [T, J, 3].

    Frame 0 of the difference stream is zero-padded so the sequence keeps
    all T frames; the concat of diff and average happens on the per-joint
    coordinate axis (3 + 3 = 6) before frames are flattened for the GRU.
    """

    def __init__(self, n_joints: int, rng: np.random.Generator):
        self.gru = GruCell(6 * n_joints, 3 * n_joints, rng)
        self.n_joints = n_joints

    def __call__(self, poses: Tensor) -> Tensor:
        if poses.ndim != 3 or poses.shape[1] != self.n_joints or poses.shape[2] != 3:
            raise ShapeError(f"expected [T, {self.n_joints}, 3], got {poses.shape}")
        t_frames = poses.shape[0]
        if t_frames < 2:
            raise ContractError(f"need at least 2 frames, got {t_frames}")
        diff = T.concat(
            [Tensor(np.zeros((1, self.n_joints, 3))), poses[1:] - poses[:-1]], axis=0)
        avg = T.broadcast_to(poses.mean(axis=0, keepdims=True), poses.shape)
        cont = T.concat([diff, avg], axis=-1).reshape(t_frames, 6 * self.n_joints)
        out = self.gru(cont)
        return out.reshape(t_frames, self.n_joints, 3)


class TemporalPriorExtractor(Module):
    """Fuses the feature and pose streams into the temporal motion prior.

    The two sequence halves get separate (untied) GRUs. The pose motion
    codes are reconciled to the feature width with a learned [3J -> D_f]
    projection before the addition.
    """

    def __init__(self, n_joints: int, feat_dim: int, heads: int,
                 rng: np.random.Generator):
        self.pose_motion = PoseMotionExtractor(n_joints, rng)
        self.gru_bef = GruCell(feat_dim, feat_dim, rng)
        self.gru_aft = GruCell(feat_dim, feat_dim, rng)
        self.msa = EuclideanAttention(feat_dim, heads, rng)
        self.motion_proj = Linear(3 * n_joints, feat_dim, rng)
        self.feat_dim = feat_dim
        self.n_joints = n_joints

    def fuse(self, feats: Tensor, p_motion: Tensor) -> MotionPrior:
        t_frames = feats.shape[0]
        if t_frames % 2 != 0:
            raise ContractError(f"sequence length must be even, got {t_frames}")
        if feats.shape[1] != self.feat_dim:
            raise ShapeError(f"expected [T, {self.feat_dim}], got {feats.shape}")
        half = t_frames // 2
        tf_bef = self.gru_bef(feats[:half])
        tf_aft = self.gru_aft(feats[half:])
        tf_cont = T.concat([tf_bef, tf_aft], axis=0)
        mixed = self.msa(tf_cont)
        motion_flat = p_motion.reshape(t_frames, 3 * self.n_joints)
        tm_pr = mixed + self.motion_proj(motion_flat)
        return MotionPrior(tm_pr=tm_pr, p_motion=p_motion)

    def __call__(self, poses: Tensor, feats: Tensor) -> MotionPrior:
        return self.fuse(feats, self.pose_motion(poses))
