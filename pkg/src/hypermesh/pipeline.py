"""Coarse-mesh optimization blocks and the end-to-end sequence pipeline.

Two architecturally identical blocks refine the learnable coarse template:
one attends to the frame's static 3D pose, the other to the pose motion
codes. Their outputs are summed and upsampled to the fine mesh with a fixed
row-stochastic matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError, TopologyError
from .layers import (HyperAdaLN, HyperAttention, HyperFFN, Linear,
                     mobius_residual)
from .manifold import BallParams, DEFAULT_PARAMS, expmap0, logmap0, max_trailing_norm
from .module import Module
from .temporal import TemporalPriorExtractor
from .tensor import Tensor
from .tensor_io import load_tensor, save_tensor


@dataclass
class MeshTopology:
    """Coarse/fine vertex counts, coarse edges, fine faces, and the upsampler U."""

    n_coarse: int
    n_fine: int
    edges: np.ndarray       # [E, 2] coarse vertex index pairs
    faces: np.ndarray       # [F, 3] fine vertex triangles
    upsampler: np.ndarray   # [n_fine, n_coarse], row-stochastic

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self.upsampler = np.asarray(self.upsampler, dtype=np.float64)
        if self.upsampler.shape != (self.n_fine, self.n_coarse):
            raise TopologyError(
                f"upsampler shape {self.upsampler.shape} != ({self.n_fine}, {self.n_coarse})")
        if np.any(self.upsampler < 0):
            raise TopologyError("upsampler has negative entries")
        row_sums = self.upsampler.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-9):
            raise TopologyError("upsampler rows must sum to 1 within 1e-9")
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n_coarse):
            raise TopologyError("edge index out of range")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= self.n_fine):
            raise TopologyError("face index out of range")

    def save(self, directory: str | Path, name: str = "topology") -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        ufile = f"{name}_upsampler.gymt"
        save_tensor(directory / ufile, self.upsampler)
        spec = {
            "n_coarse": self.n_coarse,
            "n_fine": self.n_fine,
            "edges": self.edges.tolist(),
            "faces": self.faces.tolist(),
            "upsampler_file": ufile,
        }
        path = directory / f"{name}.json"
        with open(path, "w") as fh:
            json.dump(spec, fh)
            fh.write("\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "MeshTopology":
        path = Path(path)
        with open(path) as fh:
            spec = json.load(fh)
        upsampler = load_tensor(path.parent / spec["upsampler_file"])
        return cls(n_coarse=spec["n_coarse"], n_fine=spec["n_fine"],
                   edges=np.asarray(spec["edges"]), faces=np.asarray(spec["faces"]),
                   upsampler=upsampler)


@dataclass
class MeshState:
    """A vertex set tied to its topology."""

    vertices: Tensor
    topology: MeshTopology


def export_obj(path: str | Path, vertices: np.ndarray, faces: np.ndarray) -> None:
    """Write a minimal OBJ file (1-based face indices)."""
    with open(path, "w") as fh:
        for v in np.asarray(vertices, dtype=np.float64):
            fh.write(f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}\n")
        for f in np.asarray(faces, dtype=np.int64):
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


class OptBlock(Module):
    """One hyperbolic mesh-refinement block (shared by the pose and motion paths).

    Pipeline per frame: embed mesh/pose streams to width d with learnable
    positional encodings, lift to the ball, condition the mesh tokens on the
    frame's prior row (adaptive LN), cross-attend mesh<-pose, then a
    self-attention stage, each followed by conditioned FFN sub-blocks with
    Möbius residuals, and finally map back to Euclidean coordinates.
    """

    def __init__(self, n_tokens: int, n_keys: int, cond_dim: int, dim: int,
                 heads: int, rng: np.random.Generator,
                 params: BallParams = DEFAULT_PARAMS):
        self.embed_mesh = Linear(3, dim, rng)
        self.embed_pose = Linear(3, dim, rng)
        self.pos_mesh = Tensor(rng.uniform(-0.05, 0.05, size=(n_tokens, dim)),
                               requires_grad=True)
        self.pos_pose = Tensor(rng.uniform(-0.05, 0.05, size=(n_keys, dim)),
                               requires_grad=True)
        self.adaln_in = HyperAdaLN(dim, cond_dim, rng, params)
        self.cross_att = HyperAttention(dim, heads, rng, params)
        self.adaln_mid = HyperAdaLN(dim, cond_dim, rng, params)
        self.ffn_mid = HyperFFN(dim, rng, params)
        self.self_att = HyperAttention(dim, heads, rng, params)
        self.adaln_out = HyperAdaLN(dim, cond_dim, rng, params)
        self.ffn_out = HyperFFN(dim, rng, params)
        self.head = Linear(dim, 3, rng)
        self.params = params
        self.last_intermediate_norms: list[float] = []

    def _track(self, x: Tensor) -> Tensor:
        self.last_intermediate_norms.append(max_trailing_norm(x))
        return x

    def __call__(self, m_init: Tensor, tm_row: Tensor, pose: Tensor) -> Tensor:
        if m_init.shape[-1] != 3 or pose.shape[-1] != 3:
            raise ShapeError("mesh and pose streams must have trailing dim 3")
        self.last_intermediate_norms = []
        p = self.params

        mesh_tokens = self.embed_mesh(m_init) + self.pos_mesh
        pose_tokens = self.embed_pose(pose) + self.pos_pose
        m_hat = self._track(expmap0(mesh_tokens, p))
        p_hat = self._track(expmap0(pose_tokens, p))

        m_mix = self._track(self.adaln_in(m_hat, tm_row))
        x_pm = self._track(mobius_residual(self.cross_att(m_mix, p_hat), m_mix, p))
        x_ada = self._track(self.adaln_mid(x_pm, tm_row))
        x_m = self._track(mobius_residual(self.ffn_mid(x_ada), x_pm, p))

        x_p = self._track(mobius_residual(self.self_att(x_m, x_m), x_m, p))
        m_ref = self._track(
            mobius_residual(self.ffn_out(self.adaln_out(x_p, tm_row)), x_p, p))

        return self.head(logmap0(m_ref, p))


def fuse_and_upsample(m_p: MeshState, m_m: MeshState) -> tuple[MeshState, MeshState]:
    """M_opt = M_p + M_m on the coarse mesh, M_out = U . M_opt on the fine mesh."""
    topo = m_p.topology
    if m_m.topology is not topo and (
            m_m.topology.n_coarse != topo.n_coarse or m_m.topology.n_fine != topo.n_fine):
        raise TopologyError("fuse_and_upsample: mismatched topologies")
    if m_p.vertices.shape != (topo.n_coarse, 3) or m_m.vertices.shape != (topo.n_coarse, 3):
        raise ShapeError("fuse_and_upsample expects coarse [n_coarse, 3] meshes")
    m_opt = m_p.vertices + m_m.vertices
    m_out = Tensor(topo.upsampler) @ m_opt
    return MeshState(m_opt, topo), MeshState(m_out, topo)


@dataclass
class FrameResult:
    m_p: Tensor
    m_m: Tensor
    m_opt: MeshState
    m_out: MeshState


class MeshPipeline(Module):
    """Temporal prior extractor + dual optimization blocks + upsampling."""

    def __init__(self, n_joints: int, feat_dim: int, dim: int, heads: int,
                 topology: MeshTopology, template: np.ndarray,
                 rng: np.random.Generator, params: BallParams = DEFAULT_PARAMS):
        template = np.asarray(template, dtype=np.float64)
        if template.shape != (topology.n_coarse, 3):
            raise ShapeError(
                f"template shape {template.shape} != ({topology.n_coarse}, 3)")
        self.prior = TemporalPriorExtractor(n_joints, feat_dim, heads, rng)
        self.hpo = OptBlock(topology.n_coarse, n_joints, feat_dim, dim, heads, rng, params)
        self.hmo = OptBlock(topology.n_coarse, n_joints, feat_dim, dim, heads, rng, params)
        self.template = Tensor(template.copy(), requires_grad=True)
        self.topology = topology
        self.params = params
        self.n_joints = n_joints
        self.feat_dim = feat_dim

    def run_frame(self, tm_pr: Tensor, poses: Tensor, p_motion: Tensor,
                  frame: int, disable_hmo: bool = False) -> FrameResult:
        t_frames = tm_pr.shape[0]
        if not (0 <= frame < t_frames):
            raise ContractError(f"frame {frame} out of range [0, {t_frames})")
        tm_row = tm_pr[frame]
        m_p = self.hpo(self.template, tm_row, poses[frame])
        if disable_hmo:
            m_m = Tensor(np.zeros_like(m_p.data))
        else:
            m_m = self.hmo(self.template, tm_row, p_motion[frame])
        m_opt, m_out = fuse_and_upsample(
            MeshState(m_p, self.topology), MeshState(m_m, self.topology))
        return FrameResult(m_p=m_p, m_m=m_m, m_opt=m_opt, m_out=m_out)

    def run_sequence(self, poses: Tensor, feats: Tensor,
                     disable_hmo: bool = False) -> list[FrameResult]:
        if poses.shape[0] != feats.shape[0]:
            raise ShapeError(
                f"pose/feature frame counts differ: {poses.shape[0]} vs {feats.shape[0]}")
        prior = self.prior(poses, feats)
        return [self.run_frame(prior.tm_pr, poses, prior.p_motion, t, disable_hmo)
                for t in range(poses.shape[0])]

    def max_intermediate_norm(self) -> float:
        norms = self.hpo.last_intermediate_norms + self.hmo.last_intermediate_norms
        return max(norms) if norms else 0.0
