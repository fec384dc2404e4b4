"""Synthetic scenes: a sinusoidally articulating toy skeleton, a coarse mesh
skinned to it, a fine mesh produced by the fixed upsampler, and image-like
features derived from the poses. Everything is a deterministic function of
the config seed."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .losses import JointRegressor
from .pipeline import MeshTopology
from .tensor_io import load_tensor, save_tensor


@dataclass
class SyntheticScene:
    poses: np.ndarray          # [T, J, 3] gt joints, meters
    coarse_meshes: np.ndarray  # [T, n_coarse, 3]
    fine_meshes: np.ndarray    # [T, n_fine, 3]
    feats: np.ndarray          # [T, feat_dim]
    topology: MeshTopology
    regressor: JointRegressor


def fibonacci_sphere(n: int, radius: float = 0.5) -> np.ndarray:
    """Deterministic near-uniform sampling of a sphere; the toy mesh template."""
    i = np.arange(n, dtype=np.float64)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    y = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(1.0 - y * y, 0.0))
    theta = golden * i
    return radius * np.stack([r * np.cos(theta), y, r * np.sin(theta)], axis=-1)


def build_toy_topology(cfg: PipelineConfig, rng: np.random.Generator) -> MeshTopology:
    nc, nf = cfg.n_coarse, cfg.n_fine
    upsampler = np.zeros((nf, nc))
    upsampler[:nc, :nc] = np.eye(nc)
    for v in range(nc, nf):
        picks = rng.choice(nc, size=min(3, nc), replace=False)
        weights = rng.random(len(picks)) + 0.1
        upsampler[v, picks] = weights / weights.sum()

    edges = {(i, (i + 1) % nc) for i in range(nc)}
    for _ in range(nc):
        a, b = rng.choice(nc, size=2, replace=False)
        edges.add((min(a, b), max(a, b)))
    edges = sorted((a, b) for a, b in edges if a != b)

    faces = set()
    while len(faces) < nf:
        tri = tuple(sorted(rng.choice(nf, size=3, replace=False)))
        faces.add(tri)
    faces = sorted(faces)

    return MeshTopology(n_coarse=nc, n_fine=nf, edges=np.asarray(edges),
                        faces=np.asarray(faces), upsampler=upsampler)


def build_regressor(cfg: PipelineConfig) -> JointRegressor:
    # fine vertex j is the identity-upsampled copy of coarse anchor j,
    # which the generator pins exactly at joint j
    r = np.zeros((cfg.n_joints, cfg.n_fine))
    r[np.arange(cfg.n_joints), np.arange(cfg.n_joints)] = 1.0
    return JointRegressor(r)


def synth_generate(cfg: PipelineConfig) -> SyntheticScene:
    """Build one deterministic scene from the config seed."""
    rng = np.random.default_rng(cfg.seed)
    t_frames, j = cfg.t_frames, cfg.n_joints

    base = rng.uniform(-0.4, 0.4, size=(j, 3))
    amp = rng.uniform(0.2, 1.0, size=(j, 3)) * cfg.motion_amplitude
    freq = rng.integers(1, 4, size=(j, 3)).astype(np.float64)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=(j, 3))
    t = np.arange(t_frames, dtype=np.float64)[:, None, None]
    poses = base + amp * np.sin(2.0 * math.pi * freq * t / t_frames + phase)

    topology = build_toy_topology(cfg, rng)
    assign = np.arange(cfg.n_coarse) % j
    offsets = rng.uniform(-0.1, 0.1, size=(cfg.n_coarse, 3))
    offsets[:j] = 0.0  # anchors sit exactly on their joints
    coarse = poses[:, assign, :] + offsets
    fine = np.einsum("fc,tcx->tfx", topology.upsampler, coarse)

    proj = rng.normal(size=(cfg.feat_dim, 3 * j)) / math.sqrt(3 * j)
    feats = poses.reshape(t_frames, 3 * j) @ proj.T
    feats = feats + cfg.feature_noise * rng.normal(size=feats.shape)

    return SyntheticScene(poses=poses, coarse_meshes=coarse, fine_meshes=fine,
                          feats=feats, topology=topology,
                          regressor=build_regressor(cfg))


def save_scene(scene: SyntheticScene, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_tensor(directory / "poses.gymt", scene.poses)
    save_tensor(directory / "coarse_meshes.gymt", scene.coarse_meshes)
    save_tensor(directory / "fine_meshes.gymt", scene.fine_meshes)
    save_tensor(directory / "feats.gymt", scene.feats)
    save_tensor(directory / "regressor.gymt", scene.regressor.matrix)
    scene.topology.save(directory)
    return directory


def load_scene(directory: str | Path) -> SyntheticScene:
    directory = Path(directory)
    return SyntheticScene(
        poses=load_tensor(directory / "poses.gymt"),
        coarse_meshes=load_tensor(directory / "coarse_meshes.gymt"),
        fine_meshes=load_tensor(directory / "fine_meshes.gymt"),
        feats=load_tensor(directory / "feats.gymt"),
        topology=MeshTopology.load(directory / "topology.json"),
        regressor=JointRegressor(load_tensor(directory / "regressor.gymt")),
    )
