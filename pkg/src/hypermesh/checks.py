"""Runnable property and gradient suites.

The numpy reference functions here are deliberately independent of the
autodiff path: they re-evaluate the defining formulas per vector / per time
step / per face with plain numpy, and serve as oracles for the vectorized
Tensor implementations.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.special import erf

from . import tensor as T
from .gradcheck import GradcheckReport, gradcheck
from .layers import (HyperAdaLN, HyperAttention, HyperbolicLinear, HyperFFN,
                     hyper_gelu)
from .manifold import (BallParams, DEFAULT_PARAMS, conformal_factor, expmap0,
                       logmap0, mobius_add, mobius_matvec, project_to_ball)
from .temporal import EuclideanAttention, GruCell, PoseMotionExtractor
from .tensor import Tensor

# ---------------------------------------------------------------------------
# reference (oracle) implementations, plain numpy, loop-based
# ---------------------------------------------------------------------------


def np_safe_norm(v: np.ndarray, eps: float) -> float:
    return math.sqrt(float((v * v).sum()) + eps * eps)


def np_project(v: np.ndarray, p: BallParams = DEFAULT_PARAMS) -> np.ndarray:
    n = math.sqrt(float((v * v).sum()))
    limit = 1.0 - p.eps_ball
    if n > limit:
        return v * (limit / n)
    return v


def np_expmap0(v: np.ndarray, p: BallParams = DEFAULT_PARAMS) -> np.ndarray:
    n = np_safe_norm(v, p.eps_norm)
    return np_project(v * (math.tanh(0.5 * n) / n), p)


def np_logmap0(x: np.ndarray, p: BallParams = DEFAULT_PARAMS) -> np.ndarray:
    n = np_safe_norm(x, p.eps_norm)
    return x * (2.0 * math.atanh(n) / n)


def np_mobius_add(x: np.ndarray, y: np.ndarray,
                  p: BallParams = DEFAULT_PARAMS) -> np.ndarray:
    xy = float((x * y).sum())
    x2 = float((x * x).sum())
    y2 = float((y * y).sum())
    num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y
    den = 1.0 + 2.0 * xy + x2 * y2
    return np_project(num / den, p)


def np_mobius_matvec(w: np.ndarray, x: np.ndarray,
                     p: BallParams = DEFAULT_PARAMS) -> np.ndarray:
    y = w @ x
    nx = np_safe_norm(x, p.eps_norm)
    ny = np_safe_norm(y, p.eps_norm)
    t = math.tanh((ny / nx) * math.atanh(nx))
    return np_project(y * (t / ny), p)


def np_gelu(x: np.ndarray) -> np.ndarray:
    return x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def gru_loop_oracle(cell: GruCell, x: np.ndarray) -> np.ndarray:
    """Step-by-step GRU evaluation with explicit per-frame numpy math."""

    def sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    wz, uz, bz = cell.w_z.data, cell.u_z.data, cell.b_z.data
    wr, ur, br = cell.w_r.data, cell.u_r.data, cell.b_r.data
    wh, uh, bh = cell.w_h.data, cell.u_h.data, cell.b_h.data
    h = np.zeros(cell.hidden_dim)
    out = []
    for t in range(x.shape[0]):
        xt = x[t]
        z = sig(wz @ xt + uz @ h + bz)
        r = sig(wr @ xt + ur @ h + br)
        cand = np.tanh(wh @ xt + uh @ (r * h) + bh)
        h = (1.0 - z) * cand + z * h
        out.append(h.copy())
    return np.stack(out)


def hyper_attention_oracle(att: HyperAttention, q_src: np.ndarray,
                           k_src: np.ndarray) -> np.ndarray:
    """Brute-force hyperbolic attention with explicit i, j, head loops."""
    p = att.params
    heads, d = att.heads, att.dim
    hd = d // heads
    lq = np.stack([np_logmap0(np_mobius_matvec(att.w_q.data, q, p), p) for q in q_src])
    lk = np.stack([np_logmap0(np_mobius_matvec(att.w_k.data, k, p), p) for k in k_src])
    lv = np.stack([np_logmap0(np_mobius_matvec(att.w_v.data, k, p), p) for k in k_src])
    out = np.zeros((q_src.shape[0], d))
    for i in range(q_src.shape[0]):
        ctx = np.zeros(d)
        for h in range(heads):
            sl = slice(h * hd, (h + 1) * hd)
            scores = np.array([float(lq[i, sl] @ lk[j, sl]) / math.sqrt(hd)
                               for j in range(k_src.shape[0])])
            scores -= scores.max()
            alpha = np.exp(scores)
            alpha /= alpha.sum()
            for j in range(k_src.shape[0]):
                ctx[sl] += alpha[j] * lv[j, sl]
        out[i] = np_expmap0(att.w_o.data @ ctx, p)
    return out


def euclidean_attention_oracle(att: EuclideanAttention,
                               x: np.ndarray) -> np.ndarray:
    heads, d = att.heads, att.dim
    hd = d // heads
    q = x @ att.w_q.data.T
    k = x @ att.w_k.data.T
    v = x @ att.w_v.data.T
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        ctx = np.zeros(d)
        for h in range(heads):
            sl = slice(h * hd, (h + 1) * hd)
            scores = np.array([float(q[i, sl] @ k[j, sl]) / math.sqrt(hd)
                               for j in range(x.shape[0])])
            scores -= scores.max()
            alpha = np.exp(scores)
            alpha /= alpha.sum()
            for j in range(x.shape[0]):
                ctx[sl] += alpha[j] * v[j, sl]
        out[i] = att.w_o.data @ ctx
    return out


def adaln_oracle(layer: HyperAdaLN, x: np.ndarray, cond: np.ndarray) -> np.ndarray:
    """logmap0 -> AdaLN -> expmap0, composed one explicit step at a time."""
    p = layer.params
    gamma = layer.gamma_proj.w.data @ cond + layer.gamma_proj.b.data
    beta = layer.beta_proj.w.data @ cond + layer.beta_proj.b.data
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        t = np_logmap0(x[i], p)
        mu = t.mean()
        var = ((t - mu) ** 2).mean()
        t_hat = (t - mu) / math.sqrt(var + layer.eps_var)
        out[i] = np_expmap0(gamma * t_hat + beta, p)
    return out


def losses_loop_oracle(pred_fine, gt_fine, pred_coarse, gt_coarse,
                       regressor_matrix, edges, faces) -> dict:
    """Mesh/joint/normal/edge losses with explicit python loops."""
    v = pred_fine.shape[0]
    l_mesh = sum(float(np.abs(pred_fine[i] - gt_fine[i]).sum()) for i in range(v)) / v
    pj = regressor_matrix @ pred_fine
    gj = regressor_matrix @ gt_fine
    l_joint = sum(float(np.abs(pj[i] - gj[i]).sum()) for i in range(pj.shape[0])) / pj.shape[0]

    terms = []
    for f in faces:
        a, b, c = gt_fine[f[0]], gt_fine[f[1]], gt_fine[f[2]]
        n = np.cross(b - a, c - a)
        area = float(np.linalg.norm(n))
        if area <= 1e-12:
            continue
        n_hat = n / area
        total = 0.0
        for i, j in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            e = pred_fine[j] - pred_fine[i]
            e_hat = e / math.sqrt(float((e * e).sum()) + 1e-24)
            total += abs(float(e_hat @ n_hat))
        terms.append(total)
    l_normal = float(np.mean(terms)) if terms else 0.0

    diffs = []
    for a, b in edges:
        lp = math.sqrt(float(((pred_coarse[a] - pred_coarse[b]) ** 2).sum()) + 1e-24)
        lg = math.sqrt(float(((gt_coarse[a] - gt_coarse[b]) ** 2).sum()) + 1e-24)
        diffs.append(abs(lp - lg))
    l_edge = float(np.mean(diffs)) if diffs else 0.0
    return {"mesh": l_mesh, "joint": l_joint, "normal": l_normal, "edge": l_edge}


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def random_ball_points(rng: np.random.Generator, shape, max_norm: float = 0.9,
                       min_norm: float = 0.0) -> np.ndarray:
    """Uniform-direction points with norms in [min_norm, max_norm]."""
    v = rng.normal(size=shape)
    n = np.sqrt((v * v).sum(axis=-1, keepdims=True))
    radii = rng.uniform(min_norm, max_norm, size=n.shape)
    return v / np.maximum(n, 1e-30) * radii


# ---------------------------------------------------------------------------
# property checks, grouped by module
# ---------------------------------------------------------------------------


def check_manifold_identities(cases: int = 1000, seed: int = 0,
                              tol: float = 1e-9) -> int:
    """Möbius identities and exp/log round trips, including near-boundary norms.

    The x operand sweeps up to 1 - 2*eps_ball; the free operand of the
    cancellation identity stays at norm <= 0.3 so the intermediate sum is
    not boundary-clamped (clamping there would void the exact identity).
    """
    rng = np.random.default_rng(seed)
    p = DEFAULT_PARAMS
    hi = 1.0 - 2.0 * p.eps_ball
    dims = rng.integers(2, 9, size=cases)
    for i in range(cases):
        n = int(dims[i])
        x = random_ball_points(rng, (n,), max_norm=hi)
        y_small = random_ball_points(rng, (n,), max_norm=0.3)
        zero = Tensor(np.zeros(n))
        xt, yt = Tensor(x), Tensor(y_small)

        assert np.abs(mobius_add(xt, zero, p).data - x).max() < tol
        assert np.abs(mobius_add(zero, xt, p).data - x).max() < tol
        z = mobius_add(xt, yt, p)
        back = mobius_add(Tensor(-x), z, p)
        assert np.abs(back.data - y_small).max() < tol
        assert np.abs(mobius_add(Tensor(-x), xt, p).data).max() < tol
        assert np.abs(mobius_matvec(Tensor(np.eye(n)), xt, p).data - x).max() < tol

        v = rng.normal(size=n)
        vn = np.linalg.norm(v)
        if vn > 5.0:
            v *= rng.uniform(0.0, 5.0) / vn
        rt = logmap0(expmap0(Tensor(v), p), p)
        assert np.abs(rt.data - v).max() < tol
        x_mod = random_ball_points(rng, (n,), max_norm=0.999)
        rt2 = expmap0(logmap0(Tensor(x_mod), p), p)
        assert np.abs(rt2.data - x_mod).max() < tol
    return cases


def check_matvec_formulations(cases: int = 1000, seed: int = 1,
                              tol: float = 1e-8) -> int:
    """mobius_matvec must coincide with expmap0(W . logmap0(x))."""
    rng = np.random.default_rng(seed)
    p = DEFAULT_PARAMS
    for _ in range(cases):
        n = int(rng.integers(2, 8))
        m = int(rng.integers(2, 8))
        w = rng.normal(size=(m, n))
        x = random_ball_points(rng, (n,), max_norm=0.99)
        direct = mobius_matvec(Tensor(w), Tensor(x), p).data
        tangent = logmap0(Tensor(x), p).reshape(1, n) @ Tensor(w).T
        via_maps = expmap0(tangent, p).data.reshape(m)
        assert np.abs(direct - via_maps).max() < tol
    return cases


def check_ball_closure(cases: int = 200, seed: int = 2) -> int:
    """All producing ops keep norms <= 1 - eps_ball, incl. near-boundary inputs."""
    rng = np.random.default_rng(seed)
    p = DEFAULT_PARAMS
    limit = 1.0 - p.eps_ball + 1e-12
    for _ in range(cases):
        n = int(rng.integers(2, 8))
        hi = 1.0 - 2.0 * p.eps_ball
        x = Tensor(random_ball_points(rng, (4, n), min_norm=0.5, max_norm=hi))
        y = Tensor(random_ball_points(rng, (4, n), min_norm=0.5, max_norm=hi))
        w = Tensor(rng.normal(size=(n, n)) * 2.0)
        v = Tensor(rng.normal(size=(4, n)) * 10.0)
        for out in (mobius_add(x, y, p), mobius_matvec(w, x, p), expmap0(v, p),
                    project_to_ball(Tensor(rng.normal(size=(4, n)) * 3.0), p)):
            norms = np.sqrt((out.data ** 2).sum(axis=-1))
            assert norms.max() <= limit
    return cases


def check_conformal_factor(cases: int = 200, seed: int = 3) -> int:
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        n = int(rng.integers(2, 8))
        radii = np.sort(rng.uniform(0.0, 1.0 - 2 * DEFAULT_PARAMS.eps_ball, size=8))
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        lams = [conformal_factor(Tensor(r * direction)).item() for r in radii]
        assert all(l >= 2.0 - 1e-12 for l in lams)
        assert all(b >= a for a, b in zip(lams, lams[1:]))  # monotone in the norm
    assert abs(conformal_factor(Tensor([0.6, 0.0])).item() - 3.125) < 1e-12
    return cases


def check_noncommutativity(cases: int = 1000, seed: int = 4) -> int:
    """Möbius addition is not commutative; a witness must exist."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(cases):
        x = Tensor(random_ball_points(rng, (3,), max_norm=0.9))
        y = Tensor(random_ball_points(rng, (3,), max_norm=0.9))
        d = np.abs(mobius_add(x, y).data - mobius_add(y, x).data).max()
        best = max(best, float(d))
    assert best > 1e-3, f"no non-commutativity witness found (best {best})"
    return cases


def check_attention_oracle(cases: int = 20, seed: int = 5, tol: float = 1e-9) -> int:
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        att = HyperAttention(8, 2, rng)
        q = random_ball_points(rng, (4, 8), max_norm=0.7)
        k = random_ball_points(rng, (5, 8), max_norm=0.7)
        got = att(Tensor(q), Tensor(k)).data
        want = hyper_attention_oracle(att, q, k)
        assert np.abs(got - want).max() < tol
    return cases


def check_gru_oracle(cases: int = 20, seed: int = 6, tol: float = 1e-10) -> int:
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        cell = GruCell(6, 4, rng)
        x = rng.normal(size=(5, 6))
        got = cell(Tensor(x)).data
        want = gru_loop_oracle(cell, x)
        assert np.abs(got - want).max() < tol
    return cases


def check_adaln_oracle(cases: int = 20, seed: int = 7, tol: float = 1e-10) -> int:
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        layer = HyperAdaLN(8, 6, rng)
        x = random_ball_points(rng, (5, 8), max_norm=0.8)
        cond = rng.normal(size=6)
        got = layer(Tensor(x), Tensor(cond)).data
        want = adaln_oracle(layer, x, cond)
        assert np.abs(got - want).max() < tol
    return cases


def check_attention_permutation(cases: int = 20, seed: int = 8) -> int:
    """Key permutation leaves outputs fixed; query permutation permutes them."""
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        att = HyperAttention(8, 2, rng)
        q = Tensor(random_ball_points(rng, (4, 8), max_norm=0.7))
        k = random_ball_points(rng, (5, 8), max_norm=0.7)
        perm = rng.permutation(5)
        out1 = att(q, Tensor(k)).data
        out2 = att(q, Tensor(k[perm])).data
        assert np.abs(out1 - out2).max() < 1e-12
        qperm = rng.permutation(4)
        out3 = att(Tensor(q.data[qperm]), Tensor(k)).data
        assert np.abs(out1[qperm] - out3).max() < 1e-12
    return cases


PROPCHECKS: dict[str, list[tuple[str, Callable[..., int]]]] = {
    "manifold": [
        ("mobius_identities", check_manifold_identities),
        ("matvec_two_formulations", check_matvec_formulations),
        ("ball_closure", check_ball_closure),
        ("conformal_factor", check_conformal_factor),
        ("noncommutativity_witness", check_noncommutativity),
    ],
    "hyperlayers": [
        ("attention_vs_loop_oracle", check_attention_oracle),
        ("adaln_vs_composition_oracle", check_adaln_oracle),
        ("attention_permutation", check_attention_permutation),
    ],
    "temporal": [
        ("gru_vs_loop_oracle", check_gru_oracle),
    ],
}


def run_propchecks(module: str | None = None, cases: int | None = None) -> list[dict]:
    rows = []
    for mod, entries in PROPCHECKS.items():
        if module is not None and mod != module:
            continue
        for name, fn in entries:
            try:
                ran = fn(cases) if cases is not None else fn()
                rows.append({"module": mod, "check": name, "cases": ran, "passed": True})
            except AssertionError as exc:
                rows.append({"module": mod, "check": name, "cases": 0,
                             "passed": False, "detail": str(exc)})
    return rows


# ---------------------------------------------------------------------------
# gradcheck registry
# ---------------------------------------------------------------------------


def _weighted_sum(out: Tensor, seed: int) -> Tensor:
    # fresh generator per call so repeated evaluations in gradcheck see
    # identical projection weights
    w = Tensor(np.random.default_rng(seed).normal(size=out.shape))
    return (out * w).sum()


def _primitive_entries(rng: np.random.Generator):
    def entry(name, fn, *shapes, low=-1.0, high=1.0):
        xs = [Tensor(rng.uniform(low, high, size=s)) for s in shapes]
        seed = sum(map(ord, name))
        return ("tensor-autodiff", name, 1e-6, lambda: gradcheck(
            lambda *a: _weighted_sum(fn(*a), seed), xs, tol=1e-6))

    yield entry("add_broadcast", lambda a, b: a + b, (3, 4), (4,))
    yield entry("sub", lambda a, b: a - b, (3, 4), (3, 4))
    yield entry("mul", lambda a, b: a * b, (3, 4), (3, 4))
    yield entry("div", lambda a, b: a / (b + 3.0), (3, 4), (3, 4))
    yield entry("matmul", lambda a, b: a @ b, (3, 4), (4, 2))
    yield entry("matmul_batched", lambda a, b: a @ b, (2, 3, 4), (2, 4, 2))
    yield entry("transpose", lambda a: a.transpose((1, 0)), (3, 4))
    yield entry("reshape", lambda a: a.reshape(4, 3), (3, 4))
    yield entry("concat", lambda a, b: T.concat([a, b], axis=1), (3, 2), (3, 4))
    yield entry("slice", lambda a: a[1:, ::2], (4, 6))
    yield entry("sum_axis", lambda a: a.sum(axis=0), (3, 4))
    yield entry("mean_axis", lambda a: a.mean(axis=1, keepdims=True), (3, 4))
    yield entry("broadcast", lambda a: T.broadcast_to(a, (5, 3, 4)), (3, 4))
    yield entry("tanh", T.tanh, (3, 4))
    yield entry("atanh", T.atanh, (3, 4), low=-0.9, high=0.9)
    yield entry("sigmoid", T.sigmoid, (3, 4))
    yield entry("gelu", T.gelu, (3, 4), low=-2.0, high=2.0)
    yield entry("exp", T.exp, (3, 4))
    yield entry("log", lambda a: T.log(a + 2.0), (3, 4))
    yield entry("sqrt", lambda a: T.sqrt(a + 2.0), (3, 4))
    yield entry("abs", lambda a: T.tabs(a + 3.0), (3, 4))
    yield entry("softmax", lambda a: T.softmax(a, axis=-1), (3, 4))
    yield entry("l2norm", lambda a: T.l2norm(a, eps=1e-6), (3, 4))
    yield entry("layer_stats", lambda a: T.layer_stats(a)[0] + T.layer_stats(a)[1],
                (3, 4))


def _layer_entries(rng: np.random.Generator):
    p = DEFAULT_PARAMS

    def ball_input(shape, max_norm=0.6):
        return Tensor(random_ball_points(rng, shape, max_norm=max_norm))

    def entry(name, build, module="hyperlayers"):
        seed = sum(map(ord, name))

        def run():
            fn, inputs = build()
            return gradcheck(lambda *a: _weighted_sum(fn(*a), seed), inputs,
                             tol=1e-4)
        return (module, name, 1e-4, run)

    yield entry("mobius_add", lambda: (lambda a, b: mobius_add(a, b, p),
                                       [ball_input((4, 3)), ball_input((4, 3))]))
    yield entry("expmap0", lambda: (lambda v: expmap0(v, p),
                                    [Tensor(rng.normal(size=(4, 3)))]))
    yield entry("logmap0", lambda: (lambda x: logmap0(x, p),
                                    [ball_input((4, 3))]))

    def build_matvec():
        w = Tensor(rng.normal(size=(5, 3)) * 0.5)
        return (lambda wm, x: mobius_matvec(wm, x, p), [w, ball_input((4, 3))])
    yield entry("mobius_matvec", build_matvec)

    def build_linear():
        layer = HyperbolicLinear(3, 5, rng)
        layer.b.data = random_ball_points(rng, (5,), max_norm=0.3)
        x = ball_input((4, 3))
        return (lambda xx, *params: layer(xx), [x] + layer.parameters())
    yield entry("hyperbolic_linear", build_linear)

    yield entry("hyper_gelu", lambda: (lambda x: hyper_gelu(x, p),
                                       [ball_input((4, 3))]))

    def build_adaln():
        layer = HyperAdaLN(8, 6, rng)
        x = ball_input((4, 8))
        cond = Tensor(rng.normal(size=6))
        return (lambda xx, cc, *params: layer(xx, cc), [x, cond] + layer.parameters())
    yield entry("hyper_adaln", build_adaln)

    def build_attention():
        att = HyperAttention(8, 2, rng)
        q = ball_input((4, 8))
        k = ball_input((5, 8))
        return (lambda qq, kk, *params: att(qq, kk), [q, k] + att.parameters())
    yield entry("hyper_attention", build_attention)

    def build_ffn():
        ffn = HyperFFN(6, rng)
        x = ball_input((4, 6))
        return (lambda xx, *params: ffn(xx), [x] + ffn.parameters())
    yield entry("hyper_ffn", build_ffn)

    def build_gru():
        cell = GruCell(4, 3, rng)
        x = Tensor(rng.normal(size=(4, 4)))
        return (lambda xx, *params: cell(xx), [x] + cell.parameters())
    yield entry("gru_cell", build_gru, module="temporal")

    def build_msa():
        att = EuclideanAttention(8, 2, rng)
        x = Tensor(rng.normal(size=(4, 8)))
        return (lambda xx, *params: att(xx), [x] + att.parameters())
    yield entry("euclidean_attention", build_msa, module="temporal")

    def build_pose_motion():
        ext = PoseMotionExtractor(3, rng)
        x = Tensor(rng.normal(size=(4, 3, 3)) * 0.3)
        return (lambda xx, *params: ext(xx), [x] + ext.parameters())
    yield entry("pose_motion_extract", build_pose_motion, module="temporal")


def _block_entries(rng: np.random.Generator):
    from .config import PipelineConfig
    from .synth import synth_generate
    from .train import build_pipeline, scene_loss

    def entry(name, run):
        return ("mesh-pipeline", name, 1e-3, run)

    cfg = PipelineConfig(t_frames=4, n_joints=3, feat_dim=8, model_dim=8,
                         heads=2, n_coarse=6, n_fine=10, seed=11, steps=0)

    def run_block(block_name):
        scene = synth_generate(cfg)
        pipeline = build_pipeline(cfg, scene)
        block = getattr(pipeline, block_name)
        tm_row = Tensor(rng.normal(size=cfg.feat_dim) * 0.2)
        pose = Tensor(rng.normal(size=(cfg.n_joints, 3)) * 0.3)
        m_init = Tensor(rng.normal(size=(cfg.n_coarse, 3)) * 0.3)
        inputs = [m_init, tm_row, pose] + block.parameters()
        return gradcheck(
            lambda mi, tr, po, *params: _weighted_sum(block(mi, tr, po), 17),
            inputs, tol=1e-3, max_entries=3,
            rng=np.random.default_rng(23))

    yield entry("hpo_block", lambda: run_block("hpo"))
    yield entry("hmo_block", lambda: run_block("hmo"))

    def run_total_loss():
        scene = synth_generate(cfg)
        pipeline = build_pipeline(cfg, scene)
        params = pipeline.parameters()
        prng = np.random.default_rng(29)
        subset = [params[i] for i in prng.choice(len(params), size=6, replace=False)]
        return gradcheck(lambda *ps: scene_loss(pipeline, scene, cfg),
                         subset, tol=1e-3, max_entries=2,
                         rng=np.random.default_rng(31))

    yield entry("total_loss_end_to_end", run_total_loss)


def gradcheck_registry() -> list[tuple[str, str, float, Callable[[], GradcheckReport]]]:
    rng = np.random.default_rng(1234)
    entries = list(_primitive_entries(rng))
    entries += list(_layer_entries(rng))
    entries += list(_block_entries(rng))
    return entries


def run_gradchecks(module: str | None = None,
                   tol_override: float | None = None) -> list[dict]:
    rows = []
    for mod, name, tol, run in gradcheck_registry():
        if module is not None and mod != module:
            continue
        report = run()
        tol_eff = tol_override if tol_override is not None else tol
        rows.append({"module": mod, "check": name, "tol": tol_eff,
                     "max_rel_err": report.max_rel_err,
                     "passed": report.max_rel_err < tol_eff})
    return rows
