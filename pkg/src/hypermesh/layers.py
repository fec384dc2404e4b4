"""Hyperbolic neural building blocks on the Poincaré ball.

All layers keep their activations on the ball: linear layers act through
Möbius algebra, pointwise/normalization layers sandwich the Euclidean
operation between logmap0 and expmap0, and attention computes scores and
aggregation in the tangent space at the origin.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .manifold import (BallParams, DEFAULT_PARAMS, expmap0, logmap0,
                       mobius_add, mobius_matvec)
from .module import Module
from .tensor import Tensor

INIT_SCALE = 0.05


def _uniform(rng: np.random.Generator, shape) -> Tensor:
    return Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape), requires_grad=True)


class Linear(Module):
    """Plain Euclidean affine map on the trailing axis."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 bias_init: float = 0.0):
        self.w = _uniform(rng, (out_dim, in_dim))
        self.b = Tensor(np.full(out_dim, bias_init), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w.T + self.b


class HyperbolicLinear(Module):
    """h = W (x)_M x (+) b with the bias living on the ball."""

    ball_param_names = ("b",)

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 params: BallParams = DEFAULT_PARAMS):
        self.w = _uniform(rng, (out_dim, in_dim))
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)
        self.params = params

    def __call__(self, x: Tensor) -> Tensor:
        return mobius_add(mobius_matvec(self.w, x, self.params), self.b, self.params)


def hyper_gelu(x: Tensor, params: BallParams = DEFAULT_PARAMS) -> Tensor:
    """GELU conjugated by the origin maps: expmap0(GELU(logmap0(x)))."""
    return expmap0(T.gelu(logmap0(x, params)), params)


class HyperAdaLN(Module):
    """Adaptive layer norm conjugated by the origin maps.

    The tangent image of each token row is normalized over the feature axis,
    then scaled/shifted by affine projections of a conditioning vector. The
    scale projection's bias starts at 1 so an untrained layer is near-identity.
    """

    def __init__(self, feat_dim: int, cond_dim: int, rng: np.random.Generator,
                 params: BallParams = DEFAULT_PARAMS, eps_var: float = 1e-5):
        self.gamma_proj = Linear(cond_dim, feat_dim, rng, bias_init=1.0)
        self.beta_proj = Linear(cond_dim, feat_dim, rng)
        self.eps_var = eps_var
        self.params = params

    def __call__(self, x: Tensor, cond: Tensor) -> Tensor:
        if cond.ndim == 1:
            cond = cond.reshape(1, cond.shape[0])
        t = logmap0(x, self.params)
        mu, var = T.layer_stats(t, axis=-1)
        t_hat = (t - mu) / T.sqrt(var + self.eps_var)
        gamma = self.gamma_proj(cond)
        beta = self.beta_proj(cond)
        return expmap0(gamma * t_hat + beta, self.params)


class HyperAttention(Module):
    """Multi-head attention with Möbius Q/K/V projections.

    Q, K, V are built with Möbius matrix-vector products; scores and the
    weighted combination are computed on the logmap0 images (per head,
    scaled by 1/sqrt(head_dim)), and the W_O-projected result is mapped
    back with expmap0. Self-attention is the special case
    ``queries_src is keys_src``.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator,
                 params: BallParams = DEFAULT_PARAMS):
        if dim % heads != 0:
            raise ShapeError(f"dim {dim} not divisible by heads {heads}")
        self.w_q = _uniform(rng, (dim, dim))
        self.w_k = _uniform(rng, (dim, dim))
        self.w_v = _uniform(rng, (dim, dim))
        self.w_o = _uniform(rng, (dim, dim))
        self.heads = heads
        self.dim = dim
        self.params = params

    def _split_heads(self, t: Tensor) -> Tensor:
        n = t.shape[0]
        hd = self.dim // self.heads
        return t.reshape(n, self.heads, hd).transpose((1, 0, 2))

    def __call__(self, queries_src: Tensor, keys_src: Tensor) -> Tensor:
        if queries_src.shape[-1] != self.dim or keys_src.shape[-1] != self.dim:
            raise ShapeError(
                f"attention expects feature dim {self.dim}, got "
                f"{queries_src.shape} / {keys_src.shape}")
        p = self.params
        nq = queries_src.shape[0]
        hd = self.dim // self.heads

        lq = self._split_heads(logmap0(mobius_matvec(self.w_q, queries_src, p), p))
        lk = self._split_heads(logmap0(mobius_matvec(self.w_k, keys_src, p), p))
        lv = self._split_heads(logmap0(mobius_matvec(self.w_v, keys_src, p), p))

        scores = (lq @ lk.transpose((0, 2, 1))) * (1.0 / math.sqrt(hd))
        alpha = T.softmax(scores, axis=-1)
        ctx = (alpha @ lv).transpose((1, 0, 2)).reshape(nq, self.dim)
        return expmap0(ctx @ self.w_o.T, p)


class HyperFFN(Module):
    """Two hyperbolic linear layers around a hyperbolic GELU, width d -> 4d -> d."""

    def __init__(self, dim: int, rng: np.random.Generator,
                 params: BallParams = DEFAULT_PARAMS):
        self.lin1 = HyperbolicLinear(dim, 4 * dim, rng, params)
        self.lin2 = HyperbolicLinear(4 * dim, dim, rng, params)
        self.params = params

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(hyper_gelu(self.lin1(x), self.params))


def mobius_residual(block_out: Tensor, residual: Tensor,
                    params: BallParams = DEFAULT_PARAMS) -> Tensor:
    """Möbius residual connection, fixed order: block_output (+) residual."""
    return mobius_add(block_out, residual, params)
