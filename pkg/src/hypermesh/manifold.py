"""Poincaré unit-ball gyrovector operations.

Points live in the open unit ball (trailing axis is the embedding dimension,
any leading batch axes). Curvature is fixed at 1; all formulas are for the
unit ball. Every producing operation ends with a projection that clamps
trailing-vector norms to 1 - eps_ball, which keeps atanh (and therefore
gradients) bounded.

Conventions:
- ball points and tangent vectors are plain :class:`~hypermesh.tensor.Tensor`
  values of shape [..., n];
- zero-norm singularities are removed with a smoothed norm
  sqrt(||x||^2 + eps_norm^2), whose limit at the origin matches the
  removable-singular limit of the exact formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, NumericError, ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class BallParams:
    """Numerical-stability policy for ball operations.

    eps_ball: boundary clamp margin (norms are kept <= 1 - eps_ball).
    eps_norm: zero-norm smoothing for the removable singularities at 0.
    """

    eps_ball: float = 1e-5
    eps_norm: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.eps_ball < 1e-2):
            raise ContractError(f"eps_ball must be in (0, 1e-2), got {self.eps_ball}")
        if not (0.0 < self.eps_norm < self.eps_ball):
            raise ContractError(
                f"eps_norm must be in (0, eps_ball), got {self.eps_norm}")


DEFAULT_PARAMS = BallParams()

# Narrow-float policy; the engine itself computes in float64, these margins
# are what a 32-bit deployment would need.
NARROW_PARAMS = BallParams(eps_ball=1e-4, eps_norm=1e-7)


def max_trailing_norm(x: Tensor) -> float:
    """Largest trailing-vector Euclidean norm (plain number, no grad)."""
    d = x.data
    if d.size == 0:
        return 0.0
    return float(np.sqrt((d * d).sum(axis=-1)).max())


def assert_on_ball(x: Tensor, p: BallParams = DEFAULT_PARAMS) -> None:
    if not np.all(np.isfinite(x.data)):
        raise NumericError("ball point contains NaN/Inf")
    n = max_trailing_norm(x)
    if n > 1.0 - p.eps_ball + 1e-12:
        raise NumericError(f"ball invariant violated: max norm {n!r}")


def project_to_ball(x: Tensor, p: BallParams = DEFAULT_PARAMS) -> Tensor:
    """Rescale trailing vectors with norm > 1 - eps_ball back onto that shell.

    Vectors already inside are untouched (identity gradient); rescaled
    vectors get the radial-projection Jacobian.
    """
    x = T.as_tensor(x)
    if not np.all(np.isfinite(x.data)):
        raise NumericError("project_to_ball: input contains NaN/Inf")
    max_norm = 1.0 - p.eps_ball
    norms = np.sqrt((x.data * x.data).sum(axis=-1, keepdims=True))
    safe = np.maximum(norms, p.eps_norm)
    scale = np.where(norms > max_norm, max_norm / safe, 1.0)
    data = x.data * scale

    def backward(g):
        inside = norms <= max_norm
        unit = x.data / safe
        radial = (g * unit).sum(axis=-1, keepdims=True) * unit
        g_out = np.where(inside, g, (max_norm / safe) * (g - radial))
        return (g_out,)

    return T._make(data, "project_to_ball", (x,), backward)


def conformal_factor(x: Tensor) -> Tensor:
    """lambda_x = 2 / (1 - ||x||^2), the metric scaling at x; >= 2 on the ball."""
    x = T.as_tensor(x)
    sq = (x * x).sum(axis=-1)
    return 2.0 / (1.0 - sq)


def mobius_add(x: Tensor, y: Tensor, p: BallParams = DEFAULT_PARAMS) -> Tensor:
    """Möbius addition x (+) y, projected back to the ball.

    Closed form:
        ((1 + 2<x,y> + ||y||^2) x + (1 - ||x||^2) y)
        / (1 + 2<x,y> + ||x||^2 ||y||^2)
    Non-commutative; the origin is the two-sided identity.
    """
    x, y = T.as_tensor(x), T.as_tensor(y)
    if x.shape[-1] != y.shape[-1]:
        raise ShapeError(f"mobius_add trailing dims differ: {x.shape} vs {y.shape}")
    xy = (x * y).sum(axis=-1, keepdims=True)
    x2 = (x * x).sum(axis=-1, keepdims=True)
    y2 = (y * y).sum(axis=-1, keepdims=True)
    num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y
    den = 1.0 + 2.0 * xy + x2 * y2
    return project_to_ball(num / den, p)


def expmap0(v: Tensor, p: BallParams = DEFAULT_PARAMS) -> Tensor:
    """Exponential map at the origin: tanh(||v||/2) v / ||v||.

    Maps tangent (Euclidean) vectors onto the ball; the origin maps to
    itself. The projection at the end only fires for extreme inputs where
    tanh saturates past 1 - eps_ball.
    """
    v = T.as_tensor(v)
    n = T.l2norm(v, axis=-1, keepdims=True, eps=p.eps_norm)
    return project_to_ball(v * (T.tanh(0.5 * n) / n), p)


def logmap0(x: Tensor, p: BallParams = DEFAULT_PARAMS) -> Tensor:
    """Logarithmic map at the origin: 2 atanh(||x||) x / ||x||.

    Exact inverse of :func:`expmap0` away from the clamp shell.
    """
    x = T.as_tensor(x)
    n = T.l2norm(x, axis=-1, keepdims=True, eps=p.eps_norm)
    return x * (2.0 * T.atanh(n) / n)


def mobius_matvec(w: Tensor, x: Tensor, p: BallParams = DEFAULT_PARAMS) -> Tensor:
    """Möbius matrix-vector product W (x)_M x.

    tanh((||Wx|| / ||x||) atanh(||x||)) Wx / ||Wx||, equivalently
    expmap0(W . logmap0(x)). Acts on the trailing axis; ``w`` is [m, n],
    ``x`` is [..., n].
    """
    w, x = T.as_tensor(w), T.as_tensor(x)
    if w.ndim != 2 or w.shape[1] != x.shape[-1]:
        raise ShapeError(f"mobius_matvec shapes incompatible: W {w.shape}, x {x.shape}")
    if x.ndim == 1:
        out = mobius_matvec(w, x.reshape(1, x.shape[0]), p)
        return out.reshape(out.shape[-1])
    y = x @ w.T
    nx = T.l2norm(x, axis=-1, keepdims=True, eps=p.eps_norm)
    ny = T.l2norm(y, axis=-1, keepdims=True, eps=p.eps_norm)
    t = T.tanh((ny / nx) * T.atanh(nx))
    return project_to_ball(y * (t / ny), p)
