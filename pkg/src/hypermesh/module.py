"""Tiny parameter-container base class.

Modules hold Tensors (parameters) and child Modules as attributes; parameter
names are derived from attribute paths, in sorted order, so checkpoints are
stable across runs.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .tensor import Tensor


class Module:
    # attribute names whose tensors must stay on the Poincare ball
    ball_param_names: tuple[str, ...] = ()

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name in sorted(vars(self)):
            value = getattr(self, name)
            if isinstance(value, Tensor) and value.requires_grad:
                out[prefix + name] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(prefix + name + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{prefix}{name}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def ball_parameters(self) -> list[Tensor]:
        """Parameters constrained to the ball (re-projected after updates)."""
        out = [getattr(self, n) for n in self.ball_param_names]
        for name in sorted(vars(self)):
            value = getattr(self, name)
            if isinstance(value, Module):
                out.extend(value.ball_parameters())
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        out.extend(item.ball_parameters())
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(state) != set(params):
            missing = set(params) - set(state)
            extra = set(state) - set(params)
            raise ContractError(f"state dict mismatch: missing={sorted(missing)}, extra={sorted(extra)}")
        for k, v in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != v.data.shape:
                raise ContractError(f"state dict entry {k}: shape {arr.shape} != {v.data.shape}")
            v.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()
