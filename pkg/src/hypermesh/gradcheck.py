"""Finite-difference gradient verification.

The oracle is central differencing of the forward function itself; it never
consults the reverse-mode rules it is checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError
from .tensor import Tensor


@dataclass
class GradcheckReport:
    max_rel_err: float
    tol: float
    step: float
    per_input: list[np.ndarray] = field(repr=False, default_factory=list)
    checked_entries: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def gradcheck(f: Callable[..., Tensor],
              inputs: Sequence[Tensor],
              step: float = 1e-5,
              tol: float = 1e-6,
              max_entries: int | None = None,
              rng: np.random.Generator | None = None) -> GradcheckReport:
    """Compare reverse-mode gradients of ``f(*inputs)`` with central differences.

    ``f`` must return a scalar tensor. Relative error per entry is
    |a - n| / max(1, |a|, |n|). ``max_entries`` caps the number of
    finite-difference probes per input (seeded subsample) for deep graphs.
    """
    inputs = list(inputs)
    for x in inputs:
        x.requires_grad = True
        x.zero_grad()
    out = f(*inputs)
    if out.data.size != 1:
        raise ContractError("gradcheck requires a scalar-valued function")
    out.backward()

    per_input: list[np.ndarray] = []
    max_err = 0.0
    checked = 0
    for x in inputs:
        analytic = x.grad if x.grad is not None else np.zeros(x.shape)
        flat = x.data.reshape(-1)
        n = flat.size
        if max_entries is not None and n > max_entries:
            if rng is None:
                rng = np.random.default_rng(0)
            idxs = rng.choice(n, size=max_entries, replace=False)
        else:
            idxs = np.arange(n)
        errs = np.zeros(n)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            fp = float(f(*inputs).data)
            flat[i] = orig - step
            fm = float(f(*inputs).data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * step)
            errs[i] = _rel_err(float(analytic.reshape(-1)[i]), numeric)
            checked += 1
        per_input.append(errs.reshape(x.shape))
        if len(idxs):
            max_err = max(max_err, float(errs.max()))
    return GradcheckReport(max_rel_err=max_err, tol=tol, step=step,
                           per_input=per_input, checked_entries=checked)
