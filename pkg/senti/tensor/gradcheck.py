from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError
from .rng import RngState
from .tensor import Tensor, grad

DENOMINATOR_FLOOR = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOMINATOR_FLOOR)
    return np.abs(analytic - numeric) / scale


def grad_check(
    fn: Callable[[list[Tensor]], Tensor],
    inputs: Sequence[np.ndarray],
    eps: float = 1e-3,
    samples: int | None = None,
    rng: RngState | None = None,
) -> float:
    """Largest relative gap between backward() and central differences.

    Inputs are promoted to float64 so the finite differences are not swamped
    by float32 rounding. With `samples` set, only that many randomly chosen
    entries per input are perturbed.
    """
    if not 0 < eps <= 1e-2:
        raise ContractError(f"eps must lie in (0, 1e-2], got {eps}")
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    tensors = [Tensor.param(a) for a in arrays]

    loss = fn(tensors)
    if loss.size != 1:
        raise ContractError(f"grad_check needs a scalar-valued function, got shape {loss.shape}")
    analytic = grad(loss, {str(i): t for i, t in enumerate(tensors)})

    generator = (rng or RngState(0)).generator()
    worst = 0.0
    for i, array in enumerate(arrays):
        flat_count = array.size
        if samples is None or samples >= flat_count:
            coordinates = np.arange(flat_count)
        else:
            coordinates = generator.choice(flat_count, size=samples, replace=False)

        for flat in coordinates:
            index = np.unravel_index(int(flat), array.shape)
            values = []
            for offset in (eps, -eps):
                shifted = [a.copy() for a in arrays]
                shifted[i][index] += offset
                values.append(fn([Tensor(a) for a in shifted]).item())
            numeric = (values[0] - values[1]) / (2 * eps)
            error = relative_error(np.float64(analytic[str(i)][index]), np.float64(numeric))
            worst = max(worst, float(error))
    return worst
