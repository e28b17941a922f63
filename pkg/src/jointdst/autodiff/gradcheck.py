"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from ..exceptions import GradientCheckError
from .tensor import ParameterSet, Tape, Tensor, backward

__all__ = ["gradient_check"]


def gradient_check(
    loss_fn: Callable[[], Tensor],
    parameters: ParameterSet,
    eps: float = 1e-5,
    *,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare reverse-mode gradients against central differences.

    Parameters
    ----------
    loss_fn
        Deterministic function computing a scalar loss from the current
        parameter values.
    parameters
        Parameters to check.
    eps
        Finite-difference step.
    max_entries
        If set, check at most this many randomly chosen entries per
        parameter.
    rng
        Random generator used to choose entries.

    Returns
    -------
    float
        Largest ``|g_ad - g_fd| / max(1, |g_fd|)`` over the checked entries.

    Raises
    ------
    GradientCheckError
        If ``eps`` is not positive.
    """
    if not eps > 0:
        raise GradientCheckError(f"Finite-difference step must be > 0: {eps}")
    rng = rng or np.random.default_rng(0)
    parameters.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    analytic = backward(tape, loss, parameters)
    parameters.zero_grad()

    worst = 0.0
    for parameter in parameters:
        flat = parameter.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = rng.choice(flat.size, size=max_entries, replace=False)
        grad = analytic[parameter.name].reshape(-1)
        for index in indices:
            original = flat[index]
            flat[index] = original + eps
            plus = loss_fn().item()
            flat[index] = original - eps
            minus = loss_fn().item()
            flat[index] = original
            numeric = (plus - minus) / (2.0 * eps)
            error = abs(grad[index] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, float(error))
    return worst
