"""ADAM optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Array, ParameterSet

__all__ = ["Adam", "AdamState"]


@dataclass
class AdamState:
    """Moment estimates and step counter for one parameter set."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict[str, Array] = field(default_factory=dict)
    second_moment: dict[str, Array] = field(default_factory=dict)


class Adam:
    """Bias-corrected ADAM updates applied in place.

    Parameters
    ----------
    parameters
        Parameters to optimize.
    state
        Hyperparameters and moments; a fresh state is created if omitted.
    """

    def __init__(
        self, parameters: ParameterSet, state: AdamState | None = None
    ) -> None:
        self.parameters = parameters
        self.state = state or AdamState()
        for parameter in parameters:
            self.state.first_moment.setdefault(
                parameter.name, np.zeros_like(parameter.data)
            )
            self.state.second_moment.setdefault(
                parameter.name, np.zeros_like(parameter.data)
            )

    def step(self) -> None:
        """Apply one update from the current gradients, then clear them."""
        state = self.state
        state.step += 1
        correction1 = 1.0 - state.beta1**state.step
        correction2 = 1.0 - state.beta2**state.step
        for parameter in self.parameters:
            grad = parameter.grad
            m = state.first_moment[parameter.name]
            v = state.second_moment[parameter.name]
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            parameter.data -= (
                state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
            ).astype(parameter.dtype)
            parameter.zero_grad()
