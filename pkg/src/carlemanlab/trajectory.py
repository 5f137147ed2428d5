"""Time series container produced by every integrator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ContractError
from .io import write_csv


@dataclass
class Trajectory:
    """States ``u(t)`` on an increasing time grid starting at 0.

    ``states`` has shape ``(len(times), N)``. ``dense`` is an optional
    callable ``t -> u(t)`` (vectorised over ``t``) from a dense-output
    integrator; ``lifted_final`` is the full Carleman vector at the last
    step when it was requested.
    """

    times: np.ndarray
    states: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)
    dense: Callable | None = None
    lifted_final: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[0] != self.times.size:
            raise ContractError("times and states differ in length")
        if self.times.size == 0 or self.times[0] != 0.0:
            raise ContractError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ContractError("times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def at(self, t) -> np.ndarray:
        """States at ``t``: dense output when available, else linear interpolation."""
        t = np.asarray(t, dtype=float)
        if self.dense is not None:
            return np.asarray(self.dense(t)).T
        return interpolate_linear(self.times, self.states, t)

    def to_csv(self, path):
        header = ["t"] + [f"u_{i + 1}" for i in range(self.dim)]
        return write_csv(path, header, [self.times, *self.states.T])


def interpolate_linear(times, states, t) -> np.ndarray:
    """Componentwise linear interpolation of ``states`` onto ``t``."""
    t = np.asarray(t, dtype=float)
    if t.size and (t.min() < times[0] or t.max() > times[-1] * (1 + 1e-12)):
        raise ContractError("interpolation outside the trajectory's time span")
    cols = [np.interp(t, times, states[:, i]) for i in range(states.shape[1])]
    return np.stack(cols, axis=-1)
