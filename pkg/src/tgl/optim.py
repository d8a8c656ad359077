"""Parameters and the Adam update rule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import NonFiniteError, Tensor


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


class Parameter:
    """A trainable tensor plus its Adam moment buffers."""

    __slots__ = ("name", "value", "adam_m", "adam_v", "step_count")

    def __init__(self, value, name: str = ""):
        self.name = name
        self.value = Tensor(value, requires_grad=True)
        self.adam_m = np.zeros_like(self.value.data)
        self.adam_v = np.zeros_like(self.value.data)
        self.step_count = 0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def grad(self):
        return self.value.grad

    def __repr__(self) -> str:
        return f"Parameter({self.name or 'unnamed'}, shape={self.shape}, steps={self.step_count})"


def zero_grad(params) -> None:
    for p in params:
        p.value.grad = None


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6/(fan_in+fan_out))."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fans must be positive, got ({fan_in}, {fan_out})")
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape if shape is not None else (fan_in, fan_out))


def adam_step(params: list[Parameter], cfg: AdamConfig) -> None:
    """One Adam update over `params`; zeroes gradients afterwards.

    The whole step aborts (no parameter touched) if any gradient is
    missing, mis-shaped, or non-finite.
    """
    for i, p in enumerate(params):
        g = p.value.grad
        label = f"parameter {i}" + (f" ({p.name})" if p.name else "")
        if g is None:
            raise ValueError(f"{label} has no gradient; run backward before adam_step")
        if g.shape != p.value.shape:
            raise ValueError(f"{label} gradient shape {g.shape} != value shape {p.value.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient in {label}; step aborted")

    for i, p in enumerate(params):
        g = p.value.grad
        t = p.step_count + 1
        # in-place moment updates to avoid transient copies of the big fc weights
        p.adam_m *= cfg.beta1
        p.adam_m += (1.0 - cfg.beta1) * g
        p.adam_v *= cfg.beta2
        p.adam_v += (1.0 - cfg.beta2) * (g * g)
        m_hat = p.adam_m / (1.0 - cfg.beta1 ** t)
        v_hat = p.adam_v / (1.0 - cfg.beta2 ** t)
        p.value.data -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        p.step_count = t
        p.value.grad = None
        if not np.isfinite(p.value.data).all():
            raise NonFiniteError(f"non-finite value in parameter {i} after Adam step {t}")
