"""System-model parameters and the complex channel value type."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from numbers import Integral, Real

import numpy as np


class InvalidParameterError(ValueError):
    """A channel parameter violates a model invariant."""


@dataclass(frozen=True)
class ChannelParams:
    """Statistical model of the phase-aligned composite channel.

    ``h = sum_k |h1_k| |h2_k| + h_d`` with ``|h1_k| ~ Nakagami(m1, omega1)``,
    ``|h2_k| ~ Nakagami(m2, omega2)`` and ``h_d ~ CN(0, sigma_h_sq)``.
    """

    n_elements: int
    m1: int
    m2: int
    omega1: float = 1.0
    omega2: float = 1.0
    sigma_h_sq: float = 1.0

    @property
    def cascade_scale(self) -> float:
        """``omega1 omega2 / (m1 m2)``, the squared scale of one product term."""
        return self.omega1 * self.omega2 / (self.m1 * self.m2)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelParams":
        expected = {"n_elements", "m1", "m2", "omega1", "omega2", "sigma_h_sq"}
        unknown = set(data) - expected
        if unknown:
            raise InvalidParameterError(f"unknown parameter keys: {sorted(unknown)}")
        missing = expected - set(data)
        if missing:
            raise InvalidParameterError(f"missing parameter keys: {sorted(missing)}")
        kwargs = {k: _coerce_int(data[k]) for k in ("n_elements", "m1", "m2")}
        kwargs.update({k: float(data[k]) for k in ("omega1", "omega2", "sigma_h_sq")})
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ChannelParams":
        return cls.from_dict(json.loads(text))


def _coerce_int(value):
    # JSON writers sometimes emit 2.0 for 2; anything non-integral is kept so
    # that validate() can name it.
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def _positive_int(value) -> bool:
    return isinstance(value, Integral) and not isinstance(value, bool) and value >= 1


def _positive_real(value) -> bool:
    return isinstance(value, Real) and not isinstance(value, bool) and math.isfinite(value) and value > 0


def validate(params: ChannelParams) -> ChannelParams:
    """Return ``params`` unchanged or raise naming the first violated invariant."""
    if not _positive_int(params.n_elements):
        raise InvalidParameterError("n_elements must be ≥ 1 (integer)")
    for name in ("m1", "m2"):
        if not _positive_int(getattr(params, name)):
            raise InvalidParameterError(f"{name} must be a positive integer")
    for name in ("omega1", "omega2", "sigma_h_sq"):
        if not _positive_real(getattr(params, name)):
            raise InvalidParameterError(f"{name} must be a positive real")
    return params


def max_index_sum(params: ChannelParams) -> int:
    return params.n_elements * (params.m1 - 1)


def effective_u(params: ChannelParams, index_sum: int) -> int:
    """Composite Gamma order ``N(m1+m2-1) - index_sum``."""
    if not 0 <= index_sum <= max_index_sum(params):
        raise ValueError(
            f"index_sum must lie in [0, {max_index_sum(params)}], got {index_sum}"
        )
    return params.n_elements * (params.m1 + params.m2 - 1) - index_sum


@dataclass(frozen=True)
class ComplexChannelValue:
    re: float
    im: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.re, self.im)

    @property
    def phase(self) -> float:
        """Argument in ``(-pi, pi]``."""
        return wrap_phase(math.atan2(self.im, self.re))


def wrap_phase(theta):
    """Map angles from ``atan2``'s ``[-pi, pi]`` onto ``(-pi, pi]``."""
    if isinstance(theta, float):
        return math.pi if theta <= -math.pi else theta
    theta = np.asarray(theta, dtype=float)
    return np.where(theta <= -np.pi, np.pi, theta)
