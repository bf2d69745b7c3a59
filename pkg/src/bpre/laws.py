"""Offspring reproduction laws: finite-support vectors and linear-fractional laws.

A linear-fractional (LF) law with mean ``m`` and second factorial moment ``b``
has pgf ``f(s) = 1 - (1-s) / (1/m + (b / (2 m^2)) (1-s))``.  It is a geometric
law on {1, 2, ...} with ratio ``c = b / (2m + b)`` plus a free atom at zero,

    q(0) = 1 - 2 m^2 / (2m + b),        q(k) = (1 - q0) (1 - c) c^(k-1),

which requires ``b >= 2 m (m - 1)`` for q(0) >= 0.  Two standardized second
moments coexist and are both exposed: ``eta_general = b / m^2`` (used by the
survival lower bound) and ``eta_lf = b / (2 m^2)`` (used by every LF closed
form).  Keeping them as separate named properties prevents silent factor-2
mistakes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ContractError, DegenerateLawError

PROB_TOL = 1e-12


@dataclass(frozen=True)
class FiniteLaw:
    """Offspring law with finite support, ``probs[k] = q(k)``."""

    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) == 0:
            raise ContractError("finite law needs at least one probability")
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if any(p < -PROB_TOL for p in probs):
            raise ContractError("negative offspring probability")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise ContractError(f"offspring probabilities sum to {sum(probs)!r}, not 1")

    @cached_property
    def _arr(self) -> np.ndarray:
        a = np.asarray(self.probs, dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def _cum(self) -> np.ndarray:
        c = np.cumsum(self._arr)
        c[-1] = 1.0
        c.flags.writeable = False
        return c

    @property
    def max_support(self) -> int:
        nz = np.nonzero(self._arr)[0]
        return int(nz[-1]) if nz.size else 0

    @property
    def mean(self) -> float:
        k = np.arange(len(self.probs))
        return float(np.dot(k, self._arr))

    @property
    def second_factorial_moment(self) -> float:
        k = np.arange(len(self.probs))
        return float(np.dot(k * (k - 1), self._arr))

    @property
    def p0(self) -> float:
        return self.probs[0]

    def prob(self, k: int) -> float:
        return self.probs[k] if 0 <= k < len(self.probs) else 0.0

    @property
    def eta_general(self) -> float:
        m = self._positive_mean()
        return self.second_factorial_moment / (m * m)

    @property
    def eta_lf(self) -> float:
        return 0.5 * self.eta_general

    def _positive_mean(self) -> float:
        m = self.mean
        if m <= 0.0:
            raise DegenerateLawError("degenerate law: zero mean")
        return m

    def pgf(self, s):
        out = 0.0
        for p in reversed(self.probs):
            out = out * s + p
        return out

    def pgf_prime(self, s):
        out = 0.0
        for k in range(len(self.probs) - 1, 0, -1):
            out = out * s + k * self.probs[k]
        return out

    def truncated_second_moment(self, a: int) -> float:
        if a < 1:
            raise ContractError("truncation level a must be >= 1")
        m = self._positive_mean()
        k = np.arange(len(self.probs))
        mask = k >= a
        return float(np.dot((k * k)[mask], self._arr[mask])) / (m * m)

    def coefficients(self, degree: int) -> np.ndarray:
        out = np.zeros(degree + 1)
        upto = min(degree + 1, len(self.probs))
        out[:upto] = self._arr[:upto]
        return out

    def support(self, cap: int) -> tuple[frozenset[int], bool]:
        vals = frozenset(int(k) for k in np.nonzero(self._arr)[0] if k <= cap)
        unbounded_past_cap = any(k > cap for k in np.nonzero(self._arr)[0])
        return vals, unbounded_past_cap

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        return np.searchsorted(self._cum, u, side="right").astype(np.int64)


@dataclass(frozen=True)
class LinearFractionalLaw:
    """LF offspring law parameterized by mean ``m`` and f''(1) ``b``."""

    m: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "b", float(self.b))
        if not self.m > 0.0:
            raise ContractError("LF law needs mean m > 0")
        if self.b < 0.0:
            raise ContractError("LF law needs b >= 0")
        if self.b < 2.0 * self.m * (self.m - 1.0) - PROB_TOL:
            raise ContractError("LF law invalid: q(0) < 0; needs b >= 2 m (m-1)")

    @property
    def mean(self) -> float:
        return self.m

    @property
    def second_factorial_moment(self) -> float:
        return self.b

    @property
    def p0(self) -> float:
        return max(0.0, 1.0 - 2.0 * self.m * self.m / (2.0 * self.m + self.b))

    @property
    def ratio(self) -> float:
        """Geometric ratio of the weights on {1, 2, ...}."""
        return self.b / (2.0 * self.m + self.b)

    @property
    def eta_general(self) -> float:
        return self.b / (self.m * self.m)

    @property
    def eta_lf(self) -> float:
        return 0.5 * self.b / (self.m * self.m)

    def prob(self, k: int) -> float:
        if k < 0:
            return 0.0
        if k == 0:
            return self.p0
        return (1.0 - self.p0) * (1.0 - self.ratio) * self.ratio ** (k - 1)

    def pgf(self, s):
        u = 1.0 - s
        return 1.0 - u / (1.0 / self.m + self.eta_lf * u)

    def pgf_prime(self, s):
        a = 1.0 / self.m
        return a / (a + self.eta_lf * (1.0 - s)) ** 2

    def truncated_second_moment(self, a: int) -> float:
        if a < 1:
            raise ContractError("truncation level a must be >= 1")
        c = self.ratio
        if c == 0.0:
            return self.prob(1) / (self.m * self.m) if a == 1 else 0.0
        # sum_{y>=a} y^2 c^y = c^a (a^2 - (2a^2-2a-1) c + (a-1)^2 c^2) / (1-c)^3
        t2 = c**a * (a * a - (2 * a * a - 2 * a - 1) * c + (a - 1) ** 2 * c * c) / (1 - c) ** 3
        scale = (1.0 - self.p0) * (1.0 - c) / c
        return scale * t2 / (self.m * self.m)

    def coefficients(self, degree: int) -> np.ndarray:
        out = np.empty(degree + 1)
        out[0] = self.p0
        if degree >= 1:
            k = np.arange(degree)
            out[1:] = (1.0 - self.p0) * (1.0 - self.ratio) * self.ratio**k
        return out

    def support(self, cap: int) -> tuple[frozenset[int], bool]:
        vals = {0} if self.p0 > 0.0 else set()
        if self.ratio > 0.0:
            vals |= set(range(1, cap + 1))
            return frozenset(vals), True
        vals.add(1)
        return frozenset(vals), False

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        if self.ratio > 0.0:
            tail = rng.geometric(1.0 - self.ratio, size)
        else:
            tail = np.ones(size, dtype=np.int64)
        return np.where(u < self.p0, 0, tail).astype(np.int64)


OffspringLaw = Union[FiniteLaw, LinearFractionalLaw]


def moments(law: OffspringLaw) -> tuple[float, float, float]:
    """Return (mean, second factorial moment, eta_general) for a valid law."""
    m = law.mean
    if m <= 0.0:
        raise DegenerateLawError("degenerate law: zero mean")
    return m, law.second_factorial_moment, law.eta_general


def law_from_json(obj: dict) -> OffspringLaw:
    kind = obj.get("type")
    if kind == "finite":
        return FiniteLaw(tuple(obj["probs"]))
    if kind == "lf":
        return LinearFractionalLaw(obj["m"], obj["b"])
    raise ContractError(f"unknown offspring law type {kind!r}")


def law_to_json(law: OffspringLaw) -> dict:
    if isinstance(law, FiniteLaw):
        return {"type": "finite", "probs": list(law.probs)}
    return {"type": "lf", "m": law.m, "b": law.b}
