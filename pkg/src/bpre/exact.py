"""Exact quenched and annealed probabilities for finite-alphabet environments.

Quenched quantities condition on a fixed environment sequence (q_1..q_n);
annealed ones average over all |A|^n sequences by depth-first enumeration.
The enumerator composes generating functions from the innermost generation
outward, so the per-node state is the coefficient row of f_{k,n} up to the
target degree and each node costs one law application.  Partial sums are
combined in a fixed order, independent of chunking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .environment import EnvironmentModel
from .errors import BudgetError, ContractError, TruncationError
from .laws import FiniteLaw, OffspringLaw
from .pgf import DEFAULT_DEGREE, MAX_DEGREE, TruncatedPGF, apply_law_rows, pow_rows

ENUMERATION_BUDGET = 1 << 26
_CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class EnvSequence:
    """A realized environment (q_1, ..., q_n) with its walk prefix sums."""

    laws: tuple[OffspringLaw, ...]

    def __post_init__(self):
        object.__setattr__(self, "laws", tuple(self.laws))

    @property
    def n(self) -> int:
        return len(self.laws)

    @classmethod
    def from_indices(cls, model: EnvironmentModel, indices) -> "EnvSequence":
        return cls(tuple(model.states[int(i)] for i in indices))

    @cached_property
    def walk(self) -> np.ndarray:
        """S_0..S_n with S_k - S_{k-1} = log mean of q_k."""
        s = np.zeros(self.n + 1)
        s[1:] = np.cumsum([math.log(law.mean) for law in self.laws])
        s.flags.writeable = False
        return s

    def eta_prefix(self, convention: str = "lf") -> np.ndarray:
        """Accumulators H_j = sum_{k<j} eta_{k+1} exp(-S_k) for j = 0..n."""
        if convention == "lf":
            etas = [law.eta_lf for law in self.laws]
        elif convention == "general":
            etas = [law.eta_general for law in self.laws]
        else:
            raise ContractError(f"unknown eta convention {convention!r}")
        out = np.zeros(self.n + 1)
        out[1:] = np.cumsum(np.asarray(etas) * np.exp(-self.walk[:-1]))
        return out

    def extinction_ladder(self) -> np.ndarray:
        """t_k = f_{k,n}(0) = P(Z_n = 0 | Z_k = 1, env) for k = 0..n."""
        t = np.zeros(self.n + 1)
        for k in range(self.n - 1, -1, -1):
            t[k] = self.laws[k].pgf(t[k + 1])
        return t


def quenched_coeff_row(env: EnvSequence, z0: int, j_max: int) -> np.ndarray:
    """Exact coefficients c_0..c_{j_max} of f_{0,n}(s)^{z0}."""
    if z0 < 0:
        raise ContractError("initial size must be >= 0")
    width = j_max + 1
    if env.n == 0:
        out = np.zeros(width)
        if z0 <= j_max:
            out[z0] = 1.0
        return out
    row = np.zeros((1, width))
    if j_max >= 1:
        row[0, 1] = 1.0
    for law in reversed(env.laws):
        row = apply_law_rows(law, row)
    out = pow_rows(row, z0)[0]
    return np.clip(out, 0.0, None)


def quenched_pmf(env: EnvSequence, z0: int, j: int, degree: int | None = None) -> float:
    """P(Z_n = j | env, Z_0 = z0), exact for the kept degrees."""
    if z0 < 1:
        raise ContractError("initial size must be >= 1")
    if j < 0:
        raise ContractError("population size must be >= 0")
    if degree is not None and j > degree:
        raise TruncationError(f"raise truncation degree: need {j}, have {degree}")
    if degree is not None and degree > MAX_DEGREE:
        raise TruncationError(f"required degree {degree} exceeds cap {MAX_DEGREE}")
    j_top = degree if degree is not None else j
    return float(quenched_coeff_row(env, z0, j_top)[j])


def quenched_survival(env: EnvSequence, z0: int) -> float:
    """P(Z_n > 0 | env, Z_0 = z0) = 1 - f_{0,n}(0)^{z0}."""
    t0 = env.extinction_ladder()[0]
    return 1.0 - t0**z0


@dataclass(frozen=True)
class QuenchedLaw:
    """Full truncated pmf of Z_n given the environment and Z_0 = z0."""

    pmf: TruncatedPGF
    survival: float

    def __post_init__(self):
        if abs((1.0 - self.pmf.coeffs[0]) - self.survival) > 1e-9:
            raise ContractError("quenched law inconsistent: survival != 1 - pmf[0]")

    @classmethod
    def from_env(
        cls,
        env: EnvSequence,
        z0: int,
        degree: int = DEFAULT_DEGREE,
        tail_target: float = 1e-10,
    ) -> "QuenchedLaw":
        """Build the pmf at ``degree``, doubling until the tail is certified small."""
        width = degree
        while True:
            row = quenched_coeff_row(env, z0, width)
            tail = 1.0 - float(row.sum())
            if tail < tail_target or width >= MAX_DEGREE:
                break
            width = min(2 * width, MAX_DEGREE)
        series = TruncatedPGF(row)
        return cls(pmf=series, survival=1.0 - float(row[0]))


def phi_n(env: EnvSequence, z0: int) -> float:
    """Quenched probability of the single-spine event.

    The event: Z_n = z0 and every side subtree emerging strictly before
    generation n is extinct by n, i.e. all generation-n individuals share
    one parent.  Value: q_n(z0) * z0 * t_0^{z0-1} * prod_{i=1}^{n-1} f_i'(t_i)
    with t_i = f_{i,n}(0), computed in the log domain.
    """
    if env.n < 1:
        raise ContractError("phi needs at least one generation")
    t = env.extinction_ladder()
    qn = env.laws[-1].prob(z0)
    if qn == 0.0:
        return 0.0
    log_val = math.log(qn) + math.log(z0)
    if z0 > 1:
        if t[0] == 0.0:
            return 0.0
        log_val += (z0 - 1) * math.log(t[0])
    for i in range(1, env.n):
        d = env.laws[i - 1].pgf_prime(t[i])
        if d <= 0.0:
            return 0.0
        log_val += math.log(d)
    return math.exp(log_val)


def subtree_extinction_identity(env: EnvSequence, z: int) -> tuple[float, float]:
    """Both sides of the side-subtree extinction identity, for equality tests.

    lhs multiplies, over k = 0..n-1, the probability that the subtree
    attached at generation k dies by n, each evaluated by summing the
    spine offspring-count law against extinction powers (direct summation,
    never the derivative shortcut).  rhs is the telescoped form
    (p_{n-1,n} / p_{-1,n}) * prod f_k'(t_k) with the initial factor
    f_0(s) = s^z.
    """
    if z < 1:
        raise ContractError("initial size must be >= 1")
    n = env.n
    if n < 1:
        raise ContractError("identity needs at least one generation")
    t = env.extinction_ladder()
    surv = 1.0 - t[0] ** z
    if surv <= 0.0:
        raise ContractError("conditioning on null event: quenched survival is 0")

    # lhs, k = 0: initial cohort of z, spine position from the geometric row
    lhs = sum((1.0 - t[0]) * t[0] ** (z - i - 1) / surv * t[0] ** i for i in range(z))
    # lhs, k = 1..n-1: spine offspring law against extinction of each subtree,
    # sum_{i>=0} t^i sum_{j>i} q(j) t^{j-i-1} summed term by term
    for k in range(1, n):
        law = env.laws[k - 1]
        tk = t[k]
        p_ratio = (1.0 - tk) / (1.0 - t[k - 1])
        if isinstance(law, FiniteLaw):
            jmax = law.max_support
        else:
            # geometric weights: truncate once the remaining tail is negligible
            jmax = 1
            if law.ratio > 0.0:
                jmax = max(8, int(math.ceil(-50.0 / math.log(law.ratio))))
        total = 0.0
        for j in range(1, jmax + 1):
            qj = law.prob(j)
            if qj == 0.0:
                continue
            total += qj * sum(tk ** (j - i - 1) * tk**i for i in range(j))
        lhs *= p_ratio * total

    # rhs: telescoped product
    log_rhs = math.log(1.0 - t[n - 1]) - math.log(surv)
    log_rhs += math.log(z)
    if z > 1:
        if t[0] == 0.0:
            return lhs, 0.0
        log_rhs += (z - 1) * math.log(t[0])
    for k in range(1, n):
        d = env.laws[k - 1].pgf_prime(t[k])
        if d <= 0.0:
            return lhs, 0.0
        log_rhs += math.log(d)
    return lhs, math.exp(log_rhs)


@dataclass(frozen=True)
class ReachableSet:
    """Smallest spine size z0 and the closure of sizes reachable from it."""

    z0: int
    closure: frozenset[int]
    capped: bool
    cap: int


def smallest_reachable(model: EnvironmentModel, cap: int = 64) -> ReachableSet:
    """z0 = min{j >= 1 : some state has q(j) > 0 and q(0) > 0}, plus closure."""
    z0 = None
    for law, w in zip(model.states, model.weights):
        if w <= 0.0 or law.p0 <= 0.0:
            continue
        support, _ = law.support(cap)
        positive = [j for j in support if j >= 1]
        if positive:
            cand = min(positive)
            z0 = cand if z0 is None else min(z0, cand)
    if z0 is None:
        raise ContractError("no extinction possible: use monotone-case formula")

    supports = []
    any_unbounded = False
    for law, w in zip(model.states, model.weights):
        if w <= 0.0:
            continue
        sup, unbounded = law.support(cap)
        supports.append(sorted(sup))
        any_unbounded = any_unbounded or unbounded

    closure: set[int] = set()
    frontier = {z0}
    capped = any_unbounded
    while frontier:
        z = frontier.pop()
        if z in closure or z < 1 or z > cap:
            capped = capped or z > cap
            continue
        closure.add(z)
        for sup in supports:
            sums, overflowed = _sumset(sup, z, cap)
            capped = capped or overflowed
            for k in sums:
                if 1 <= k <= cap and k not in closure:
                    frontier.add(k)
    return ReachableSet(z0=z0, closure=frozenset(closure), capped=capped, cap=cap)


def _sumset(support: list[int], z: int, cap: int) -> tuple[set[int], bool]:
    """All achievable sums of z draws from ``support``, truncated at cap."""
    reachable = {0}
    overflow = False
    for _ in range(z):
        nxt = set()
        for base in reachable:
            for v in support:
                s = base + v
                if s <= cap:
                    nxt.add(s)
                else:
                    overflow = True
        reachable = nxt
        if not reachable:
            break
    return reachable, overflow


def _enumeration_count(alphabet: int, n: int) -> float:
    return alphabet**n


def annealed_pmf_row(
    model: EnvironmentModel,
    z0: int,
    n: int,
    j_max: int,
    budget: int = ENUMERATION_BUDGET,
) -> np.ndarray:
    """Exact annealed coefficients: P(Z_n = j | Z_0 = z0) for j = 0..j_max.

    Enumerates every environment sequence depth-first; the running state is
    the coefficient row of f_{k,n}, extended by one law application per node.
    """
    if z0 < 1:
        raise ContractError("initial size must be >= 1")
    if n < 0:
        raise ContractError("n must be >= 0")
    a = len(model.states)
    if _enumeration_count(a, n) > budget:
        raise BudgetError(
            f"enumeration of {a}^{n} sequences exceeds budget {budget}; "
            "use the Monte Carlo path (tilted importance sampling)"
        )
    width = j_max + 1
    if n == 0:
        out = np.zeros(width)
        if z0 <= j_max:
            out[z0] = 1.0
        return out

    # fix enough innermost generations that the vectorized sweep fits in memory
    d_vec = min(n, max(0, int(math.log(_CHUNK_ROWS, max(a, 2)))))
    d_fix = n - d_vec
    weights = np.asarray(model.weights)

    identity = np.zeros(width)
    if width > 1:
        identity[1] = 1.0

    total = np.zeros(width)
    for prefix in itertools.product(range(a), repeat=d_fix):
        # prefix fixes generations n, n-1, ..., n-d_fix+1 (innermost first)
        row = identity[None, :].copy()
        w_prefix = 1.0
        for idx in prefix:
            row = apply_law_rows(model.states[idx], row)
            w_prefix *= model.weights[idx]
        if w_prefix == 0.0:
            continue
        rows = row
        wvec = np.array([w_prefix])
        for _ in range(d_vec):
            rows = np.vstack([apply_law_rows(law, rows) for law in model.states])
            wvec = np.concatenate([wvec * w for w in weights])
        powered = pow_rows(rows, z0)
        total += wvec @ powered
    return np.clip(total, 0.0, None)


def annealed_pmf(
    model: EnvironmentModel,
    z0: int,
    n: int,
    j: int,
    budget: int = ENUMERATION_BUDGET,
) -> float:
    """Exact annealed P(Z_n = j | Z_0 = z0) by full enumeration."""
    return float(annealed_pmf_row(model, z0, n, j, budget)[j])


@dataclass(frozen=True)
class FeketeRow:
    n: int
    a_n: float
    a_n_over_n: float
    slope: float | None


@dataclass(frozen=True)
class FeketeTable:
    """Certified upper bounds a_n/n on the small-value rate, plus slope proxies."""

    z0: int
    rows: tuple[FeketeRow, ...]

    @property
    def min_upper(self) -> float:
        return min(r.a_n_over_n for r in self.rows)

    @property
    def slope_estimate(self) -> float | None:
        slopes = [r.slope for r in self.rows if r.slope is not None]
        return slopes[-1] if slopes else None

    def a(self, n: int) -> float:
        for r in self.rows:
            if r.n == n:
                return r.a_n
        raise KeyError(n)

    def to_csv(self) -> str:
        lines = ["n,a_n,a_n_over_n,slope"]
        for r in self.rows:
            slope = "" if r.slope is None else repr(r.slope)
            lines.append(f"{r.n},{r.a_n!r},{r.a_n_over_n!r},{slope}")
        return "\n".join(lines) + "\n"


def fekete_bounds(
    model: EnvironmentModel,
    z0: int | None = None,
    n_max: int = 12,
    budget: int = ENUMERATION_BUDGET,
) -> FeketeTable:
    """a_n = -log P_{z0}(Z_n = z0) for n = 1..n_max; every a_n/n bounds the rate.

    Slope entries (a_n - a_{n/2}) / (n/2) are attached at even n as
    non-certified proxies that cancel the O(1) prefactor.
    """
    if z0 is None:
        z0 = smallest_reachable(model).z0
    values = {}
    rows = []
    for n in range(1, n_max + 1):
        p = annealed_pmf(model, z0, n, z0, budget)
        if p <= 0.0:
            raise ContractError(f"P_z0(Z_{n} = z0) = 0; subadditive sequence undefined")
        a_n = -math.log(p)
        values[n] = a_n
        slope = None
        if n % 2 == 0:
            m = n // 2
            slope = (a_n - values[m]) / m
        rows.append(FeketeRow(n=n, a_n=a_n, a_n_over_n=a_n / n, slope=slope))
    return FeketeTable(z0=z0, rows=tuple(rows))
