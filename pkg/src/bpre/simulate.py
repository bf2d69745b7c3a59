"""Forward simulation, conditioned spine sampling, and MRCA statistics.

Randomness contract: every stochastic routine is a deterministic function of
(root_seed, index).  Single trajectories derive a counter-based Philox stream
per replicate index; the batched Monte Carlo engines derive one stream per
fixed-size proposal chunk, so results are independent of the worker count
(the BPRE_THREADS environment variable only changes how chunks are mapped to
processes, never the draws).

The conditioned sampler follows the spine construction: given survival to
the horizon, the counts Y_k of unconditioned subtrees founded to the right
of the surviving line have explicit one-dimensional laws (geometric sums in
closed form for LF laws, direct summation for finite laws), and the
population at the horizon is 1 + Y_n + sum of the subtree survivor counts.
Trees conditioned on extinction to the left of the line carry no horizon
individuals and are never materialized.

When the environment is random, conditioning on {Z_n = target} under the
annealed law is NOT the same as sampling an environment, conditioning on
survival, and filtering: that would over-represent low-survival
environments.  The sampler therefore thins environments by their quenched
survival probability first, which restores exact annealed conditioning.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .environment import EnvironmentModel, tilt
from .errors import BudgetError, ContractError, PopulationCapError
from .exact import EnvSequence
from .laws import FiniteLaw, LinearFractionalLaw, OffspringLaw
from .pgf import apply_law_rows, pow_rows

_MASK64 = (1 << 64) - 1
DEFAULT_POPULATION_CAP = 10_000_000
PROPOSAL_CAP = 100_000_000
_CHUNK = 4096

logger = logging.getLogger(__name__)


def stream(root_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream: a pure function of (root_seed, index)."""
    if root_seed < 0 or index < 0:
        raise ContractError("seed and index must be nonnegative")
    key = ((root_seed & _MASK64) << 64) | (index & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def subseed(root_seed: int, *tags) -> int:
    """Derived root seed for a named subtask, stable across runs."""
    blob = repr((root_seed,) + tags).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1


def worker_count() -> int:
    raw = os.environ.get("BPRE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_chunks(fn, payloads, workers, progress_every=None):
    if workers <= 1 or len(payloads) <= 1:
        out = []
        for i, p in enumerate(payloads):
            out.append(fn(p))
            if progress_every and (i + 1) % progress_every == 0:
                logger.info("progress: %d/%d chunks", i + 1, len(payloads))
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))


# ---------------------------------------------------------------------------
# forward simulation


@dataclass(frozen=True)
class Trajectory:
    sizes: tuple[int, ...]
    env: EnvSequence
    provenance: tuple[int, int] | None = None

    @property
    def n(self) -> int:
        return len(self.sizes) - 1


def simulate_forward(
    model: EnvironmentModel,
    z0: int,
    n: int,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
    provenance: tuple[int, int] | None = None,
) -> Trajectory:
    """Draw an i.i.d. environment, then per-individual offspring counts."""
    if z0 < 0:
        raise ContractError("initial size must be >= 0")
    idx = model.sample_indices(rng, n)
    env = EnvSequence.from_indices(model, idx)
    sizes = [z0]
    z = z0
    for k in range(n):
        if z == 0:
            sizes.append(0)
            continue
        z = int(env.laws[k].sample(rng, z).sum())
        if z > cap:
            raise PopulationCapError(f"explosive trajectory: population {z} exceeds cap {cap}")
        sizes.append(z)
    return Trajectory(sizes=tuple(sizes), env=env, provenance=provenance)


@dataclass(frozen=True)
class GenealogyTree:
    """Rooted plane forest of a realized population.

    ``parents[k]`` (k >= 1) maps each generation-k individual, in
    left-to-right (breadth-first) order, to the index of its parent in
    generation k-1.
    """

    z0: int
    parents: tuple[np.ndarray, ...]
    env: EnvSequence
    provenance: tuple[int, int] | None = None

    @property
    def n(self) -> int:
        return len(self.parents) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.z0,) + tuple(arr.size for arr in self.parents[1:])


def simulate_tree(
    model: EnvironmentModel,
    z0: int,
    n: int,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
    provenance: tuple[int, int] | None = None,
) -> GenealogyTree:
    if z0 < 0:
        raise ContractError("initial size must be >= 0")
    idx = model.sample_indices(rng, n)
    env = EnvSequence.from_indices(model, idx)
    parents: list[np.ndarray] = [np.empty(0, dtype=np.int64)]
    z = z0
    for k in range(n):
        if z == 0:
            parents.append(np.empty(0, dtype=np.int64))
            continue
        counts = env.laws[k].sample(rng, z)
        total = int(counts.sum())
        if total > cap:
            raise PopulationCapError(f"explosive trajectory: population {total} exceeds cap {cap}")
        parents.append(np.repeat(np.arange(z, dtype=np.int64), counts))
        z = total
    return GenealogyTree(z0=z0, parents=tuple(parents), env=env, provenance=provenance)


def mrca(tree: GenealogyTree) -> int:
    """Minimal k such that all horizon individuals share one ancestor at n-k."""
    n = tree.n
    sizes = tree.sizes
    if n < 1:
        raise ContractError("tree has no past generations")
    if sizes[n] < 1:
        raise ContractError("no survivors at the horizon")
    cur = np.arange(sizes[n], dtype=np.int64)
    for k in range(1, n + 1):
        cur = np.unique(tree.parents[n - k + 1][cur])
        if cur.size == 1:
            return k
    raise ContractError("MRCA undefined for forest: no common ancestor at generation 0")


# ---------------------------------------------------------------------------
# conditioned spine sampler (fixed environment)


@dataclass(frozen=True)
class SpineSample:
    """One draw of the population conditioned on survival to the horizon.

    ``y_counts[k]`` is the number of unconditioned subtrees founded to the
    right of the surviving line in generation k; ``brood[k] = (z_k, l_k)``
    records the spine parent's offspring count and the spine's position in
    it (positions are within the brood; trees left of the line are extinct
    by the horizon and are not materialized).  ``subtree_finals[k]`` is the
    horizon head-count of the subtree founded at generation k.
    """

    z0: int
    y_counts: tuple[int, ...]
    brood: tuple[tuple[int, int], ...]
    subtree_finals: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.y_counts) - 1

    @property
    def z_n(self) -> int:
        return 1 + self.y_counts[-1] + sum(self.subtree_finals)

    @property
    def all_side_subtrees_dead(self) -> bool:
        return sum(self.subtree_finals) == 0


def _y0_table(t0: float, z0: int) -> np.ndarray:
    surv = 1.0 - t0**z0
    return np.array([(1.0 - t0) * t0 ** (z0 - i - 1) / surv for i in range(z0)])


def _yk_table(law: FiniteLaw, tk: float, p_ratio: float) -> np.ndarray:
    kmax = law.max_support
    probs = np.zeros(max(kmax, 1))
    for i in range(kmax):
        probs[i] = p_ratio * sum(
            law.prob(j) * tk ** (j - i - 1) for j in range(i + 1, kmax + 1)
        )
    return probs


def _draw_table(probs: np.ndarray, rng: np.random.Generator) -> int:
    total = probs.sum()
    if not 0.999999999 < total < 1.000000001:
        raise ContractError("conditioned offspring table does not normalize")
    return int(np.searchsorted(np.cumsum(probs / total), rng.random(), side="right"))


def _draw_y(law: OffspringLaw, tk: float, p_ratio: float, rng) -> int:
    # at the terminal row t_n = 0 and the generic table collapses to
    # q(i+1) / p_{n-1,n} via 0**0 = 1
    if isinstance(law, LinearFractionalLaw):
        c = law.ratio
        if c == 0.0:
            return 0
        return int(rng.geometric(1.0 - c)) - 1
    return _draw_table(_yk_table(law, tk, p_ratio), rng)


def _draw_spine_position(law: OffspringLaw, tk: float, y: int, rng) -> int:
    """Spine position l >= 1 in its brood given y right-siblings: P(l) ~ q(l+y) t^(l-1)."""
    if isinstance(law, LinearFractionalLaw):
        if law.ratio * tk == 0.0:
            return 1
        return int(rng.geometric(1.0 - law.ratio * tk))
    kmax = law.max_support
    ls = np.arange(1, kmax - y + 1)
    if ls.size == 0:
        raise ContractError("spine position table empty")
    weights = np.array(
        [law.prob(l + y) * (tk ** (l - 1) if l > 1 else 1.0) for l in ls]
    )
    total = weights.sum()
    if total <= 0.0:
        raise ContractError("spine position weights vanish")
    return int(ls[np.searchsorted(np.cumsum(weights / total), rng.random(), side="right")])


def _subtree_final(env: EnvSequence, start_gen: int, size: int, rng, cap: int) -> int:
    """Horizon head-count of an unconditioned subtree founded at start_gen."""
    z = size
    for j in range(start_gen, env.n):
        if z == 0:
            return 0
        z = int(env.laws[j].sample(rng, z).sum())
        if z > cap:
            raise PopulationCapError(f"explosive subtree: population {z} exceeds cap {cap}")
    return z


def geiger_sample(
    env: EnvSequence,
    z0: int,
    rng: np.random.Generator,
    cap: int = DEFAULT_POPULATION_CAP,
) -> SpineSample:
    """Sample the horizon population conditioned on {Z_n > 0} for a fixed env."""
    if z0 < 1:
        raise ContractError("initial size must be >= 1")
    n = env.n
    if n < 1:
        raise ContractError("need at least one generation")
    t = env.extinction_ladder()
    if 1.0 - t[0] ** z0 <= 0.0:
        raise ContractError("conditioning on null event: quenched survival is 0")

    y = np.zeros(n + 1, dtype=np.int64)
    brood: list[tuple[int, int]] = []
    y[0] = _draw_table(_y0_table(t[0], z0), rng) if z0 > 1 else 0
    brood.append((z0, z0 - int(y[0])))
    for k in range(1, n + 1):
        law = env.laws[k - 1]
        p_ratio = (1.0 - t[k]) / (1.0 - t[k - 1])
        yk = _draw_y(law, t[k], p_ratio, rng)
        y[k] = yk
        l = _draw_spine_position(law, t[k], yk, rng)
        brood.append((l + yk, l))

    finals = []
    for k in range(n):
        if y[k] == 0:
            finals.append(0)
            continue
        finals.append(_subtree_final(env, k, int(y[k]), rng, cap))
    return SpineSample(
        z0=z0,
        y_counts=tuple(int(v) for v in y),
        brood=tuple(brood),
        subtree_finals=tuple(finals),
    )


# ---------------------------------------------------------------------------
# importance sampling for annealed small-value probabilities


@dataclass(frozen=True)
class ImportanceEstimate:
    estimate: float
    std_error: float
    nu: float
    mu: float
    replicates: int


def _quenched_small_value_rows(
    states: tuple[OffspringLaw, ...], idx: np.ndarray, z0: int, j_max: int
) -> np.ndarray:
    """Exact P(1 <= Z_n <= j_max | env) for each environment row of idx."""
    b, n = idx.shape
    rows = np.zeros((b, j_max + 1))
    rows[:, 1] = 1.0
    for g in range(n - 1, -1, -1):
        col = idx[:, g]
        for a, law in enumerate(states):
            sel = np.nonzero(col == a)[0]
            if sel.size:
                rows[sel] = apply_law_rows(law, rows[sel])
    powered = pow_rows(rows, z0)
    return powered[:, 1:].sum(axis=1)


def importance_estimate(
    model: EnvironmentModel,
    z0: int,
    n: int,
    j_max: int,
    nu: float,
    replicates: int,
    root_seed: int,
    chunk: int = _CHUNK,
) -> ImportanceEstimate:
    """Unbiased tilted estimator of the annealed P(1 <= Z_n <= j_max).

    Environments are drawn under the exp(-nu X) tilt; each quenched
    small-value probability is computed exactly and reweighted by
    mu^n exp(nu S_n), which removes the tilt in expectation.
    """
    if replicates < 1:
        raise ContractError("replicates must be >= 1")
    tilted, mu = tilt(model, nu)
    x = np.asarray(model.x_values)
    values = np.empty(replicates)
    n_chunks = (replicates + chunk - 1) // chunk
    for c in range(n_chunks):
        lo, hi = c * chunk, min((c + 1) * chunk, replicates)
        rng = stream(root_seed, c)
        idx = tilted.sample_indices(rng, (hi - lo, n))
        probs = _quenched_small_value_rows(model.states, idx, z0, j_max)
        s_n = x[idx].sum(axis=1)
        values[lo:hi] = probs * mu**n * np.exp(nu * s_n)
    est = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.inf
    return ImportanceEstimate(estimate=est, std_error=se, nu=nu, mu=mu, replicates=replicates)


# ---------------------------------------------------------------------------
# MRCA conditioned on a small horizon population


@dataclass(frozen=True)
class MrcaDistribution:
    n: int
    target_size: int
    method: str
    counts: dict[int, int]
    accepted: int
    proposed: int

    def pmf(self, k: int) -> float:
        if self.accepted == 0:
            return math.nan
        return self.counts.get(k, 0) / self.accepted

    def mass_above(self, threshold: float) -> float:
        return sum(v for k, v in self.counts.items() if k > threshold) / self.accepted

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "target_size": self.target_size,
            "bins": [{"k": k, "count": self.counts[k]} for k in sorted(self.counts)],
            "accepted": self.accepted,
            "proposed": self.proposed,
        }


def _merge_counts(parts) -> tuple[dict[int, int], int]:
    counts: dict[int, int] = {}
    accepted = 0
    for part in parts:
        for k, v in part.items():
            counts[k] = counts.get(k, 0) + v
            accepted += v
    return counts, accepted


def _lf_arrays(model: EnvironmentModel):
    etas = np.asarray([law.eta_lf for law in model.states])
    ratios = np.asarray([law.ratio for law in model.states])
    xs = np.asarray(model.x_values)
    return xs, etas, ratios


def _mrca_geiger_lf_chunk(payload) -> dict[int, int]:
    """One proposal chunk of the batched LF spine sampler; returns MRCA counts.

    The ladder, survival thinning and Y-draws are vectorized.  For target 2
    the subtree outcomes are marginalized exactly: each subtree founded at
    generation k evolves by the composed LF law f_{k,n}, so "dead by n" has
    probability t_k per founder and "exactly one horizon survivor" has the
    closed-form first coefficient; one categorical draw per row replaces the
    forward simulation of every subtree.  Larger targets fall back to direct
    subtree simulation.
    """
    model_json, n, target, root_seed, chunk_index, chunk_size, cap = payload
    model = EnvironmentModel.from_json(model_json)
    xs, etas, ratios = _lf_arrays(model)
    rng = stream(root_seed, chunk_index)

    idx = model.sample_indices(rng, (chunk_size, n))
    x = xs[idx]
    s = np.cumsum(x, axis=1)  # S_1..S_n
    s_full = np.concatenate([np.zeros((chunk_size, 1)), s], axis=1)
    terms = etas[idx] * np.exp(-s_full[:, :-1])  # eta_j e^{-S_{j-1}}, j = 1..n
    suffix = np.zeros((chunk_size, n + 1))
    suffix[:, :-1] = np.cumsum(terms[:, ::-1], axis=1)[:, ::-1]
    denom = np.exp(-s[:, -1])[:, None] + suffix  # e^{-S_n} + tail eta sums
    scaled = np.exp(s_full) * denom  # s_exp_k + H_k of the composed law f_{k,n}
    t = 1.0 - 1.0 / scaled  # extinction ladder rows, k = 0..n
    survival = 1.0 - t[:, 0]

    keep = rng.random(chunk_size) < survival  # annealed-conditioning thinning
    rows = np.nonzero(keep)[0]
    counts: dict[int, int] = {}
    if rows.size == 0:
        return counts

    c = ratios[idx[rows]]  # geometric ratios per kept row and generation
    y = rng.geometric(1.0 - c) - 1  # Y_1..Y_n per kept row
    allowed = target - 1

    if target == 2:
        # single-survivor coefficient of f_{k,n} per row: q1_k = s_exp_k / (s_exp_k+H_k)^2
        q1 = np.exp(-(s[rows, -1])[:, None] + s_full[rows]) / (scaled[rows] ** 2)
        u = rng.random(rows.size)
        for r_pos in range(rows.size):
            y_n = int(y[r_pos, n - 1])
            if y_n > 1:
                continue
            t_row = t[rows[r_pos]]
            dead_all = 1.0
            for k in range(1, n):
                yk = y[r_pos, k - 1]
                if yk:
                    dead_all *= t_row[k] ** int(yk)
            if y_n == 1:
                if u[r_pos] < dead_all:
                    counts[1] = counts.get(1, 0) + 1
                continue
            # need exactly one survivor among the subtrees
            acc = 0.0
            uu = u[r_pos]
            hit = None
            for k in range(1, n):
                yk = int(y[r_pos, k - 1])
                if yk == 0:
                    continue
                p_one = yk * q1[r_pos, k] * t_row[k] ** (yk - 1)
                for j in range(1, n):
                    if j != k and y[r_pos, j - 1]:
                        p_one *= t_row[j] ** int(y[r_pos, j - 1])
                acc += p_one
                if uu < acc:
                    hit = k
                    break
            if hit is not None:
                age = n - hit + 1
                counts[age] = counts.get(age, 0) + 1
        return counts

    for r_pos, row in enumerate(rows):
        y_n = int(y[r_pos, n - 1])
        if y_n > allowed:
            continue
        budget = allowed - y_n
        extras = 0
        k_first = None
        laws_idx = idx[row]
        ok = True
        for k in range(1, n):  # subtree founded in generation k
            yk = int(y[r_pos, k - 1])
            if yk == 0:
                continue
            z = yk
            for j in range(k, n):
                law = model.states[laws_idx[j]]
                alive = rng.binomial(z, 1.0 - law.p0) if law.p0 > 0.0 else z
                if alive == 0:
                    z = 0
                    break
                ratio = law.ratio
                if ratio > 0.0:
                    z = alive + int(rng.negative_binomial(alive, 1.0 - ratio))
                else:
                    z = alive
                if z > cap:
                    raise PopulationCapError("explosive subtree in conditioned sampler")
            if z > 0:
                extras += z
                if k_first is None:
                    k_first = k
                if extras > budget:
                    ok = False
                    break
        if not ok or extras != budget:
            continue
        if k_first is None:
            # all side subtrees dead; the extras are the final brood
            k_first = n
        age = n - k_first + 1
        counts[age] = counts.get(age, 0) + 1
    return counts


def _mrca_geiger_generic_chunk(payload) -> dict[int, int]:
    model_json, n, target, root_seed, chunk_index, chunk_size, cap = payload
    model = EnvironmentModel.from_json(model_json)
    rng = stream(root_seed, chunk_index)
    counts: dict[int, int] = {}
    for _ in range(chunk_size):
        idx = model.sample_indices(rng, n)
        env = EnvSequence.from_indices(model, idx)
        t0 = env.extinction_ladder()[0]
        survival = 1.0 - t0
        if rng.random() >= survival:
            continue
        sample = geiger_sample(env, 1, rng, cap)
        if sample.z_n != target:
            continue
        contributing = [k for k, f in enumerate(sample.subtree_finals) if f > 0]
        if sample.y_counts[-1] > 0 or not contributing:
            k_first = n if not contributing else min(contributing + [n])
        else:
            k_first = min(contributing)
        age = n - k_first + 1
        counts[age] = counts.get(age, 0) + 1
    return counts


def _mrca_rejection_chunk(payload) -> dict[int, int]:
    model_json, n, target, root_seed, chunk_index, chunk_size, cap = payload
    model = EnvironmentModel.from_json(model_json)
    rng = stream(root_seed, chunk_index)
    counts: dict[int, int] = {}
    for _ in range(chunk_size):
        tree = simulate_tree(model, 1, n, rng, cap)
        if tree.sizes[n] != target:
            continue
        age = mrca(tree)
        counts[age] = counts.get(age, 0) + 1
    return counts


def conditioned_mrca_sample(
    model: EnvironmentModel,
    n: int,
    target_size: int,
    method: str,
    proposals: int,
    root_seed: int,
    chunk: int = _CHUNK,
    cap: int = DEFAULT_POPULATION_CAP,
    workers: int | None = None,
) -> MrcaDistribution:
    """Empirical law of MRCA_n given Z_n = target_size, Z_0 = 1.

    ``proposals`` counts environment draws (method "geiger") or full forward
    trees (method "rejection"); the accepted sample count is random.  Chunks
    are seeded by index, so the result is a pure function of
    (model, n, target_size, method, proposals, root_seed, chunk).
    """
    if target_size < 2:
        raise ContractError("target size must be >= 2 for a meaningful MRCA")
    if n < 1:
        raise ContractError("horizon must be >= 1")
    if proposals < 1:
        raise ContractError("need at least one proposal")
    if proposals > PROPOSAL_CAP:
        raise BudgetError(f"proposal budget {proposals} exceeds cap {PROPOSAL_CAP}")
    if method not in ("geiger", "rejection"):
        raise ContractError(f"unknown method {method!r}")
    if workers is None:
        workers = worker_count()

    n_chunks = (proposals + chunk - 1) // chunk
    payloads = []
    for c in range(n_chunks):
        size = min(chunk, proposals - c * chunk)
        payloads.append((model.to_json(), n, target_size, root_seed, c, size, cap))
    if method == "rejection":
        fn = _mrca_rejection_chunk
    elif model.is_lf_pure:
        fn = _mrca_geiger_lf_chunk
    else:
        fn = _mrca_geiger_generic_chunk
    logger.info(
        "conditioned MRCA: %s proposals in %s chunks (method=%s, n=%s, target=%s)",
        proposals,
        n_chunks,
        method,
        n,
        target_size,
    )
    parts = _map_chunks(fn, payloads, workers, progress_every=max(1, n_chunks // 10))
    counts, accepted = _merge_counts(parts)
    if accepted == 0:
        raise ContractError(
            f"zero accepted replicates out of {proposals} proposals "
            f"(acceptance rate < {1.0 / proposals:.2e}); raise the proposal budget"
        )
    return MrcaDistribution(
        n=n,
        target_size=target_size,
        method=method,
        counts=counts,
        accepted=accepted,
        proposed=proposals,
    )
