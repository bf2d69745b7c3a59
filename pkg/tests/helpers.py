"""Shared generators and independent brute-force oracles for the test suite.

The oracles here deliberately avoid the library's generating-function
machinery: population laws are pushed forward by explicit pmf convolution,
so agreement with the engine is a two-route check.
"""

import numpy as np

from bpre.laws import FiniteLaw, LinearFractionalLaw


def random_finite_law(rng, max_support=3, with_extinction=None):
    """Random finite law on {0..max_support}; None mixes extinction freely."""
    while True:
        raw = rng.random(max_support + 1) * (rng.random(max_support + 1) < 0.8)
        if with_extinction is True:
            raw[0] = max(raw[0], 0.2)
        if with_extinction is False:
            raw[0] = 0.0
        total = raw.sum()
        if total <= 0.0:
            continue
        probs = raw / total
        law = FiniteLaw(tuple(probs))
        if law.mean > 0.0:
            return law


def random_lf_law(rng, m_lo=0.4, m_hi=2.5):
    m = rng.uniform(m_lo, m_hi)
    b_min = max(0.0, 2.0 * m * (m - 1.0))
    b = b_min + rng.uniform(0.05, 3.0)
    return LinearFractionalLaw(m=m, b=b)


def law_pmf_vector(law, upto):
    """pmf values q(0..upto) straight from law.prob."""
    return np.array([law.prob(k) for k in range(upto + 1)])


def push_forward_distribution(env_laws, z0, cap=4096):
    """Distribution of Z_n by explicit convolution; independent oracle.

    Returns a vector d with d[j] = P(Z_n = j | env, Z_0 = z0) for j <= cap;
    mass beyond cap is dropped (choose cap comfortably above the reachable
    range for exact results).
    """
    dist = np.zeros(cap + 1)
    dist[z0] = 1.0
    for law in env_laws:
        pmf = law_pmf_vector(law, cap)
        new = np.zeros(cap + 1)
        new[0] += dist[0]
        # convolution powers of the offspring pmf, one per parent count
        power = np.zeros(cap + 1)
        power[0] = 1.0
        for z in range(1, cap + 1):
            power = np.convolve(power, pmf)[: cap + 1]
            if dist[z] > 0.0:
                new += dist[z] * power
            if dist[z:].sum() == 0.0:
                break
        dist = new
    return dist


def spine_event_probability(env_laws, z0, cap=256):
    """P(Z_n = z0 and all horizon individuals share one parent), brute force.

    Decomposes over the penultimate population size: exactly one parent
    produces all z0 survivors, every other parent produces none.
    """
    *head, last = env_laws
    dist = push_forward_distribution(head, z0, cap=cap)
    total = 0.0
    for z in range(1, cap + 1):
        if dist[z] > 0.0:
            total += dist[z] * z * last.prob(z0) * last.prob(0) ** (z - 1)
    return total
