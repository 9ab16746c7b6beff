"""Independent brute-force reference implementations used to check the
package. Everything here works from first principles on plain sets and exact
rationals, deliberately sharing no code with the library paths it validates.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def useful_count(blocks: list[set[int]], downloaded: set[int]) -> int:
    """Servers still holding an undownloaded fragment, recomputed from scratch."""
    return sum(1 for S in blocks if S - downloaded)


def count_t_subsets(points: int, blocks: list[set[int]], t: int) -> dict[tuple, int]:
    """For every t-subset of [points], the number of blocks containing it."""
    counts = {}
    for sub in itertools.combinations(range(1, points + 1), t):
        ss = set(sub)
        counts[sub] = sum(1 for blk in blocks if ss <= blk)
    return counts


def random_wc_transition(blocks: list[set[int]], downloaded: set[int]) -> dict[int, Fraction]:
    """Next-fragment distribution when every useful server offers a uniformly
    random remaining fragment and the finisher is uniform over useful servers."""
    residuals = [S - downloaded for S in blocks if S - downloaded]
    n = len(residuals)
    probs: dict[int, Fraction] = {}
    for res in residuals:
        share = Fraction(1, n * len(res))
        for v in res:
            probs[v] = probs.get(v, Fraction(0)) + share
    return probs


def enumerate_completion_sequences(blocks: list[set[int]], V: int, mu: Fraction = Fraction(1)):
    """All minimal download sequences with their probability, useful-server
    profile, and exact mean duration, under uniform random work conservation.

    Yields (sequence, probability, profile, mean_time) per permutation with
    positive probability.
    """
    for order in itertools.permutations(range(1, V + 1)):
        downloaded: set[int] = set()
        prob = Fraction(1)
        profile = []
        time = Fraction(0)
        alive = True
        for v in order:
            trans = random_wc_transition(blocks, downloaded)
            n = useful_count(blocks, downloaded)
            profile.append(n)
            time += Fraction(1, n) / mu
            if v not in trans:
                alive = False
                break
            prob *= trans[v]
            downloaded.add(v)
        if alive and prob > 0:
            yield order, prob, tuple(profile), time


def grouped_mean_time(blocks: list[set[int]], V: int) -> Fraction:
    """Mean download time as sum over groups of N_s * P_s * E[T_s], grouping
    completion sequences by (profile, per-sequence probability)."""
    groups: dict[tuple, list] = {}
    for _, prob, profile, time in enumerate_completion_sequences(blocks, V):
        groups.setdefault((profile, prob), [0, time])[0] += 1
    total = Fraction(0)
    for (profile, prob), (count, time) in groups.items():
        total += count * prob * time
    return total


def profile_expectations(blocks: list[set[int]], V: int) -> list[Fraction]:
    """E[N(I_l)] for l = 0..V-1 under uniform random work conservation, by
    summing over all completion sequences."""
    acc = [Fraction(0)] * V
    for _, prob, profile, _ in enumerate_completion_sequences(blocks, V):
        for ell, n in enumerate(profile):
            acc[ell] += prob * n
    return acc


def mds_exact_second_step(B: int, V: int, R: int, mode: str) -> Fraction:
    """E[N(I_1)] for the random MDS ensemble by exhaustive enumeration of all
    B**(V*R) placements and exact one-step dynamics.

    ``mode='fragment'`` downloads a uniformly random coded fragment first;
    ``mode='server'`` picks a uniform useful server which then delivers one of
    its stored fragments.
    """
    n_items = V * R
    total = Fraction(0)
    n_placements = B**n_items
    for chi in itertools.product(range(B), repeat=n_items):
        counts = [0] * B
        for b in chi:
            counts[b] += 1
        if mode == "fragment":
            # remove each coded fragment with probability 1/n_items
            exp = Fraction(0)
            for v in range(n_items):
                after = list(counts)
                after[chi[v]] -= 1
                exp += Fraction(1, n_items) * sum(1 for c in after if c > 0)
        else:
            useful = [b for b in range(B) if counts[b] > 0]
            exp = Fraction(0)
            for b in useful:
                after = list(counts)
                after[b] -= 1
                exp += Fraction(1, len(useful)) * sum(1 for c in after if c > 0)
        total += exp
    return total / n_placements


def profile_tolerance(se_sample, expected, B: int, samples: int):
    """3-standard-error tolerance per step, flooring the sample SE with the
    binomial-model SE so steps where no rare server-death event materialized
    (sample variance exactly 0) still get a sound error bar."""
    import numpy as np

    p_dead = np.clip(1.0 - np.asarray(expected, dtype=float) / B, 0.0, 1.0)
    se_model = np.sqrt(B * p_dead * (1.0 - p_dead) / samples)
    return 3.0 * np.maximum(np.asarray(se_sample, dtype=float), se_model)


def immediate_reward(blocks: list[set[int]], downloaded: set[int], decisions: dict[int, int]) -> Fraction:
    """E[N after one more download] given a full per-server decision map;
    servers are 1-based indices into ``blocks``."""
    useful = [b for b in range(1, len(blocks) + 1) if blocks[b - 1] - downloaded]
    n = len(useful)
    exp = Fraction(0)
    for b in useful:
        v = decisions[b]
        nxt = downloaded | {v}
        exp += Fraction(1, n) * useful_count(blocks, nxt)
    return exp


def all_decision_maps(blocks: list[set[int]], downloaded: set[int]):
    """Every work-conserving decision map at the given state."""
    useful = [b for b in range(1, len(blocks) + 1) if blocks[b - 1] - downloaded]
    residuals = [sorted(blocks[b - 1] - downloaded) for b in useful]
    for combo in itertools.product(*residuals):
        yield dict(zip(useful, combo))
