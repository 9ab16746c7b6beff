"""Download-process simulation and exact expectations.

The continuous-time download is simulated as its jump chain: while the
downloaded set is I, the next fetch completes after an Exponential(N(I)*mu)
interval, the finishing server is uniform over the useful set (all residual
download times are i.i.d. memoryless), and the fetched fragment is whatever
the policy has scheduled there. A per-server-clock mode that races explicit
exponential timers with cancellation is kept as a validation path; the two
agree in distribution.

Monte Carlo runs draw from per-run derived streams, so results are
reproducible and independent of worker count. Exact expectations come from
propagating subset probabilities through the chain (2^V states).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import lcm, sqrt

import numpy as np

from . import rng as _rng
from .constructions import MdsPlacement, ReplicationPlacement, sample_random_mds
from .errors import EmptyProfile, InvalidParams, TooManyFragments
from .mdp import _forward_dp, _SchemeContext
from .model import StorageScheme
from .scheduling import (
    MdpPolicy,
    NonadaptivePolicy,
    RandomWorkConserving,
    RankedPolicy,
)

__all__ = [
    "SimulationConfig",
    "TrajectoryRecord",
    "SimulationSummary",
    "ExactDownload",
    "EnsembleSummary",
    "simulate_run",
    "simulate_run_clocks",
    "monte_carlo",
    "exact_mean_download",
    "mean_download_lower_bound",
    "simulate_ensemble_profile",
    "ensemble_monte_carlo",
]

SERVER_UNIFORM = "server"
FRAGMENT_UNIFORM = "fragment"


@dataclass(frozen=True)
class SimulationConfig:
    """A Monte Carlo experiment: scheme, policy, rate, runs, master seed."""

    scheme: StorageScheme
    policy: object
    mu: float
    runs: int
    master_seed: int

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise InvalidParams("runs must be >= 1")
        if self.mu <= 0:
            raise InvalidParams("mu must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    """One simulated download: instants D_0..D_V, the fragment order, and the
    useful-server counts N(I_0)..N(I_{V-1})."""

    download_instants: tuple[float, ...]
    fragment_order: tuple[int, ...]
    useful_profile: tuple[int, ...]


@dataclass(frozen=True)
class SimulationSummary:
    """Aggregates over independent runs.

    Profiles are per-download-index means of the useful-server count;
    ``normalized_aggregate`` is their sum over B*V. Extremes over individual
    trajectories are kept for bound checking. The CI uses the normal
    approximation and is flagged unreliable under 30 runs.
    """

    mean_download_time: float
    stderr: float | None
    ci95: tuple[float, float] | None
    ci_reliable: bool
    runs: int
    master_seed: int
    mu: float
    policy_label: str
    mean_profile: np.ndarray
    normalized_profile: np.ndarray
    normalized_aggregate: float
    min_profile: np.ndarray
    max_profile: np.ndarray
    min_trajectory_aggregate: int
    max_trajectory_aggregate: int


class _Runtime:
    """Per-worker immutable arrays for the jump-chain inner loop (0-based)."""

    def __init__(self, scheme: StorageScheme, policy) -> None:
        self.scheme = scheme
        self.policy = policy
        self.V = scheme.V
        self.B = scheme.B
        self.frag_sets = [sorted(v - 1 for v in s) for s in scheme.fragment_sets]
        self.occ = [sorted(b - 1 for b in s) for s in scheme.occupancy]
        k_max = max(len(s) for s in self.frag_sets)
        scale = lcm(*range(1, k_max + 1))
        self.inv_scaled = [0] + [scale // k for k in range(1, k_max + 1)]
        self.kind, self.extra = self._classify(policy)

    def _classify(self, policy):
        if isinstance(policy, NonadaptivePolicy):
            orders = [[v - 1 for v in o] for o in policy.order.orders]
            return "nonadaptive", orders
        if isinstance(policy, RandomWorkConserving):
            return "random", None
        if isinstance(policy, RankedPolicy):
            pos = None
            if policy.init_order is not None:
                pos = []
                for o in policy.init_order.orders:
                    m = [0] * self.V
                    for i, v in enumerate(o):
                        m[v - 1] = i
                    pos.append(m)
            return f"ranked-{policy.rank}-{policy.tie}", pos
        if isinstance(policy, MdpPolicy):
            return "mdp", policy.solution.decisions
        raise InvalidParams(f"unsupported policy {policy!r}")


def _run_trajectory(rt: _Runtime, mu: float, gen: np.random.Generator):
    """One jump-chain run; returns (instants, order, profile) as lists."""
    V, B = rt.V, rt.B
    exps = _rng.standard_exponentials(gen, V)
    winner_words = _rng.bounded_picks(gen, V)
    needs_extra = rt.kind == "random" or rt.kind.endswith("seeded")
    extra_words = _rng.bounded_picks(gen, V) if needs_extra else None

    frag_sets, occ = rt.frag_sets, rt.occ
    downloaded = [False] * V
    residual_count = [len(s) for s in frag_sets]
    useful = [b for b in range(B) if residual_count[b] > 0]
    pos = [-1] * B
    for i, b in enumerate(useful):
        pos[b] = i
    kind = rt.kind
    greedy_rank = kind.startswith("ranked-greedy")
    if kind == "nonadaptive":
        pointers = [0] * B
    mask = 0

    instants = [0.0]
    order: list[int] = []
    profile: list[int] = []
    t = 0.0
    for ell in range(V):
        n = len(useful)
        profile.append(n)
        t += exps[ell] / (n * mu)
        instants.append(t)
        w = useful[_rng.pick(winner_words[ell], n)]

        if kind == "nonadaptive":
            o = rt.extra[w]
            k = pointers[w]
            while downloaded[o[k]]:
                k += 1
            pointers[w] = k
            v = o[k]
        elif kind == "random":
            j = _rng.pick(extra_words[ell], residual_count[w])
            for v in frag_sets[w]:
                if not downloaded[v]:
                    if j == 0:
                        break
                    j -= 1
        elif kind == "mdp":
            v = rt.extra[(mask, w)]
        else:  # ranked
            inv_scaled = rt.inv_scaled
            best_s = None
            tied: list[int] = []
            for v2 in frag_sets[w]:
                if downloaded[v2]:
                    continue
                if greedy_rank:
                    s = 0
                    for a in occ[v2]:
                        if residual_count[a] == 1:
                            s += 1
                else:
                    s = 0
                    for a in occ[v2]:
                        s += inv_scaled[residual_count[a]]
                if best_s is None or s < best_s:
                    best_s = s
                    tied = [v2]
                elif s == best_s:
                    tied.append(v2)
            if len(tied) == 1:
                v = tied[0]
            elif rt.extra is not None:  # init-order tie positions
                pm = rt.extra[w]
                v = min(tied, key=lambda x: pm[x])
            elif kind.endswith("seeded"):
                v = tied[_rng.pick(extra_words[ell], len(tied))]
            else:
                v = tied[0]

        order.append(v + 1)
        downloaded[v] = True
        mask |= 1 << v
        for b in occ[v]:
            residual_count[b] -= 1
            if residual_count[b] == 0:
                i = pos[b]
                last = useful[-1]
                useful[i] = last
                pos[last] = i
                useful.pop()
                pos[b] = -1
    return instants, order, profile


def simulate_run(
    scheme: StorageScheme, policy, mu: float, run_rng: np.random.Generator
) -> TrajectoryRecord:
    """Simulate one download as the jump chain of the Markov process.

    Inter-download times are Exponential(N(I_l)*mu) and the finishing server
    is uniform over the useful set; this matches i.i.d. exponential fragment
    clocks with instant cancellation exactly, by memorylessness.
    """
    rt = _Runtime(scheme, policy)
    instants, order, profile = _run_trajectory(rt, mu, run_rng)
    return TrajectoryRecord(
        download_instants=tuple(instants),
        fragment_order=tuple(order),
        useful_profile=tuple(profile),
    )


def run_stream(master_seed: int, run_index: int) -> np.random.Generator:
    """The derived stream feeding run ``run_index`` of an experiment."""
    return _rng.stream(master_seed, _rng.DOMAIN_RUN, run_index)


def simulate_run_clocks(
    scheme: StorageScheme, policy, mu: float, run_rng: np.random.Generator
) -> TrajectoryRecord:
    """Validation mode: race explicit per-server exponential clocks.

    Every useful server downloads its scheduled fragment under a fresh
    Exponential(mu) timer; when a fragment completes anywhere, servers
    downloading that fragment cancel and reschedule instantly. Slower than
    the jump chain but structurally faithful to the modeled system.
    """
    rt = _Runtime(scheme, policy)
    V = scheme.V
    state_gen = run_rng
    # reuse the jump-chain decision machinery through a tiny adapter
    downloaded = [False] * V
    residual_count = [len(s) for s in rt.frag_sets]
    useful = {b for b in range(rt.B) if residual_count[b] > 0}
    pointers = [0] * rt.B
    mask = 0
    current: dict[int, int] = {}
    fire: dict[int, float] = {}

    def decide(w: int) -> int:
        if rt.kind == "nonadaptive":
            o = rt.extra[w]
            k = pointers[w]
            while downloaded[o[k]]:
                k += 1
            pointers[w] = k
            return o[k]
        if rt.kind == "mdp":
            return rt.extra[(mask, w)]
        if rt.kind == "random":
            residual = [v for v in rt.frag_sets[w] if not downloaded[v]]
            return residual[int(state_gen.integers(0, len(residual)))]
        # ranked
        greedy = rt.kind.startswith("ranked-greedy")
        best_s, tied = None, []
        for v2 in rt.frag_sets[w]:
            if downloaded[v2]:
                continue
            if greedy:
                s = sum(1 for a in rt.occ[v2] if residual_count[a] == 1)
            else:
                s = sum(rt.inv_scaled[residual_count[a]] for a in rt.occ[v2])
            if best_s is None or s < best_s:
                best_s, tied = s, [v2]
            elif s == best_s:
                tied.append(v2)
        if len(tied) == 1:
            return tied[0]
        if rt.extra is not None:
            pm = rt.extra[w]
            return min(tied, key=lambda x: pm[x])
        if rt.kind.endswith("seeded"):
            return tied[int(state_gen.integers(0, len(tied)))]
        return tied[0]

    t = 0.0
    for b in useful:
        current[b] = decide(b)
        fire[b] = t + float(state_gen.exponential(1.0 / mu))

    instants = [0.0]
    order: list[int] = []
    profile: list[int] = []
    for _ in range(V):
        profile.append(len(useful))
        w = min(useful, key=lambda b: (fire[b], b))
        t = fire[w]
        v = current[w]
        instants.append(t)
        order.append(v + 1)
        downloaded[v] = True
        mask |= 1 << v
        for b in rt.occ[v]:
            residual_count[b] -= 1
            if residual_count[b] == 0:
                useful.discard(b)
                current.pop(b, None)
                fire.pop(b, None)
        for b in list(useful):
            if current[b] == v:  # cancelled: reschedule with a fresh clock
                current[b] = decide(b)
                fire[b] = t + float(state_gen.exponential(1.0 / mu))
    return TrajectoryRecord(
        download_instants=tuple(instants),
        fragment_order=tuple(order),
        useful_profile=tuple(profile),
    )


def _simulate_chunk(args):
    scheme, policy, mu, master_seed, start, stop = args
    rt = _Runtime(scheme, policy)
    V = scheme.V
    dv = np.empty(stop - start, dtype=np.float64)
    profile_sum = np.zeros(V, dtype=np.int64)
    min_profile = np.full(V, np.iinfo(np.int64).max, dtype=np.int64)
    max_profile = np.zeros(V, dtype=np.int64)
    min_agg = None
    max_agg = None
    for r in range(start, stop):
        gen = _rng.stream(master_seed, _rng.DOMAIN_RUN, r)
        instants, _, profile = _run_trajectory(rt, mu, gen)
        dv[r - start] = instants[-1]
        p = np.asarray(profile, dtype=np.int64)
        profile_sum += p
        np.minimum(min_profile, p, out=min_profile)
        np.maximum(max_profile, p, out=max_profile)
        agg = int(p.sum())
        min_agg = agg if min_agg is None else min(min_agg, agg)
        max_agg = agg if max_agg is None else max(max_agg, agg)
    return dv, profile_sum, min_profile, max_profile, min_agg, max_agg


def monte_carlo(config: SimulationConfig, threads: int = 1) -> SimulationSummary:
    """Aggregate ``config.runs`` independent trajectories.

    Run r draws from the stream derived from (master_seed, r), and partial
    results are reduced in run order, so the summary is identical for any
    ``threads`` value.
    """
    scheme, policy = config.scheme, config.policy
    runs = config.runs
    chunk = max(1, (runs + max(1, threads) * 4 - 1) // (max(1, threads) * 4))
    tasks = [
        (scheme, policy, config.mu, config.master_seed, lo, min(lo + chunk, runs))
        for lo in range(0, runs, chunk)
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_simulate_chunk, tasks))
    else:
        parts = [_simulate_chunk(t) for t in tasks]

    dv = np.concatenate([p[0] for p in parts])
    profile_sum = np.sum([p[1] for p in parts], axis=0)
    min_profile = np.min([p[2] for p in parts], axis=0)
    max_profile = np.max([p[3] for p in parts], axis=0)
    min_agg = min(p[4] for p in parts)
    max_agg = max(p[5] for p in parts)

    mean = float(dv.mean())
    if runs > 1:
        stderr = float(dv.std(ddof=1) / sqrt(runs))
        ci = (mean - 1.96 * stderr, mean + 1.96 * stderr)
    else:
        stderr, ci = None, None
    mean_profile = profile_sum / runs
    B = scheme.B
    label = getattr(policy, "describe", lambda: str(policy))()
    return SimulationSummary(
        mean_download_time=mean,
        stderr=stderr,
        ci95=ci,
        ci_reliable=runs >= 30,
        runs=runs,
        master_seed=config.master_seed,
        mu=config.mu,
        policy_label=label,
        mean_profile=mean_profile,
        normalized_profile=mean_profile / B,
        normalized_aggregate=float(profile_sum.sum()) / (B * scheme.V * runs),
        min_profile=min_profile,
        max_profile=max_profile,
        min_trajectory_aggregate=min_agg,
        max_trajectory_aggregate=max_agg,
    )


@dataclass(frozen=True)
class ExactDownload:
    """Exact mean download time and per-step expected useful counts."""

    mean: Fraction | float
    per_ell_useful: tuple
    mu: float
    exact: bool


def exact_mean_download(
    scheme: StorageScheme, policy, mu: float, exact: bool | None = None, cap: int = 24
) -> ExactDownload:
    """E[D_V] = sum over stages of E[1/(N(I_l)*mu)], by exact subset DP.

    Rational arithmetic is used for V <= 16 unless overridden; the float mode
    exists for larger V, still capped (2^V states).
    """
    if scheme.V > cap:
        raise TooManyFragments(f"V={scheme.V} exceeds the evaluation cap {cap}")
    if exact is None:
        exact = scheme.V <= 16
    ctx = _SchemeContext(scheme)
    per_ell, per_ell_inv, _ = _forward_dp(ctx, policy, rational=exact)
    if exact:
        mean = sum(per_ell_inv, start=Fraction(0)) / Fraction(mu)
    else:
        mean = sum(per_ell_inv) / mu
    return ExactDownload(mean=mean, per_ell_useful=tuple(per_ell), mu=mu, exact=exact)


def mean_download_lower_bound(per_ell_useful, mu: float) -> float:
    """Jensen bound on the mean download time: E[D_V] >= V^2/(mu*sum E[N])."""
    profile = list(per_ell_useful)
    if not profile:
        raise EmptyProfile("need at least one expected useful count")
    if any(x <= 0 for x in profile):
        raise EmptyProfile("expected useful counts must be positive")
    V = len(profile)
    return V * V / (mu * float(sum(profile)))


# ---------------------------------------------------------------------------
# Random-ensemble trajectory simulation


def simulate_ensemble_profile(
    placement: ReplicationPlacement | MdsPlacement,
    order_mode: str,
    gen: np.random.Generator,
) -> np.ndarray:
    """Useful-server profile N(I_0)..N(I_{V-1}) of one ensemble download.

    ``order_mode='server'`` runs the physical jump chain: the winner is
    uniform over useful servers and delivers a uniformly chosen one of its
    remaining fragments. ``order_mode='fragment'`` instead downloads a
    uniformly random remaining (distinct, or coded for MDS) fragment each
    step, the idealization under which the ensemble closed forms are exact.
    """
    if order_mode not in (SERVER_UNIFORM, FRAGMENT_UNIFORM):
        raise InvalidParams(f"unknown order mode {order_mode!r}")
    if isinstance(placement, ReplicationPlacement):
        holders = [sorted(b - 1 for b in s) for s in placement.occupancy]
        item_count = placement.V
        steps = placement.V
    elif isinstance(placement, MdsPlacement):
        holders = [[b - 1] for b in placement.chi]
        item_count = placement.V * placement.R
        steps = placement.V
    else:
        raise InvalidParams(f"unsupported placement {placement!r}")

    count = [0] * placement.B
    for hs in holders:
        for b in hs:
            count[b] += 1
    # count[b] = number of distinct remaining items stored on b
    profile = np.empty(steps, dtype=np.int64)
    remaining = [True] * item_count

    if order_mode == FRAGMENT_UNIFORM:
        order = gen.permutation(item_count)
        for taken in range(steps):
            profile[taken] = sum(1 for c in count if c > 0)
            v = int(order[taken])
            remaining[v] = False
            for b in holders[v]:
                count[b] -= 1
        return profile

    # server-uniform jump chain
    by_server: list[list[int]] = [[] for _ in range(placement.B)]
    for v, hs in enumerate(holders):
        for b in hs:
            by_server[b].append(v)
    for taken in range(steps):
        useful = [b for b in range(placement.B) if count[b] > 0]
        profile[taken] = len(useful)
        w = useful[int(gen.integers(0, len(useful)))]
        residual = [v for v in by_server[w] if remaining[v]]
        v = residual[int(gen.integers(0, len(residual)))]
        remaining[v] = False
        for b in holders[v]:
            count[b] -= 1
    return profile


@dataclass(frozen=True)
class EnsembleSummary:
    """Per-step means over freshly sampled placements, with standard errors,
    the normalized aggregate, and (replication) the observed frequency of a
    fragment having two replicas share a server."""

    kind: str
    order_mode: str
    B: int
    V: int
    R: int
    samples: int
    master_seed: int
    mean_profile: np.ndarray
    se_profile: np.ndarray
    normalized_aggregate: float
    duplicate_frequency: float | None


def _ensemble_chunk(args):
    B, V, R, kind, order_mode, seed, start, stop = args
    psum = np.zeros(V, dtype=np.int64)
    psumsq = np.zeros(V, dtype=np.int64)
    dup = 0
    for s in range(start, stop):
        traj_gen = _rng.stream(seed, _rng.DOMAIN_TRAJECTORY, s)
        if kind == "rep":
            place_gen = _rng.stream(seed, _rng.DOMAIN_PLACEMENT, s)
            theta = place_gen.integers(0, B, size=(V, R)) + 1
            placement = ReplicationPlacement(
                B=B, V=V, R=R, theta=tuple(tuple(int(x) for x in row) for row in theta)
            )
            dup += sum(1 for v in range(1, V + 1) if placement.has_duplicate(v))
        else:
            placement = sample_random_mds(B, V, R, seed, index=s)
        p = simulate_ensemble_profile(placement, order_mode, traj_gen)
        psum += p
        psumsq += p * p
    return psum, psumsq, dup


def ensemble_monte_carlo(
    B: int,
    V: int,
    R: int,
    kind: str,
    order_mode: str,
    samples: int,
    seed: int,
    threads: int = 1,
) -> EnsembleSummary:
    """Sample fresh placements and average their useful-server profiles.

    Placement and trajectory of sample s derive from (seed, s) streams, so
    the result is independent of chunking and worker count.
    """
    if kind not in ("rep", "mds"):
        raise InvalidParams(f"unknown ensemble kind {kind!r}")
    if samples < 1:
        raise InvalidParams("samples must be >= 1")
    chunk = max(1, (samples + max(1, threads) * 4 - 1) // (max(1, threads) * 4))
    tasks = [
        (B, V, R, kind, order_mode, seed, lo, min(lo + chunk, samples))
        for lo in range(0, samples, chunk)
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_ensemble_chunk, tasks))
    else:
        parts = [_ensemble_chunk(t) for t in tasks]
    psum = np.sum([p[0] for p in parts], axis=0)
    psumsq = np.sum([p[1] for p in parts], axis=0)
    dup = sum(p[2] for p in parts)
    mean = psum / samples
    if samples > 1:
        var = (psumsq - samples * mean**2) / (samples - 1)
        se = np.sqrt(np.maximum(var, 0.0) / samples)
    else:
        se = np.full(V, np.nan)
    return EnsembleSummary(
        kind=kind,
        order_mode=order_mode,
        B=B,
        V=V,
        R=R,
        samples=samples,
        master_seed=seed,
        mean_profile=mean,
        se_profile=se,
        normalized_aggregate=float(psum.sum()) / (B * V * samples),
        duplicate_frequency=(dup / (samples * V)) if kind == "rep" else None,
    )
