"""Work-conserving schedulers: nonadaptive placement orders, adaptive ranked
policies, and the uniform-random baseline.

A nonadaptive policy fixes, per server, the order in which its fragments are
offered; after each download a server serves the first of its fragments not
yet fetched. Adaptive ranked policies instead score every remaining fragment
each step and serve the lowest-ranked one per server: the greedy rank counts
the servers that would die if the fragment were fetched next, the harmonic
rank sums reciprocals of the residual sizes of its hosts. Ranks are compared
exactly (integers / rationals), so ties are well-defined.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import FragmentAlreadyDownloaded, InvalidParams, ServerUseless
from .model import DownloadState, StorageScheme

__all__ = [
    "PlacementOrder",
    "smallest_index_first",
    "uniform_diversity",
    "pushback",
    "nonadaptive_decide",
    "greedy_rank",
    "harmonic_rank",
    "ranked_decide",
    "NonadaptivePolicy",
    "RankedPolicy",
    "RandomWorkConserving",
    "MdpPolicy",
]


@dataclass(frozen=True)
class PlacementOrder:
    """Per-server fragment orders: ``orders[b-1]`` is a permutation of the
    fragment set of server b. ``perfect`` records whether every layer (the
    r-th entries across servers) consists of pairwise distinct fragments."""

    orders: tuple[tuple[int, ...], ...]
    perfect: bool | None = None
    label: str = "order"

    def order_of(self, server: int) -> tuple[int, ...]:
        return self.orders[server - 1]

    def layer(self, r: int) -> tuple[int | None, ...]:
        """The r-th scheduled fragment of each server (1-based r); None where
        a server stores fewer than r fragments."""
        return tuple(o[r - 1] if len(o) >= r else None for o in self.orders)


def _check_order_matches(scheme: StorageScheme, order: PlacementOrder) -> None:
    for b, o in enumerate(order.orders, start=1):
        if set(o) != set(scheme.fragment_sets[b - 1]) or len(o) != len(set(o)):
            raise InvalidParams(f"order for server {b} is not a permutation of its fragments")


def smallest_index_first(scheme: StorageScheme) -> PlacementOrder:
    """Every server serves its fragments in increasing index order."""
    orders = tuple(tuple(sorted(s)) for s in scheme.fragment_sets)
    layers = {len(o) for o in orders}
    perfect = len(layers) == 1 and all(
        _distinct(layer) for layer in zip(*orders)
    )
    return PlacementOrder(orders=orders, perfect=perfect, label="sif")


def _distinct(items) -> bool:
    items = [x for x in items if x is not None]
    return len(items) == len(set(items))


def _max_matching(adjacency: dict[int, list[int]]) -> dict[int, int]:
    """Maximum bipartite matching (Kuhn's augmenting paths), deterministic for
    a fixed iteration order. Returns {left: right}."""
    match_left: dict[int, int] = {}
    match_right: dict[int, int] = {}

    def augment(u: int, seen: set[int]) -> bool:
        for v in adjacency[u]:
            if v in seen:
                continue
            seen.add(v)
            if v not in match_right or augment(match_right[v], seen):
                match_left[u] = v
                match_right[v] = u
                return True
        return False

    for u in sorted(adjacency):
        if u not in match_left:
            augment(u, set())
    return match_left


def uniform_diversity(scheme: StorageScheme) -> PlacementOrder:
    """Placement order maximizing fragment diversity within each layer.

    Layer by layer, a maximum bipartite matching assigns distinct fragments to
    as many servers as possible; servers a matching cannot cover fall back to
    their first unassigned fragment and the order is flagged non-perfect. For
    K-regular schemes with B = V every layer is a perfect matching, hence a
    permutation of all fragments.

    Each server prefers fragments by cyclic distance from its own index, so
    on cyclic-shift schemes the layers come out as the shifted rows
    (r, r+1, ...).
    """
    V = scheme.V
    remaining = [
        sorted(s, key=lambda v, b=b: ((v - b) % V, v))
        for b, s in enumerate(scheme.fragment_sets, start=1)
    ]
    orders: list[list[int]] = [[] for _ in range(scheme.B)]
    perfect = len({len(s) for s in scheme.fragment_sets}) == 1
    max_layers = max(len(s) for s in scheme.fragment_sets)
    for _ in range(max_layers):
        active = {b: list(remaining[b - 1]) for b in range(1, scheme.B + 1) if remaining[b - 1]}
        matched = _max_matching(active)
        for b in active:
            if b in matched:
                v = matched[b]
            else:
                # under a maximum matching every fragment of an unmatched
                # server is taken by another server, so this repeats one
                v = active[b][0]
                perfect = False
            orders[b - 1].append(v)
            remaining[b - 1].remove(v)
    return PlacementOrder(
        orders=tuple(tuple(o) for o in orders), perfect=perfect, label="ud"
    )


def pushback(order: PlacementOrder, scheme: StorageScheme, server: int) -> PlacementOrder:
    """Defer the fragments of one server to the back of every other server.

    On each server a != server, the fragments shared with the chosen server
    move to the final positions of a's order, keeping their relative order;
    the chosen server's own order is untouched.
    """
    if not 1 <= server <= scheme.B:
        raise InvalidParams(f"server {server} outside [1, {scheme.B}]")
    _check_order_matches(scheme, order)
    target = scheme.fragment_sets[server - 1]
    new_orders = []
    for b, o in enumerate(order.orders, start=1):
        if b == server:
            new_orders.append(o)
            continue
        kept = [v for v in o if v not in target]
        deferred = [v for v in o if v in target]
        new_orders.append(tuple(kept + deferred))
    return PlacementOrder(
        orders=tuple(new_orders),
        perfect=None,
        label=f"{order.label}+pb{server}",
    )


def nonadaptive_decide(order: PlacementOrder, state: DownloadState, server: int) -> int:
    """First fragment of the server's order not yet downloaded."""
    for v in order.orders[server - 1]:
        if v not in state.downloaded_set:
            return v
    raise ServerUseless(f"server {server} has no remaining fragments")


def greedy_rank(scheme: StorageScheme, state: DownloadState, fragment: int) -> int:
    """Number of servers hosting ``fragment`` whose residual is just that
    fragment, i.e. the servers that die if it is fetched next."""
    if fragment in state.downloaded_set:
        raise FragmentAlreadyDownloaded(f"fragment {fragment} already downloaded")
    return sum(
        1 for b in scheme.occupancy[fragment - 1] if len(state.residual[b - 1]) == 1
    )


def harmonic_rank(scheme: StorageScheme, state: DownloadState, fragment: int) -> Fraction:
    """Sum of reciprocal residual sizes over the servers hosting ``fragment``.

    Exact rational, so equality between ranks (a tie) is unambiguous.
    """
    if fragment in state.downloaded_set:
        raise FragmentAlreadyDownloaded(f"fragment {fragment} already downloaded")
    return sum(
        (Fraction(1, len(state.residual[b - 1])) for b in scheme.occupancy[fragment - 1]),
        start=Fraction(0),
    )


_RANKS = {"greedy": greedy_rank, "harmonic": harmonic_rank}


def ranked_decide(
    scheme: StorageScheme,
    state: DownloadState,
    rank: str = "harmonic",
    tie: str = "low",
    rng: np.random.Generator | None = None,
    init_order: PlacementOrder | None = None,
) -> dict[int, int]:
    """Decision map of the ranked scheduler: per useful server, the residual
    fragment of minimum rank.

    Ties break by lowest fragment index (``tie='low'``), uniformly at random
    (``tie='seeded'``, needs ``rng``), or by position in ``init_order`` when
    one is supplied (which also fixes the all-ties first step).
    """
    if rank not in _RANKS:
        raise InvalidParams(f"unknown rank function {rank!r}")
    rank_fn = _RANKS[rank]
    scores = {
        v: rank_fn(scheme, state, v)
        for v in range(1, scheme.V + 1)
        if v not in state.downloaded_set
    }
    decisions: dict[int, int] = {}
    for b in sorted(state.useful):
        residual = state.residual[b - 1]
        best = min(scores[v] for v in residual)
        tied = sorted(v for v in residual if scores[v] == best)
        if len(tied) == 1:
            decisions[b] = tied[0]
        elif init_order is not None:
            pos = {v: i for i, v in enumerate(init_order.orders[b - 1])}
            decisions[b] = min(tied, key=lambda v: pos[v])
        elif tie == "seeded":
            if rng is None:
                raise InvalidParams("tie='seeded' needs an rng")
            decisions[b] = tied[int(rng.integers(0, len(tied)))]
        else:
            decisions[b] = tied[0]
    return decisions


@dataclass(frozen=True)
class NonadaptivePolicy:
    """Serve each server's fragments in a fixed placement order."""

    order: PlacementOrder

    def describe(self) -> str:
        return f"nonadaptive({self.order.label})"


@dataclass(frozen=True)
class RankedPolicy:
    """Adaptive ranked scheduler (greedy or harmonic rank).

    ``tie='low'`` breaks ties toward the lowest fragment index, ``'seeded'``
    uniformly at random from the run's stream. An ``init_order`` instead
    breaks every tie by position in that order; since all ranks tie before
    the first download, it doubles as the initial schedule.
    """

    rank: str = "harmonic"
    tie: str = "low"
    init_order: PlacementOrder | None = None

    def __post_init__(self) -> None:
        if self.rank not in _RANKS:
            raise InvalidParams(f"unknown rank function {self.rank!r}")
        if self.tie not in ("low", "seeded"):
            raise InvalidParams(f"unknown tie rule {self.tie!r}")

    def describe(self) -> str:
        init = f",init={self.init_order.label}" if self.init_order else ""
        return f"ranked({self.rank},tie={self.tie}{init})"


@dataclass(frozen=True)
class RandomWorkConserving:
    """Every server offers a uniformly random remaining fragment."""

    def describe(self) -> str:
        return "random"


@dataclass(frozen=True)
class MdpPolicy:
    """Table policy produced by the exact finite-horizon solver."""

    solution: "MdpSolution"  # noqa: F821  (defined in fragsched.mdp)

    def describe(self) -> str:
        return "mdp"
