"""Core data model for replicated fragment storage.

A file split into V fragments is replicated over B servers. The placement is
described either by occupancy sets (for each fragment, the servers holding a
replica) or equivalently by fragment sets (for each server, the fragments it
stores). A scheme that stores exactly K distinct fragments on every server and
replicates every fragment exactly R times, with V*R == B*K, uses all available
capacity and is called completely utilizing.

During a download, the set of already-fetched fragments determines which
servers are still useful (those holding at least one missing fragment). The
model here tracks that evolution and the correspondence between storage
schemes and combinatorial block designs.

All fragment and server ids are 1-based.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from .errors import (
    AlreadyDownloaded,
    DuplicateReplicaOnServer,
    EmptyOccupancy,
    IdOutOfRange,
    NonUniformDesign,
)

__all__ = [
    "SystemParams",
    "StorageScheme",
    "OverlapProfile",
    "DownloadState",
    "Design",
    "build_scheme",
    "overlap_profile",
    "initial_state",
    "advance_state",
    "verify_t_design",
    "conservation_laws",
    "conservation_check",
    "scheme_to_design",
    "design_to_scheme",
]


@dataclass(frozen=True)
class SystemParams:
    """Static parameters of a storage system.

    ``alpha`` is the per-server capacity as an exact fraction K/V of the file.
    ``completely_utilizing`` records whether every server stores exactly K
    distinct fragments, every fragment has exactly R replicas, and V*R == B*K.
    """

    B: int
    V: int
    R: int
    K: int
    mu: float
    alpha: Fraction = field(init=False)
    completely_utilizing: bool = False

    def __post_init__(self) -> None:
        if min(self.B, self.V, self.R, self.K) < 1:
            raise IdOutOfRange("B, V, R, K must all be positive")
        if self.mu <= 0:
            raise IdOutOfRange(f"download rate mu must be positive, got {self.mu}")
        object.__setattr__(self, "alpha", Fraction(self.K, self.V))


@dataclass(frozen=True)
class StorageScheme:
    """A replication placement: occupancy sets and derived fragment sets.

    ``occupancy[v-1]`` is the set of servers holding fragment v;
    ``fragment_sets[b-1]`` is the set of fragments stored on server b.
    Both views are kept consistent (b in occupancy[v-1] iff v in
    fragment_sets[b-1]). Instances are immutable and safe to share.
    """

    params: SystemParams
    occupancy: tuple[frozenset[int], ...]
    fragment_sets: tuple[frozenset[int], ...]

    @property
    def B(self) -> int:
        return self.params.B

    @property
    def V(self) -> int:
        return self.params.V

    def occupancy_of(self, fragment: int) -> frozenset[int]:
        return self.occupancy[fragment - 1]

    def fragments_on(self, server: int) -> frozenset[int]:
        return self.fragment_sets[server - 1]


@dataclass(frozen=True)
class OverlapProfile:
    """Pairwise overlap statistics of a scheme.

    ``tau_max`` is the largest |S_a ∩ S_b| over distinct servers, ``lambda_max``
    the largest |Φ_v ∩ Φ_w| over distinct fragments. The histograms map an
    overlap value to the number of unordered pairs attaining it.
    """

    tau_max: int
    lambda_max: int
    tau_histogram: dict[int, int]
    lambda_histogram: dict[int, int]


class DownloadState:
    """Mutable snapshot of a download in progress.

    Tracks the ordered downloaded sequence, the per-server residual fragment
    sets, and the useful-server set. Single-owner mutable: clone per concurrent
    run via :meth:`clone`.
    """

    __slots__ = ("downloaded", "downloaded_set", "residual", "useful")

    def __init__(
        self,
        downloaded: list[int],
        downloaded_set: set[int],
        residual: list[set[int]],
        useful: set[int],
    ) -> None:
        self.downloaded = downloaded
        self.downloaded_set = downloaded_set
        self.residual = residual  # indexed by server-1
        self.useful = useful

    @property
    def n_useful(self) -> int:
        return len(self.useful)

    def residual_on(self, server: int) -> set[int]:
        return self.residual[server - 1]

    def clone(self) -> "DownloadState":
        return DownloadState(
            list(self.downloaded),
            set(self.downloaded_set),
            [set(r) for r in self.residual],
            set(self.useful),
        )


@dataclass(frozen=True)
class Design:
    """A block design: ``points`` counts the point set [V], ``blocks`` lists
    subsets of it. Repeated blocks are allowed.

    ``t`` and ``lam`` are verification metadata filled in when the design has
    been checked to be a t-design with index lambda.
    """

    points: int
    blocks: tuple[frozenset[int], ...]
    t: int | None = None
    lam: int | None = None

    def __post_init__(self) -> None:
        if self.points < 1:
            raise EmptyOccupancy("design needs at least one point")
        if not self.blocks:
            raise EmptyOccupancy("design needs at least one block")
        for blk in self.blocks:
            if not blk:
                raise EmptyOccupancy("design blocks must be nonempty")
            if min(blk) < 1 or max(blk) > self.points:
                raise IdOutOfRange(f"block {sorted(blk)} not within [1, {self.points}]")


def build_scheme(
    occupancy: list[set[int] | frozenset[int] | list[int]],
    mu: float = 1.0,
    B: int | None = None,
) -> StorageScheme:
    """Build a scheme from occupancy sets (one per fragment).

    B defaults to the largest server id present; a caller-supplied B must
    cover every id. Duplicate server ids within one fragment's occupancy are
    rejected: a server stores at most one replica of any fragment.
    """
    if not occupancy:
        raise EmptyOccupancy("occupancy must list at least one fragment")
    occ: list[frozenset[int]] = []
    for v, servers in enumerate(occupancy, start=1):
        servers = list(servers)
        if not servers:
            raise EmptyOccupancy(f"fragment {v} has no replicas")
        if len(set(servers)) != len(servers):
            raise DuplicateReplicaOnServer(f"fragment {v} placed twice on one server")
        if min(servers) < 1:
            raise IdOutOfRange(f"fragment {v} has a non-positive server id")
        occ.append(frozenset(servers))

    max_server = max(max(s) for s in occ)
    if B is None:
        B = max_server
    elif B < max_server:
        raise IdOutOfRange(f"B={B} smaller than largest server id {max_server}")

    V = len(occ)
    frag_sets = [set() for _ in range(B)]
    for v, servers in enumerate(occ, start=1):
        for b in servers:
            frag_sets[b - 1].add(v)

    R = max(len(s) for s in occ)
    K = max(len(s) for s in frag_sets)
    uniform = all(len(s) == R for s in occ) and all(len(s) == K for s in frag_sets)
    params = SystemParams(
        B=B, V=V, R=R, K=K, mu=mu,
        completely_utilizing=uniform and V * R == B * K,
    )
    return StorageScheme(
        params=params,
        occupancy=tuple(occ),
        fragment_sets=tuple(frozenset(s) for s in frag_sets),
    )


def overlap_profile(scheme: StorageScheme) -> OverlapProfile:
    """Exact pairwise-overlap maxima and histograms.

    With fewer than two servers (or fragments) the respective maximum is 0 by
    convention and the histogram is empty.
    """
    tau_hist: Counter[int] = Counter()
    for sa, sb in itertools.combinations(scheme.fragment_sets, 2):
        tau_hist[len(sa & sb)] += 1
    lam_hist: Counter[int] = Counter()
    for pa, pb in itertools.combinations(scheme.occupancy, 2):
        lam_hist[len(pa & pb)] += 1
    return OverlapProfile(
        tau_max=max(tau_hist, default=0),
        lambda_max=max(lam_hist, default=0),
        tau_histogram=dict(tau_hist),
        lambda_histogram=dict(lam_hist),
    )


def initial_state(scheme: StorageScheme) -> DownloadState:
    """Fresh state: nothing downloaded, every stocked server useful."""
    residual = [set(s) for s in scheme.fragment_sets]
    useful = {b for b, r in enumerate(residual, start=1) if r}
    return DownloadState([], set(), residual, useful)


def advance_state(scheme: StorageScheme, state: DownloadState, fragment: int) -> DownloadState:
    """Record the download of ``fragment``; updates ``state`` in place.

    The fragment is removed from the residual set of every server holding it;
    a server leaves the useful set exactly when its residual empties. O(R) per
    call via the fragment->servers index.
    """
    if fragment < 1 or fragment > scheme.V:
        raise IdOutOfRange(f"fragment {fragment} not in [1, {scheme.V}]")
    if fragment in state.downloaded_set:
        raise AlreadyDownloaded(f"fragment {fragment} already downloaded")
    state.downloaded.append(fragment)
    state.downloaded_set.add(fragment)
    for b in scheme.occupancy[fragment - 1]:
        res = state.residual[b - 1]
        res.discard(fragment)
        if not res:
            state.useful.discard(b)
    return state


def verify_t_design(design: Design, t: int) -> int | None:
    """Return lambda if ``design`` is a t-design, else None.

    Checks that all blocks share one size K >= t and that every t-subset of
    points lies in the same number of blocks. Counting walks block t-subsets,
    so the cost is B * C(K, t) plus a C(V, t) completeness check.
    """
    if t < 1:
        return None
    sizes = {len(b) for b in design.blocks}
    if len(sizes) != 1:
        return None
    K = sizes.pop()
    if K < t or design.points < t:
        return None
    counts: Counter[tuple[int, ...]] = Counter()
    for blk in design.blocks:
        for sub in itertools.combinations(sorted(blk), t):
            counts[sub] += 1
    lams = set(counts.values())
    if len(lams) != 1:
        return None
    if len(counts) != comb(design.points, t):
        return None  # some t-subset occurs in zero blocks
    return lams.pop()


def conservation_laws(
    B: int, K: int, V: int, R: int, t: int | None = None, lam: int | None = None
) -> tuple[bool, bool | None]:
    """Check B*K == V*R and, when the first holds and (t, lam) are given,
    B*C(K,t) == lam*C(V,t). The second entry is None when not evaluated."""
    first = B * K == V * R
    if not first or t is None or lam is None:
        return first, None
    return first, B * comb(K, t) == lam * comb(V, t)


def conservation_check(
    design: Design, t: int | None = None, lam: int | None = None
) -> tuple[bool, bool | None]:
    """Evaluate :func:`conservation_laws` on a uniform design.

    Raises NonUniformDesign when block sizes or point replication vary.
    """
    sizes = {len(b) for b in design.blocks}
    if len(sizes) != 1:
        raise NonUniformDesign(f"block sizes vary: {sorted(sizes)}")
    K = sizes.pop()
    reps = Counter()
    for blk in design.blocks:
        for p in blk:
            reps[p] += 1
    rep_counts = {reps.get(p, 0) for p in range(1, design.points + 1)}
    if len(rep_counts) != 1:
        raise NonUniformDesign(f"point replication varies: {sorted(rep_counts)}")
    R = rep_counts.pop()
    return conservation_laws(len(design.blocks), K, design.points, R, t, lam)


def scheme_to_design(scheme: StorageScheme) -> Design:
    """View a scheme as a design: fragments are points, fragment sets blocks."""
    return Design(points=scheme.V, blocks=tuple(scheme.fragment_sets))


def design_to_scheme(
    design: Design, mu: float = 1.0, require_completely_utilizing: bool = False
) -> StorageScheme:
    """Realize a design as a storage scheme (block b -> server b).

    With ``require_completely_utilizing`` the design must have uniform block
    size and point replication; otherwise NonUniformDesign is raised.
    """
    occupancy: list[set[int]] = [set() for _ in range(design.points)]
    for b, blk in enumerate(design.blocks, start=1):
        for p in blk:
            occupancy[p - 1].add(b)
    if any(not s for s in occupancy):
        raise EmptyOccupancy("design leaves some point in no block")
    scheme = build_scheme(occupancy, mu=mu, B=len(design.blocks))
    if require_completely_utilizing and not scheme.params.completely_utilizing:
        raise NonUniformDesign(
            "design does not yield a completely utilizing scheme "
            f"(B={scheme.B}, V={scheme.V}, R={scheme.params.R}, K={scheme.params.K})"
        )
    return scheme
