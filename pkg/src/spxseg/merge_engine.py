"""Region-growing merge engine.

Starting from one region per superpixel, each iteration runs three phases:

1. best-local: every region picks its highest-similarity neighbor whose
   score reaches the adaptive threshold S_it (ties to the lower id);
2. mutual validation: only pairs that chose each other survive, and pairs
   whose shared border is covered by global contours are dropped and their
   adjacency severed for good;
3. aggregation: surviving pairs with similarity strictly above S_it merge.

S_it starts at 1 and is updated once per iteration: multiplied by
alpha = 1 + merged/candidates after a productive iteration, decayed by a
fixed factor after a barren one, and never allowed below the stopping
similarity S_0.  The loop ends when a pass at the floor threshold changes
nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .features import (
    FeatureVector,
    MultiScaleDescriptor,
    RegionAggregate,
    merge_aggregates,
    merge_descriptor,
)
from .labelmap import LabelMap, compact_from_array
from .similarity import (
    SimilarityParams,
    border_weight,
    combine,
    content_similarity,
    content_weight,
)

__all__ = [
    "Region",
    "Edge",
    "MergeState",
    "MergeRecord",
    "IterationStats",
    "MergeResult",
    "init_state",
    "best_local",
    "validate_mutual",
    "apply_merges",
    "update_threshold",
    "run",
    "write_history",
    "labelmap_at",
]

# fraction of contour-covered border pairs at which a merge is blocked
CONTOUR_BLOCK_FRACTION = 0.5
DEFAULT_GAMMA_DECAY = 0.95


@dataclass(frozen=True)
class Region:
    """A non-empty cluster of superpixels."""

    id: int
    sp_ids: tuple[int, ...]
    descriptor: MultiScaleDescriptor
    aggregate: RegionAggregate
    pixel_area: int
    circumference: int
    level: int


@dataclass
class Edge:
    """Adjacency between two live regions.

    beta counts the 4-adjacent pixel pairs straddling the border, covered the
    subset of those pairs that contain a contour pixel (after the contour
    split, a border that follows a contour carries its pixels, so covered
    pairs are exactly the pairs the contour separates).  All similarity terms
    are fixed for the lifetime of the two endpoint regions, so they are
    computed once at edge creation.
    """

    beta: int
    covered: int
    couples: tuple[tuple[int, int], ...]
    sim_c: float
    sim_b: float
    w_c: float
    w_b: float
    sim: float
    blocked: bool
    severed: bool = False


@dataclass(frozen=True)
class MergeRecord:
    iteration: int
    parent: int
    child_a: int
    child_b: int
    sim: float
    sim_c: float
    sim_b: float
    threshold: float


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    threshold: float
    candidates: int
    merged: int
    severed: int
    regions: int


@dataclass
class MergeState:
    """Mutable state of one merging run."""

    regions: dict[int, Region]
    neighbors: dict[int, set[int]]
    edges: dict[tuple[int, int], Edge]
    s_it: float
    s_0: float
    gamma_decay: float
    params: SimilarityParams
    iteration: int = 0
    merged_prev: int = 0
    candidates_prev: int = 0
    next_id: int = 0
    blocked_pairs: set[tuple[int, int]] = field(default_factory=set)
    history: list[MergeRecord] = field(default_factory=list)
    trace: list[tuple] | None = None

    # static per-run tables (leaf superpixel data)
    _initial: LabelMap | None = None
    _sp_features: dict[int, FeatureVector] | None = None
    _region_of: np.ndarray | None = None
    _bpix_starts: np.ndarray | None = None
    _bpix_exits: np.ndarray | None = None
    _couple_sim_cache: dict[tuple[int, int], float] = field(default_factory=dict)

    def _couple_sim(self, a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        cached = self._couple_sim_cache.get(key)
        if cached is None:
            cached = content_similarity(
                self._sp_features[key[0]], self._sp_features[key[1]], self.params
            )
            self._couple_sim_cache[key] = cached
        return cached

    def _circumference(self, sp_ids: tuple[int, ...], rid: int) -> int:
        starts = self._bpix_starts
        rows = np.concatenate(
            [np.arange(starts[s], starts[s + 1]) for s in sp_ids]
        )
        if rows.size == 0:
            return 0
        exits = self._bpix_exits[rows]
        return int((self._region_of[exits] != rid).any(axis=1).sum())

    def _make_edge(
        self, u: int, v: int, beta: int, covered: int, couples: tuple[tuple[int, int], ...]
    ) -> Edge:
        ru, rv = self.regions[u], self.regions[v]
        sim_c = content_similarity(ru.aggregate, rv.aggregate, self.params)
        sim_b = sum(self._couple_sim(a, b) for a, b in couples) / len(couples)
        w_c = content_weight(len(ru.sp_ids), len(rv.sp_ids))
        w_b = border_weight(beta, ru.circumference, rv.circumference)
        sim = combine(sim_c, sim_b, w_c, w_b)
        blocked = covered >= CONTOUR_BLOCK_FRACTION * beta
        if self.trace is not None:
            self.trace.append((u, v, sim_c, sim_b, w_c, w_b, sim))
        return Edge(beta, covered, couples, sim_c, sim_b, w_c, w_b, sim, blocked)

    def current_labelmap(self) -> LabelMap:
        return compact_from_array(self._region_of[self._initial.labels])


@dataclass(frozen=True)
class MergeResult:
    labelmap: LabelMap
    initial: LabelMap
    records: tuple[MergeRecord, ...]
    stats: tuple[IterationStats, ...]
    iterations: int
    region_count: int
    final_threshold: float


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def init_state(
    sp: LabelMap,
    features: dict[int, FeatureVector],
    contours: np.ndarray,
    s0: float = 0.4,
    params: SimilarityParams | None = None,
    gamma_decay: float = DEFAULT_GAMMA_DECAY,
    trace: bool = False,
) -> MergeState:
    """Build the initial region set and adjacency graph from superpixels."""
    if sp.num_labels < 2:
        raise ValueError("need at least 2 superpixels to merge")
    if contours.shape != sp.shape:
        raise ValueError("contour map dimensions do not match the label map")
    if not (0 < s0 <= 1):
        raise ValueError(f"stopping similarity must lie in (0, 1], got {s0}")
    if not (0 < gamma_decay < 1):
        raise ValueError(f"decay factor must lie in (0, 1), got {gamma_decay}")
    params = params or SimilarityParams()
    params.validate()

    n_sp = sp.num_labels
    labels = sp.labels
    areas = sp.sizes()

    starts, exits = _boundary_records(labels, n_sp)
    region_of = np.empty(n_sp + 1, dtype=np.int64)
    region_of[:n_sp] = np.arange(n_sp)
    region_of[n_sp] = -9  # sentinel for "outside the image"

    state = MergeState(
        regions={},
        neighbors={i: set() for i in range(n_sp)},
        edges={},
        s_it=1.0,
        s_0=float(s0),
        gamma_decay=float(gamma_decay),
        params=params,
        next_id=n_sp,
        trace=[] if trace else None,
    )
    state._initial = sp
    state._sp_features = features
    state._region_of = region_of
    state._bpix_starts = starts
    state._bpix_exits = exits

    for i in range(n_sp):
        fv = features[i]
        circ = int(starts[i + 1] - starts[i])  # every record row exits the superpixel
        state.regions[i] = Region(
            id=i,
            sp_ids=(i,),
            descriptor=MultiScaleDescriptor.leaf(i, fv),
            aggregate=RegionAggregate.from_leaf(fv, int(areas[i])),
            pixel_area=int(areas[i]),
            circumference=circ,
            level=0,
        )

    covered_mask = contours.astype(bool)
    for (a, b), (beta, covered) in _superpixel_couples(labels, covered_mask, n_sp).items():
        edge = state._make_edge(a, b, beta, covered, ((a, b),))
        state.edges[(a, b)] = edge
        state.neighbors[a].add(b)
        state.neighbors[b].add(a)
    return state


def _boundary_records(labels: np.ndarray, n_sp: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-superpixel boundary-pixel exit table (CSR over superpixel id).

    For every pixel with a 4-neighbor outside its superpixel, stores the four
    neighbor superpixel ids (self where the neighbor is internal, n_sp where
    it falls off the image).  Region circumferences are counted from these
    records against the current superpixel->region lookup.
    """
    padded = np.pad(labels, 1, mode="constant", constant_values=-1)
    nbrs = np.stack(
        [padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]]
    )
    is_boundary = (nbrs != labels).any(axis=0)
    flat = np.flatnonzero(is_boundary.ravel())
    own = labels.ravel()[flat]
    exits = nbrs.reshape(4, -1)[:, flat].T.astype(np.int64)
    order = np.argsort(own, kind="stable")
    own_sorted = own[order]
    exits_sorted = exits[order]
    exits_sorted[exits_sorted < 0] = n_sp  # off-image sentinel index
    starts = np.searchsorted(own_sorted, np.arange(n_sp + 1))
    return starts, exits_sorted


def _superpixel_couples(
    labels: np.ndarray, covered_mask: np.ndarray, n_sp: int
) -> dict[tuple[int, int], tuple[int, int]]:
    """(beta, covered) per adjacent superpixel couple."""
    keys_all = []
    cov_all = []
    for a, b, ca, cb in (
        (labels[:, :-1], labels[:, 1:], covered_mask[:, :-1], covered_mask[:, 1:]),
        (labels[:-1, :], labels[1:, :], covered_mask[:-1, :], covered_mask[1:, :]),
    ):
        diff = a != b
        lo = np.minimum(a[diff], b[diff]).astype(np.int64)
        hi = np.maximum(a[diff], b[diff]).astype(np.int64)
        keys_all.append(lo * n_sp + hi)
        cov_all.append((ca | cb)[diff])
    keys = np.concatenate(keys_all)
    cov = np.concatenate(cov_all).astype(np.float64)
    uniq, inverse = np.unique(keys, return_inverse=True)
    beta = np.bincount(inverse)
    covered = np.bincount(inverse, weights=cov).astype(np.int64)
    return {
        (int(k // n_sp), int(k % n_sp)): (int(b), int(c))
        for k, b, c in zip(uniq, beta, covered)
    }


def best_local(state: MergeState) -> dict[int, int]:
    """Phase 1: best qualifying neighbor of every region (ties to lower id)."""
    choices: dict[int, int] = {}
    for p in state.regions:
        best_q = -1
        best_s = -np.inf
        for q in sorted(state.neighbors[p]):
            edge = state.edges[_key(p, q)]
            if edge.severed:
                continue
            if edge.sim >= state.s_it and edge.sim > best_s:
                best_s = edge.sim
                best_q = q
        if best_q >= 0:
            choices[p] = best_q
    return choices


def validate_mutual(state: MergeState, choices: dict[int, int]) -> list[tuple[int, int]]:
    """Phase 2: keep mutual choices; sever contour-blocked pairs permanently."""
    pairs: list[tuple[int, int]] = []
    for p in sorted(choices):
        q = choices[p]
        if p < q and choices.get(q) == p:
            edge = state.edges[(p, q)]
            if edge.blocked:
                edge.severed = True
                state.blocked_pairs.add((p, q))
            else:
                pairs.append((p, q))
    return pairs


def apply_merges(state: MergeState, pairs: list[tuple[int, int]]) -> int:
    """Phase 3: merge validated pairs whose similarity strictly exceeds S_it."""
    merged = 0
    consumed: set[int] = set()
    for p, q in pairs:
        if (
            p in consumed
            or q in consumed
            or p not in state.regions
            or q not in state.regions
        ):
            continue  # pair consumed earlier this iteration: skipped, not an error
        edge = state.edges.get(_key(p, q))
        if edge is None or edge.severed:
            continue
        if edge.sim > state.s_it:
            region = _merge_pair(state, p, q)
            state.history.append(
                MergeRecord(
                    state.iteration, region.id, p, q,
                    edge.sim, edge.sim_c, edge.sim_b, state.s_it,
                )
            )
            consumed.update((p, q))
            merged += 1
    state.candidates_prev = len(pairs)
    state.merged_prev = merged
    return merged


def _merge_pair(state: MergeState, p: int, q: int) -> Region:
    rp = state.regions.pop(p)
    rq = state.regions.pop(q)
    new_id = state.next_id
    state.next_id += 1

    sp_ids = tuple(sorted(rp.sp_ids + rq.sp_ids))
    state._region_of[np.asarray(sp_ids, dtype=np.int64)] = new_id
    region = Region(
        id=new_id,
        sp_ids=sp_ids,
        descriptor=merge_descriptor(rp.descriptor, rq.descriptor),
        aggregate=merge_aggregates(rp.aggregate, rq.aggregate),
        pixel_area=rp.pixel_area + rq.pixel_area,
        circumference=state._circumference(sp_ids, new_id),
        level=max(rp.level, rq.level) + 1,
    )
    state.regions[new_id] = region

    nbrs = (state.neighbors.pop(p) | state.neighbors.pop(q)) - {p, q}
    state.edges.pop((p, q) if p < q else (q, p))
    state.neighbors[new_id] = set()
    for t in sorted(nbrs):
        beta = 0
        covered = 0
        couples: list[tuple[int, int]] = []
        for old in (p, q):
            e = state.edges.pop(_key(old, t), None)
            if e is not None:
                beta += e.beta
                covered += e.covered
                couples.extend(e.couples)
                state.neighbors[t].discard(old)
        new_edge = state._make_edge(new_id, t, beta, covered, tuple(sorted(couples)))
        state.edges[_key(new_id, t)] = new_edge
        state.neighbors[t].add(new_id)
        state.neighbors[new_id].add(t)
    return region


def update_threshold(state: MergeState) -> MergeState:
    """Per-iteration threshold update.

    alpha = 1 + merged/candidates from the previous iteration (1 when there
    was no candidate).  A productive iteration raises S_it by alpha (capped
    at 1); a barren one decays it by gamma so the loop always progresses.
    """
    if state.candidates_prev > 0:
        alpha = 1.0 + state.merged_prev / state.candidates_prev
    else:
        alpha = 1.0
    if state.merged_prev > 0:
        state.s_it = min(1.0, alpha * state.s_it)
    else:
        state.s_it = state.gamma_decay * state.s_it
    return state


def run(
    state: MergeState,
    snapshot_every: int | None = None,
    on_snapshot: Callable[[int, LabelMap], None] | None = None,
) -> MergeResult:
    """Iterate the three merge phases to completion.

    The threshold never drops below S_0; the run ends when a full pass at
    that floor neither merges nor severs anything (or a single region
    remains).  Per-iteration statistics and the full merge history are
    returned for export.
    """
    stats: list[IterationStats] = []

    def _snap() -> None:
        if (
            snapshot_every
            and on_snapshot is not None
            and state.iteration % snapshot_every == 0
        ):
            on_snapshot(state.iteration, state.current_labelmap())

    while len(state.regions) > 1:
        alive = [e.sim for e in state.edges.values() if not e.severed]
        if not alive:
            break  # every remaining border is contour-severed
        max_sim = max(alive)

        if max_sim < state.s_it:
            # barren passes: nothing qualifies, so each pass only decays S_it
            while state.s_it > state.s_0 and max_sim < state.s_it:
                state.iteration += 1
                threshold = state.s_it
                state.candidates_prev = 0
                state.merged_prev = 0
                stats.append(
                    IterationStats(state.iteration, threshold, 0, 0, 0, len(state.regions))
                )
                update_threshold(state)
                if state.s_it < state.s_0:
                    state.s_it = state.s_0
                _snap()
            if max_sim < state.s_it:
                # still nothing at the floor: final barren pass, stop
                state.iteration += 1
                state.candidates_prev = 0
                state.merged_prev = 0
                stats.append(
                    IterationStats(state.iteration, state.s_it, 0, 0, 0, len(state.regions))
                )
                break
            continue

        state.iteration += 1
        threshold = state.s_it
        blocked_before = len(state.blocked_pairs)
        choices = best_local(state)
        pairs = validate_mutual(state, choices)
        merged = apply_merges(state, pairs)
        severed = len(state.blocked_pairs) - blocked_before
        stats.append(
            IterationStats(
                state.iteration, threshold, len(pairs), merged, severed, len(state.regions)
            )
        )
        _snap()
        if merged == 0 and severed == 0 and state.s_it <= state.s_0:
            break
        update_threshold(state)
        if state.s_it < state.s_0:
            state.s_it = state.s_0

    return MergeResult(
        labelmap=state.current_labelmap(),
        initial=state._initial,
        records=tuple(state.history),
        stats=tuple(stats),
        iterations=state.iteration,
        region_count=len(state.regions),
        final_threshold=state.s_it,
    )


def write_history(records, path) -> None:
    """Merge-history export: one JSON record per merge."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "iteration": r.iteration,
                        "parent": r.parent,
                        "children": [r.child_a, r.child_b],
                        "sim": r.sim,
                        "sim_c": r.sim_c,
                        "sim_b": r.sim_b,
                        "threshold": r.threshold,
                    }
                )
                + "\n"
            )


def labelmap_at(result: MergeResult, iteration: int) -> LabelMap:
    """Reconstruct the partition as it stood after a given iteration."""
    parent: dict[int, int] = {}
    for rec in result.records:
        if rec.iteration <= iteration:
            parent[rec.child_a] = rec.parent
            parent[rec.child_b] = rec.parent

    resolved: dict[int, int] = {}

    def _root(x: int) -> int:
        path = []
        while x in parent and x not in resolved:
            path.append(x)
            x = parent[x]
        root = resolved.get(x, x)
        for y in path:
            resolved[y] = root
        return root

    n_sp = result.initial.num_labels
    lookup = np.array([_root(i) for i in range(n_sp)], dtype=np.int64)
    return compact_from_array(lookup[result.initial.labels])
