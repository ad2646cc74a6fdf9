"""Stochastic honesty/coercion model of T-PoP.

Agents draw independent Bernoulli honesty and coercion states; a fixed
truth table decides whether a witness confirms its parent. Monte-Carlo
sampling over full (never under-filled) witness trees estimates the
Reliability and Security surfaces over the (p_h, p_c) grid, with an exact
enumeration oracle available for small trees.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import core
from .core import TPoPParams, level_sizes
from .metrics import (
    MapKind,
    MapSource,
    PerformanceMap,
    conditional_rate,
    grid_points,
)

# State indices: 0 honest/non-coerced, 1 honest/coerced,
#                2 dishonest/coerced, 3 dishonest/non-coerced.
TRUTH_TABLE = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, 0, 0],
        [1, 0, 1, 0],
        [1, 0, 0, 1],
    ],
    dtype=bool,
)


@dataclass(frozen=True)
class NodeState:
    honest: bool
    coerced: bool

    @property
    def index(self) -> int:
        if self.honest:
            return 1 if self.coerced else 0
        return 2 if self.coerced else 3


ALL_STATES = (
    NodeState(True, False),
    NodeState(True, True),
    NodeState(False, True),
    NodeState(False, False),
)


@dataclass(frozen=True)
class StatePriors:
    p_h: float
    p_c: float

    def __post_init__(self) -> None:
        if not (0 <= self.p_h <= 1 and 0 <= self.p_c <= 1):
            raise ValueError("priors must lie in [0, 1]")

    def state_probabilities(self) -> list[float]:
        ph, pc = self.p_h, self.p_c
        return [ph * (1 - pc), ph * pc, (1 - ph) * pc, (1 - ph) * (1 - pc)]


def confirm_states(parent: NodeState, witness: NodeState) -> bool:
    """Whether a witness in one state vouches for a parent in another."""
    return bool(TRUTH_TABLE[parent.index, witness.index])


@dataclass(frozen=True)
class CellEstimate:
    reliability: Optional[float]
    security: Optional[float]
    honest_roots: int
    dishonest_roots: int


class _FreshAgentOracle:
    """Supplies an endless stream of distinct synthetic agents.

    Agent ids are consecutive ints in naming (breadth-first) order; the
    state of agent i is ``states[i]``. Mirrors the high-density assumption:
    trees are always full and witnesses always unique.
    """

    def __init__(self, state_indices: Sequence[int]):
        self.state_indices = state_indices
        self._next = 1  # id 0 is the prover

    def candidate_witnesses(self, parent):
        def fresh():
            while True:
                agent = self._next
                self._next += 1
                yield agent

        return fresh()

    def confirms(self, witness, parent) -> bool:
        return bool(
            TRUTH_TABLE[self.state_indices[parent], self.state_indices[witness]]
        )


def _state_indices_from_uniforms(u: np.ndarray, priors: StatePriors) -> np.ndarray:
    """Map uniform draws of shape (..., 2) to state indices."""
    honest = u[..., 0] < priors.p_h
    coerced = u[..., 1] < priors.p_c
    return np.where(
        honest,
        np.where(coerced, 1, 0),
        np.where(coerced, 2, 3),
    ).astype(np.int8)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_tree_outcome(
    params: TPoPParams, priors: StatePriors, rng
) -> tuple[NodeState, bool]:
    """Draw one full synthetic tree and run verification on it.

    Returns the prover's drawn state and the binary verdict.
    """
    rng = _as_rng(rng)
    size = params.tree_size
    u = rng.random((size, 2))
    idx = _state_indices_from_uniforms(u, priors)
    oracle = _FreshAgentOracle(idx)
    tree = core.build_tree(0, params, oracle)
    outcome = core.verify(tree, params, oracle)
    return ALL_STATES[idx[0]], outcome.verdict


def _tree_structure(params: TPoPParams) -> tuple[np.ndarray, np.ndarray]:
    """Slot layout of the full tree in breadth-first order.

    Returns (level_start, parent_of): level_start has depth+2 offsets,
    parent_of[j] is the slot of node j's parent (-1 for the root).
    """
    sizes = level_sizes(params)
    level_start = np.zeros(params.depth + 2, dtype=np.int64)
    level_start[1] = 1
    for l, n in enumerate(sizes, start=1):
        level_start[l + 1] = level_start[l] + n
    size = int(level_start[-1])
    parent_of = np.full(size, -1, dtype=np.int64)
    for l in range(1, params.depth + 1):
        w = params.witnesses_per_level[l - 1]
        for j in range(level_start[l], level_start[l + 1]):
            pos = j - level_start[l]
            parent_of[j] = level_start[l - 1] + pos // w
    return level_start, parent_of


def _verify_states_batch(params: TPoPParams, state_idx: np.ndarray) -> np.ndarray:
    """Vectorized verification verdicts for many full trees at once.

    ``state_idx`` has shape (n_trees, tree_size) with slots in breadth-first
    order. Semantically identical to running core.verify per tree; tests
    pin the equivalence.
    """
    level_start, parent_of = _tree_structure(params)
    n_trees, size = state_idx.shape
    if size != int(level_start[-1]):
        raise ValueError("state matrix does not match the tree size")
    sizes = level_sizes(params)
    t_num, t_den = params.threshold.numerator, params.threshold.denominator

    conf = np.empty((n_trees, size), dtype=bool)
    conf[:, 0] = False  # root has no parent; slot unused
    if size > 1:
        conf[:, 1:] = TRUTH_TABLE[
            state_idx[:, parent_of[1:]], state_idx[:, 1:]
        ]

    eliminated = np.zeros((n_trees, size), dtype=bool)
    verdict = np.ones(n_trees, dtype=bool)
    failed = np.zeros(n_trees, dtype=bool)
    for l in range(params.depth, 0, -1):
        w = params.witnesses_per_level[l - 1]
        m_total = np.zeros(n_trees, dtype=np.int64)
        for p_slot in range(level_start[l - 1], level_start[l]):
            pos = p_slot - level_start[l - 1]
            first_child = int(level_start[l]) + pos * w
            kids = slice(first_child, first_child + w)
            k = (conf[:, kids] & ~eliminated[:, kids]).sum(axis=1)
            k[eliminated[:, p_slot]] = 0
            m_total += k
            eliminated[:, p_slot] |= k * t_den < t_num * w
        newly_failed = ~failed & (m_total * t_den < t_num * sizes[l - 1])
        verdict[newly_failed] = False
        failed |= newly_failed
    alive = ~failed
    verdict[alive] = ~eliminated[alive, 0]
    return verdict


def estimate_cell(
    params: TPoPParams, priors: StatePriors, n_trees: int, rng
) -> CellEstimate:
    """Monte-Carlo estimate of one (p_h, p_c) cell from n_trees samples.

    Consumes randomness exactly as n_trees consecutive calls of
    sample_tree_outcome would, but verifies all trees in one vectorized
    pass.
    """
    if n_trees < 1:
        raise ValueError("need at least one tree")
    rng = _as_rng(rng)
    size = params.tree_size
    u = rng.random((n_trees, size, 2))
    idx = _state_indices_from_uniforms(u, priors)
    verdicts = _verify_states_batch(params, idx)
    root_honest = idx[:, 0] <= 1
    honest_roots = int(root_honest.sum())
    dishonest_roots = n_trees - honest_roots
    accepted_honest = int((verdicts & root_honest).sum())
    rejected_dishonest = int((~verdicts & ~root_honest).sum())
    return CellEstimate(
        reliability=conditional_rate(accepted_honest, honest_roots),
        security=conditional_rate(rejected_dishonest, dishonest_roots),
        honest_roots=honest_roots,
        dishonest_roots=dishonest_roots,
    )


MAX_EXACT_TREE_SIZE = 10


def exact_cell(
    params: TPoPParams, priors: StatePriors
) -> tuple[Optional[float], Optional[float]]:
    """Exact (R, S) by enumerating every joint state assignment.

    Independent check on the Monte-Carlo estimator: enumerates all
    4^tree_size weighted assignments and runs the generic core.verify on
    each distinct confirmation pattern. Components conditioned on an empty
    set (p_h at 0 or 1) come back as None.
    """
    size = params.tree_size
    if size > MAX_EXACT_TREE_SIZE:
        raise ValueError(
            f"tree size {size} exceeds the enumeration limit "
            f"({MAX_EXACT_TREE_SIZE} nodes)"
        )
    probs = priors.state_probabilities()
    _, parent_of = _tree_structure(params)

    # Verdict depends on states only through the per-edge confirmation
    # bits, so cache verdicts by that pattern.
    verdict_cache: dict[tuple, bool] = {}

    def verdict_for(assignment: tuple[int, ...]) -> bool:
        pattern = tuple(
            bool(TRUTH_TABLE[assignment[parent_of[j]], assignment[j]])
            for j in range(1, size)
        )
        cached = verdict_cache.get(pattern)
        if cached is None:
            oracle = _FreshAgentOracle(assignment)
            tree = core.build_tree(0, params, oracle)
            cached = core.verify(tree, params, oracle).verdict
            verdict_cache[pattern] = cached
        return cached

    p_accept_honest = 0.0
    p_reject_dishonest = 0.0
    for assignment in itertools.product(range(4), repeat=size):
        weight = 1.0
        for s in assignment:
            weight *= probs[s]
        if weight == 0.0:
            continue
        verdict = verdict_for(assignment)
        if assignment[0] <= 1 and verdict:
            p_accept_honest += weight
        elif assignment[0] >= 2 and not verdict:
            p_reject_dishonest += weight

    def clamp(x: float) -> float:
        return min(max(x, 0.0), 1.0)

    p_honest = priors.p_h
    reliability = clamp(p_accept_honest / p_honest) if p_honest > 0 else None
    security = clamp(p_reject_dishonest / (1 - p_honest)) if p_honest < 1 else None
    return reliability, security


def _cell_seed(master_seed: int, i: int, j: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, i, j]))


def _sweep_row(args) -> tuple[int, list[CellEstimate]]:
    params, grid_step, n_trees, master_seed, i = args
    points = grid_points(grid_step)
    row = []
    for j, pc in enumerate(points):
        priors = StatePriors(float(points[i]), float(pc))
        row.append(estimate_cell(params, priors, n_trees, _cell_seed(master_seed, i, j)))
    return i, row


def sweep_grid(
    params: TPoPParams,
    grid_step: float,
    n_trees: int,
    master_seed: int,
    jobs: int = 1,
) -> tuple[PerformanceMap, PerformanceMap]:
    """Estimate R and S over the full (p_h, p_c) grid.

    Each cell gets its own seed derived from (master_seed, cell index), so
    the result is identical for any worker count.
    """
    points = grid_points(grid_step)
    n = points.size
    r_values = np.full((n, n), np.nan)
    s_values = np.full((n, n), np.nan)
    r_counts = np.zeros((n, n), dtype=np.int64)
    s_counts = np.zeros((n, n), dtype=np.int64)

    tasks = [(params, grid_step, n_trees, master_seed, i) for i in range(n)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]

    for i, row in rows:
        for j, est in enumerate(row):
            if est.reliability is not None:
                r_values[i, j] = est.reliability
            if est.security is not None:
                s_values[i, j] = est.security
            r_counts[i, j] = est.honest_roots
            s_counts[i, j] = est.dishonest_roots

    r_map = PerformanceMap(grid_step, r_values, r_counts, MapKind.RELIABILITY, MapSource.MODEL)
    s_map = PerformanceMap(grid_step, s_values, s_counts, MapKind.SECURITY, MapSource.MODEL)
    return r_map, s_map
