"""Agent-based spatial simulator: a bounded 2D world of mobile agents.

Agents carry honesty/coercion states, commit a claimed position (true for
honest agents, a materially fake one for dishonest agents) and build
neighbour sets from committed information. Each epoch every agent acts as
prover and runs the protocol against those neighbour sets.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from . import core, kernels
from .core import AgentState, Position, TPoPParams, UnknownAgent, level_sizes
from .metrics import (
    ConfusionCounts,
    MapKind,
    MapSource,
    PerformanceMap,
    grid_points,
)
from .model import StatePriors

DENSITY_TOLERANCE = 0.05
_FAKE_DRAW_CAP = 10_000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    n_agents: int = 1000
    width: float = 1.0
    height: float = 1.0
    target_avg_neighbors: float = 50.0
    # derived from the density target when omitted
    range_of_sight: Optional[float] = None
    speed: float = 0.01
    priors: StatePriors = field(default_factory=lambda: StatePriors(0.5, 0.5))
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ConfigError("need at least one agent")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("world dimensions must be positive")
        if self.speed < 0:
            raise ConfigError("speed must be non-negative")
        if self.range_of_sight is None:
            area = self.width * self.height
            r = math.sqrt(self.target_avg_neighbors * area / (self.n_agents * math.pi))
            object.__setattr__(self, "range_of_sight", r)
        if self.range_of_sight <= 0:
            raise ConfigError("range of sight must be positive")
        density = (
            self.n_agents
            * math.pi
            * self.range_of_sight**2
            / (self.width * self.height)
        )
        if abs(density / self.target_avg_neighbors - 1.0) > DENSITY_TOLERANCE:
            raise ConfigError(
                f"density {density:.2f} deviates more than "
                f"{DENSITY_TOLERANCE:.0%} from the target of "
                f"{self.target_avg_neighbors} neighbours per agent"
            )


@dataclass
class World:
    config: WorldConfig
    true_pos: np.ndarray  # (n, 2)
    claimed_pos: np.ndarray  # (n, 2); equals true_pos for honest agents
    honest: np.ndarray  # bool (n,)
    coerced: np.ndarray  # bool (n,)
    velocity: np.ndarray  # (n, 2)
    epoch: int
    rng: np.random.Generator

    @property
    def n_agents(self) -> int:
        return self.true_pos.shape[0]

    def agent(self, i: int) -> AgentState:
        self._check_id(i)
        return AgentState(
            id=i,
            true_pos=Position(*self.true_pos[i]),
            claimed_pos=Position(*self.claimed_pos[i]),
            range_of_sight=self.config.range_of_sight,
            honest=bool(self.honest[i]),
            coerced=bool(self.coerced[i]),
            velocity=tuple(self.velocity[i]),
        )

    @property
    def agents(self) -> list[AgentState]:
        return [self.agent(i) for i in range(self.n_agents)]

    def _check_id(self, i: int) -> None:
        if not (isinstance(i, (int, np.integer)) and 0 <= i < self.n_agents):
            raise UnknownAgent(f"no agent with id {i!r}")


def _draw_fake_positions(
    rng: np.random.Generator, true_pos: np.ndarray, r: float, width: float, height: float
) -> np.ndarray:
    """Uniform draws over the world, re-drawn until farther than r from the
    true position, so the lie is material rather than a rounding artifact."""
    fake = np.empty_like(true_pos)
    pending = np.arange(true_pos.shape[0])
    for _ in range(_FAKE_DRAW_CAP):
        if pending.size == 0:
            return fake
        draw = rng.random((pending.size, 2)) * (width, height)
        dist = np.linalg.norm(draw - true_pos[pending], axis=1)
        ok = dist > r
        fake[pending[ok]] = draw[ok]
        pending = pending[~ok]
    raise ConfigError(
        "could not place fake positions farther than the range of sight; "
        "the world is too small relative to it"
    )


def spawn(config: WorldConfig) -> World:
    """Create a world: uniform placement, iid states, random headings."""
    rng = np.random.default_rng(config.seed)
    n = config.n_agents
    true_pos = rng.random((n, 2)) * (config.width, config.height)
    honest = rng.random(n) < config.priors.p_h
    coerced = rng.random(n) < config.priors.p_c
    heading = rng.random(n) * 2 * math.pi
    velocity = config.speed * np.column_stack([np.cos(heading), np.sin(heading)])
    claimed = true_pos.copy()
    dishonest = ~honest
    if dishonest.any():
        claimed[dishonest] = _draw_fake_positions(
            rng,
            true_pos[dishonest],
            config.range_of_sight,
            config.width,
            config.height,
        )
    return World(
        config=config,
        true_pos=true_pos,
        claimed_pos=claimed,
        honest=honest,
        coerced=coerced,
        velocity=velocity,
        epoch=0,
        rng=rng,
    )


def _reflect_axis(pos: np.ndarray, vel: np.ndarray, limit: float) -> None:
    # fold positions back into [0, limit], flipping velocity on each bounce
    for _ in range(64):
        below = pos < 0
        above = pos > limit
        if not (below.any() or above.any()):
            return
        pos[below] = -pos[below]
        vel[below] = -vel[below]
        pos[above] = 2 * limit - pos[above]
        vel[above] = -vel[above]
    raise ConfigError("velocity too large relative to the world size")


def step(world: World) -> World:
    """Advance every agent one step with reflective boundary handling.

    Dishonest agents re-commit a fresh fake position; honest commitments
    track the (moved) true position. The epoch counter increments, which
    invalidates all previously built neighbour sets.
    """
    cfg = world.config
    world.true_pos += world.velocity
    _reflect_axis(world.true_pos[:, 0], world.velocity[:, 0], cfg.width)
    _reflect_axis(world.true_pos[:, 1], world.velocity[:, 1], cfg.height)
    world.claimed_pos = world.true_pos.copy()
    dishonest = ~world.honest
    if dishonest.any():
        world.claimed_pos[dishonest] = _draw_fake_positions(
            world.rng,
            world.true_pos[dishonest],
            cfg.range_of_sight,
            cfg.width,
            cfg.height,
        )
    world.epoch += 1
    return world


def neighbor_set(world: World, i: int) -> set[int]:
    """Neighbour set of agent i.

    The reference point is i's true position when honest and its fake
    position otherwise; the observed point of each other agent j is j's
    true position when i is non-coerced, and j's committed position when i
    is coerced (so coerced agents vouch for dishonest agents' lies).
    """
    world._check_id(i)
    ref = world.true_pos[i] if world.honest[i] else world.claimed_pos[i]
    if world.coerced[i]:
        targets = np.where(
            world.honest[:, None], world.true_pos, world.claimed_pos
        )
    else:
        targets = world.true_pos
    dist = np.linalg.norm(targets - ref, axis=1)
    hits = np.flatnonzero(dist < world.config.range_of_sight)
    return {int(j) for j in hits if j != i}


def _adjacency(world: World) -> np.ndarray:
    """Dense neighbour matrix; row i is agent i's neighbour set."""
    committed_view = np.where(
        world.honest[:, None], world.true_pos, world.claimed_pos
    )
    ref = committed_view  # same selection rule as the reference point
    r2 = world.config.range_of_sight**2
    n = world.n_agents
    adj = np.empty((n, n), dtype=bool)
    non_coerced = ~world.coerced
    if non_coerced.any():
        adj[non_coerced] = (
            cdist(ref[non_coerced], world.true_pos, "sqeuclidean") < r2
        )
    if world.coerced.any():
        adj[world.coerced] = (
            cdist(ref[world.coerced], committed_view, "sqeuclidean") < r2
        )
    np.fill_diagonal(adj, False)
    return adj


@dataclass(frozen=True)
class EpochResult:
    reliability_sample: Optional[float]
    security_sample: Optional[float]
    counts: ConfusionCounts


def _events_per_prover(params: TPoPParams) -> int:
    # one naming event per internal node of the full tree
    return 1 + sum(level_sizes(params)[: params.depth - 1])


def _epoch_inputs(world: World, params: TPoPParams):
    """Adjacency, CSR neighbour lists and the per-event uniform rows."""
    adj = _adjacency(world)
    degrees = adj.sum(axis=1)
    indptr = np.zeros(world.n_agents + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    indices = np.nonzero(adj)[1].astype(np.int64)
    max_deg = int(degrees.max()) if world.n_agents else 0
    events = _events_per_prover(params)
    uniforms = world.rng.random(
        (world.n_agents * events, max(max_deg - 1, 1))
    )
    return adj, indptr, indices, uniforms, events


def run_epoch(world: World, params: TPoPParams) -> EpochResult:
    """Run T-PoP with every agent as prover over the current snapshot.

    Witness naming order is a per-event seeded shuffle of the prover's
    neighbour set; a witness confirms a parent iff the parent is in the
    witness's own neighbour set.
    """
    adj, indptr, indices, uniforms, events = _epoch_inputs(world, params)
    raw = kernels.epoch_counts(
        indptr,
        indices,
        adj,
        world.honest,
        np.asarray(params.witnesses_per_level, dtype=np.int64),
        np.asarray(level_sizes(params), dtype=np.int64),
        params.threshold.numerator,
        params.threshold.denominator,
        uniforms,
        events,
    )
    counts = ConfusionCounts(*(int(c) for c in raw))
    return EpochResult(
        reliability_sample=counts.reliability(),
        security_sample=counts.security(),
        counts=counts,
    )


class _ShuffledNeighborOracle:
    """Reference oracle consuming the same uniform rows as the kernel."""

    def __init__(self, adj: np.ndarray, uniforms: np.ndarray, events: int):
        self.adj = adj
        self.uniforms = uniforms
        self.events = events
        self.neighbors = [np.flatnonzero(adj[i]) for i in range(adj.shape[0])]
        self._row = 0

    def start_prover(self, prover: int) -> None:
        self._row = prover * self.events

    def candidate_witnesses(self, parent: int):
        cands = list(self.neighbors[parent])
        row = self.uniforms[self._row]
        self._row += 1
        m = len(cands)
        for k in range(m - 1, 0, -1):
            j = int(row[m - 1 - k] * (k + 1))
            cands[k], cands[j] = cands[j], cands[k]
        return [int(c) for c in cands]

    def confirms(self, witness: int, parent: int) -> bool:
        return bool(self.adj[witness, parent])


def _run_epoch_reference(world: World, params: TPoPParams) -> EpochResult:
    """Generic build_tree/verify path; bit-identical to run_epoch.

    Slow; used by tests to pin the kernel to the generic algorithms.
    """
    adj, _, _, uniforms, events = _epoch_inputs(world, params)
    oracle = _ShuffledNeighborOracle(adj, uniforms, events)
    ha = hr = da = dr = 0
    for g in range(world.n_agents):
        oracle.start_prover(g)
        tree = core.build_tree(g, params, oracle)
        verdict = core.verify(tree, params, oracle).verdict
        if world.honest[g]:
            ha, hr = ha + verdict, hr + (not verdict)
        else:
            da, dr = da + verdict, dr + (not verdict)
    counts = ConfusionCounts(ha, hr, da, dr)
    return EpochResult(counts.reliability(), counts.security(), counts)


def _run_seed(master_seed: int, i: int, j: int, k: int) -> int:
    return int(np.random.SeedSequence([master_seed, i, j, k]).generate_state(1)[0])


def _sweep_cell(args) -> tuple[int, int, ConfusionCounts]:
    config, params, runs_per_cell, master_seed, grid_step, i, j = args
    points = grid_points(grid_step)
    priors = StatePriors(float(points[i]), float(points[j]))
    total = ConfusionCounts()
    for k in range(runs_per_cell):
        cfg = replace(config, priors=priors, seed=_run_seed(master_seed, i, j, k))
        world = spawn(cfg)
        total = total + run_epoch(world, params).counts
    return i, j, total


def sweep_world(
    config: WorldConfig,
    params: TPoPParams,
    grid_step: float,
    runs_per_cell: int,
    master_seed: int,
    jobs: int = 1,
) -> tuple[PerformanceMap, PerformanceMap]:
    """Empirical R and S over the (p_h, p_c) grid.

    Each Monte-Carlo run spawns a fresh world (one protocol round per run)
    so cells stay iid; per-run seeds derive from (master seed, cell, run)
    and make the result independent of the worker count.
    """
    points = grid_points(grid_step)
    n = points.size
    tasks = [
        (config, params, runs_per_cell, master_seed, grid_step, i, j)
        for i in range(n)
        for j in range(n)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, tasks, chunksize=8))
    else:
        results = [_sweep_cell(t) for t in tasks]

    r_values = np.full((n, n), np.nan)
    s_values = np.full((n, n), np.nan)
    r_counts = np.zeros((n, n), dtype=np.int64)
    s_counts = np.zeros((n, n), dtype=np.int64)
    for i, j, counts in results:
        rel = counts.reliability()
        sec = counts.security()
        if rel is not None:
            r_values[i, j] = rel
        if sec is not None:
            s_values[i, j] = sec
        r_counts[i, j] = counts.honest_total
        s_counts[i, j] = counts.dishonest_total

    r_map = PerformanceMap(
        grid_step, r_values, r_counts, MapKind.RELIABILITY, MapSource.SIMULATION
    )
    s_map = PerformanceMap(
        grid_step, s_values, s_counts, MapKind.SECURITY, MapSource.SIMULATION
    )
    return r_map, s_map
