"""Core T-PoP protocol: domain types, witness-tree construction and
threshold verification.

Both algorithms are generic over a :class:`ConfirmationOracle`, so the same
code drives the synthetic probability model and the spatial world simulator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Hashable, Iterator, Mapping, Optional, Protocol, Sequence

AgentId = Hashable


class TPoPError(Exception):
    """Base class for protocol errors."""


class InvalidInput(TPoPError):
    """Malformed tree, parameters or JSON input."""


class UnknownAgent(TPoPError):
    """An agent id is not known to the oracle or world."""


class DuplicatePolicy(Enum):
    # A witness named twice never counts as a confirmation.
    DISCOUNT = "discount"
    # Any duplicate naming invalidates the whole proof.
    FAIL_PROOF = "fail_proof"


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return ((self.x - other.x) ** 2 + (self.y - other.y) ** 2) ** 0.5


@dataclass(frozen=True)
class AgentState:
    id: AgentId
    true_pos: Position
    claimed_pos: Position
    range_of_sight: float
    honest: bool
    coerced: bool
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.range_of_sight <= 0:
            raise InvalidInput("range_of_sight must be positive")
        lie = self.claimed_pos.distance_to(self.true_pos)
        if self.honest and lie != 0.0:
            raise InvalidInput("honest agent must claim its true position")
        if not self.honest and lie <= self.range_of_sight:
            raise InvalidInput(
                "dishonest agent must claim a position farther than its "
                "range of sight from the true one"
            )


def _as_fraction(t) -> Fraction:
    # str() round-trips floats through their decimal literal, so 0.5 -> 1/2
    # and thresholds stay exact rationals for the comparison rules.
    if isinstance(t, Fraction):
        return t
    if isinstance(t, (int, str)):
        return Fraction(t)
    if isinstance(t, float):
        return Fraction(str(t))
    raise InvalidInput(f"unsupported threshold type: {type(t)!r}")


@dataclass(frozen=True)
class TPoPParams:
    """Protocol parameters: threshold, depth and per-level witness counts."""

    threshold: Fraction
    depth: int
    witnesses_per_level: tuple[int, ...]
    duplicate_policy: DuplicatePolicy = DuplicatePolicy.DISCOUNT

    def __post_init__(self) -> None:
        object.__setattr__(self, "threshold", _as_fraction(self.threshold))
        object.__setattr__(
            self, "witnesses_per_level", tuple(self.witnesses_per_level)
        )
        if not (0 < self.threshold <= 1):
            raise InvalidInput("threshold must be in (0, 1]")
        if self.depth < 1:
            raise InvalidInput("depth must be >= 1")
        if len(self.witnesses_per_level) != self.depth:
            raise InvalidInput("need exactly one witness count per level")
        if any(w < 1 for w in self.witnesses_per_level):
            raise InvalidInput("witness counts must be positive")

    @property
    def tree_size(self) -> int:
        return 1 + sum(level_sizes(self))


def level_sizes(params: TPoPParams) -> list[int]:
    """Nominal witness counts per level: n_l = w_l * n_(l-1), n_0 = 1."""
    sizes = []
    n = 1
    for w in params.witnesses_per_level:
        n *= w
        sizes.append(n)
    return sizes


@dataclass(frozen=True)
class TreeNode:
    agent: AgentId
    level: int
    # index of the parent within the previous level's node list
    parent_index: Optional[int]


@dataclass
class WitnessTree:
    root: AgentId
    levels: list[list[TreeNode]]  # levels[0] == [root node]
    under_filled: bool

    def level_counts(self) -> list[int]:
        return [len(lvl) for lvl in self.levels]

    def nodes(self) -> Iterator[TreeNode]:
        for lvl in self.levels:
            yield from lvl

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def to_json(self) -> dict:
        nodes = []
        for lvl in self.levels:
            for node in lvl:
                parent = (
                    None
                    if node.parent_index is None
                    else self.levels[node.level - 1][node.parent_index].agent
                )
                nodes.append(
                    {"id": node.agent, "level": node.level, "parent": parent}
                )
        return {
            "root": self.root,
            "under_filled": self.under_filled,
            "nodes": nodes,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "WitnessTree":
        try:
            raw_nodes = list(data["nodes"])
            root = data["root"]
            under_filled = bool(data.get("under_filled", False))
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed tree JSON: {exc}") from exc
        if not raw_nodes:
            raise InvalidInput("tree JSON has no nodes")
        depth = max(int(n["level"]) for n in raw_nodes)
        levels: list[list[TreeNode]] = [[] for _ in range(depth + 1)]
        for n in raw_nodes:
            lvl = int(n["level"])
            if lvl < 0:
                raise InvalidInput("negative node level")
            if lvl == 0:
                if n.get("parent") is not None:
                    raise InvalidInput("root node must have no parent")
                levels[0].append(TreeNode(n["id"], 0, None))
                continue
            parent_id = n.get("parent")
            parent_index = next(
                (
                    i
                    for i, p in enumerate(levels[lvl - 1])
                    if p.agent == parent_id
                ),
                None,
            )
            if parent_index is None:
                raise InvalidInput(
                    f"node {n['id']!r} at level {lvl} references unknown "
                    f"parent {parent_id!r}; list nodes level by level"
                )
            levels[lvl].append(TreeNode(n["id"], lvl, parent_index))
        if len(levels[0]) != 1 or levels[0][0].agent != root:
            raise InvalidInput("level 0 must contain exactly the root")
        return cls(root=root, levels=levels, under_filled=under_filled)


@dataclass(frozen=True)
class VerificationOutcome:
    verdict: bool
    # confirmed-witness totals in processing order, deepest level first
    per_level_confirmed: tuple[int, ...]
    eliminated: frozenset
    per_parent_confirmations: Mapping[AgentId, int]
    failure_level: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "per_level_confirmed": list(self.per_level_confirmed),
            "eliminated": sorted(self.eliminated, key=str),
            "per_parent_confirmations": {
                str(k): v for k, v in self.per_parent_confirmations.items()
            },
            "failure_level": self.failure_level,
        }


class ConfirmationOracle(Protocol):
    """Seam between the protocol and whatever world/model supplies agents."""

    def candidate_witnesses(self, parent: AgentId) -> Sequence[AgentId]:
        """Ordered candidates the parent may name; order decides selection."""
        ...

    def confirms(self, witness: AgentId, parent: AgentId) -> bool:
        """Whether the witness vouches for the parent's claimed position."""
        ...


@dataclass
class StaticOracle:
    """Oracle backed by explicit candidate lists and confirmation triples."""

    candidates: Mapping[AgentId, Sequence[AgentId]] = field(default_factory=dict)
    confirmations: frozenset = frozenset()  # of (witness, parent) pairs

    def candidate_witnesses(self, parent: AgentId) -> Sequence[AgentId]:
        try:
            return self.candidates[parent]
        except KeyError:
            raise UnknownAgent(f"no candidate list for agent {parent!r}")

    def confirms(self, witness: AgentId, parent: AgentId) -> bool:
        return (witness, parent) in self.confirmations


def build_tree(
    prover: AgentId, params: TPoPParams, oracle: ConfirmationOracle
) -> WitnessTree:
    """Breadth-first witness naming, root at level 0 down to level depth.

    Each level-(l-1) node names up to w_l witnesses, in the oracle's
    candidate order, skipping agents already present anywhere in the tree.
    """
    levels: list[list[TreeNode]] = [[TreeNode(prover, 0, None)]]
    seen = {prover}
    under_filled = False
    for lvl in range(1, params.depth + 1):
        quota = params.witnesses_per_level[lvl - 1]
        named_nodes: list[TreeNode] = []
        for parent_index, parent in enumerate(levels[lvl - 1]):
            named = 0
            for cand in oracle.candidate_witnesses(parent.agent):
                if cand in seen:
                    continue
                seen.add(cand)
                named_nodes.append(TreeNode(cand, lvl, parent_index))
                named += 1
                if named == quota:
                    break
            if named < quota:
                under_filled = True
        levels.append(named_nodes)
    return WitnessTree(root=prover, levels=levels, under_filled=under_filled)


def _check_shape(tree: WitnessTree, params: TPoPParams) -> None:
    if tree.depth != params.depth:
        raise InvalidInput(
            f"tree depth {tree.depth} does not match params depth "
            f"{params.depth}"
        )
    if len(tree.levels[0]) != 1:
        raise InvalidInput("level 0 must contain exactly the root")
    sizes = level_sizes(params)
    for lvl in range(1, params.depth + 1):
        if len(tree.levels[lvl]) > sizes[lvl - 1]:
            raise InvalidInput(f"level {lvl} exceeds nominal size {sizes[lvl - 1]}")
        per_parent: dict[int, int] = {}
        for node in tree.levels[lvl]:
            if node.parent_index is None or not (
                0 <= node.parent_index < len(tree.levels[lvl - 1])
            ):
                raise InvalidInput(f"node {node.agent!r} has invalid parent index")
            per_parent[node.parent_index] = per_parent.get(node.parent_index, 0) + 1
        quota = params.witnesses_per_level[lvl - 1]
        if any(c > quota for c in per_parent.values()):
            raise InvalidInput(f"a level-{lvl - 1} parent names more than {quota} witnesses")


def _duplicate_flags(tree: WitnessTree) -> list[list[bool]]:
    # A witness re-named after its first appearance (breadth-first order)
    # is a duplicate instance and never counts as a confirmation.
    seen: set = set()
    flags: list[list[bool]] = []
    for lvl in tree.levels:
        row = []
        for node in lvl:
            dup = node.agent in seen
            seen.add(node.agent)
            row.append(dup)
        flags.append(row)
    return flags


def verify(
    tree: WitnessTree, params: TPoPParams, oracle: ConfirmationOracle
) -> VerificationOutcome:
    """Threshold verification, deepest level first.

    Per surviving parent b at level l-1, K_b counts its level-l children
    that survived deeper rounds, pass the duplicate policy and confirm b.
    b is eliminated when K_b < t*w_l; the run aborts when the level total
    M_l = sum(K_b) drops below t*n_l (nominal n_l). The root's verdict is
    true iff no level aborted and the root itself was not eliminated.
    """
    _check_shape(tree, params)
    dup = _duplicate_flags(tree)
    has_duplicates = any(any(row) for row in dup)
    if has_duplicates and params.duplicate_policy is DuplicatePolicy.FAIL_PROOF:
        return VerificationOutcome(
            verdict=False,
            per_level_confirmed=(),
            eliminated=frozenset(),
            per_parent_confirmations={},
            failure_level=None,
        )

    t = params.threshold
    sizes = level_sizes(params)
    eliminated = [[False] * len(lvl) for lvl in tree.levels]
    per_parent: dict[AgentId, int] = {}
    m_values: list[int] = []

    for lvl in range(params.depth, 0, -1):
        quota = params.witnesses_per_level[lvl - 1]
        children_of: dict[int, list[int]] = {}
        for ci, node in enumerate(tree.levels[lvl]):
            children_of.setdefault(node.parent_index, []).append(ci)
        m_total = 0
        for pi, parent in enumerate(tree.levels[lvl - 1]):
            if eliminated[lvl - 1][pi]:
                continue
            k = 0
            for ci in children_of.get(pi, ()):
                if eliminated[lvl][ci] or dup[lvl][ci]:
                    continue
                child = tree.levels[lvl][ci]
                if oracle.confirms(child.agent, parent.agent):
                    k += 1
            per_parent[parent.agent] = k
            m_total += k
            if k < t * quota:
                eliminated[lvl - 1][pi] = True
        m_values.append(m_total)
        if m_total < t * sizes[lvl - 1]:
            return VerificationOutcome(
                verdict=False,
                per_level_confirmed=tuple(m_values),
                eliminated=_eliminated_agents(tree, eliminated),
                per_parent_confirmations=per_parent,
                failure_level=lvl,
            )

    return VerificationOutcome(
        verdict=not eliminated[0][0],
        per_level_confirmed=tuple(m_values),
        eliminated=_eliminated_agents(tree, eliminated),
        per_parent_confirmations=per_parent,
        failure_level=None,
    )


def _eliminated_agents(tree: WitnessTree, flags: list[list[bool]]) -> frozenset:
    out = set()
    for lvl, row in zip(tree.levels, flags):
        for node, flag in zip(lvl, row):
            if flag:
                out.add(node.agent)
    return frozenset(out)


def load_tree_json(text: str) -> WitnessTree:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"invalid JSON: {exc}") from exc
    return WitnessTree.from_json(data)
