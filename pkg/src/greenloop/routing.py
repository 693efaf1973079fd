"""Tabular Q-learning for waste-collection routes over a street graph.

State is (current node, bitmask of serviced bins), actions are unvisited
bins, and the reward of a traversal is the negative of its emissions
(distance times per-km emission rate). The action that services the last
bin also pays the forced depot-return leg, so the learned values rank
complete collection loops. Exploration is epsilon-greedy with a linear
anneal; all randomness comes from one seeded generator, so training is
deterministic.

Every non-depot node is treated as requiring service. The tabular table
caps at 16 bins; larger cities are split into districts upstream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .errors import DisconnectedGraph, MissingEdge, StateSpaceTooLarge

MAX_TABULAR_BINS = 16


@dataclass(frozen=True)
class BinNode:
    id: str
    fill_level: float = 0.0
    is_depot: bool = False

    def __post_init__(self):
        if not 0.0 <= self.fill_level <= 1.0:
            raise ValueError(f"bin {self.id}: fill_level must be in [0, 1]")


@dataclass(frozen=True)
class EdgeAttrs:
    distance_km: float
    emission_rate_kg_per_km: float

    def __post_init__(self):
        if self.distance_km < 0 or self.emission_rate_kg_per_km < 0:
            raise ValueError("edge attributes must be >= 0")


@dataclass(frozen=True)
class CollectionGraph:
    """Depot plus service bins; edges may be listed in either direction."""

    nodes: tuple[BinNode, ...]
    edges: Mapping[tuple[str, str], EdgeAttrs]

    def __post_init__(self):
        depots = [n for n in self.nodes if n.is_depot]
        if len(depots) != 1:
            raise ValueError(f"graph needs exactly one depot, found {len(depots)}")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids in graph")
        known = set(ids)
        for (a, b), attrs in self.edges.items():
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) references unknown node")
            mirror = self.edges.get((b, a))
            if mirror is not None and mirror.distance_km != attrs.distance_km:
                raise ValueError(f"asymmetric distances on edge ({a}, {b})")

    @property
    def depot(self) -> str:
        return next(n.id for n in self.nodes if n.is_depot)

    def bin_ids(self) -> tuple[str, ...]:
        """Service bins in ascending id order (the tie-break order)."""
        return tuple(sorted(n.id for n in self.nodes if not n.is_depot))

    def edge(self, a: str, b: str) -> EdgeAttrs:
        attrs = self.edges.get((a, b)) or self.edges.get((b, a))
        if attrs is None:
            raise MissingEdge(f"no edge between {a!r} and {b!r}")
        return attrs

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges


@dataclass(frozen=True)
class RouteState:
    """Current node plus a visited bitmask over the sorted bin order."""

    current: str
    visited: int = 0


@dataclass
class QTable:
    """State-action values; absent keys read as 0."""

    values: dict[tuple[RouteState, str], float] = field(default_factory=dict)

    def get(self, state: RouteState, action: str) -> float:
        return self.values.get((state, action), 0.0)

    def max_over(self, state: RouteState, actions: list[str]) -> float:
        if not actions:
            return 0.0
        return max(self.values.get((state, a), 0.0) for a in actions)


@dataclass(frozen=True)
class RLConfig:
    learning_rate: float = 0.1
    discount: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    episodes: int = 5000
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must be in [0, 1)")
        if not (0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0):
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")


def leg_emissions(g: CollectionGraph, a: str, b: str) -> float:
    e = g.edge(a, b)
    return e.distance_km * e.emission_rate_kg_per_km


def q_update(
    q: QTable,
    s: RouteState,
    a: str,
    r: float,
    s_next: RouteState,
    cfg: RLConfig,
    next_actions: list[str] | None = None,
) -> QTable:
    """One temporal-difference step; returns a new table, input untouched.

    next_actions lists the moves available from s_next; an empty list (or
    a terminal all-visited state) zeroes the bootstrap term.
    """
    updated = dict(q.values)
    _q_update_inplace(updated, s, a, r, s_next, cfg, next_actions or [])
    return QTable(values=updated)


def _q_update_inplace(
    values: dict,
    s: RouteState,
    a: str,
    r: float,
    s_next: RouteState,
    cfg: RLConfig,
    next_actions: list[str],
) -> None:
    best_next = 0.0
    if next_actions:
        best_next = max(values.get((s_next, nb), 0.0) for nb in next_actions)
    old = values.get((s, a), 0.0)
    values[(s, a)] = old + cfg.learning_rate * (r + cfg.discount * best_next - old)


def _check_reachable(g: CollectionGraph, bins: tuple[str, ...]) -> None:
    frontier = [g.depot]
    seen = {g.depot}
    relevant = set(bins) | {g.depot}
    while frontier:
        node = frontier.pop()
        for other in relevant:
            if other not in seen and g.has_edge(node, other):
                seen.add(other)
                frontier.append(other)
    missing = [b for b in bins if b not in seen]
    if missing:
        raise DisconnectedGraph(f"bins unreachable from depot: {missing}")


def train_routing(
    g: CollectionGraph, cfg: RLConfig, initial: QTable | None = None
) -> QTable:
    """Learn state-action values over cfg.episodes seeded episodes.

    Pass `initial` to continue training from a previously learned table;
    the input table is not modified.
    """
    bins = g.bin_ids()
    if len(bins) > MAX_TABULAR_BINS:
        raise StateSpaceTooLarge(
            f"{len(bins)} bins exceeds the tabular limit of {MAX_TABULAR_BINS}"
        )
    if not bins:
        return QTable(values=dict(initial.values)) if initial is not None else QTable()
    _check_reachable(g, bins)

    bit = {b: 1 << i for i, b in enumerate(bins)}
    full = (1 << len(bins)) - 1
    rng = np.random.default_rng(cfg.rng_seed)
    values: dict[tuple[RouteState, str], float] = (
        dict(initial.values) if initial is not None else {}
    )
    depot = g.depot

    for episode in range(cfg.episodes):
        if cfg.episodes > 1:
            frac = episode / (cfg.episodes - 1)
        else:
            frac = 0.0
        epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac

        state = RouteState(depot, 0)
        trajectory = []
        while state.visited != full:
            candidates = [
                b for b in bins
                if not state.visited & bit[b] and g.has_edge(state.current, b)
            ]
            if not candidates:
                raise DisconnectedGraph(
                    f"no unvisited bin reachable from {state.current!r}"
                )
            if rng.random() < epsilon:
                action = candidates[int(rng.integers(len(candidates)))]
            else:
                action = candidates[0]
                best = values.get((state, action), 0.0)
                for b in candidates[1:]:
                    v = values.get((state, b), 0.0)
                    if v > best:
                        best = v
                        action = b
            reward = -leg_emissions(g, state.current, action)
            next_visited = state.visited | bit[action]
            next_state = RouteState(action, next_visited)
            if next_visited == full:
                # Forced return leg: charge it on the closing action.
                reward -= leg_emissions(g, action, depot)
                next_actions: list[str] = []
            else:
                next_actions = [
                    b for b in bins
                    if not next_visited & bit[b] and g.has_edge(action, b)
                ]
            trajectory.append((state, action, reward, next_state, next_actions))
            state = next_state
        # Apply the updates newest-first so the forced return leg reaches
        # the early decisions within a single episode.
        for s, a, r, s_next, s_next_actions in reversed(trajectory):
            _q_update_inplace(values, s, a, r, s_next, cfg, s_next_actions)

    return QTable(values=values)


def greedy_route(q: QTable, g: CollectionGraph) -> tuple[str, ...]:
    """Follow argmax-Q through all bins, depot to depot; ties take lowest id."""
    bins = g.bin_ids()
    depot = g.depot
    if not bins:
        return (depot, depot)
    bit = {b: 1 << i for i, b in enumerate(bins)}
    full = (1 << len(bins)) - 1
    route = [depot]
    state = RouteState(depot, 0)
    while state.visited != full:
        candidates = [
            b for b in bins
            if not state.visited & bit[b] and g.has_edge(state.current, b)
        ]
        if not candidates:
            raise DisconnectedGraph(f"no unvisited bin reachable from {state.current!r}")
        action = candidates[0]
        best = q.get(state, action)
        for b in candidates[1:]:
            v = q.get(state, b)
            if v > best:
                best = v
                action = b
        route.append(action)
        state = RouteState(action, state.visited | bit[action])
    route.append(depot)
    return tuple(route)


def route_emissions(g: CollectionGraph, route: tuple[str, ...] | list[str]) -> float:
    """Total kg CO2 along consecutive legs of the route."""
    total = 0.0
    for a, b in zip(route, route[1:]):
        total += leg_emissions(g, a, b)
    return total


def brute_force_route(g: CollectionGraph) -> tuple[tuple[str, ...], float]:
    """Exhaustive-permutation oracle: the cheapest complete loop."""
    bins = g.bin_ids()
    depot = g.depot
    best_route = (depot, depot)
    best_cost = 0.0 if not bins else float("inf")
    for perm in itertools.permutations(bins):
        route = (depot, *perm, depot)
        try:
            cost = route_emissions(g, route)
        except MissingEdge:
            continue
        if cost < best_cost:
            best_cost = cost
            best_route = route
    return best_route, best_cost


def qtable_to_dict(q: QTable, version: int = 1) -> dict:
    entries = [
        {"current": s.current, "visited": s.visited, "action": a, "value": v}
        for (s, a), v in sorted(
            q.values.items(), key=lambda kv: (kv[0][0].current, kv[0][0].visited, kv[0][1])
        )
    ]
    return {"version": version, "entries": entries}


def qtable_from_dict(doc: Mapping) -> QTable:
    values = {
        (RouteState(e["current"], int(e["visited"])), e["action"]): float(e["value"])
        for e in doc["entries"]
    }
    return QTable(values=values)
