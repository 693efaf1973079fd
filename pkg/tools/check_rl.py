"""Empirical optimality-rate check for the routing trainer (dev tool)."""

import sys
import time

sys.path.insert(0, "src")

import numpy as np

from greenloop.routing import (
    BinNode,
    CollectionGraph,
    EdgeAttrs,
    RLConfig,
    brute_force_route,
    greedy_route,
    route_emissions,
    train_routing,
)


def random_complete_graph(rng, n_bins):
    """Whole-km distances; one truck, so one emission rate per graph."""
    names = ["depot"] + [f"b{i:02d}" for i in range(n_bins)]
    nodes = tuple(
        BinNode(nm, fill_level=float(rng.uniform(0.2, 1.0)), is_depot=(nm == "depot"))
        for nm in names
    )
    rate = float(rng.uniform(0.4, 1.2))
    edges = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            edges[(a, b)] = EdgeAttrs(
                distance_km=float(rng.integers(1, 11)),
                emission_rate_kg_per_km=rate,
            )
    return CollectionGraph(nodes=nodes, edges=edges)


def main():
    instances = 50
    hits = 0
    worst = 0.0
    t0 = time.time()
    for k in range(instances):
        rng = np.random.default_rng(1000 + k)
        n_bins = int(rng.integers(3, 7))
        g = random_complete_graph(rng, n_bins)
        q = train_routing(g, RLConfig(rng_seed=2000 + k))
        route = greedy_route(q, g)
        got = route_emissions(g, route)
        _, best = brute_force_route(g)
        gap = (got - best) / best if best > 0 else 0.0
        if abs(got - best) <= 1e-9 * max(1.0, abs(best)):
            hits += 1
        else:
            print(f"  miss k={k} bins={n_bins} got={got:.4f} best={best:.4f} gap={gap:.2%}")
            worst = max(worst, gap)
    dt = time.time() - t0
    print(f"optimal: {hits}/{instances} ({hits/instances:.0%})  worst gap {worst:.2%}  {dt:.1f}s")


if __name__ == "__main__":
    main()
