"""Interaction graphs: the complete graph and the weighted rotating-formation graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class WeightedTopology:
    """Directed weighted interaction graph on nodes 1..n.

    An edge (i, j) present in `weights` means agent i listens to agent j with
    weight W(i, j).  Zero-weight edges are kept in the map rather than
    deleted, so the control sum is always a uniform loop over all j != i.
    """

    n: int
    weights: Mapping[tuple[int, int], float] = field(repr=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("topology needs at least 2 nodes")
        for (i, j), w in self.weights.items():
            if i == j:
                raise ValueError(f"self-edge ({i},{i}) not allowed")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValueError(f"edge ({i},{j}) out of node range 1..{self.n}")
            if w < 0:
                raise ValueError(f"negative weight on edge ({i},{j})")
        object.__setattr__(self, "weights", MappingProxyType(dict(self.weights)))

    def weight(self, i: int, j: int) -> float:
        return self.weights.get((i, j), 0.0)

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self.weights if a == i)

    def weight_matrix(self) -> np.ndarray:
        """Dense (n, n) array of W(i, j) with zero diagonal, 0-indexed."""
        W = np.zeros((self.n, self.n))
        for (i, j), w in self.weights.items():
            W[i - 1, j - 1] = w
        return W

    def is_weight_symmetric(self) -> bool:
        W = self.weight_matrix()
        return bool(np.array_equal(W, W.T))


def complete_graph(n: int) -> WeightedTopology:
    """All ordered pairs present with weight 1."""
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    weights = {(i, j): 1.0 for i in range(1, n + 1) for j in range(1, n + 1) if i != j}
    return WeightedTopology(n=n, weights=weights)


def _mod_node(x: int, n: int) -> int:
    # map any integer onto node labels {1..n}
    return (x - 1) % n + 1


def successor_skipping(i: int, k: int, n: int) -> int:
    """Cyclic next node after i on {1..n}, skipping over node k."""
    if not (1 <= i <= n and 1 <= k <= n):
        raise ValueError("nodes must lie in 1..n")
    if i == k:
        raise ValueError("successor_skipping is undefined for i == k")
    s = _mod_node(i + 1, n)
    if s == k:
        s = _mod_node(i + 2, n)
    return s


def predecessor_skipping(i: int, k: int, n: int) -> int:
    """Inverse of successor_skipping on {1..n} minus {k}."""
    if not (1 <= i <= n and 1 <= k <= n):
        raise ValueError("nodes must lie in 1..n")
    if i == k:
        raise ValueError("predecessor_skipping is undefined for i == k")
    for j in range(1, n + 1):
        if j != k and successor_skipping(j, k, n) == i:
            return j
    raise RuntimeError("unreachable: successor_skipping is a bijection")


def rotating_tetrahedron_graph(k: int, p: int) -> WeightedTopology:
    """Weighted 4-node graph producing a formation spinning about agent k.

    Edges touching k carry weight 0.5 both ways; among the other three
    agents the cycle direction selected by p carries weight 1 and the
    reverse direction weight 0.
    """
    if k not in (1, 2, 3, 4):
        raise ValueError("k must be one of 1..4")
    if p not in (0, 1):
        raise ValueError("p must be 0 or 1")
    n = 4
    weights: dict[tuple[int, int], float] = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            if k in (i, j):
                weights[(i, j)] = 0.5
            elif j == successor_skipping(i, k, n):
                weights[(i, j)] = float(p)
            elif j == predecessor_skipping(i, k, n):
                weights[(i, j)] = float(1 - p)
    return WeightedTopology(n=n, weights=weights)


def topology_to_config(topo: WeightedTopology) -> dict:
    """JSON-ready description; recognizes the two named constructions."""
    W = topo.weight_matrix()
    n = topo.n
    if np.array_equal(W, np.ones((n, n)) - np.eye(n)):
        return {"type": "complete", "n": n}
    if n == 4:
        for k in (1, 2, 3, 4):
            for p in (0, 1):
                if np.array_equal(W, rotating_tetrahedron_graph(k, p).weight_matrix()):
                    return {"type": "rotating_tetrahedron", "k": k, "p": p}
    return {
        "type": "explicit",
        "n": n,
        "weights": [[i, j, w] for (i, j), w in sorted(topo.weights.items())],
    }


def topology_from_config(cfg: dict) -> WeightedTopology:
    kind = cfg.get("type")
    if kind == "complete":
        return complete_graph(int(cfg["n"]))
    if kind == "rotating_tetrahedron":
        return rotating_tetrahedron_graph(int(cfg["k"]), int(cfg["p"]))
    if kind == "explicit":
        weights = {(int(i), int(j)): float(w) for i, j, w in cfg["weights"]}
        return WeightedTopology(n=int(cfg["n"]), weights=weights)
    raise ValueError(f"unknown topology type {kind!r}")
