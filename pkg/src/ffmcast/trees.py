"""Multicast trees and the two join strategies used to grow them.

A tree is a rooted arborescence over switch ids. Joins are pure: they only
compute a path, and apply_path mutates the tree afterwards. The spt strategy
re-runs a biased shortest-path search from the root so subscribers always sit
at minimum hop distance; the dst strategy grafts the subscriber onto the
nearest tree node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidPathError, TopologyError
from .topology import Link, Network, bfs_distances, shortest_path

# A path is an ordered list of directed (parent, child) edges.
PathEdges = list[tuple[str, str]]


@dataclass
class MulticastTree:
    """Rooted delivery tree.

    tag 0 marks the untagged primary tree; backup trees carry VLAN tags
    1..4094. next_tag lives on the primary tree and only grows, so tags are
    never reused. terminals are the switches whose host receives the stream
    from this tree; protects records which edge of which parent tree this
    tree is the backup for.
    """

    root: str
    tag: int = 0
    next_tag: int = 1
    nodes: set[str] = field(default_factory=set)
    parent: dict[str, str] = field(default_factory=dict)
    children: dict[str, set[str]] = field(default_factory=dict)
    backup: dict[tuple[str, str], "MulticastTree"] = field(default_factory=dict)
    terminals: set[str] = field(default_factory=set)
    protects: tuple[int, tuple[str, str]] | None = None

    def __post_init__(self) -> None:
        self.nodes.add(self.root)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, c) for c, p in sorted(self.parent.items(), key=lambda kv: (kv[1], kv[0]))]

    def edge_count(self) -> int:
        return len(self.parent)

    def tree_links(self) -> set[Link]:
        return {Link(p, c) for c, p in self.parent.items()}

    def path_to(self, node: str) -> PathEdges:
        """Directed edges from the root down to node."""
        if node == self.root:
            return []
        if node not in self.nodes:
            raise InvalidPathError(f"{node!r} is not in the tree")
        chain = []
        cur = node
        while cur != self.root:
            pre = self.parent[cur]
            chain.append((pre, cur))
            cur = pre
        chain.reverse()
        return chain

    def out_degree(self, node: str) -> int:
        return len(self.children.get(node, ()))


def apply_path(tree: MulticastTree, path: PathEdges) -> None:
    """Add a join path to the tree; edges already present are no-ops.

    The path must chain head-to-tail and start at a node already in the
    tree. Giving a node a second parent is an error.
    """
    if not path:
        return
    if path[0][0] not in tree.nodes:
        raise InvalidPathError(f"path starts at {path[0][0]!r}, which is outside the tree")
    prev_head = None
    for a, b in path:
        if prev_head is not None and a != prev_head:
            raise InvalidPathError(f"path breaks at ({a!r}, {b!r})")
        prev_head = b
    for a, b in path:
        if b in tree.nodes:
            if tree.parent.get(b) != a:
                raise InvalidPathError(f"{b!r} already has a different parent")
            continue
        tree.nodes.add(b)
        tree.parent[b] = a
        tree.children.setdefault(a, set()).add(b)


def spt_join(net: Network, tree: MulticastTree, v: str) -> PathEdges | None:
    """Minimum-hop join biased to reuse tree links.

    Runs a shortest-path search from the tree root with tree links costing
    1 - eps (eps = 1 / (edge count + 1)) and everything else 1, then returns
    only the suffix after the last node already in the tree. Returns None if
    v is already in the tree or unreachable.
    """
    if v not in net:
        raise TopologyError(f"unknown node {v!r}")
    if v in tree.nodes:
        return None
    eps = 1.0 / (tree.edge_count() + 1)
    in_tree = tree.tree_links()

    def cost(link: Link) -> float:
        return 1.0 - eps if link in in_tree else 1.0

    nodes = shortest_path(net, tree.root, v, cost)
    if nodes is None:
        return None
    anchor = 0
    for i, node in enumerate(nodes):
        if node in tree.nodes:
            anchor = i
    return [(nodes[i], nodes[i + 1]) for i in range(anchor, len(nodes) - 1)]


def dst_join(net: Network, tree: MulticastTree, v: str) -> PathEdges | None:
    """Graft v onto the nearest tree node.

    Picks the tree node w with minimum hop distance to v (ties go to the
    lexicographically smallest w) and returns the existing root-to-w tree
    path followed by a shortest w-to-v segment. Returns None if v is already
    in the tree or unreachable.
    """
    if v not in net:
        raise TopologyError(f"unknown node {v!r}")
    if v in tree.nodes:
        return None
    dist = bfs_distances(net, v)
    best: tuple[int, str] | None = None
    for w in tree.nodes:
        d = dist.get(w)
        if d is None:
            continue
        if best is None or (d, w) < best:
            best = (d, w)
    if best is None:
        return None
    w = best[1]
    segment = shortest_path(net, w, v)
    assert segment is not None
    pre = tree.path_to(w)
    return pre + [(segment[i], segment[i + 1]) for i in range(len(segment) - 1)]


JOIN_STRATEGIES = {"spt": spt_join, "dst": dst_join}


def join(net: Network, tree: MulticastTree, v: str, strategy: str) -> PathEdges | None:
    """Dispatch to a named join strategy."""
    try:
        fn = JOIN_STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"unknown join strategy {strategy!r}") from None
    return fn(net, tree, v)
