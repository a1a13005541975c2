"""Query hypergraphs, GYO reduction and rooted join trees.

Equi-join conditions are collapsed into canonical variables ``v0, v1, ...``
(one per equivalence class of attributes), numbered in order of first
appearance when atoms are scanned in query order and attributes in schema
order.  Every atom then becomes a hyperedge over those variables and a join
tree is a rooted tree whose nodes are atom indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .catalog import Catalog
from .errors import CyclicError
from .query import Query


@dataclass(frozen=True)
class Hypergraph:
    names: tuple[str, ...]                      # atom aliases, index = atom position
    relations: tuple[str, ...]
    columns: tuple[tuple[tuple[str, str], ...], ...]   # per atom: (attribute, var)
    var_of: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def edges(self) -> tuple[frozenset[str], ...]:
        return tuple(frozenset(v for _, v in cols) for cols in self.columns)

    @property
    def vertices(self) -> frozenset[str]:
        out: set[str] = set()
        for e in self.edges:
            out |= e
        return frozenset(out)

    def edge_vars(self, i: int) -> tuple[str, ...]:
        """Distinct variables of atom ``i`` in schema order."""
        seen = []
        for _, v in self.columns[i]:
            if v not in seen:
                seen.append(v)
        return tuple(seen)

    def var(self, column) -> str:
        return self.var_of[(column.atom, column.name)]

    def attributes_of(self, var: str) -> list[tuple[str, str]]:
        return [(self.names[i], a) for i, cols in enumerate(self.columns)
                for a, v in cols if v == var]


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _atom_attributes(query: Query, catalog: Catalog | None) -> list[list[str]]:
    if catalog is not None:
        return [list(catalog[a.relation].attributes) for a in query.atoms]
    # without a catalog only referenced attributes are known
    attrs: dict[str, list[str]] = {a.alias: [] for a in query.atoms}

    def note(col):
        if col.name not in attrs[col.atom]:
            attrs[col.atom].append(col.name)
    for j in query.joins:
        note(j.left)
        note(j.right)
    for g in query.group_by:
        note(g)
    for agg in query.aggregates:
        for c in agg.columns:
            note(c)
    for a in query.atoms:
        for p in a.predicates:
            note(p.ref)
    return [attrs[a.alias] for a in query.atoms]


def to_hypergraph(query: Query, catalog: Catalog | None = None) -> Hypergraph:
    uf = _UnionFind()
    attrs = _atom_attributes(query, catalog)
    for a, names in zip(query.atoms, attrs):
        for n in names:
            uf.find((a.alias, n))
    for j in query.joins:
        uf.union((j.left.atom, j.left.name), (j.right.atom, j.right.name))
    class_name: dict = {}
    var_of: dict = {}
    columns = []
    for a, names in zip(query.atoms, attrs):
        cols = []
        for n in names:
            root = uf.find((a.alias, n))
            if root not in class_name:
                class_name[root] = f"v{len(class_name)}"
            var_of[(a.alias, n)] = class_name[root]
            cols.append((n, class_name[root]))
        columns.append(tuple(cols))
    return Hypergraph(tuple(a.alias for a in query.atoms),
                      tuple(a.relation for a in query.atoms),
                      tuple(columns), var_of)


@dataclass(frozen=True)
class JoinTree:
    hypergraph: Hypergraph
    parent: tuple[int | None, ...]
    root: int

    def __post_init__(self):
        if self.parent[self.root] is not None:
            raise ValueError("root must not have a parent")

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def names(self) -> tuple[str, ...]:
        return self.hypergraph.names

    def label(self, u: int) -> frozenset[str]:
        return self.hypergraph.edges[u]

    def children(self, u: int) -> list[int]:
        return [v for v, p in enumerate(self.parent) if p == u]

    def node(self, ref) -> int:
        """Accept an atom index or alias and return the node id."""
        if isinstance(ref, int):
            if not 0 <= ref < self.size:
                raise KeyError(f"unknown join-tree node {ref}")
            return ref
        for i, n in enumerate(self.names):
            if n == ref or n.lower() == str(ref).lower():
                return i
        raise KeyError(f"unknown join-tree node {ref!r}")

    def path_to_root(self, u: int) -> list[int]:
        path = [u]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]])
        return path

    def depth(self, u: int) -> int:
        return len(self.path_to_root(u)) - 1

    def subtree(self, u: int) -> list[int]:
        out, stack = [], [u]
        while stack:
            x = stack.pop()
            out.append(x)
            stack.extend(reversed(self.children(x)))
        return out

    def postorder(self) -> list[int]:
        out = []

        def walk(u):
            for c in self.children(u):
                walk(c)
            out.append(u)
        walk(self.root)
        return out

    def undirected_edges(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset((v, p)) for v, p in enumerate(self.parent) if p is not None)


def gyo_join_tree(h: Hypergraph) -> JoinTree:
    """GYO reduction; ears are taken lowest atom index first and are attached
    to the lowest-index witness.  Ears sharing nothing with the remaining
    edges become children of the final root."""
    edges = h.edges
    n = len(edges)
    if n == 0:
        raise ValueError("empty hypergraph")
    alive = list(range(n))
    parent: list[int | None] = [None] * n
    isolated = []
    while len(alive) > 1:
        for e in alive:
            others = [f for f in alive if f != e]
            rest = frozenset().union(*(edges[f] for f in others))
            shared = edges[e] & rest
            if not shared:
                isolated.append(e)
                break
            witness = next((f for f in others if shared <= edges[f]), None)
            if witness is not None:
                parent[e] = witness
                break
        else:
            raise CyclicError([sorted(edges[f]) for f in alive])
        alive.remove(e)
    root = alive[0]
    for e in isolated:
        parent[e] = root
    return JoinTree(h, tuple(parent), root)


def reroot(tree: JoinTree, node) -> JoinTree:
    u = tree.node(node)
    parent = list(tree.parent)
    path = tree.path_to_root(u)
    for child, par in zip(path, path[1:]):
        parent[par] = child
    parent[u] = None
    return JoinTree(tree.hypergraph, tuple(parent), u)


def verify_connectedness(tree: JoinTree) -> bool:
    """Each variable's occurrence set must induce a connected subtree: with k
    occurrences exactly k-1 of them have a parent that also holds it."""
    for var in tree.hypergraph.vertices:
        nodes = [u for u in range(tree.size) if var in tree.label(u)]
        linked = sum(1 for u in nodes
                     if tree.parent[u] is not None and var in tree.label(tree.parent[u]))
        if linked != len(nodes) - 1:
            return False
    return True


def join_tree(query: Query, catalog: Catalog | None = None) -> JoinTree:
    return gyo_join_tree(to_hypergraph(query, catalog))


# -- rendering -------------------------------------------------------------------

def _node_text(tree: JoinTree, u: int) -> str:
    h = tree.hypergraph
    cols = ", ".join(f"{a}={v}" for a, v in h.columns[u])
    rel = h.relations[u]
    name = h.names[u] if h.names[u] == rel else f"{h.names[u]} ({rel})"
    return f"{name} [{cols}]"


def render_text(tree: JoinTree) -> str:
    lines = []

    def walk(u, depth):
        lines.append("  " * depth + _node_text(tree, u))
        for c in tree.children(u):
            walk(c, depth + 1)
    walk(tree.root, 0)
    return "\n".join(lines)


def render_dot(tree: JoinTree) -> str:
    lines = ["digraph jointree {", "  node [shape=box];"]
    for u in range(tree.size):
        text = _node_text(tree, u).replace('"', r'\"')
        lines.append(f'  n{u} [label="{text}"];')
    for u, p in enumerate(tree.parent):
        if p is not None:
            lines.append(f"  n{p} -> n{u};")
    lines.append("}")
    return "\n".join(lines)
