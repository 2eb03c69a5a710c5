"""Mantegna distances, Kruskal minimum spanning trees and tree indicators."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

STRENGTH_CAP = 1e8
SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# distances

def mantegna_distance(lam):
    """sqrt(2 (1 - lambda)) for tail dependence in [0, 1]."""
    lam = np.asarray(lam, dtype=float)
    if np.isnan(lam).any() or (lam < 0).any() or (lam > 1).any():
        raise ValueError("tail dependence must lie in [0, 1]")
    out = np.sqrt(2.0 * (1.0 - lam))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class DistanceMatrix:
    tickers: list[str]
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        k = len(self.tickers)
        if v.shape != (k, k):
            raise ValueError(f"distance matrix shape {v.shape} does not match {k} tickers")
        if not np.isfinite(v).all():
            raise ValueError("distance matrix has non-finite entries")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ValueError("distance matrix is not symmetric")
        if np.abs(np.diag(v)).max(initial=0.0) > 1e-12:
            raise ValueError("distance matrix diagonal must be zero")
        if (v < -1e-12).any():
            raise ValueError("negative distances")

    @classmethod
    def from_tail_dependence(cls, lam_matrix, tickers) -> "DistanceMatrix":
        lam = np.array(lam_matrix, dtype=float)
        np.fill_diagonal(lam, 1.0)
        return cls(list(tickers), mantegna_distance(lam))


# ---------------------------------------------------------------------------
# trees

@dataclass
class Tree:
    """Spanning tree over ``nodes``; edges are (i, j, weight) with node indices, i < j."""

    nodes: list[str]
    edges: list[tuple[int, int, float]]
    _adj: list[list[tuple[int, float]]] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        k = len(self.nodes)
        if len(self.edges) != k - 1:
            raise ValueError(f"a tree on {k} nodes has {k - 1} edges, got {len(self.edges)}")
        self.edges = [(min(i, j), max(i, j), float(w)) for i, j, w in self.edges]
        parent = list(range(k))
        for i, j, w in self.edges:
            if w < 0:
                raise ValueError("negative edge weight")
            ri, rj = _find(parent, i), _find(parent, j)
            if ri == rj:
                raise ValueError("edges contain a cycle")
            parent[ri] = rj
        adj = [[] for _ in range(k)]
        for i, j, w in self.edges:
            adj[i].append((j, w))
            adj[j].append((i, w))
        self._adj = adj

    @property
    def k(self) -> int:
        return len(self.nodes)

    @property
    def adjacency(self):
        return self._adj

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=int)

    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def hop_distances(self, source: int) -> np.ndarray:
        return self._bfs(source, weighted=False)

    def path_lengths(self, source: int) -> np.ndarray:
        return self._bfs(source, weighted=True)

    def _bfs(self, source, weighted):
        dist = np.full(self.k, -1.0)
        dist[source] = 0.0
        stack = [source]
        while stack:
            v = stack.pop()
            for u, w in self._adj[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + (w if weighted else 1.0)
                    stack.append(u)
        return dist

    def relabel(self, order) -> "Tree":
        """Same tree with nodes permuted: new position n holds old node ``order[n]``."""
        inv = {old: new for new, old in enumerate(order)}
        return Tree([self.nodes[o] for o in order],
                    [(inv[i], inv[j], w) for i, j, w in self.edges])

    def to_dot(self, name: str = "mst") -> str:
        lines = [f"graph {name} {{"]
        for n in self.nodes:
            lines.append(f'  "{n}";')
        for i, j, w in self.edges:
            lines.append(f'  "{self.nodes[i]}" -- "{self.nodes[j]}" [weight={w:.9g}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def kruskal_mst(dist: DistanceMatrix) -> Tree:
    """Minimum spanning tree; ties go to the lexicographically smaller (i, j)."""
    v = np.asarray(dist.values, dtype=float)
    k = v.shape[0]
    if k < 2:
        raise ValueError("need at least two nodes")
    if not np.isfinite(v).all():
        raise ValueError("non-finite distances")
    iu, ju = np.triu_indices(k, 1)
    order = np.lexsort((ju, iu, v[iu, ju]))
    parent = list(range(k))
    edges = []
    for e in order:
        i, j = int(iu[e]), int(ju[e])
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j, float(v[i, j])))
            if len(edges) == k - 1:
                break
    return Tree(list(dist.tickers), edges)


# ---------------------------------------------------------------------------
# per-node indicators

def degree_distribution(tree: Tree) -> dict[int, int]:
    """Number of nodes with each degree."""
    return dict(sorted(Counter(tree.degrees().tolist()).items()))


def degree_frequencies(tree: Tree) -> dict[int, float]:
    return {d: c / tree.k for d, c in degree_distribution(tree).items()}


def _subtree_sizes(tree: Tree):
    """Rooted at node 0: parent array, DFS order and subtree sizes."""
    k = tree.k
    parent = [-1] * k
    order = []
    seen = [False] * k
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        order.append(v)
        for u, _ in tree.adjacency[v]:
            if not seen[u]:
                seen[u] = True
                parent[u] = v
                stack.append(u)
    size = [1] * k
    for v in reversed(order):
        if parent[v] >= 0:
            size[parent[v]] += size[v]
    return parent, order, size


def betweenness(tree: Tree) -> np.ndarray:
    """Unnormalised betweenness: node pairs whose tree path passes through each node.

    Removing v splits the tree into components of sizes s_c; the pairs
    routed through v are those taken from two different components.
    """
    k = tree.k
    parent, _, size = _subtree_sizes(tree)
    out = np.zeros(k, dtype=np.int64)
    for v in range(k):
        parts = [size[u] for u, _ in tree.adjacency[v] if parent[u] == v]
        if parent[v] >= 0:
            parts.append(k - size[v])
        total = sum(parts)
        out[v] = (total * total - sum(p * p for p in parts)) // 2
    return out


def vertex_strength(tree: Tree) -> tuple[np.ndarray, int]:
    """Sum of reciprocal incident edge lengths; also the number of capped zero-length edges."""
    s = np.zeros(tree.k)
    capped = 0
    for i, j, w in tree.edges:
        if w > 1.0 / STRENGTH_CAP:
            inv = 1.0 / w
        else:
            inv = STRENGTH_CAP
            capped += 1
        s[i] += inv
        s[j] += inv
    return s, capped


def closeness(tree: Tree) -> np.ndarray:
    """Inverse of the summed weighted path lengths from each node to all others."""
    totals = np.array([tree.path_lengths(v).sum() for v in range(tree.k)])
    with np.errstate(divide="ignore"):
        return np.where(totals > 0, 1.0 / totals, np.inf)


# ---------------------------------------------------------------------------
# whole-tree indicators

def apl(tree: Tree) -> float:
    """Mean hop count over unordered node pairs.

    Each edge lies on the paths of s (k - s) pairs, s the size of one side.
    """
    k = tree.k
    parent, _, size = _subtree_sizes(tree)
    total = sum(size[v] * (k - size[v]) for v in range(k) if parent[v] >= 0)
    return total / (k * (k - 1) / 2)


def max_degree(tree: Tree) -> int:
    return int(tree.degrees().max())


def diameter(tree: Tree) -> int:
    """Longest path in hops, by two farthest-node sweeps."""
    first = tree.hop_distances(0)
    far = int(np.argmax(first))
    return int(tree.hop_distances(far).max())


def power_law_alpha(degrees, k_min: int = 1) -> float:
    """Discrete power-law exponent MLE, 1 + n / sum ln(k_i / (k_min - 1/2)).

    Degrees below ``k_min`` are ignored; NaN when nothing is left.
    """
    k = np.asarray(degrees, dtype=float)
    k = k[k >= k_min]
    if k.size == 0:
        return float("nan")
    denom = np.log(k / (k_min - 0.5)).sum()
    if not denom > 0:
        return float("nan")
    return float(1.0 + k.size / denom)


def rce(tree: Tree, k: int = 4) -> float:
    """Rich-club coefficient 2 E / (N (N - 1)) among nodes of degree > k; 0 if N < 2."""
    if k < 0:
        raise ValueError("degree threshold must be non-negative")
    deg = tree.degrees()
    rich = deg > k
    n_rich = int(rich.sum())
    if n_rich < 2:
        return 0.0
    e_rich = sum(1 for i, j, _ in tree.edges if rich[i] and rich[j])
    return 2.0 * e_rich / (n_rich * (n_rich - 1))


def assortativity(tree: Tree) -> float:
    """Newman degree assortativity (Pearson over both edge orientations); NaN if undefined."""
    deg = tree.degrees().astype(float)
    a = np.array([deg[i] for i, j, _ in tree.edges] + [deg[j] for i, j, _ in tree.edges])
    b = np.array([deg[j] for i, j, _ in tree.edges] + [deg[i] for i, j, _ in tree.edges])
    if a.std() == 0:
        return float("nan")
    am, bm = a - a.mean(), b - b.mean()
    return float(np.clip((am * bm).mean() / (a.std() * b.std()), -1.0, 1.0))


# ---------------------------------------------------------------------------
# series

SCALAR_COLUMNS = ("apl", "max_degree", "alpha", "diameter", "rce", "assortativity")
NODE_COLUMNS = ("degree", "betweenness", "strength", "closeness")


@dataclass
class IndicatorFrame:
    scalars: pd.DataFrame               # index = dates, SCALAR_COLUMNS
    nodes: dict[str, pd.DataFrame]      # NODE_COLUMNS -> dates x tickers
    capped_edges: int = 0

    @property
    def dates(self) -> pd.Index:
        return self.scalars.index

    def node_means(self) -> pd.DataFrame:
        """Time-average of every per-node indicator (one row per ticker)."""
        return pd.DataFrame({name: frame.mean(axis=0) for name, frame in self.nodes.items()})

    def smoothed(self, window: int = 13) -> pd.DataFrame:
        """Scalar columns with trailing moving averages appended as ``<col>_ma<window>``."""
        from .ingest import moving_average

        out = self.scalars.copy()
        if window > len(out):
            return out
        for col in SCALAR_COLUMNS:
            out[f"{col}_ma{window}"] = moving_average(out[col].to_numpy(dtype=float), window)
        return out

    def node_long(self) -> pd.DataFrame:
        """Long format: date, ticker and one column per node indicator."""
        parts = [frame.stack().rename(name) for name, frame in self.nodes.items()]
        long = pd.concat(parts, axis=1)
        long.index.names = ["date", "ticker"]
        return long.reset_index()


def scalar_indicators(tree: Tree, rce_k: int = 4) -> dict[str, float]:
    deg = tree.degrees()
    return {
        "apl": apl(tree),
        "max_degree": int(deg.max()),
        "alpha": power_law_alpha(deg),
        "diameter": diameter(tree),
        "rce": rce(tree, rce_k),
        "assortativity": assortativity(tree),
    }


def indicator_series(trees, dates=None, rce_k: int = 4) -> IndicatorFrame:
    """Evaluate every indicator on each tree; rows follow the order of ``trees``."""
    trees = list(trees)
    if not trees:
        raise ValueError("no trees given")
    index = pd.Index(dates if dates is not None else range(len(trees)), name="date")
    if len(index) != len(trees):
        raise ValueError("dates and trees differ in length")
    tickers = trees[0].nodes
    rows, node_vals = [], {name: [] for name in NODE_COLUMNS}
    capped = 0
    for tree in trees:
        if tree.nodes != tickers:
            raise ValueError("all trees must share the same node list")
        rows.append(scalar_indicators(tree, rce_k))
        strength, n_capped = vertex_strength(tree)
        capped += n_capped
        node_vals["degree"].append(tree.degrees())
        node_vals["betweenness"].append(betweenness(tree))
        node_vals["strength"].append(strength)
        node_vals["closeness"].append(closeness(tree))
    scalars = pd.DataFrame(rows, index=index, columns=list(SCALAR_COLUMNS))
    nodes = {name: pd.DataFrame(np.vstack(vals), index=index, columns=tickers)
             for name, vals in node_vals.items()}
    return IndicatorFrame(scalars=scalars, nodes=nodes, capped_edges=capped)


def trees_from_tensor(tensor) -> list[Tree]:
    """One MST per date of a :class:`~tailmst.depnet.TailDepTensor`."""
    return [kruskal_mst(DistanceMatrix.from_tail_dependence(tensor.values[t], tensor.tickers))
            for t in range(tensor.values.shape[0])]


def edge_table(trees, dates) -> pd.DataFrame:
    """Long edge list: date, i, j, weight (ticker names)."""
    rows = []
    for date, tree in zip(dates, trees):
        for i, j, w in tree.edges:
            rows.append((date, tree.nodes[i], tree.nodes[j], w))
    return pd.DataFrame(rows, columns=["date", "i", "j", "weight"])
