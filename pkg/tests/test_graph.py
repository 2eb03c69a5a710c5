import itertools
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path, prufer_edges, random_tree, star
from tailmst.depnet import TailDepTensor
from tailmst.graph import (STRENGTH_CAP, DistanceMatrix, Tree, apl, assortativity, betweenness,
                           closeness, degree_distribution, degree_frequencies, diameter,
                           edge_table, indicator_series, kruskal_mst, mantegna_distance,
                           max_degree, power_law_alpha, rce, trees_from_tensor,
                           vertex_strength)


# -- brute-force oracles ------------------------------------------------------

def all_paths(tree):
    """Explicit node path for every ordered pair, by depth-first search."""
    adj = {v: [u for u, _ in tree.adjacency[v]] for v in range(tree.k)}
    paths = {}
    for s in range(tree.k):
        stack = [(s, [s])]
        while stack:
            v, p = stack.pop()
            paths[s, v] = p
            stack.extend((u, p + [u]) for u in adj[v] if u not in p)
    return paths


def path_weight(tree, p):
    w = {frozenset((i, j)): wt for i, j, wt in tree.edges}
    return sum(w[frozenset(e)] for e in zip(p, p[1:]))


def random_distance_matrix(k, rng):
    d = np.triu(rng.uniform(0.0, math.sqrt(2), size=(k, k)), 1)
    return DistanceMatrix([f"v{i}" for i in range(k)], d + d.T)


def brute_force_minimum(dist):
    """Minimum total weight over all k^(k-2) labelled spanning trees (Cayley)."""
    k = len(dist.tickers)
    best = math.inf
    for seq in itertools.product(range(k), repeat=k - 2):
        best = min(best, sum(dist.values[i, j] for i, j in prufer_edges(list(seq), k)))
    return best


trees_strategy = st.builds(lambda k, seed: random_tree(k, np.random.default_rng(seed)),
                           st.integers(2, 12), st.integers(0, 2**32 - 1))


class TestMantegna:
    @pytest.mark.parametrize("lam, d", [(1.0, 0.0), (0.0, math.sqrt(2)), (0.5, 1.0)])
    def test_examples(self, lam, d):
        assert mantegna_distance(lam) == pytest.approx(d, abs=1e-15)

    def test_strictly_decreasing(self):
        d = mantegna_distance(np.linspace(0, 1, 101))
        assert (np.diff(d) < 0).all()
        assert d.min() >= 0 and d.max() <= math.sqrt(2)

    @pytest.mark.parametrize("lam", [-0.01, 1.01, np.nan])
    def test_domain(self, lam):
        with pytest.raises(ValueError):
            mantegna_distance(lam)

    def test_from_tail_dependence(self):
        lam = np.array([[1, 0.5, 0], [0.5, 1, 1], [0, 1, 1]], dtype=float)
        dist = DistanceMatrix.from_tail_dependence(lam, ["a", "b", "c"])
        np.testing.assert_allclose(dist.values, [[0, 1, math.sqrt(2)], [1, 0, 0],
                                                 [math.sqrt(2), 0, 0]])

    def test_matrix_invariants(self):
        with pytest.raises(ValueError):
            DistanceMatrix(["a", "b"], np.array([[0, 1], [0.5, 0]]))
        with pytest.raises(ValueError):
            DistanceMatrix(["a", "b"], np.array([[0.1, 1], [1, 0]]))
        with pytest.raises(ValueError):
            DistanceMatrix(["a", "b"], np.array([[0, np.inf], [np.inf, 0]]))


class TestKruskal:
    def test_three_nodes(self):
        d = np.array([[0, 0.3, 0.9], [0.3, 0, 0.5], [0.9, 0.5, 0]])
        tree = kruskal_mst(DistanceMatrix(["1", "2", "3"], d))
        assert sorted((i, j) for i, j, _ in tree.edges) == [(0, 1), (1, 2)]
        assert tree.total_weight() == pytest.approx(0.8)

    @pytest.mark.parametrize("k", [2, 5, 9])
    def test_ties_follow_lexicographic_order(self, k):
        d = np.full((k, k), 0.7)
        np.fill_diagonal(d, 0)
        tree = kruskal_mst(DistanceMatrix([str(i) for i in range(k)], d))
        assert [(i, j) for i, j, _ in tree.edges] == [(0, j) for j in range(1, k)]

    def test_matches_cayley_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            dist = random_distance_matrix(int(rng.integers(3, 8)), rng)
            assert kruskal_mst(dist).total_weight() == pytest.approx(brute_force_minimum(dist),
                                                                     abs=1e-12)

    def test_result_is_spanning_tree(self, rng):
        tree = kruskal_mst(random_distance_matrix(15, rng))
        assert len(tree.edges) == 14
        assert (tree.hop_distances(0) >= 0).all()

    def test_needs_two_nodes(self):
        with pytest.raises(ValueError):
            kruskal_mst(DistanceMatrix(["a"], np.zeros((1, 1))))

    def test_higher_dependence_never_lengthens_edges(self, rng):
        k = 8
        lam = np.triu(rng.uniform(0, 0.9, size=(k, k)), 1)
        lam = lam + lam.T + np.eye(k)
        base = kruskal_mst(DistanceMatrix.from_tail_dependence(lam, list("abcdefgh")))
        for delta in (0.01, 0.1, 0.5):
            bumped = np.minimum(lam + delta, 1.0)
            tree = kruskal_mst(DistanceMatrix.from_tail_dependence(bumped, list("abcdefgh")))
            assert tree.total_weight() <= base.total_weight() + 1e-12
            for (i, j, w) in tree.edges:
                assert w <= mantegna_distance(lam[i, j]) + 1e-12


class TestTreeValidation:
    def test_wrong_edge_count(self):
        with pytest.raises(ValueError):
            Tree(["a", "b", "c"], [(0, 1, 1.0)])

    def test_cycle(self):
        with pytest.raises(ValueError):
            Tree(["a", "b", "c", "d"], [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            Tree(["a", "b"], [(0, 1, -1.0)])


class TestDegrees:
    def test_star(self):
        assert degree_distribution(star(5)) == {1: 4, 4: 1}
        assert degree_frequencies(star(5)) == {1: 0.8, 4: 0.2}

    def test_path(self):
        assert degree_distribution(path(4)) == {1: 2, 2: 2}

    @settings(max_examples=60, deadline=None)
    @given(trees_strategy)
    def test_handshake(self, tree):
        hist = degree_distribution(tree)
        assert sum(hist.values()) == tree.k
        assert sum(d * c for d, c in hist.items()) == 2 * (tree.k - 1)

    @pytest.mark.parametrize("tree, expected", [(star(6), 5), (path(6), 2), (path(2), 1)])
    def test_max_degree(self, tree, expected):
        assert max_degree(tree) == expected


class TestBetweenness:
    def test_path_of_three(self):
        assert list(betweenness(path(3))) == [0, 1, 0]

    @pytest.mark.parametrize("n", [3, 5, 9])
    def test_star_hub(self, n):
        bc = betweenness(star(n))
        assert bc[0] == (n - 1) * (n - 2) // 2
        assert (bc[1:] == 0).all()

    def test_path_of_five_middle(self):
        assert betweenness(path(5))[2] == 4

    def test_against_path_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            tree = random_tree(int(rng.integers(2, 9)), rng)
            paths = all_paths(tree)
            oracle = np.zeros(tree.k, dtype=int)
            for s, t in itertools.combinations(range(tree.k), 2):
                for v in paths[s, t][1:-1]:
                    oracle[v] += 1
            np.testing.assert_array_equal(betweenness(tree), oracle)


class TestStrength:
    def test_examples(self):
        tree = Tree(["a", "b", "c"], [(0, 1, 0.5), (1, 2, 0.25)])
        s, capped = vertex_strength(tree)
        assert s[1] == pytest.approx(6.0)
        assert capped == 0
        s, _ = vertex_strength(Tree(["a", "b"], [(0, 1, 1.0)]))
        assert s[0] == 1.0

    def test_uniform_weights(self, rng):
        tree = random_tree(9, rng)
        uniform = Tree(tree.nodes, [(i, j, math.sqrt(2)) for i, j, _ in tree.edges])
        s, _ = vertex_strength(uniform)
        np.testing.assert_allclose(s, uniform.degrees() / math.sqrt(2))

    def test_zero_weight_capped_and_flagged(self):
        s, capped = vertex_strength(Tree(["a", "b", "c"], [(0, 1, 0.0), (1, 2, 1.0)]))
        assert capped == 1
        assert s[0] == STRENGTH_CAP
        assert s[1] == STRENGTH_CAP + 1.0


class TestCloseness:
    def test_path_of_three(self):
        c = closeness(path(3))
        assert c[1] == pytest.approx(0.5)
        assert c[0] == pytest.approx(1 / 3)

    def test_two_nodes(self):
        np.testing.assert_allclose(closeness(Tree(["a", "b"], [(0, 1, 0.4)])), 2.5)

    def test_against_path_enumeration(self):
        rng = np.random.default_rng(4)
        for _ in range(40):
            tree = random_tree(int(rng.integers(2, 9)), rng)
            paths = all_paths(tree)
            oracle = [1.0 / sum(path_weight(tree, paths[v, t]) for t in range(tree.k) if t != v)
                      for v in range(tree.k)]
            np.testing.assert_allclose(closeness(tree), oracle, rtol=1e-12)


class TestPathLengths:
    @pytest.mark.parametrize("n", [2, 5, 10])
    def test_star(self, n):
        assert apl(star(n)) == pytest.approx(2 * (n - 1) / n)
        assert diameter(star(n)) == (1 if n == 2 else 2)

    @pytest.mark.parametrize("n", [2, 5, 11])
    def test_path(self, n):
        assert apl(path(n)) == pytest.approx((n + 1) / 3)
        assert diameter(path(n)) == n - 1

    def test_against_path_enumeration(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            tree = random_tree(int(rng.integers(2, 9)), rng)
            paths = all_paths(tree)
            hops = [len(paths[s, t]) - 1 for s, t in itertools.combinations(range(tree.k), 2)]
            assert apl(tree) == pytest.approx(np.mean(hops), abs=1e-12)
            assert diameter(tree) == max(hops)

    def test_apl_ignores_weights(self, rng):
        tree = random_tree(8, rng)
        unit = Tree(tree.nodes, [(i, j, 1.0) for i, j, _ in tree.edges])
        assert apl(tree) == apl(unit)


class TestPowerLaw:
    def test_star(self):
        expected = 1 + 5 / (math.log(8) + 4 * math.log(2))
        assert power_law_alpha(star(5).degrees()) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(2.0305, abs=1e-4)

    def test_two_node_tree(self):
        assert power_law_alpha([1, 1]) == pytest.approx(1 + 1 / math.log(2), abs=1e-12)
        assert power_law_alpha([1, 1]) == pytest.approx(2.4427, abs=1e-4)

    def test_order_invariant(self, rng):
        deg = rng.integers(1, 7, size=20)
        assert power_law_alpha(deg) == power_law_alpha(deg[::-1])

    def test_nothing_above_kmin(self):
        assert math.isnan(power_law_alpha([1, 1, 2], k_min=3))


class TestRichClub:
    def test_adjacent_hubs(self):
        # two adjacent hubs of degree 5 with four leaves each
        edges = [(0, 1, 1.0)] + [(0, j, 1.0) for j in range(2, 6)] + [(1, j, 1.0) for j in range(6, 10)]
        tree = Tree([f"n{i}" for i in range(10)], edges)
        assert rce(tree, 4) == 1.0

    def test_path_has_no_rich_club(self):
        assert rce(path(10), 4) == 0.0

    def test_separated_hubs(self):
        # hubs 0 and 1 of degree 5 joined through node 2
        edges = ([(0, 2, 1.0), (1, 2, 1.0)] + [(0, j, 1.0) for j in range(3, 7)]
                 + [(1, j, 1.0) for j in range(7, 11)])
        tree = Tree([f"n{i}" for i in range(11)], edges)
        assert rce(tree, 4) == 0.0
        assert rce(tree, 1) == pytest.approx(2 * 2 / (3 * 2))

    @settings(max_examples=60, deadline=None)
    @given(trees_strategy, st.integers(1, 5))
    def test_range(self, tree, k):
        assert 0.0 <= rce(tree, k) <= 1.0


class TestAssortativity:
    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_star(self, n):
        assert assortativity(star(n)) == pytest.approx(-1.0)

    def test_path_of_four(self):
        # end-degree pairs over both orientations: (1,2),(2,1),(2,2),(2,2),(2,1),(1,2)
        a = np.array([1, 2, 2, 2, 2, 1.0])
        b = np.array([2, 1, 2, 2, 1, 2.0])
        oracle = np.corrcoef(a, b)[0, 1]
        assert assortativity(path(4)) == pytest.approx(oracle)
        assert oracle < 0

    def test_undefined(self):
        assert math.isnan(assortativity(path(2)))

    @settings(max_examples=60, deadline=None)
    @given(trees_strategy)
    def test_range(self, tree):
        r = assortativity(tree)
        assert math.isnan(r) or -1.0 <= r <= 1.0


class TestTreeIdentities:
    @settings(max_examples=80, deadline=None)
    @given(trees_strategy)
    def test_identities(self, tree):
        assert diameter(tree) >= 1
        assert apl(tree) <= diameter(tree)
        assert max_degree(tree) <= tree.k - 1
        bc = betweenness(tree)
        assert bc.dtype.kind == "i"
        c = closeness(tree)
        assert np.isfinite(c).all() and (c > 0).all()

    @settings(max_examples=40, deadline=None)
    @given(trees_strategy, st.integers(0, 2**32 - 1))
    def test_relabeling_invariance(self, tree, seed):
        order = np.random.default_rng(seed).permutation(tree.k)
        other = tree.relabel(order)
        a = indicator_series([tree]).scalars.iloc[0]
        b = indicator_series([other]).scalars.iloc[0]
        pd.testing.assert_series_equal(a, b, check_names=False)
        np.testing.assert_allclose(np.sort(closeness(tree)), np.sort(closeness(other)))


class TestIndicatorSeries:
    def test_single_tree(self):
        ind = indicator_series([star(5)])
        row = ind.scalars.iloc[0]
        assert row["apl"] == pytest.approx(1.6)
        assert row["max_degree"] == 4
        assert row["diameter"] == 2
        assert row["assortativity"] == pytest.approx(-1)
        assert row["alpha"] == pytest.approx(power_law_alpha([4, 1, 1, 1, 1]))
        assert row["rce"] == 0.0
        assert list(ind.nodes["degree"].iloc[0]) == [4, 1, 1, 1, 1]

    def test_constant_columns(self, rng):
        tree = random_tree(7, rng)
        dates = pd.date_range("2010-01-01", periods=52, freq="W-FRI")
        ind = indicator_series([tree] * 52, dates)
        assert len(ind.scalars) == 52
        assert (ind.scalars.nunique(dropna=False) == 1).all()
        means = ind.node_means()
        np.testing.assert_allclose(means["betweenness"], betweenness(tree))
        smoothed = ind.smoothed(13)
        assert smoothed["apl_ma13"].isna().sum() == 12
        np.testing.assert_allclose(smoothed["apl_ma13"].dropna(), apl(tree))

    def test_node_long(self):
        ind = indicator_series([path(3), star(3)], pd.date_range("2010-01-01", periods=2))
        long = ind.node_long()
        assert list(long.columns) == ["date", "ticker", "degree", "betweenness", "strength",
                                      "closeness"]
        assert len(long) == 6

    def test_errors(self):
        with pytest.raises(ValueError):
            indicator_series([])
        with pytest.raises(ValueError):
            indicator_series([path(3), Tree(["x", "y", "z"], [(0, 1, 1.0), (1, 2, 1.0)])])

    def test_trees_from_tensor_and_edges(self, rng):
        k, n = 5, 3
        lam = rng.uniform(0, 0.9, size=(n, k, k))
        lam = (lam + np.swapaxes(lam, 1, 2)) / 2
        lam[:, range(k), range(k)] = 1.0
        dates = pd.date_range("2020-01-03", periods=n, freq="W-FRI")
        tensor = TailDepTensor(dates, list("abcde"), lam)
        trees = trees_from_tensor(tensor)
        assert len(trees) == n
        edges = edge_table(trees, dates)
        assert list(edges.columns) == ["date", "i", "j", "weight"]
        assert len(edges) == n * (k - 1)

    def test_dot_export(self):
        dot = path(3).to_dot()
        assert dot.startswith("graph mst {")
        assert '"n0" -- "n1"' in dot
