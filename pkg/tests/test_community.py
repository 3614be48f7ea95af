import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA, available_backends, two_triangles
from oracles import modularity_from_definition, set_partitions
from provnet.community import (
    Partition,
    fast_greedy,
    modularity,
    prune_small,
    q_trajectory,
    relabel_by_size,
    replay,
)
from provnet.graph import ConfigError, ProviderGraph


def test_single_community_q_is_zero():
    g = two_triangles(bridge=True)
    assert modularity(g, {n: 0 for n in g.npis}) == pytest.approx(0.0, abs=1e-15)


def test_two_triangles_split_q_half():
    g = two_triangles()
    lab = {n: int(n in "def") for n in g.npis}
    assert modularity(g, lab) == pytest.approx(0.5, abs=1e-12)


def test_two_triangles_singletons():
    g = two_triangles()
    assert modularity(g, {n: n for n in g.npis}) == pytest.approx(-1 / 6, abs=1e-12)


def test_modularity_errors():
    g = two_triangles()
    with pytest.raises(ValueError, match="unlabeled"):
        modularity(g, {"a": 0})
    with pytest.raises(ValueError, match="zero total"):
        modularity(ProviderGraph.from_edges([], ["x", "y"]), {"x": 0, "y": 1})


def test_bridge_graph_optimum_matches_exhaustive_search():
    g = two_triangles(bridge=True)
    edges = list(g.edges())
    best = max(modularity_from_definition(edges, lab) for lab in set_partitions(g.npis))
    assert best == pytest.approx(6 / 7 - 1 / 2, abs=1e-12)
    part = fast_greedy(g)
    assert part.modularity == pytest.approx(best, abs=1e-12)
    assert part.members() == {0: ["a", "b", "c"], 1: ["d", "e", "f"]}


def test_disconnected_components_never_merge():
    g = ProviderGraph.from_edges([("a", "b", 3), ("c", "d", 1), ("e", "f", 2), ("f", "g", 2)])
    part = fast_greedy(g)
    comp = {n: i for i, cc in enumerate(nx.connected_components(g.to_networkx())) for n in cc}
    for m in part.merge_log:
        assert comp[m.a] == comp[m.b]
    for a, b in [("a", "c"), ("a", "e"), ("c", "e")]:
        assert part.community_of[a] != part.community_of[b]


def test_zero_weight_graph_convention():
    g = ProviderGraph.from_edges([], ["x", "y", "z"])
    part = fast_greedy(g)
    assert part.modularity == 0.0 and part.n_communities == 3 and part.merge_log == []


def test_empty_graph_rejected():
    with pytest.raises(ValueError):
        fast_greedy(ProviderGraph.from_edges([]))


def test_ids_dense_and_descending_size():
    edges = [(f"a{i}", f"a{j}", 1) for i in range(5) for j in range(i + 1, 5)]
    edges += [(f"b{i}", f"b{j}", 1) for i in range(3) for j in range(i + 1, 3)]
    edges += [("a0", "b0", 1)]
    part = fast_greedy(ProviderGraph.from_edges(edges))
    sizes = part.sizes()
    assert list(sizes) == list(range(len(sizes)))
    assert list(sizes.values()) == sorted(sizes.values(), reverse=True)


def random_weighted_graph(seed, n=None, p=None):
    rng = random.Random(seed)
    n = n or rng.randint(3, 30)
    p = p or rng.uniform(0.1, 0.6)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((f"v{i:02d}", f"v{j:02d}", rng.randint(1, 20)))
    if not edges:
        edges.append(("v00", "v01", 1))
    return ProviderGraph.from_edges(edges, [f"v{i:02d}" for i in range(n)])


def load_corpus(max_nodes=8):
    for line in (DATA / "connected_graphs_le8.g6").read_text().split():
        g = nx.from_graph6_bytes(line.encode())
        if g.number_of_nodes() <= max_nodes:
            yield g


def from_nx(g, weights=None):
    edges = [(f"n{u}", f"n{v}", (weights or {}).get((u, v), 1)) for u, v in g.edges()]
    return ProviderGraph.from_edges(edges, [f"n{u}" for u in g.nodes()])


def test_corpus_has_all_connected_graphs():
    counts = {}
    for g in load_corpus():
        assert nx.is_connected(g)
        counts[g.number_of_nodes()] = counts.get(g.number_of_nodes(), 0) + 1
    assert counts == {1: 1, 2: 1, 3: 2, 4: 6, 5: 21, 6: 112, 7: 853, 8: 11117}


def test_exhaustive_partitions_small_corpus():
    """Every partition of every connected graph with <= 5 nodes."""
    for nxg in load_corpus(5):
        g = from_nx(nxg)
        if g.n_edges == 0:
            continue
        edges = list(g.edges())
        for lab in set_partitions(g.npis):
            assert modularity(g, lab) == pytest.approx(modularity_from_definition(edges, lab), abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_exhaustive_partitions_weighted_eight_nodes(seed):
    rng = random.Random(seed)
    nxg = nx.gnp_random_graph(8, 0.5, seed=seed)
    while not nx.is_connected(nxg):
        nxg.add_edge(rng.randrange(8), rng.randrange(8))
        nxg.remove_edges_from(nx.selfloop_edges(nxg))
    w = {(u, v): rng.randint(1, 9) for u, v in nxg.edges()}
    g = from_nx(nxg, w)
    edges = list(g.edges())
    best = -1.0
    for lab in set_partitions(g.npis):
        q = modularity(g, lab)
        assert q == pytest.approx(modularity_from_definition(edges, lab), abs=1e-9)
        best = max(best, q)
    part = fast_greedy(g)
    assert part.modularity <= best + 1e-12


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_q_invariant_under_relabeling(seed):
    g = random_weighted_graph(seed)
    rng = random.Random(seed)
    lab = {n: rng.randrange(4) for n in g.npis}
    perm = {c: f"x{(c * 7) % 4}" for c in range(4)}
    assert modularity(g, lab) == pytest.approx(modularity(g, {n: perm[c] for n, c in lab.items()}), abs=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([2, 3, 7, 0.5]))
@settings(max_examples=40, deadline=None)
def test_uniform_scaling_keeps_merges_and_q(seed, alpha):
    g = random_weighted_graph(seed)
    scaled = ProviderGraph(g.nodes, g.src, g.dst, g.weight * alpha)
    a, b = fast_greedy(g), fast_greedy(scaled)
    assert [(m.a, m.b) for m in a.merge_log] == [(m.a, m.b) for m in b.merge_log]
    assert a.community_of == b.community_of
    assert a.modularity == pytest.approx(b.modularity, abs=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_merge_prefix_replay_matches_tracked_q(seed):
    g = random_weighted_graph(seed)
    part = fast_greedy(g)
    traj = q_trajectory(g, part)
    for level in range(len(part.merge_log) + 1):
        assert modularity(g, replay(g, part.merge_log, level)) == pytest.approx(traj[level], abs=1e-9)
    # the cut is the highest level reaching the maximum
    assert traj[part.cut_level] == pytest.approx(traj.max(), abs=1e-12)
    assert part.modularity == pytest.approx(traj[part.cut_level], abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_backends_agree(seed):
    g = random_weighted_graph(seed, n=40)
    results = [fast_greedy(g, backend=b) for b in available_backends()]
    for r in results[1:]:
        assert r.merge_log == results[0].merge_log
        assert r.community_of == results[0].community_of


def test_tie_break_smallest_pair_first():
    # square with unit weights: every adjacent pair has the same gain
    g = ProviderGraph.from_edges([("a", "b", 1), ("b", "c", 1), ("c", "d", 1), ("a", "d", 1)])
    part = fast_greedy(g)
    assert (part.merge_log[0].a, part.merge_log[0].b) == ("a", "b")


def test_fast_greedy_q_matches_recomputation():
    for seed in range(30):
        g = random_weighted_graph(seed)
        part = fast_greedy(g)
        assert part.modularity == pytest.approx(modularity(g, part.community_of), abs=1e-9)
        assert -1 <= part.modularity < 1


# -- prune_small -------------------------------------------------------------


def partition_with_sizes(sizes):
    labels = {}
    k = 0
    for c, s in enumerate(sizes):
        for _ in range(s):
            labels[f"n{k:05d}"] = c
            k += 1
    return Partition(relabel_by_size(labels), 0.4)


def test_prune_sizes_60_55_3():
    pr = prune_small(partition_with_sizes([60, 55, 3]), 50)
    assert pr.major.n_communities == 2
    assert [len(m) for _, m in pr.excluded] == [3]
    assert pr.summary()["excluded_providers"] == 3


def test_prune_nothing_excluded():
    part = partition_with_sizes([70, 60, 50])
    pr = prune_small(part, 50)
    assert pr.excluded == [] and pr.major.community_of == part.community_of


def test_prune_38_small_communities():
    # 38 small communities averaging 3.5 providers (133 total) next to six large ones
    small = [3] * 19 + [4] * 19
    assert sum(small) == 133
    pr = prune_small(partition_with_sizes([622, 452, 344, 326, 224, 112] + small), 50)
    s = pr.summary()
    assert s["n_major"] == 6
    assert s["excluded_communities"] == 38
    assert s["excluded_providers"] == 133
    assert s["excluded_mean_size"] == pytest.approx(3.5)
    every = set(pr.major.community_of) | pr.excluded_providers()
    assert len(every) == 2080 + 133
    assert not set(pr.major.community_of) & pr.excluded_providers()


def test_prune_bad_min_size():
    with pytest.raises(ConfigError):
        prune_small(partition_with_sizes([3]), 0)


def test_planted_partition_small():
    from sklearn.metrics import adjusted_rand_score

    rng = np.random.default_rng(4)
    blocks = 6
    per = 20
    edges = []
    truth = {}
    names = [f"v{i:03d}" for i in range(blocks * per)]
    for i, a in enumerate(names):
        truth[a] = i // per
        for j in range(i + 1, len(names)):
            same = i // per == j // per
            if rng.random() < (0.6 if same else 0.02):
                edges.append((a, names[j], int(rng.integers(3, 10)) if same else 1))
    part = fast_greedy(ProviderGraph.from_edges(edges, names))
    assert adjusted_rand_score([truth[n] for n in names], [part.community_of[n] for n in names]) >= 0.95
