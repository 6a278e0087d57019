import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qamp import walks
from qamp.errors import Disconnected, EnumerationTooLarge, Infeasible, ParseError

from oracles import all_walks, walk_edges


def is_simple_regular(g, d):
    seen = set()
    for u, v in g.edges:
        if u == v or (u, v) in seen:
            return False
        seen.add((u, v))
    return all(x == d for x in g.degrees)


def test_random_regular_on_four_is_k4():
    g = walks.random_regular(4, 3, seed=0)
    assert set(g.edges) == set(walks.complete_graph(4).edges)


def test_random_regular_six():
    assert list(walks.random_regular(6, 3, seed=5).degrees) == [3] * 6


def test_random_regular_simple_over_many_seeds():
    for seed in range(1000):
        assert is_simple_regular(walks.random_regular(8, 3, seed=seed), 3)


def test_random_regular_infeasible():
    with pytest.raises(Infeasible):
        walks.random_regular(5, 3)


def test_graph_rejects_self_loops():
    with pytest.raises(ValueError):
        walks.Graph(3, [(0, 0), (1, 2)])


def test_k4_spectrum():
    sd = walks.spectral(walks.complete_graph(4))
    assert sd.lam == pytest.approx(1 / 3, abs=1e-12)
    assert np.allclose(sd.spectrum, [1, -1 / 3, -1 / 3, -1 / 3])
    assert not sd.bipartite


def test_c4_bipartite():
    sd = walks.spectral(walks.cycle_graph(4))
    assert sd.bipartite
    assert sd.lam == pytest.approx(1.0)


def test_disconnected_spectral():
    with pytest.raises(Disconnected):
        walks.spectral(walks.Graph(4, [(0, 1), (2, 3)]))


def test_random_cubic_lambda_matches_dense():
    g = walks.random_regular(50, 3, seed=2)
    mu = np.linalg.eigvals(g.adjacency_matrix() / 3).real
    mu = np.sort(mu)[::-1]
    assert walks.spectral(g).lam == pytest.approx(max(abs(mu[1]), abs(mu[-1])), abs=1e-10)


def test_walk_counts():
    assert len(list(walks.enumerate_walks(walks.cycle_graph(4), 1))) == 8
    k4 = walks.complete_graph(4)
    assert len(list(walks.enumerate_walks(k4, 2))) == 36
    assert walks.walk_count(k4, 2) == 36
    with pytest.raises(EnumerationTooLarge):
        next(iter(walks.enumerate_walks(k4, 5, cap=100)))


def test_enumeration_matches_oracle():
    g = walks.prism_graph()
    ours = [w.vertices for w in walks.enumerate_walks(g, 3)]
    assert sorted(ours) == sorted(tuple(w) for w in all_walks(g.adjacency, 3))


def test_walk_edges_consecutive():
    g = walks.complete_graph(4)
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = walks.sample_walk(g, 4, rng)
        assert w.t == 4
        for u, v in zip(w.vertices, w.vertices[1:]):
            assert v in g.adjacency[u]


def test_sampled_first_step_is_uniform_over_edges():
    g = walks.complete_graph(4)
    rng = np.random.default_rng(11)
    n_samples = 100_000
    counts = dict.fromkeys(g.edges, 0)
    for _ in range(n_samples):
        counts[walks.sample_walk(g, 1, rng).edges[0]] += 1
    p = 2 / (g.n * g.degree)
    sigma = np.sqrt(n_samples * p * (1 - p))
    for c in counts.values():
        assert abs(c - n_samples * p) <= 3 * sigma


def test_avoid_probability_examples():
    c4 = walks.cycle_graph(4)
    assert walks.walk_avoid_probability(c4, [], 3) == pytest.approx(1.0)
    assert walks.walk_avoid_probability(c4, c4.edges, 1) == 0.0
    assert walks.walk_avoid_probability(c4, [(0, 1)], 1) == pytest.approx(0.75, abs=1e-15)


def enumerated_avoid(g, bad, t):
    ws = all_walks(g.adjacency, t)
    good = sum(not any(e in bad for e in walk_edges(w)) for w in ws)
    return Fraction(good, len(ws))


@settings(max_examples=30, deadline=None)
@given(data=st.data(), t=st.integers(1, 4), which=st.sampled_from(["k4", "prism", "cycle5", "cycle6"]))
def test_avoid_probability_matches_enumeration(data, t, which):
    g = walks.named_graph(which)
    bad = set(data.draw(st.lists(st.sampled_from(g.edges), unique=True)))
    exact = enumerated_avoid(g, bad, t)
    got = walks.walk_avoid_probability(g, bad, t)
    assert abs(got - float(exact)) < 1e-12
    assert Fraction(got).limit_denominator(g.n * g.degree**t) == exact


def test_moments_trivial_cases():
    g = walks.prism_graph()
    m = walks.walk_moments(g, [], 3)
    assert m.ez == 0 and m.ez2 == 0
    bad = g.edges[:2]
    m = walks.walk_moments(g, bad, 1)
    assert m.ez == pytest.approx(2 / len(g.edges))
    assert m.ez2 == pytest.approx(m.ez)


def enumerated_pairwise(g, bad, t):
    ws = all_walks(g.adjacency, t)
    table = np.zeros((t, t))
    for w in ws:
        z = np.array([e in bad for e in walk_edges(w)], dtype=float)
        table += np.outer(z, z)
    return table / len(ws)


def test_c4_moments_table():
    g = walks.cycle_graph(4)
    table = enumerated_pairwise(g, {(0, 1)}, 3)
    for cap in (10**6, 1):  # enumeration path and Markov chain path
        m = walks.walk_moments(g, [(0, 1)], 3, cap=cap)
        assert np.allclose(m.pairwise, table, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(data=st.data(), t=st.integers(1, 5), which=st.sampled_from(["k4", "prism", "cycle5"]))
def test_markov_moments_match_enumeration(data, t, which):
    g = walks.named_graph(which)
    bad = set(data.draw(st.lists(st.sampled_from(g.edges), unique=True)))
    enum = walks.walk_moments(g, bad, t)
    dp = walks.walk_moments(g, bad, t, cap=0)
    assert enum.exact_enumeration and not dp.exact_enumeration
    assert np.allclose(enum.pairwise, dp.pairwise, atol=1e-12)
    assert enum.prob_positive == pytest.approx(dp.prob_positive, abs=1e-12)
    frac = len(bad) / len(g.edges)
    assert np.allclose(np.diag(dp.pairwise), frac, atol=1e-12)
    lam = walks.spectral(g).lam
    for i, j in itertools.product(range(t), repeat=2):
        if i > j:
            assert dp.pairwise[i, j] <= frac * (frac + lam ** (i - j - 1)) + 1e-10
    if enum.ez2 > 0:
        assert enum.prob_positive >= enum.ez**2 / enum.ez2 - 1e-12


def test_named_graphs():
    assert walks.named_graph("k4").n == 4
    assert len(walks.named_graph("prism").edges) == 9
    assert walks.named_graph("cycle7").degree == 2
    assert walks.named_graph("k5").degree == 4
    with pytest.raises(ValueError):
        walks.named_graph("petersen")


def test_graph_io_round_trip(tmp_path):
    g = walks.random_regular(10, 3, seed=1)
    path = tmp_path / "g.json"
    walks.write_graph(g, path)
    assert walks.read_graph(path).edges == g.edges
    text = tmp_path / "g.txt"
    text.write_text("# triangle\n0 1\n1 2\n2 0  # closing edge\n")
    tri = walks.read_graph(text)
    assert tri.n == 3 and len(tri.edges) == 3


def test_graph_parse_errors():
    with pytest.raises(ParseError, match="line 2"):
        walks.parse_edge_list("0 1\n1 x\n")
    with pytest.raises(ParseError, match=r"\$\.edges\[1\]"):
        walks.graph_from_dict({"n": 3, "edges": [[0, 1], [1]]})
