import random

import pytest
from hypothesis import given, settings, strategies as st

from privavg.graph import (
    Digraph,
    GraphGenerationError,
    assign_edge_order,
    digraph_from_edges,
    format_edge_list,
    generate_random_strongly_connected,
    is_strongly_connected,
    max_out_degree,
    parse_edge_list,
)


def cycle3():
    # v0 -> v1 -> v2 -> v0, stored as (receiver, sender)
    return digraph_from_edges(3, [(1, 0), (2, 1), (0, 2)])


def brute_force_strongly_connected(g: Digraph) -> bool:
    """Independent oracle: transitive closure by repeated squaring of reachability."""
    reach = [[False] * g.n for _ in range(g.n)]
    for j in range(g.n):
        reach[j][j] = True
    for dst, src in g.edges:
        reach[src][dst] = True
    for _ in range(g.n):
        for a in range(g.n):
            for b in range(g.n):
                if not reach[a][b]:
                    reach[a][b] = any(reach[a][c] and reach[c][b] for c in range(g.n))
    return all(reach[a][b] for a in range(g.n) for b in range(g.n))


class TestStrongConnectivity:
    def test_directed_cycle_is_strongly_connected(self):
        assert is_strongly_connected(cycle3())

    def test_directed_path_is_not(self):
        g = digraph_from_edges(3, [(1, 0), (2, 1)])
        assert not is_strongly_connected(g)

    def test_complete_bidirectional_four_nodes(self):
        edges = [(a, b) for a in range(4) for b in range(4) if a != b]
        assert is_strongly_connected(digraph_from_edges(4, edges))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(3, 8), st.floats(0.15, 0.9))
    def test_matches_brute_force_oracle_on_random_digraphs(self, seed, n, p):
        rng = random.Random(seed)
        edges = [
            (j, i) for i in range(n) for j in range(n) if i != j and rng.random() < p
        ]
        g = digraph_from_edges(n, edges)
        assert is_strongly_connected(g) == brute_force_strongly_connected(g)


class TestMaxOutDegree:
    def test_cycle(self):
        assert max_out_degree(cycle3()) == 1

    def test_two_node_bidirectional(self):
        g = digraph_from_edges(2, [(0, 1), (1, 0)])
        assert max_out_degree(g) == 1

    def test_star_center_dominates(self):
        # center 0 sends to 5 leaves, each leaf sends back
        edges = [(leaf, 0) for leaf in range(1, 6)] + [(0, leaf) for leaf in range(1, 6)]
        assert max_out_degree(digraph_from_edges(6, edges)) == 5


class TestGeneration:
    def test_p_one_forces_all_edges(self):
        g = generate_random_strongly_connected(2, 1.0, random.Random(99))
        assert g.edges == frozenset({(0, 1), (1, 0)})

    def test_deterministic_under_seed(self):
        a = generate_random_strongly_connected(20, 0.3, random.Random(7))
        b = generate_random_strongly_connected(20, 0.3, random.Random(7))
        assert a == b

    def test_output_passes_connectivity_oracle(self):
        g = generate_random_strongly_connected(5, 0.4, random.Random(3))
        assert is_strongly_connected(g)
        assert brute_force_strongly_connected(g)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 12), st.floats(0.25, 1.0))
    def test_generation_invariants(self, seed, n, p):
        g = generate_random_strongly_connected(n, p, random.Random(seed))
        assert is_strongly_connected(g)
        for j in range(g.n):
            order = g.out_order[j]
            assert sorted(order) == sorted({dst for dst, src in g.edges if src == j})

    def test_retry_budget_exhaustion(self):
        with pytest.raises(GraphGenerationError):
            generate_random_strongly_connected(
                12, 0.01, random.Random(0), max_attempts=50
            )

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            generate_random_strongly_connected(1, 0.5, random.Random(0))
        with pytest.raises(ValueError):
            generate_random_strongly_connected(4, 0.0, random.Random(0))
        with pytest.raises(ValueError):
            generate_random_strongly_connected(4, 1.5, random.Random(0))


class TestEdgeOrder:
    def test_single_out_neighbor_gets_rank_zero(self):
        g = assign_edge_order(cycle3(), random.Random(5))
        assert g.out_order[0] == (1,)

    def test_three_out_neighbors_get_permutation(self):
        edges = [(1, 0), (2, 0), (3, 0), (0, 1), (0, 2), (0, 3)]
        g = assign_edge_order(digraph_from_edges(4, edges), random.Random(2))
        assert sorted(g.out_order[0]) == [1, 2, 3]

    def test_deterministic_under_seed(self):
        edges = [(j, i) for i in range(5) for j in range(5) if i != j]
        base = digraph_from_edges(5, edges)
        assert assign_edge_order(base, random.Random(4)) == assign_edge_order(
            base, random.Random(4)
        )


class TestDigraphValidation:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            digraph_from_edges(2, [(0, 0), (1, 0), (0, 1)])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            digraph_from_edges(2, [(0, 1), (2, 0)])

    def test_rejects_bad_out_order(self):
        with pytest.raises(ValueError):
            Digraph(2, frozenset({(0, 1), (1, 0)}), ((1,), (1,)))

    def test_in_neighbors(self):
        g = cycle3()
        assert g.in_neighbors(1) == (0,)
        assert g.out_neighbors(1) == (2,)


class TestEdgeListFormat:
    def test_round_trip(self):
        g = generate_random_strongly_connected(6, 0.5, random.Random(11))
        parsed = parse_edge_list(format_edge_list(g))
        assert parsed.n == g.n and parsed.edges == g.edges

    def test_header_and_direction(self):
        text = format_edge_list(cycle3())
        assert text.splitlines()[0] == "3 3"
        assert "0 1" in text  # sender 0 -> receiver 1

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "2\n0 1\n",            # malformed header
            "2 2\n0 1\n",          # wrong edge count
            "2 1\n0 0\n",          # self-loop
            "2 2\n0 1\n0 1\n",     # duplicate
            "2 1\n0 5\n",          # out of range
            "2 1\nx y\n",          # non-integer
        ],
    )
    def test_loader_rejects_malformed(self, text):
        with pytest.raises(ValueError):
            parse_edge_list(text)
