import random

import pytest

from maskdiff import (
    BlockLayout,
    ConfigError,
    DeterministicRng,
    FeasibleGraph,
    SchedulerConfig,
    Vocabulary,
    build_feasible_graph,
    check_lemma,
    decode_freedave,
    decode_static,
    greedy_verifier_path,
    make_table_predictor,
    make_uniform_schedule,
    optimal_path,
)
from support import sample_setup

RNG = DeterministicRng(0)


def greedy_cfg(block_size):
    return SchedulerConfig(kind="greedy", layout=BlockLayout(block_size))


def toy_graph(num_steps, edges):
    return FeasibleGraph(
        num_steps=num_steps,
        edges=frozenset(edges),
        oracle_states=(),
        oracle_decisions=(),
        direct_decisions={},
    )


def enumerate_paths(num_steps, edges):
    """Exhaustive DFS over all 0 -> N edge paths; the brute-force oracle."""
    paths = []

    def walk(node, acc):
        if node == num_steps:
            paths.append(tuple(acc))
            return
        for j in range(node + 1, num_steps + 1):
            if (node, j) in edges:
                walk(j, acc + [j])

    walk(0, [0])
    return paths


class TestBuildFeasibleGraph:
    def test_context_free_gives_complete_dag(self):
        for length in (4, 7, 10):
            vocab = Vocabulary.simple(5)
            pred = make_table_predictor([p % 5 for p in range(length)], vocab)
            sched = make_uniform_schedule(length, length)
            graph = build_feasible_graph(pred, greedy_cfg(length), sched, length, RNG)
            expected = {(i, j) for i in range(length) for j in range(i + 1, length + 1)}
            assert graph.edges == frozenset(expected)

    def test_single_step_edges_always_present(self):
        rnd = random.Random(3)
        for _ in range(10):
            setup = sample_setup(rnd, max_length=10, max_steps=10)
            graph = build_feasible_graph(
                setup.predictor, setup.cfg, setup.schedule, setup.length, setup.rng
            )
            for i in range(graph.num_steps):
                assert graph.has_edge(i, i + 1)

    def test_adversarial_sigma_one_breaks_a_two_step_edge(self):
        # frozen seed from a bounded search
        vocab = Vocabulary.simple(8)
        target = [(0 + 2 * p) % 8 for p in range(8)]
        pred = make_table_predictor(target, vocab, sensitivity=1.0, seed=0)
        sched = make_uniform_schedule(8, 8)
        graph = build_feasible_graph(pred, greedy_cfg(8), sched, 8, DeterministicRng(0))
        assert not graph.has_edge(0, 2)

    def test_oracle_decisions_match_static_decode(self):
        vocab = Vocabulary.simple(6)
        pred = make_table_predictor([1, 4, 2, 5, 0, 3], vocab, sensitivity=0.5, seed=8)
        sched = make_uniform_schedule(6, 6)
        graph = build_feasible_graph(pred, greedy_cfg(3), sched, 6, RNG)
        static = decode_static(
            make_table_predictor([1, 4, 2, 5, 0, 3], vocab, sensitivity=0.5, seed=8),
            greedy_cfg(3),
            sched,
            6,
            RNG,
        )
        assert graph.oracle_decisions == static.path
        assert graph.oracle_states[-1].tokens == static.tokens

    def test_cap_enforced(self):
        vocab = Vocabulary.simple(3)
        pred = make_table_predictor([0] * 20, vocab)
        sched = make_uniform_schedule(20, 20)
        with pytest.raises(ConfigError):
            build_feasible_graph(pred, greedy_cfg(20), sched, 20, RNG)
        graph = build_feasible_graph(pred, greedy_cfg(20), sched, 20, RNG, max_steps=20)
        assert graph.num_steps == 20


class TestOptimalPath:
    def test_complete_dag_is_one_jump(self):
        edges = {(i, j) for i in range(8) for j in range(i + 1, 9)}
        path = optimal_path(toy_graph(8, edges))
        assert path.cut_points == (0, 8)
        assert path.num_jumps == 1
        assert path.max_span == 8

    def test_single_step_only_graph(self):
        edges = {(i, i + 1) for i in range(8)}
        path = optimal_path(toy_graph(8, edges))
        assert path.cut_points == tuple(range(9))
        assert path.max_span == 1

    def test_hand_built_graph_against_exhaustive_enumeration(self):
        edges = {(0, 2), (2, 3), (0, 1), (1, 2), (1, 3)}
        graph = toy_graph(3, edges)
        all_paths = enumerate_paths(3, edges)
        best = min(len(p) - 1 for p in all_paths)
        assert best == 2
        path = optimal_path(graph)
        assert path.num_jumps == 2
        assert path.cut_points in {(0, 1, 3), (0, 2, 3)}
        # longest-first tie-break picks the farther first hop
        assert path.cut_points == (0, 2, 3)

    def test_optimal_never_longer_than_any_enumerated_path(self):
        rnd = random.Random(11)
        for _ in range(30):
            num_steps = rnd.randint(2, 7)
            edges = {(i, i + 1) for i in range(num_steps)}
            for i in range(num_steps):
                for j in range(i + 2, num_steps + 1):
                    if rnd.random() < 0.4:
                        edges.add((i, j))
            graph = toy_graph(num_steps, edges)
            best = min(len(p) - 1 for p in enumerate_paths(num_steps, edges))
            assert optimal_path(graph).num_jumps == best


class TestGreedyVerifierPath:
    def test_d1_walks_the_oracle_path(self):
        vocab = Vocabulary.simple(5)
        pred = make_table_predictor([p % 5 for p in range(6)], vocab, 0.5, seed=1)
        sched = make_uniform_schedule(6, 6)
        graph = build_feasible_graph(pred, greedy_cfg(6), sched, 6, RNG)
        path = greedy_verifier_path(graph, 1)
        assert path.cut_points == tuple(range(7))

    def test_complete_graph_with_large_budget_is_one_round(self):
        vocab = Vocabulary.simple(5)
        length = 9
        pred = make_table_predictor([p % 5 for p in range(length)], vocab)
        sched = make_uniform_schedule(length, length)
        graph = build_feasible_graph(pred, greedy_cfg(length), sched, length, RNG)
        path = greedy_verifier_path(graph, length + 1)
        assert path.cut_points == (0, length)

    def test_budget_caps_each_advance(self):
        vocab = Vocabulary.simple(5)
        length = 9
        pred = make_table_predictor([p % 5 for p in range(length)], vocab)
        sched = make_uniform_schedule(length, length)
        graph = build_feasible_graph(pred, greedy_cfg(length), sched, length, RNG)
        path = greedy_verifier_path(graph, 4)
        assert path.max_span <= 4
        assert path.cut_points == (0, 4, 8, 9)

    def test_matches_live_decoder_accepted_steps(self):
        rnd = random.Random(2)
        for _ in range(25):
            setup = sample_setup(rnd, max_length=12, max_steps=12)
            d = rnd.choice([1, 2, 4, 8])
            graph = build_feasible_graph(
                setup.predictor, setup.cfg, setup.schedule, setup.length, setup.rng
            )
            path = greedy_verifier_path(graph, d)
            fd = decode_freedave(
                setup.fresh_predictor(), setup.cfg, setup.schedule, setup.length, d, setup.rng
            )
            accepted = tuple(r.accepted_step for r in fd.rounds)
            assert path.cut_points == (0, *accepted), setup.label
            assert len(fd.rounds) == path.num_jumps

    def test_result_is_always_an_edge_path(self):
        rnd = random.Random(9)
        for _ in range(25):
            setup = sample_setup(rnd, max_length=10, max_steps=10)
            graph = build_feasible_graph(
                setup.predictor, setup.cfg, setup.schedule, setup.length, setup.rng
            )
            for d in (1, 2, 3, setup.length):
                path = greedy_verifier_path(graph, d)
                for a, b in zip(path.cut_points, path.cut_points[1:]):
                    assert graph.has_edge(a, b)


class TestCheckLemma:
    def test_context_free_agrees(self):
        vocab = Vocabulary.simple(4)
        length = 8
        pred = make_table_predictor([p % 4 for p in range(length)], vocab)
        sched = make_uniform_schedule(length, length)
        report = check_lemma(pred, greedy_cfg(length), sched, length, RNG)
        assert report.agree
        assert report.optimal.num_jumps == 1
        assert report.max_span == length

    def test_single_step_only_graph_agrees(self):
        # sigma=1 with a seed whose graph is exactly the oracle chain
        vocab = Vocabulary.simple(8)
        for seed in range(30):
            target = [(seed + 3 * p) % 8 for p in range(7)]
            pred = make_table_predictor(target, vocab, sensitivity=1.0, seed=seed)
            sched = make_uniform_schedule(7, 7)
            graph = build_feasible_graph(pred, greedy_cfg(7), sched, 7, DeterministicRng(seed))
            if len(graph.edges) == 7:
                report = check_lemma(
                    make_table_predictor(target, vocab, sensitivity=1.0, seed=seed),
                    greedy_cfg(7),
                    sched,
                    7,
                    DeterministicRng(seed),
                )
                assert report.agree
                assert report.optimal.num_jumps == 7
                return
        pytest.fail("no single-step-only graph found in the seed range")

    def test_disagreement_produces_structured_counterexample(self):
        # frozen instance dissected during development: the full-span jump is
        # feasible by token coincidence but is not chain-decomposable
        vocab = Vocabulary.simple(11)
        target = [3, 7, 1, 9, 0, 4, 2, 8]
        pred = make_table_predictor(target, vocab, sensitivity=0.25, seed=555)
        sched = make_uniform_schedule(8, 8)
        report = check_lemma(pred, greedy_cfg(8), sched, 8, DeterministicRng(555))
        assert not report.agree
        assert report.optimal.num_jumps == 1
        assert report.counterexample is not None
        assert report.counterexample["optimal_cut_points"] == [0, 8]
        assert [0, 8] in [list(e) for e in report.counterexample["edges"]]

    def test_report_payload_serializable(self):
        import json

        vocab = Vocabulary.simple(4)
        pred = make_table_predictor([0, 1, 2, 3], vocab, sensitivity=0.5, seed=2)
        sched = make_uniform_schedule(4, 4)
        report = check_lemma(pred, greedy_cfg(2), sched, 4, RNG)
        payload = json.dumps(report.to_payload())
        assert "optimal_cut_points" in payload
