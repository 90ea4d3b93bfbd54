import pytest

from privavg.engine import trace_csv_lines
from privavg.experiments import (
    ConfigError,
    REFERENCE_STATE_VECTOR,
    TrialConfig,
    emit_round_metrics,
    parse_config,
    run_batch,
    run_single_trial,
    series_csv_lines,
    trials_csv_lines,
)
from privavg.graph import digraph_from_edges, save_edge_list
from privavg.schedule import NodeRole


@pytest.fixture
def two_node_graph_file(tmp_path):
    g = digraph_from_edges(2, [(0, 1), (1, 0)])
    path = tmp_path / "pair.txt"
    save_edge_list(g, path)
    return str(path)


def pair_config(graph_file, **kw):
    defaults = dict(
        seed=1,
        trials=1,
        graph_file=graph_file,
        states=(4, 6),
        roles=(NodeRole.NEUTRAL, NodeRole.NEUTRAL),
    )
    defaults.update(kw)
    return TrialConfig(**defaults)


class TestConfigParsing:
    def test_full_round_trip(self):
        text = """
        # reproduction scenario
        seed = 7
        trials = 4
        n = 20
        p = 0.1
        states = {}
        offset_bound = 100
        """.format(",".join(map(str, REFERENCE_STATE_VECTOR)))
        cfg = parse_config(text)
        assert cfg.seed == 7 and cfg.trials == 4
        assert cfg.n == 20 and cfg.p == 0.1
        assert cfg.states == REFERENCE_STATE_VECTOR

    def test_roles_and_range(self):
        cfg = parse_config("n = 3\np = 0.9\nroles = private,curious,neutral\nstates_range = -5,5\n")
        assert cfg.roles == (NodeRole.PRIVATE, NodeRole.CURIOUS, NodeRole.NEUTRAL)
        assert cfg.states_range == (-5, 5)

    @pytest.mark.parametrize(
        "text",
        [
            "nope = 1\n",                      # unknown key
            "n = 3\np = 0.5\n",                # no states source
            "n = 3\np = 0.5\nstates_range = 5,-5\n",
            "n = 3\np = 0.5\nstates = 1,2\nstates_range = 0,0\nn = 4\n",  # dup key
            "p = 0.5\nstates_range = 0,1\n",   # no graph source
            "n = 3\np = 0.5\nstates = 1,2,3\nprivate_fraction = 0.9\ncurious_fraction = 0.9\n",
            "n = 3\np = 0.5\nstates = a,b,c\n",
            "n = 3\np = 0.5\nstates = 1,2,3\nroles = wizard,curious,neutral\n",
        ],
    )
    def test_rejections(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)


class TestSingleTrial:
    def test_deterministic_replay(self, two_node_graph_file):
        cfg = pair_config(two_node_graph_file)
        a = run_single_trial(cfg, 0, keep_trace=True)
        b = run_single_trial(cfg, 0, keep_trace=True)
        assert a.report == b.report
        assert trace_csv_lines(a.trace) == trace_csv_lines(b.trace)

    def test_two_node_series_shape(self, two_node_graph_file):
        cfg = pair_config(two_node_graph_file)
        result = run_single_trial(cfg, 0)
        q = result.report.quiescence_round
        window = 5 * 2
        assert len(result.series) == q + window
        converged_at = [row.round for row in result.series if row.converged_nodes == 2]
        assert min(converged_at) == 5

    def test_random_roles_partition(self):
        cfg = TrialConfig(
            seed=3, trials=1, n=6, p=0.6, states_range=(-5, 5),
            private_fraction=0.5, curious_fraction=0.3,
        )
        result = run_single_trial(cfg, 0)
        assert result.roles.count(NodeRole.PRIVATE) == 3
        assert result.roles.count(NodeRole.CURIOUS) == 2
        assert result.roles.count(NodeRole.NEUTRAL) == 1


class TestBatch:
    def test_reference_vector_average_is_exact_per_trial(self):
        cfg = TrialConfig(seed=5, trials=6, n=20, p=0.3, states=REFERENCE_STATE_VECTOR)
        summary = run_batch(cfg)
        assert not summary.failed
        for r in summary.results:
            assert (r.report.q_num, r.report.q_den) == (67, 5)  # 268/20 reduced
            assert r.report.exactness_ok

    def test_batch_csvs_deterministic(self, two_node_graph_file, tmp_path):
        cfg = pair_config(two_node_graph_file, trials=3)
        first = run_batch(cfg)
        second = run_batch(cfg)
        assert trials_csv_lines(first) == trials_csv_lines(second)
        assert series_csv_lines(first) == series_csv_lines(second)

    def test_emit_round_metrics_files(self, two_node_graph_file, tmp_path):
        cfg = pair_config(two_node_graph_file, trials=2)
        summary = run_batch(cfg)
        trials_path, series_path = emit_round_metrics(summary, tmp_path / "out")
        trials = trials_path.read_text().splitlines()
        series = series_path.read_text().splitlines()
        assert trials[0].startswith("trial,seed,n,m,dmax,convergence_round")
        assert len(trials) == 3
        assert series[0].startswith("round,avg_broadcasts")
        # converged fraction hits 1.0 at round 5 on the pair fixture
        round5 = series[6].split(",")
        assert round5[0] == "5" and round5[4] == "1.000000"

    def test_transmitting_nodes_bounded_by_n(self):
        cfg = TrialConfig(seed=9, trials=3, n=5, p=0.6, states_range=(-9, 9))
        summary = run_batch(cfg)
        for r in summary.results:
            assert all(row.transmitting_nodes <= 5 for row in r.series)

    def test_tail_of_average_series_decays_to_zero(self):
        cfg = TrialConfig(seed=2, trials=4, n=6, p=0.5, states_range=(-20, 20))
        summary = run_batch(cfg)
        tail = summary.series_avg[-3:]
        assert all(row[3] == 0.0 for row in tail)
        assert summary.series_avg[-1][3] == 0.0

    def test_empty_batch_refused(self, two_node_graph_file, tmp_path):
        cfg = pair_config(two_node_graph_file)
        summary = run_batch(cfg)
        summary.results = []
        with pytest.raises(ValueError):
            emit_round_metrics(summary, tmp_path)

    def test_failed_trial_marks_batch_with_seed(self, two_node_graph_file):
        cfg = pair_config(two_node_graph_file, max_rounds=2)
        summary = run_batch(cfg)
        assert summary.failed
        assert summary.failed_seeds == ["1:0"]

    def test_replay_from_recorded_seed_token(self):
        cfg = TrialConfig(seed=31, trials=4, n=6, p=0.5, states_range=(-50, 50))
        summary = run_batch(cfg)
        row = summary.results[2]
        master, index = row.seed.split(":")
        assert (int(master), int(index)) == (31, 2)
        again = run_single_trial(cfg, 2)
        assert again.report == row.report

    def test_parallel_jobs_match_serial(self, two_node_graph_file):
        cfg = pair_config(two_node_graph_file, trials=4)
        serial = run_batch(cfg, jobs=1)
        parallel = run_batch(cfg, jobs=2)
        assert trials_csv_lines(serial) == trials_csv_lines(parallel)
