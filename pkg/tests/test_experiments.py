"""Experiment-scenario tests: spatial machinery, presets, serialization."""

import json
import math
import statistics

import pytest

from tipleak.experiments import (
    GRID_CELLS,
    ExperimentResult,
    GridHeatmap,
    ResultRow,
    cell_index,
    cell_node_counts,
    exp_decentralized,
    exp_heatmap,
    exp_mitigations,
    exp_mixer,
    exp_realworld,
    exp_variance,
    heatmap_params,
    layout_variance,
    load_region_counts,
    local_adversary_default,
    measure_cell_probability,
    pmap,
    regional_rates,
    simulate_mixer_chains,
)
from tipleak.network import ConfigError
from tipleak.results import (
    config_hash,
    format_value,
    result_to_csv_bytes,
    result_to_json_bytes,
    write_result,
)
from tipleak.rng import substream

PLANE = (10.0, 10.0)


def _grid_layout(n: int = 45) -> list:
    """n nodes spread evenly: cell centers repeated round-robin."""
    cells = []
    for idx in range(GRID_CELLS):
        row, col = divmod(idx, 3)
        cells.append(((col + 0.5) * 10 / 3, (row + 0.5) * 10 / 3))
    return [cells[i % GRID_CELLS] for i in range(n)]


# ---------------------------------------------------------------------------
# grid helpers
# ---------------------------------------------------------------------------

def test_cell_index_covers_grid_and_edges():
    assert cell_index(0.0, 0.0, PLANE) == 0
    assert cell_index(9.99, 0.0, PLANE) == 2
    assert cell_index(0.0, 9.99, PLANE) == 6
    assert cell_index(10.0, 10.0, PLANE) == 8  # boundary clamps inward
    assert cell_index(5.0, 5.0, PLANE) == 4


def test_cell_node_counts_against_scratch_binning():
    rng = substream(7, 1)
    positions = [(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(200)]
    counts = cell_node_counts(positions, PLANE)
    manual = [0] * GRID_CELLS
    for x, y in positions:
        manual[min(int(y / (10 / 3)), 2) * 3 + min(int(x / (10 / 3)), 2)] += 1
    assert counts == manual
    assert sum(counts) == 200


def test_layout_variance_zero_iff_uniform():
    assert layout_variance([5] * 9) == 0.0
    assert layout_variance([4, 5, 5, 5, 5, 5, 5, 5, 6]) > 0.0
    # mean squared deviation, computed by hand for a simple split
    assert layout_variance([9, 0, 0, 0, 0, 0, 0, 0, 0]) == pytest.approx(
        ((9 - 1) ** 2 + 8 * 1) / 9
    )


def test_local_adversary_default_by_placement():
    assert local_adversary_default("uniform_grid") is False
    assert local_adversary_default("uniform_random") is True
    assert local_adversary_default("clustered") is True


# ---------------------------------------------------------------------------
# cell probability machinery
# ---------------------------------------------------------------------------

def test_cell_probability_matches_share_on_even_layout():
    positions = _grid_layout(45)
    prob, eff = measure_cell_probability(
        positions, 9, 4, substream(3, 1), samples=4000
    )
    assert eff == 4000
    assert prob == pytest.approx(0.2, abs=0.03)  # 9 hostile of 45


def test_cell_probability_zero_without_adversaries():
    positions = _grid_layout(45)
    prob, _ = measure_cell_probability(
        positions, 0, 0, substream(3, 2), samples=300
    )
    assert prob == 0.0


def test_cell_probability_unreachable_cell():
    # all nodes in the far corner; radius too small to reach cell 0
    positions = [(9.5, 9.5)] * 5
    prob, eff = measure_cell_probability(
        positions, 1, 0, substream(3, 3), samples=100, radius=1.0
    )
    assert prob is None and eff == 0


def test_cell_probability_conditioning_inflates_sparse_cell():
    # one lone node in cell 0, the rest clumped in cell 8
    positions = [(1.5, 1.5)] + [(8.5, 8.5)] * 19
    base, _ = measure_cell_probability(
        positions, 2, 0, substream(3, 4), samples=2000, require_local_adversary=False
    )
    conditioned, _ = measure_cell_probability(
        positions, 2, 0, substream(3, 5), samples=2000, require_local_adversary=True
    )
    # conditioned: the lone local node is always hostile, so every sample
    # that only reaches it must follow it
    assert conditioned > base + 0.3


def test_cell_probability_conditioning_needs_adversaries():
    with pytest.raises(ConfigError):
        measure_cell_probability(
            _grid_layout(18), 0, 0, substream(3, 6),
            samples=10, require_local_adversary=True,
        )


# ---------------------------------------------------------------------------
# heatmap experiment
# ---------------------------------------------------------------------------

def test_heatmap_uniform_grid_stays_near_global_share():
    heatmap = exp_heatmap("uniform_grid", samples_per_cell=600, seed=11)
    assert heatmap.unreachable == []
    for prob in heatmap.probabilities:
        assert 0.05 <= prob <= 0.15
    assert max(heatmap.node_counts) - min(heatmap.node_counts) <= 1


def test_heatmap_zero_ratio_with_conditioning_off_is_flat_zero():
    heatmap = exp_heatmap(
        "uniform_grid", adversary_ratio=0.0, samples_per_cell=50,
        require_local_adversary=False, seed=11,
    )
    assert heatmap.probabilities == [0.0] * GRID_CELLS


def test_heatmap_zero_ratio_with_conditioning_raises():
    with pytest.raises(ConfigError):
        exp_heatmap(
            "uniform_random", adversary_ratio=0.0, samples_per_cell=10, seed=11
        )


def test_heatmap_clustered_sparse_exceeds_dense_mean():
    heatmap = exp_heatmap("clustered", samples_per_cell=600, seed=11)
    expected = 50 / GRID_CELLS
    sparse = [
        p for p, n in zip(heatmap.probabilities, heatmap.node_counts)
        if p is not None and n < expected
    ]
    dense = [
        p for p, n in zip(heatmap.probabilities, heatmap.node_counts)
        if p is not None and n >= expected
    ]
    assert sparse and dense
    assert max(sparse) > statistics.fmean(dense)


def test_heatmap_sample_doubling_consistent():
    first = exp_heatmap("uniform_random", samples_per_cell=500, seed=13)
    second = exp_heatmap(
        "uniform_random", samples_per_cell=1000, seed=13, layout_index=0
    )
    for cell in range(GRID_CELLS):
        p1, p2 = first.probabilities[cell], second.probabilities[cell]
        if p1 is None or p2 is None:
            assert p1 is None and p2 is None
            continue
        se = math.sqrt(
            p1 * (1 - p1) / first.sample_counts[cell]
            + p2 * (1 - p2) / second.sample_counts[cell]
        )
        assert abs(p1 - p2) < max(2 * se, 0.02)


def test_heatmap_layout_index_changes_layout_not_streams():
    a = exp_heatmap("uniform_random", samples_per_cell=100, seed=17, layout_index=0)
    b = exp_heatmap("uniform_random", samples_per_cell=100, seed=17, layout_index=1)
    assert a.positions != b.positions


def test_heatmap_workers_do_not_change_results():
    serial = exp_heatmap("clustered", samples_per_cell=200, seed=19, workers=1)
    parallel = exp_heatmap("clustered", samples_per_cell=200, seed=19, workers=4)
    assert serial.probabilities == parallel.probabilities
    assert serial.sample_counts == parallel.sample_counts


def test_heatmap_to_result_rows_are_finite_and_complete():
    heatmap = exp_heatmap("uniform_grid", samples_per_cell=100, seed=11)
    result = heatmap.to_result(heatmap_params("uniform_grid"), 11)
    probs = result.values("adversary_selection_probability")
    assert len(probs) == GRID_CELLS
    assert all(math.isfinite(v) for v in probs)
    assert len(result.values("node_count")) == GRID_CELLS


def test_grid_heatmap_rejects_bad_cells():
    with pytest.raises(ValueError):
        GridHeatmap("uniform_grid", [1.5] + [0.1] * 8, [10] * 9, [5] * 9, [])
    with pytest.raises(ValueError):
        GridHeatmap("uniform_grid", [0.1] * 9, [0] * 9, [5] * 9, [])


# ---------------------------------------------------------------------------
# variance experiment
# ---------------------------------------------------------------------------

def test_variance_study_rows_and_summary():
    result = exp_variance(runs=12, samples_per_cell=150, seed=23, workers=4)
    assert len(result.values("variance")) == 12
    assert len(result.values("min_cell_prob")) == 12
    rho = result.lookup("summary", "spearman_variance_min")
    assert -1.0 <= rho <= 1.0
    p_value = next(
        r.dispersion for r in result.rows if r.metric == "spearman_variance_min"
    )
    assert 0.0 <= p_value <= 1.0


def test_variance_zero_variance_grid_min_equals_max_near_share():
    result = exp_variance(
        runs=2, samples_per_cell=800, placement="uniform_grid", seed=23
    )
    for label in ("layout-000", "layout-001"):
        assert result.lookup(label, "variance") < 0.2
        min_prob = result.lookup(label, "min_cell_prob")
        max_prob = result.lookup(label, "max_cell_prob")
        assert min_prob == pytest.approx(0.1, abs=0.04)
        assert max_prob == pytest.approx(0.1, abs=0.04)


def test_variance_needs_two_runs():
    with pytest.raises(ConfigError):
        exp_variance(runs=1, samples_per_cell=10)


def test_variance_workers_do_not_change_results():
    serial = exp_variance(runs=6, samples_per_cell=100, seed=29, workers=1)
    parallel = exp_variance(runs=6, samples_per_cell=100, seed=29, workers=3)
    assert result_to_csv_bytes(serial) == result_to_csv_bytes(parallel)


# ---------------------------------------------------------------------------
# region snapshot experiment
# ---------------------------------------------------------------------------

def test_region_data_file_totals():
    counts = load_region_counts()
    assert sum(counts.values()) == 47
    assert counts == {
        "africa": 1, "asia": 6, "europe": 31,
        "north_america": 8, "south_america": 1,
    }


def test_regional_rates_single_hostile_node():
    counts = load_region_counts()
    rates = regional_rates(counts, {"south_america": 1})
    assert rates["south_america"] == 1.0
    assert rates["europe"] == 0.0
    rates = regional_rates(counts, {"europe": 1})
    assert rates["europe"] == pytest.approx(1 / 31)


def test_realworld_single_adversary_is_exhaustive():
    result = exp_realworld(samples=100, max_adversaries=1, seed=31)
    assert result.lookup("adversaries-01", "subsets") == 47
    # equal region weights: 1 hostile node in south_america dominates
    assert result.lookup("adversaries-01", "max") == pytest.approx(1 / 5)
    assert result.lookup("adversaries-01", "min") == pytest.approx(1 / 31 / 5)


def test_realworld_everyone_hostile_rate_one():
    result = exp_realworld(samples=5, max_adversaries=47, seed=31)
    assert result.lookup("adversaries-47", "min") == pytest.approx(1.0)
    assert result.lookup("adversaries-47", "max") == pytest.approx(1.0)


def test_realworld_quartiles_ordered_and_counts_monotone():
    result = exp_realworld(samples=60, max_adversaries=8, seed=31)
    medians = []
    for count in range(1, 9):
        label = f"adversaries-{count:02d}"
        stats = [result.lookup(label, m) for m in ("min", "q1", "median", "q3", "max")]
        assert stats == sorted(stats)
        medians.append(stats[2])
    assert medians[-1] > medians[0]  # more hostile nodes, higher rates


def test_realworld_region_weights_shift_the_rate():
    eu_only = exp_realworld(
        samples=10, max_adversaries=1, seed=31,
        region_weights={
            "africa": 0, "asia": 0, "europe": 1,
            "north_america": 0, "south_america": 0,
        },
    )
    assert eu_only.lookup("adversaries-01", "max") == pytest.approx(1 / 31)


def test_realworld_rejects_bad_inputs(tmp_path):
    with pytest.raises(ConfigError):
        exp_realworld(samples=0)
    with pytest.raises(ConfigError):
        exp_realworld(max_adversaries=48)
    bad = tmp_path / "regions.json"
    bad.write_text(json.dumps({"regions": {}}))
    with pytest.raises(ConfigError):
        exp_realworld(data_path=bad)
    bad.write_text(json.dumps({"regions": {"europe": -3}}))
    with pytest.raises(ConfigError):
        exp_realworld(data_path=bad)


def test_realworld_equivalence_of_regional_shares():
    counts = load_region_counts()
    four_eu = regional_rates(counts, {"europe": 4})["europe"]
    one_na = regional_rates(counts, {"north_america": 1})["north_america"]
    assert abs(four_eu - one_na) < 0.0041


# ---------------------------------------------------------------------------
# link-rate sweeps
# ---------------------------------------------------------------------------

def test_decentralized_analytic_columns_exact():
    result = exp_decentralized(light_nodes=20, rounds=10, seed=37)
    for n in (50, 100, 200):
        assert result.lookup(f"N-{n}", "analytic") == pytest.approx(0.1)
    for m in (1, 3, 5):
        assert result.lookup(f"M-{m}", "analytic") == pytest.approx(0.1)
    for ratio in (0.05, 0.1, 0.2, 0.33):
        assert result.lookup(f"p-{ratio:g}", "analytic") == pytest.approx(ratio)


def test_decentralized_empirical_tracks_analytic():
    result = exp_decentralized(light_nodes=50, rounds=60, seed=37, workers=4)
    for row in result.rows:
        if row.metric != "empirical":
            continue
        analytic = result.lookup(row.label, "analytic")
        assert row.value == pytest.approx(analytic, abs=0.025)
    assert result.lookup("N-sweep", "empirical_spread") < 0.05
    assert result.lookup("M-sweep", "empirical_spread") < 0.05


# ---------------------------------------------------------------------------
# mixer experiment
# ---------------------------------------------------------------------------

def test_mixer_chain_lengths_all_one_when_nothing_revealed():
    lengths = simulate_mixer_chains(0.0, 500, substream(41, 1))
    assert set(lengths) == {1}


def test_mixer_chain_survival_matches_closed_form():
    lengths = simulate_mixer_chains(0.5, 40_000, substream(41, 2))
    n = len(lengths)
    for x in (1, 2, 3, 4):
        want = 0.25 ** (x - 1)
        got = sum(1 for length in lengths if length >= x) / n
        se = math.sqrt(want * (1 - want) / n) or 1e-9
        assert abs(got - want) < 4 * se


def test_mixer_experiment_table():
    result = exp_mixer(p_values=(0.1,), max_chain=4, participants=30_000, seed=41)
    assert result.lookup("p-0.1", "expected_raw") == pytest.approx(1.0203040506, abs=1e-9)
    assert result.lookup("p-0.1", "expected_normalized") == pytest.approx(
        1.0101010101, abs=1e-9
    )
    assert result.lookup("p-0.1-x-1", "chain_prob_empirical") == 1.0
    assert result.lookup("p-0.1-x-2", "chain_prob_analytic") == pytest.approx(0.01)
    mean_len = result.lookup("p-0.1", "mean_chain_length")
    assert mean_len == pytest.approx(1 / (1 - 0.01), abs=0.005)


def test_mixer_rejects_bad_probability():
    with pytest.raises(ConfigError):
        simulate_mixer_chains(1.0, 10, substream(41, 3))


# ---------------------------------------------------------------------------
# mitigation comparison
# ---------------------------------------------------------------------------

def test_mitigations_table_shape_and_nulls():
    result = exp_mitigations(
        baseline_rounds=40, scaling_rounds=20, light_nodes=30,
        proxy_light_nodes=4, seed=43,
    )
    assert result.lookup("scaling", "required_full_nodes") == 1001
    assert result.lookup("direct", "link_rate") == 0.0
    assert result.lookup("direct", "correct_link_rate") == 0.0
    assert result.lookup("proxy", "links_to_proxies_only") == 1.0
    assert result.lookup("proxy", "anonymity_degree") == pytest.approx(1.0, abs=1e-9)
    baseline = result.lookup("baseline", "link_rate")
    assert baseline == pytest.approx(0.1, abs=0.04)
    assert result.lookup("baseline", "anonymity_degree") == 0.0


# ---------------------------------------------------------------------------
# result containers and serialization
# ---------------------------------------------------------------------------

def test_result_rows_reject_non_finite():
    with pytest.raises(ValueError):
        ResultRow("a", "b", float("nan"))
    with pytest.raises(ValueError):
        ResultRow("a", "b", 1.0, float("inf"))
    result = ExperimentResult("demo", {}, 1)
    with pytest.raises(ValueError):
        result.add("a", "b", float("inf"))


def test_format_value_nine_significant_digits():
    assert format_value(0.1) == "0.1"
    assert format_value(1 / 3) == "0.333333333"
    assert format_value(1.0203040506) == "1.02030405"
    assert format_value(12345) == "12345"
    assert format_value(None) == ""


def test_config_hash_is_order_insensitive_and_value_sensitive():
    a = config_hash({"x": 1, "y": 2})
    b = config_hash({"y": 2, "x": 1})
    c = config_hash({"x": 1, "y": 3})
    assert a == b != c
    assert len(a) == 16


def test_csv_bytes_embed_header_and_metadata():
    result = ExperimentResult("demo", {"k": 1}, 77)
    result.add("row", "metric", 0.5, 0.01)
    text = result_to_csv_bytes(result).decode()
    lines = text.splitlines()
    assert lines[0] == "# seed=77"
    assert lines[1].startswith("# config_hash=")
    assert lines[2] == "# version=0.1.0"
    assert lines[3] == "label,metric,value,dispersion"
    assert lines[4] == "row,metric,0.5,0.01"
    assert text.endswith("\n")


def test_json_bytes_roundtrip():
    result = ExperimentResult("demo", {"k": 1}, 77)
    result.add("row", "metric", 0.5)
    doc = json.loads(result_to_json_bytes(result))
    assert doc["experiment"] == "demo"
    assert doc["seed"] == 77
    assert doc["rows"][0] == {
        "label": "row", "metric": "metric", "value": 0.5, "dispersion": None,
    }


def test_write_result_atomic_and_named(tmp_path):
    result = ExperimentResult("demo", {"k": 1}, 9)
    result.add("row", "metric", 1.25)
    path = write_result(result, tmp_path, "csv")
    assert path.name == "demo_9.csv"
    assert not list(tmp_path.glob(".demo_9.csv.*"))  # no temp litter
    again = write_result(result, tmp_path, "csv")
    assert again.read_bytes() == path.read_bytes()
    json_path = write_result(result, tmp_path, "structured")
    assert json_path.name == "demo_9.json"


def test_pmap_preserves_order_and_matches_serial():
    jobs = list(range(20))
    assert pmap(_square, jobs, workers=1) == [j * j for j in jobs]
    assert pmap(_square, jobs, workers=3) == [j * j for j in jobs]


def _square(x: int) -> int:
    return x * x
