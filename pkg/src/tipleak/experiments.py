"""Preset experiment scenarios built on the analytic and simulation layers.

Each ``exp_*`` function runs one reproducible study and returns an
:class:`ExperimentResult` table: parameter sweeps of the link-rate identity,
the 2020 region-snapshot study, spatial heatmaps of adversary selection,
the layout-variance trend, mixer chain identification, and a comparison of
the candidate mitigations.  Every draw comes from a substream keyed on
(seed, experiment, unit), so results are byte-identical for a fixed seed
regardless of worker count.
"""

from __future__ import annotations

import itertools
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

from scipy import stats as _scipy_stats

from .analytic import (
    deanon_probability,
    mixer_chain_probability,
    mixer_expected_identified,
    required_full_nodes,
)
from .network import (
    GRID_DIM,
    ConfigError,
    SimConfig,
    place_nodes,
    run_simulation,
)
from .rng import DOMAIN_EXPERIMENT, substream

DEFAULT_SEED = 42
GRID_CELLS = GRID_DIM * GRID_DIM
REGION_DATA_FILE = "fullnode_regions_2020.json"

# substream tags, one per experiment family
_TAG_DECENTRALIZED = 1
_TAG_REALWORLD = 2
_TAG_HEATMAP = 3
_TAG_VARIANCE = 4
_TAG_MIXER = 5
_TAG_MITIGATIONS = 6


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    """One measured value: a (label, metric) cell plus optional spread."""

    label: str
    metric: str
    value: float
    dispersion: float | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.label}/{self.metric}")
        if self.dispersion is not None and not math.isfinite(self.dispersion):
            raise ValueError(f"non-finite dispersion for {self.label}/{self.metric}")


@dataclass
class ExperimentResult:
    """Named experiment output: parameter echo plus rows of measurements."""

    name: str
    params: dict
    seed: int
    rows: list[ResultRow] = field(default_factory=list)

    def add(self, label: str, metric: str, value: float,
            dispersion: float | None = None) -> None:
        self.rows.append(ResultRow(label, metric, float(value), dispersion))

    def values(self, metric: str) -> list[float]:
        return [r.value for r in self.rows if r.metric == metric]

    def lookup(self, label: str, metric: str) -> float:
        for row in self.rows:
            if row.label == label and row.metric == metric:
                return row.value
        raise KeyError(f"no row {label!r}/{metric!r}")


@dataclass
class GridHeatmap:
    """3x3 grid of adversary-selection probabilities over the plane.

    ``probabilities[cell]`` is None when no sample point in that cell could
    reach any full node, in which case the cell is listed in ``unreachable``.
    """

    placement: str
    probabilities: list[float | None]
    sample_counts: list[int]
    node_counts: list[int]
    positions: list[tuple[float, float]]

    def __post_init__(self) -> None:
        for prob, eff in zip(self.probabilities, self.sample_counts):
            if prob is None:
                continue
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"cell probability {prob} outside [0, 1]")
            if eff <= 0:
                raise ValueError("reachable cell must have sample_count > 0")

    @property
    def unreachable(self) -> list[int]:
        return [i for i, p in enumerate(self.probabilities) if p is None]

    def cell_prob(self, row: int, col: int) -> float | None:
        return self.probabilities[row * GRID_DIM + col]

    def to_result(self, params: dict, seed: int) -> ExperimentResult:
        result = ExperimentResult("heatmap", params, seed)
        for idx in range(GRID_CELLS):
            row, col = divmod(idx, GRID_DIM)
            label = f"cell-{row}-{col}"
            prob, eff = self.probabilities[idx], self.sample_counts[idx]
            result.add(label, "node_count", self.node_counts[idx])
            if prob is None:
                result.add(label, "unreachable", 1.0)
            else:
                se = math.sqrt(prob * (1.0 - prob) / eff) if eff else 0.0
                result.add(label, "adversary_selection_probability", prob, se)
                result.add(label, "effective_samples", eff)
        return result


# ---------------------------------------------------------------------------
# shared spatial machinery
# ---------------------------------------------------------------------------

def cell_index(x: float, y: float, plane: tuple[float, float]) -> int:
    col = min(int(x / (plane[0] / GRID_DIM)), GRID_DIM - 1)
    row = min(int(y / (plane[1] / GRID_DIM)), GRID_DIM - 1)
    return row * GRID_DIM + col


def cell_node_counts(positions, plane: tuple[float, float]) -> list[int]:
    counts = [0] * GRID_CELLS
    for x, y in positions:
        counts[cell_index(x, y, plane)] += 1
    return counts


def layout_variance(node_counts) -> float:
    """Mean squared deviation of per-cell counts from the uniform share."""
    expected = sum(node_counts) / len(node_counts)
    return sum((c - expected) ** 2 for c in node_counts) / len(node_counts)


def local_adversary_default(placement: str) -> bool:
    """Whether cell measurements condition on a local adversary by default.

    Evenly gridded layouts are measured unconditioned (their selection rate
    should sit at the global adversary share in every cell); scattered and
    clustered layouts keep at least one adversary in the measured cell so
    that sparse regions are evaluated under an active local attacker.
    """
    return placement != "uniform_grid"


def measure_cell_probability(
    positions,
    adversary_count: int,
    cell: int,
    rng,
    *,
    samples: int = 1000,
    radius: float = 3.0,
    fanout: int = 3,
    plane: tuple[float, float] = (10.0, 10.0),
    require_local_adversary: bool = False,
) -> tuple[float | None, int]:
    """Estimate how often a requester inside one grid cell follows an adversary.

    Sample points are uniform within the cell.  Each sample draws a fresh
    adversary assignment over the full-node population (rejection-sampled to
    keep at least one adversary among the cell's own nodes when
    ``require_local_adversary`` and the cell is populated), polls up to
    ``fanout`` distinct reachable full nodes and follows one uniformly.

    Returns ``(probability, effective_samples)``; probability is None when
    no sample point could reach any full node.
    """
    if require_local_adversary and adversary_count < 1:
        raise ConfigError(
            "local-adversary conditioning needs at least one adversary; "
            "disable it for adversary-free measurements"
        )
    n = len(positions)
    row, col = divmod(cell, GRID_DIM)
    cell_w, cell_h = plane[0] / GRID_DIM, plane[1] / GRID_DIM
    members = frozenset(
        i for i, (x, y) in enumerate(positions) if cell_index(x, y, plane) == cell
    )
    constrain = require_local_adversary and bool(members)
    ids = range(n)
    hits = effective = 0
    for _ in range(samples):
        px = (col + rng.random()) * cell_w
        py = (row + rng.random()) * cell_h
        while True:
            adversaries = frozenset(rng.sample(ids, adversary_count))
            if not constrain or not adversaries.isdisjoint(members):
                break
        reachable = [
            i for i, pos in enumerate(positions) if math.dist((px, py), pos) <= radius
        ]
        if not reachable:
            continue
        polled = rng.sample(reachable, min(fanout, len(reachable)))
        followed = polled[rng.randrange(len(polled))]
        effective += 1
        hits += followed in adversaries
    if effective == 0:
        return None, 0
    return hits / effective, effective


def _layout_positions(
    placement: str,
    node_count: int,
    layout_seed: int,
    *,
    plane: tuple[float, float],
    cluster_count: int = 2,
    cluster_spread: float = 0.8,
    cluster_fraction: float = 0.8,
) -> list[tuple[float, float]]:
    config = SimConfig(
        full_node_count=node_count,
        light_node_count=1,
        placement=placement,
        plane_size=plane,
        cluster_count=cluster_count,
        cluster_spread=cluster_spread,
        cluster_fraction=cluster_fraction,
        seed=layout_seed,
    )
    return [node.position for node in place_nodes(config).full_nodes]


def _heatmap_cell_job(job) -> tuple[float | None, int]:
    (seed, tag, layout_index, cell, positions, adversary_count, samples,
     radius, fanout, plane, constrain) = job
    rng = substream(seed, DOMAIN_EXPERIMENT, tag, layout_index, cell)
    return measure_cell_probability(
        positions, adversary_count, cell, rng,
        samples=samples, radius=radius, fanout=fanout, plane=plane,
        require_local_adversary=constrain,
    )


def pmap(func, jobs, workers: int = 1) -> list:
    """Order-preserving map, fanned out across processes when workers > 1."""
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


# ---------------------------------------------------------------------------
# heatmap experiment
# ---------------------------------------------------------------------------

def exp_heatmap(
    placement: str = "uniform_grid",
    *,
    node_count: int = 50,
    adversary_ratio: float = 0.1,
    samples_per_cell: int = 1000,
    radius: float = 3.0,
    fanout: int = 3,
    plane: tuple[float, float] = (10.0, 10.0),
    require_local_adversary: bool | None = None,
    cluster_count: int = 2,
    cluster_spread: float = 0.8,
    cluster_fraction: float = 0.8,
    layout_index: int = 0,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> GridHeatmap:
    """Per-cell adversary-selection probabilities for one node layout.

    ``layout_index`` selects among layouts generated under the same seed, so
    a family of random layouts can be scanned without touching the per-cell
    sampling streams.  ``require_local_adversary=None`` applies the
    placement-dependent default from :func:`local_adversary_default`.
    """
    if samples_per_cell < 1:
        raise ConfigError("samples_per_cell must be >= 1")
    adversary_count = int(round(adversary_ratio * node_count))
    if require_local_adversary is None:
        require_local_adversary = local_adversary_default(placement)
    layout_seed = substream(
        seed, DOMAIN_EXPERIMENT, _TAG_HEATMAP, layout_index
    ).getrandbits(63)
    positions = _layout_positions(
        placement, node_count, layout_seed, plane=plane,
        cluster_count=cluster_count, cluster_spread=cluster_spread,
        cluster_fraction=cluster_fraction,
    )
    jobs = [
        (seed, _TAG_HEATMAP, layout_index, cell, positions, adversary_count,
         samples_per_cell, radius, fanout, plane, require_local_adversary)
        for cell in range(GRID_CELLS)
    ]
    measured = pmap(_heatmap_cell_job, jobs, workers)
    return GridHeatmap(
        placement=placement,
        probabilities=[m[0] for m in measured],
        sample_counts=[m[1] for m in measured],
        node_counts=cell_node_counts(positions, plane),
        positions=positions,
    )


def heatmap_params(placement: str, **kwargs) -> dict:
    """Parameter echo used when serializing a GridHeatmap."""
    params = {
        "placement": placement,
        "node_count": 50,
        "adversary_ratio": 0.1,
        "samples_per_cell": 1000,
        "radius": 3.0,
        "fanout": 3,
        "layout_index": 0,
    }
    params.update(kwargs)
    return params


# ---------------------------------------------------------------------------
# variance experiment
# ---------------------------------------------------------------------------

def _variance_layout_job(job) -> tuple[float, float, float, float, float]:
    (seed, run, node_count, adversary_count, samples, radius, fanout,
     plane, placement, constrain) = job
    layout_seed = substream(
        seed, DOMAIN_EXPERIMENT, _TAG_VARIANCE, run
    ).getrandbits(63)
    positions = _layout_positions(placement, node_count, layout_seed, plane=plane)
    counts = cell_node_counts(positions, plane)
    variance = layout_variance(counts)

    probs: list[float | None] = []
    ses: list[float] = []
    for cell in range(GRID_CELLS):
        rng = substream(seed, DOMAIN_EXPERIMENT, _TAG_VARIANCE, run, 1 + cell)
        prob, eff = measure_cell_probability(
            positions, adversary_count, cell, rng,
            samples=samples, radius=radius, fanout=fanout, plane=plane,
            require_local_adversary=constrain,
        )
        probs.append(prob)
        ses.append(math.sqrt(prob * (1 - prob) / eff) if prob is not None and eff else 0.0)

    measured = [i for i in range(GRID_CELLS) if probs[i] is not None]
    if not measured:
        raise ConfigError(f"layout {run} left every grid cell unreachable")
    sparse = min(measured, key=lambda i: (counts[i], i))
    dense = max(measured, key=lambda i: (counts[i], -i))
    return variance, probs[sparse], probs[dense], ses[sparse], ses[dense]


def exp_variance(
    runs: int = 100,
    node_count: int = 100,
    *,
    samples_per_cell: int = 1000,
    adversary_ratio: float = 0.1,
    radius: float = 3.0,
    fanout: int = 3,
    plane: tuple[float, float] = (10.0, 10.0),
    placement: str = "uniform_random",
    require_local_adversary: bool | None = None,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> ExperimentResult:
    """Layout variance versus the sparsest/densest cells' selection rates.

    For each generated layout this measures the grid heatmap and reports the
    layout variance together with ``min_cell_prob`` / ``max_cell_prob`` --
    the adversary-selection probabilities of the cells holding the fewest
    and the most full nodes (ties break toward the lower cell index).  The
    summary rows carry the Spearman rank correlation of variance against
    each, with the p-value in the dispersion column.
    """
    if runs < 2:
        raise ConfigError("variance study needs runs >= 2")
    adversary_count = int(round(adversary_ratio * node_count))
    if require_local_adversary is None:
        require_local_adversary = local_adversary_default(placement)
    params = {
        "runs": runs,
        "node_count": node_count,
        "samples_per_cell": samples_per_cell,
        "adversary_ratio": adversary_ratio,
        "radius": radius,
        "fanout": fanout,
        "placement": placement,
        "require_local_adversary": require_local_adversary,
    }
    jobs = [
        (seed, run, node_count, adversary_count, samples_per_cell, radius,
         fanout, plane, placement, require_local_adversary)
        for run in range(runs)
    ]
    outcomes = pmap(_variance_layout_job, jobs, workers)

    result = ExperimentResult("variance", params, seed)
    for run, (variance, min_prob, max_prob, min_se, max_se) in enumerate(outcomes):
        label = f"layout-{run:03d}"
        result.add(label, "variance", variance)
        result.add(label, "min_cell_prob", min_prob, min_se)
        result.add(label, "max_cell_prob", max_prob, max_se)

    variances = [o[0] for o in outcomes]
    for metric, column in (
        ("spearman_variance_min", [o[1] for o in outcomes]),
        ("spearman_variance_max", [o[2] for o in outcomes]),
    ):
        if len(set(variances)) < 2 or len(set(column)) < 2:
            # a constant column carries no rank information
            result.add("summary", metric, 0.0, 1.0)
        else:
            rho, p_value = _scipy_stats.spearmanr(variances, column)
            result.add("summary", metric, rho, p_value)
    return result


# ---------------------------------------------------------------------------
# region snapshot experiment
# ---------------------------------------------------------------------------

def load_region_counts(path=None) -> dict[str, int]:
    """Full-node counts per region from the bundled (or a replacement) file."""
    if path is None:
        raw = (
            resources.files("tipleak").joinpath("data", REGION_DATA_FILE)
            .read_text(encoding="utf-8")
        )
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    doc = json.loads(raw)
    regions = doc.get("regions")
    if not isinstance(regions, dict) or not regions:
        raise ConfigError("region data file needs a non-empty 'regions' mapping")
    counts = {}
    for name in sorted(regions):
        count = regions[name]
        if not isinstance(count, int) or count < 0:
            raise ConfigError(f"region {name!r} has invalid count {count!r}")
        counts[name] = count
    if sum(counts.values()) < 1:
        raise ConfigError("region data file lists no full nodes")
    return counts


def regional_rates(
    region_counts: dict[str, int], adversaries_by_region: dict[str, int]
) -> dict[str, float]:
    """Per-region link rate when requesters stay inside their own region."""
    rates = {}
    for name, total in region_counts.items():
        hostile = adversaries_by_region.get(name, 0)
        rates[name] = hostile / total if total else 0.0
    return rates


def _subset_rate(
    node_regions: list[str],
    subset,
    region_counts: dict[str, int],
    weights: dict[str, float],
) -> float:
    hostile: dict[str, int] = {}
    for idx in subset:
        region = node_regions[idx]
        hostile[region] = hostile.get(region, 0) + 1
    rates = regional_rates(region_counts, hostile)
    return sum(weights[name] * rates[name] for name in region_counts)


def exp_realworld(
    samples: int = 100,
    max_adversaries: int = 16,
    *,
    data_path=None,
    region_weights: dict[str, float] | None = None,
    seed: int = DEFAULT_SEED,
) -> ExperimentResult:
    """Box-plot statistics of the link rate over random adversary subsets.

    Nodes come from the bundled 2020 region snapshot.  For each adversary
    count the study draws up to ``samples`` distinct subsets (every subset
    when fewer exist), scores each by the region-weighted link rate --
    requesters poll only their own region; regions weigh equally unless
    ``region_weights`` is given -- and reports min/q1/median/q3/max.
    """
    region_counts = load_region_counts(data_path)
    total = sum(region_counts.values())
    if not 1 <= max_adversaries <= total:
        raise ConfigError(f"max_adversaries must be in [1, {total}]")
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    if region_weights is None:
        weights = {name: 1.0 / len(region_counts) for name in region_counts}
    else:
        missing = set(region_counts) - set(region_weights)
        if missing:
            raise ConfigError(f"region_weights missing {sorted(missing)}")
        scale = sum(region_weights[name] for name in region_counts)
        if scale <= 0:
            raise ConfigError("region_weights must sum to a positive value")
        weights = {name: region_weights[name] / scale for name in region_counts}

    node_regions = [
        name for name in region_counts for _ in range(region_counts[name])
    ]
    params = {
        "samples": samples,
        "max_adversaries": max_adversaries,
        "regions": dict(region_counts),
        "weights": {k: round(v, 12) for k, v in weights.items()},
    }
    result = ExperimentResult("realworld", params, seed)
    for count in range(1, max_adversaries + 1):
        exhaustive = math.comb(total, count) <= samples
        if exhaustive:
            subsets = [frozenset(c) for c in itertools.combinations(range(total), count)]
        else:
            rng = substream(seed, DOMAIN_EXPERIMENT, _TAG_REALWORLD, count)
            seen: set[frozenset[int]] = set()
            while len(seen) < samples:
                seen.add(frozenset(rng.sample(range(total), count)))
            subsets = sorted(seen, key=sorted)
        rates = sorted(
            _subset_rate(node_regions, subset, region_counts, weights)
            for subset in subsets
        )
        if len(rates) == 1:
            q1 = median = q3 = rates[0]
        else:
            q1, median, q3 = statistics.quantiles(rates, n=4, method="inclusive")
        label = f"adversaries-{count:02d}"
        result.add(label, "min", rates[0])
        result.add(label, "q1", q1)
        result.add(label, "median", median)
        result.add(label, "q3", q3)
        result.add(label, "max", rates[-1])
        result.add(label, "subsets", len(rates))
    return result


# ---------------------------------------------------------------------------
# link-rate sweep experiment
# ---------------------------------------------------------------------------

def _decentralized_row(job) -> dict:
    label, n, c, m, lights, rounds, sim_seed = job
    config = SimConfig(
        full_node_count=n,
        adversary_count=c,
        request_fanout=m,
        light_node_count=lights,
        rounds=rounds,
        request_radius=None,
        seed=sim_seed,
    )
    sim = run_simulation(config)
    rate = sim.deanon_rate
    return {
        "label": label,
        "analytic": deanon_probability(n, c, m),
        "empirical": rate,
        "se": math.sqrt(rate * (1 - rate) / sim.total_transactions),
    }


def exp_decentralized(
    *,
    light_nodes: int = 100,
    rounds: int = 100,
    node_sweep=(50, 100, 200),
    fanout_sweep=(1, 3, 5),
    ratio_sweep=(0.05, 0.1, 0.2, 0.33),
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> ExperimentResult:
    """One-factor sweeps of the link rate around the N=100, M=3, p=0.1 base.

    Each row pairs the closed-form link probability with a Monte Carlo
    estimate (dispersion column = standard error).  Sweep rows vary one of
    node count, request fanout, or adversary share while the others stay at
    the base; summary rows report the empirical spread inside the node and
    fanout sweeps, which the rate should not depend on.
    """
    base_n, base_m, base_ratio = 100, 3, 0.1
    specs: list[tuple[str, int, int, int]] = []
    for n in node_sweep:
        specs.append((f"N-{n}", n, int(round(base_ratio * n)), base_m))
    for m in fanout_sweep:
        specs.append((f"M-{m}", base_n, int(round(base_ratio * base_n)), m))
    for ratio in ratio_sweep:
        specs.append((f"p-{ratio:g}", base_n, int(round(ratio * base_n)), base_m))

    jobs = []
    for idx, (label, n, c, m) in enumerate(specs):
        sim_seed = substream(
            seed, DOMAIN_EXPERIMENT, _TAG_DECENTRALIZED, idx
        ).getrandbits(63)
        jobs.append((label, n, c, m, light_nodes, rounds, sim_seed))
    rows = pmap(_decentralized_row, jobs, workers)

    params = {
        "light_nodes": light_nodes,
        "rounds": rounds,
        "node_sweep": list(node_sweep),
        "fanout_sweep": list(fanout_sweep),
        "ratio_sweep": list(ratio_sweep),
    }
    result = ExperimentResult("decentralized", params, seed)
    for row in rows:
        result.add(row["label"], "analytic", row["analytic"])
        result.add(row["label"], "empirical", row["empirical"], row["se"])
    for prefix, sweep in (("N", node_sweep), ("M", fanout_sweep)):
        rates = [
            row["empirical"] for row in rows
            if row["label"] in {f"{prefix}-{v}" for v in sweep}
        ]
        result.add(f"{prefix}-sweep", "empirical_spread", max(rates) - min(rates))
    return result


# ---------------------------------------------------------------------------
# mixer experiment
# ---------------------------------------------------------------------------

def simulate_mixer_chains(
    link_prob: float, participants: int, rng
) -> list[int]:
    """Identified-chain lengths for each of ``participants`` chain starts.

    A chain grows by one participant per hop; a hop succeeds only when both
    of the next participant's address mappings (deposit side and withdrawal
    side) are revealed, each independently with probability ``link_prob``.
    """
    if not 0.0 <= link_prob < 1.0:
        raise ConfigError("link_prob must be in [0, 1)")
    lengths = []
    for _ in range(participants):
        length = 1
        while True:
            deposit_seen = rng.random() < link_prob
            withdraw_seen = rng.random() < link_prob
            if not (deposit_seen and withdraw_seen):
                break
            length += 1
        lengths.append(length)
    return lengths


def exp_mixer(
    p_values=(0.05, 0.1, 0.2),
    max_chain: int = 5,
    *,
    participants: int = 100_000,
    seed: int = DEFAULT_SEED,
) -> ExperimentResult:
    """Mixer chain-identification table: closed forms next to Monte Carlo.

    Per reveal probability p this tabulates the analytic chance of
    identifying a chain of at least x participants together with the
    empirical frequency over ``participants`` simulated chains, plus both
    expected-count modes and the observed mean chain length.
    """
    params = {
        "p_values": [float(p) for p in p_values],
        "max_chain": max_chain,
        "participants": participants,
    }
    if max_chain < 1:
        raise ConfigError("max_chain must be >= 1")
    result = ExperimentResult("mixer", params, seed)
    for p_idx, p in enumerate(p_values):
        rng = substream(seed, DOMAIN_EXPERIMENT, _TAG_MIXER, p_idx)
        lengths = simulate_mixer_chains(p, participants, rng)
        mean_len = statistics.fmean(lengths)
        label = f"p-{p:g}"
        result.add(label, "expected_raw", mixer_expected_identified(p, mode="raw"))
        result.add(
            label, "expected_normalized",
            mixer_expected_identified(p, mode="normalized"),
        )
        result.add(
            label, "mean_chain_length", mean_len,
            statistics.stdev(lengths) / math.sqrt(participants),
        )
        for x in range(1, max_chain + 1):
            analytic = mixer_chain_probability(p, x)
            observed = sum(1 for length in lengths if length >= x) / participants
            se = math.sqrt(observed * (1 - observed) / participants)
            result.add(f"{label}-x-{x}", "chain_prob_analytic", analytic)
            result.add(f"{label}-x-{x}", "chain_prob_empirical", observed, se)
    return result


# ---------------------------------------------------------------------------
# mitigation comparison experiment
# ---------------------------------------------------------------------------

def _mitigation_sim(config: SimConfig) -> dict:
    sim = run_simulation(config)
    degrees = list(sim.address_degrees.values())
    return {
        "link_rate": sim.deanon_rate,
        "correct_link_rate": (
            sim.correct_link_count / sim.total_transactions
            if sim.total_transactions else 0.0
        ),
        "false_positive_count": sim.false_positive_count,
        "anonymity_degree": (
            statistics.fmean(degrees) if degrees else 1.0
        ),
        "total_transactions": sim.total_transactions,
        "result": sim,
    }


def exp_mitigations(
    *,
    baseline_nodes: int = 100,
    baseline_adversaries: int = 10,
    scaling_target: float = 0.01,
    baseline_rounds: int = 200,
    scaling_rounds: int = 1000,
    light_nodes: int = 100,
    proxy_light_nodes: int = 6,
    seed: int = DEFAULT_SEED,
) -> ExperimentResult:
    """Compare the unprotected baseline against each mitigation mode.

    Rows: the baseline link rate; full-node scaling at the analytically
    required population for ``scaling_target``; request proxying (links can
    only name the proxy, leaving requester anonymity intact); and local tip
    selection, which produces no link material at all.
    """
    def sub_seed(idx: int) -> int:
        return substream(
            seed, DOMAIN_EXPERIMENT, _TAG_MITIGATIONS, idx
        ).getrandbits(63)

    params = {
        "baseline_nodes": baseline_nodes,
        "baseline_adversaries": baseline_adversaries,
        "scaling_target": scaling_target,
        "baseline_rounds": baseline_rounds,
        "scaling_rounds": scaling_rounds,
        "light_nodes": light_nodes,
        "proxy_light_nodes": proxy_light_nodes,
    }
    result = ExperimentResult("mitigations", params, seed)

    baseline = _mitigation_sim(SimConfig(
        full_node_count=baseline_nodes,
        adversary_count=baseline_adversaries,
        light_node_count=light_nodes,
        rounds=baseline_rounds,
        request_radius=None,
        seed=sub_seed(0),
    ))
    required = required_full_nodes(baseline_adversaries, scaling_target)
    scaled = _mitigation_sim(SimConfig(
        full_node_count=required,
        adversary_count=baseline_adversaries,
        light_node_count=light_nodes,
        rounds=scaling_rounds,
        request_radius=None,
        seed=sub_seed(1),
    ))
    proxy_config = SimConfig(
        full_node_count=20,
        adversary_count=2,
        light_node_count=proxy_light_nodes,
        rounds=100,
        request_radius=None,
        mode="proxy",
        proxy_count=1,
        seed=sub_seed(2),
    )
    proxy = _mitigation_sim(proxy_config)
    direct = _mitigation_sim(SimConfig(
        full_node_count=20,
        adversary_count=2,
        light_node_count=20,
        rounds=50,
        request_radius=None,
        mode="direct_tip_selection",
        seed=sub_seed(3),
    ))

    for label, sub in (
        ("baseline", baseline), ("scaling", scaled),
        ("proxy", proxy), ("direct", direct),
    ):
        rate = sub["link_rate"]
        se = math.sqrt(rate * (1 - rate) / sub["total_transactions"])
        result.add(label, "link_rate", rate, se)
        result.add(label, "correct_link_rate", sub["correct_link_rate"])
        result.add(label, "anonymity_degree", sub["anonymity_degree"])
    result.add("scaling", "required_full_nodes", required)
    proxy_claims = {link.claimed_identity for link in proxy["result"].links}
    proxy_node_ids = set(range(
        proxy_config.full_node_count,
        proxy_config.full_node_count + proxy_config.proxy_count,
    ))
    result.add(
        "proxy", "links_to_proxies_only",
        1.0 if proxy_claims and proxy_claims <= proxy_node_ids else 0.0,
    )
    return result
