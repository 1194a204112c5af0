"""Command-line front end: analytic queries, experiment runs, self-checks.

Exit codes follow the interface contract: 0 on success, 1 for usage errors
(bad flags, unknown keys, unreadable files), 2 when `validate` checks fail.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import analytic, experiments, network, results, tangle
from .analytic import ParameterError
from .network import ConfigError, SimConfig, run_simulation
from .rng import substream

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2

OUT_ENV_VAR = "TIPLEAK_OUT"
EXPERIMENTS = (
    "decentralized", "realworld", "heatmap", "variance", "mixer",
    "mitigations", "custom",
)

# sha256 of the bundled 2020 region snapshot; `validate` pins the shipped
# artifact so silent edits to the data file are caught.
BUNDLED_DATA_SHA256 = (
    "f697a7e5b9eb3ae13fab94e25eb20e638bd5333b9da913102606a5739631bdc0"
)


class UsageError(Exception):
    """Bad command usage: unknown keys, malformed values, missing files."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage by default; the contract wants 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(value: float) -> str:
    return f"{value:.6f}"


# ---------------------------------------------------------------------------
# config files and overrides
# ---------------------------------------------------------------------------

# Tunable knobs per experiment section.  Values double as type witnesses for
# override parsing; None means "string or unset".
SECTION_DEFAULTS: dict[str, dict] = {
    "decentralized": {"light_nodes": 100, "rounds": 100},
    "realworld": {"samples": 100, "max_adversaries": 16, "data": None},
    "heatmap": {
        "placement": "uniform_grid",
        "node_count": 50,
        "adversary_ratio": 0.1,
        "samples_per_cell": 1000,
        "radius": 3.0,
        "fanout": 3,
        "require_local_adversary": None,
        "cluster_count": 2,
        "cluster_spread": 0.8,
        "cluster_fraction": 0.8,
        "layout_index": 0,
    },
    "variance": {
        "runs": 100,
        "node_count": 100,
        "samples_per_cell": 1000,
        "adversary_ratio": 0.1,
        "radius": 3.0,
        "fanout": 3,
        "placement": "uniform_random",
        "require_local_adversary": None,
    },
    "mixer": {"p_values": "0.05,0.1,0.2", "max_chain": 5, "participants": 100000},
    "mitigations": {
        "baseline_nodes": 100,
        "baseline_adversaries": 10,
        "scaling_target": 0.01,
        "baseline_rounds": 200,
        "scaling_rounds": 1000,
        "light_nodes": 100,
        "proxy_light_nodes": 6,
    },
    "custom": {
        "full_node_count": 100,
        "adversary_count": None,
        "adversary_ratio": 0.1,
        "request_fanout": 3,
        "light_node_count": 100,
        "rounds": 100,
        "request_radius": None,
        "placement": "uniform_random",
        "cluster_count": 2,
        "cluster_spread": 0.8,
        "cluster_fraction": 0.8,
        "mode": "baseline",
        "matching": "assume_unique",
        "proxy_count": 0,
        "bootstrap_tips": 0,
    },
}

_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False}


def _coerce(section: str, key: str, raw: str):
    defaults = SECTION_DEFAULTS[section]
    if key not in defaults:
        raise UsageError(f"unknown config key {section}.{key}")
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if raw.lower() in _BOOL_WORDS:
        return _BOOL_WORDS[raw.lower()]
    witness = defaults[key]
    if isinstance(witness, bool):
        raise UsageError(f"{section}.{key} expects true/false, got {raw!r}")
    for caster in (int, float):
        if isinstance(witness, caster):
            try:
                return caster(raw)
            except ValueError as exc:
                raise UsageError(
                    f"{section}.{key} expects {caster.__name__}, got {raw!r}"
                ) from exc
    # string-typed or unset-by-default keys: try numerics, else keep the text
    for caster in (int, float):
        try:
            return caster(raw)
        except ValueError:
            pass
    return raw


def parse_config_line(line: str, default_section: str) -> tuple[str, str, str] | None:
    """Split one `section.key=value` line; returns None for blanks/comments."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    if "=" not in stripped:
        raise UsageError(f"expected key=value, got {stripped!r}")
    key, value = stripped.split("=", 1)
    key = key.strip()
    if "." in key:
        section, key = key.split(".", 1)
        section = section.strip()
        key = key.strip()
    else:
        section = default_section
    if section not in SECTION_DEFAULTS:
        raise UsageError(f"unknown config section {section!r}")
    return section, key, value


def resolve_overrides(
    experiment: str, config_path: str | None, sets: list[str]
) -> dict[str, dict]:
    """Merge file config then --set pairs into per-section override maps."""
    merged: dict[str, dict] = {name: {} for name in SECTION_DEFAULTS}
    lines: list[str] = []
    if config_path:
        try:
            lines = Path(config_path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
    for line in lines + list(sets):
        parsed = parse_config_line(line, experiment)
        if parsed is None:
            continue
        section, key, value = parsed
        merged[section][key] = _coerce(section, key, value)
    return merged


# ---------------------------------------------------------------------------
# analytic subcommand
# ---------------------------------------------------------------------------

def _add_analytic_parser(subparsers) -> None:
    parser = subparsers.add_parser(
        "analytic", help="evaluate a closed-form quantity and print it"
    )
    ops = parser.add_subparsers(dest="operation", required=True, parser_class=_Parser)

    deanon = ops.add_parser("deanon", help="per-transaction link probability")
    deanon.add_argument("--n", type=int, required=True, help="full nodes")
    deanon.add_argument("--c", type=int, required=True, help="hostile full nodes")
    deanon.add_argument("--m", type=int, default=3, help="request fanout")

    hyper = ops.add_parser("hypergeom", help="P(k hostile among m polled)")
    hyper.add_argument("--n", type=int, required=True)
    hyper.add_argument("--c", type=int, required=True)
    hyper.add_argument("--m", type=int, required=True)
    hyper.add_argument("--k", type=int, required=True)

    entropy = ops.add_parser("entropy", help="normalized anonymity degree")
    entropy.add_argument(
        "--probs", required=True,
        help="comma-separated sender probabilities, e.g. 0.5,0.25,0.25",
    )

    chain = ops.add_parser("mixer-chain", help="P(identifying a length-x chain)")
    chain.add_argument("--p", type=float, required=True)
    chain.add_argument("--x", type=int, required=True)

    expected = ops.add_parser("mixer-expected", help="expected identified count")
    expected.add_argument("--p", type=float, required=True)
    expected.add_argument(
        "--mode", choices=("raw", "normalized"), default="normalized"
    )

    required = ops.add_parser(
        "required-nodes", help="population needed to push the rate under target"
    )
    required.add_argument("--c", type=int, required=True)
    required.add_argument("--target", required=True)

    takeover = ops.add_parser("takeover", help="regional link rate")
    takeover.add_argument("--nodes", type=int, required=True, help="nodes in region")
    takeover.add_argument(
        "--mode", choices=("takeover", "add", "collude"), default="takeover"
    )
    takeover.add_argument("--count", type=int, default=1, help="hostile nodes")


def cmd_analytic(args) -> int:
    op = args.operation
    if op == "deanon":
        print(_fmt(analytic.deanon_probability(args.n, args.c, args.m)))
    elif op == "hypergeom":
        print(_fmt(analytic.hypergeom_pmf(args.n, args.c, args.m, args.k)))
    elif op == "entropy":
        probs = tuple(float(tok) for tok in args.probs.split(",") if tok.strip())
        profile = analytic.AnonymityProfile(probs)
        print(_fmt(analytic.entropy_degree(profile)))
    elif op == "mixer-chain":
        print(_fmt(analytic.mixer_chain_probability(args.p, args.x)))
    elif op == "mixer-expected":
        print(_fmt(analytic.mixer_expected_identified(args.p, mode=args.mode)))
    elif op == "required-nodes":
        target = args.target
        try:
            target_value = Fraction(target) if "/" in target else float(target)
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"bad --target {target!r}") from exc
        print(analytic.required_full_nodes(args.c, target_value))
    elif op == "takeover":
        print(_fmt(analytic.continental_takeover_rate(
            args.nodes, mode=args.mode, count=args.count
        )))
    else:  # pragma: no cover - argparse enforces the choices
        raise UsageError(f"unknown operation {op!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run subcommand
# ---------------------------------------------------------------------------

def _run_experiment(name: str, overrides: dict[str, dict], seed: int,
                    workers: int) -> experiments.ExperimentResult:
    opts = dict(SECTION_DEFAULTS[name])
    opts.update(overrides[name])
    if name == "decentralized":
        return experiments.exp_decentralized(
            light_nodes=opts["light_nodes"], rounds=opts["rounds"],
            seed=seed, workers=workers,
        )
    if name == "realworld":
        return experiments.exp_realworld(
            samples=opts["samples"], max_adversaries=opts["max_adversaries"],
            data_path=opts["data"], seed=seed,
        )
    if name == "heatmap":
        heatmap = experiments.exp_heatmap(
            opts["placement"],
            node_count=opts["node_count"],
            adversary_ratio=opts["adversary_ratio"],
            samples_per_cell=opts["samples_per_cell"],
            radius=opts["radius"],
            fanout=opts["fanout"],
            require_local_adversary=opts["require_local_adversary"],
            cluster_count=opts["cluster_count"],
            cluster_spread=opts["cluster_spread"],
            cluster_fraction=opts["cluster_fraction"],
            layout_index=opts["layout_index"],
            seed=seed, workers=workers,
        )
        return heatmap.to_result(experiments.heatmap_params(**opts), seed)
    if name == "variance":
        return experiments.exp_variance(
            runs=opts["runs"], node_count=opts["node_count"],
            samples_per_cell=opts["samples_per_cell"],
            adversary_ratio=opts["adversary_ratio"],
            radius=opts["radius"], fanout=opts["fanout"],
            placement=opts["placement"],
            require_local_adversary=opts["require_local_adversary"],
            seed=seed, workers=workers,
        )
    if name == "mixer":
        raw = opts["p_values"]
        p_values = (
            tuple(float(tok) for tok in str(raw).split(",") if tok.strip())
            if isinstance(raw, str) else (float(raw),)
        )
        return experiments.exp_mixer(
            p_values=p_values, max_chain=opts["max_chain"],
            participants=opts["participants"], seed=seed,
        )
    if name == "mitigations":
        return experiments.exp_mitigations(
            baseline_nodes=opts["baseline_nodes"],
            baseline_adversaries=opts["baseline_adversaries"],
            scaling_target=opts["scaling_target"],
            baseline_rounds=opts["baseline_rounds"],
            scaling_rounds=opts["scaling_rounds"],
            light_nodes=opts["light_nodes"],
            proxy_light_nodes=opts["proxy_light_nodes"],
            seed=seed,
        )
    if name == "custom":
        config = SimConfig(**{k: v for k, v in opts.items()}, seed=seed)
        sim = run_simulation(config)
        result = experiments.ExperimentResult("custom", dict(opts), seed)
        for key, value in sim.to_flat().items():
            if key == "seed" or value is None:
                continue
            result.add("simulation", key, value)
        return result
    raise UsageError(f"unknown experiment {name!r}")


def _print_summary(result: experiments.ExperimentResult) -> None:
    by_metric: dict[str, list[float]] = {}
    for row in result.rows:
        by_metric.setdefault(row.metric, []).append(row.value)
    for metric, values in by_metric.items():
        if len(values) == 1:
            print(f"{result.name}: {metric} = {results.format_value(values[0])}")
        else:
            lo, hi = min(values), max(values)
            mean = sum(values) / len(values)
            print(
                f"{result.name}: {metric} n={len(values)} "
                f"mean={mean:.6g} min={lo:.6g} max={hi:.6g}"
            )


def cmd_run(args) -> int:
    if args.experiment not in EXPERIMENTS:
        raise UsageError(
            f"unknown experiment {args.experiment!r}; choose from {EXPERIMENTS}"
        )
    overrides = resolve_overrides(args.experiment, args.config, args.set or [])
    out_dir = args.out or os.environ.get(OUT_ENV_VAR) or "."
    try:
        result = _run_experiment(
            args.experiment, overrides, args.seed, args.workers
        )
    except (ConfigError, ParameterError) as exc:
        raise UsageError(str(exc)) from exc
    try:
        path = results.write_result(result, out_dir, args.format)
    except OSError as exc:
        raise UsageError(f"cannot write results: {exc}") from exc
    _print_summary(result)
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate subcommand
# ---------------------------------------------------------------------------

def _check_analytic_identities() -> tuple[bool, str]:
    rng = substream(2024, 99)
    for _ in range(200):
        n = rng.randint(1, 2000)
        c = rng.randint(0, n)
        m = rng.randint(1, min(10, n))
        value = analytic.deanon_probability(n, c, m)
        if abs(value - c / n) > 1e-12:
            return False, f"deanon({n},{c},{m}) = {value} != {c / n}"
        total = sum(
            analytic.hypergeom_pmf(n, c, m, k) for k in range(0, min(m, n) + 1)
        )
        if abs(total - 1.0) > 1e-12:
            return False, f"pmf({n},{c},{m}) sums to {total}"
    return True, "200 randomized tuples"


def _check_analytic_continental() -> tuple[bool, str]:
    cases = [
        ((8, "takeover", 1), 0.125),
        ((31, "takeover", 1), 0.0323),
        ((6, "add", 1), 0.1429),
        ((6, "takeover", 1), 0.1667),
        ((6, "collude", 5), 0.8333),
    ]
    for (nodes, mode, count), want in cases:
        got = analytic.continental_takeover_rate(nodes, mode=mode, count=count)
        if round(got, 4) != want:
            return False, f"{mode}({count}/{nodes}) = {got:.4f}, want {want}"
    return True, "regional rates at 4 decimal places"


def _check_analytic_mixer() -> tuple[bool, str]:
    normalized = analytic.mixer_expected_identified(0.1, mode="normalized")
    if abs(normalized - 1.0101) > 1e-4:
        return False, f"normalized E at p=0.1 is {normalized}"
    for p in (0.1, 0.5, 0.9):
        raw = analytic.mixer_expected_identified(p, mode="raw")
        partial = sum(x * p ** (2 * (x - 1)) for x in range(1, 1001))
        if abs(raw - partial) > 1e-9:
            return False, f"raw E at p={p}: {raw} vs partial sum {partial}"
    return True, "expected identified counts"


def _check_analytic_required() -> tuple[bool, str]:
    cases = [((10, 0.01), 1001), ((16, 0.05), 321), ((1, 1.0), 2)]
    for (c, target), want in cases:
        got = analytic.required_full_nodes(c, target)
        if got != want:
            return False, f"required({c},{target}) = {got}, want {want}"
    return True, "population thresholds"


def _check_tangle_integrity() -> tuple[bool, str]:
    ledger = tangle.Ledger()
    rng = substream(2024, 98)
    for i in range(2000):
        parents = tangle.urts_pair(ledger.tips, rng)
        ledger.attach(parents, f"addr-{i}")
    approved = {
        parent for tx in ledger.transactions()
        if tx.txid != tangle.GENESIS_ID for parent in tx.parents
    }
    recomputed = {tx.txid for tx in ledger.transactions() if tx.txid not in approved}
    if recomputed != set(ledger.tips):
        return False, "maintained tip set diverged from recomputation"
    lines = ledger.export_lines()
    if tangle.ledger_from_lines(lines).export_lines() != lines:
        return False, "export/import roundtrip changed the ledger"
    return True, "2000 attaches, tips + roundtrip"


def _check_determinism() -> tuple[bool, str]:
    first = experiments.exp_mixer(p_values=(0.1,), participants=2000, seed=5)
    second = experiments.exp_mixer(p_values=(0.1,), participants=2000, seed=5)
    if results.result_to_csv_bytes(first) != results.result_to_csv_bytes(second):
        return False, "identical seeds produced different bytes"
    return True, "re-run is byte-identical"


def _check_null_adversary() -> tuple[bool, str]:
    sim = run_simulation(SimConfig(
        full_node_count=10, adversary_count=0, light_node_count=5,
        rounds=20, request_radius=None, seed=3,
    ))
    if sim.linked_count or sim.correct_link_count:
        return False, f"{sim.linked_count} links with zero hostile nodes"
    return True, "no hostile nodes, no links"


def _check_null_direct() -> tuple[bool, str]:
    sim = run_simulation(SimConfig(
        full_node_count=10, adversary_count=5, light_node_count=5,
        rounds=20, request_radius=None, mode="direct_tip_selection", seed=3,
    ))
    if sim.linked_count:
        return False, f"direct mode linked {sim.linked_count}"
    return True, "local selection leaks nothing"


def _check_proxy_claims() -> tuple[bool, str]:
    sim = run_simulation(SimConfig(
        full_node_count=10, adversary_count=5, light_node_count=4,
        rounds=20, request_radius=None, mode="proxy", proxy_count=1, seed=3,
    ))
    claims = {link.claimed_identity for link in sim.links}
    if not claims or not claims.issubset({10}):
        return False, f"claims {claims} reach past the proxy"
    degrees = set(sim.address_degrees.values())
    if degrees != {1.0}:
        return False, f"proxied degrees {degrees} != 1.0"
    return True, "links stop at the proxy, degree 1.0"


def _make_data_check(path: str | None):
    def check() -> tuple[bool, str]:
        counts = experiments.load_region_counts(path)
        total = sum(counts.values())
        if total != 47 or len(counts) != 5:
            return False, f"{len(counts)} regions, {total} nodes (want 5/47)"
        if path is None:
            data = (
                Path(__file__).parent / "data" / experiments.REGION_DATA_FILE
            ).read_bytes()
        else:
            data = Path(path).read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if digest != BUNDLED_DATA_SHA256:
            return False, f"data digest {digest[:16]}... is not the 2020 snapshot"
        return True, "2020 snapshot intact"
    return check


def cmd_validate(args) -> int:
    overrides = resolve_overrides("realworld", None, args.set or [])
    data_path = overrides["realworld"].get("data")
    checks = [
        ("analytic-identities", _check_analytic_identities),
        ("analytic-continental", _check_analytic_continental),
        ("analytic-mixer", _check_analytic_mixer),
        ("analytic-required", _check_analytic_required),
        ("tangle-integrity", _check_tangle_integrity),
        ("determinism", _check_determinism),
        ("null-adversary", _check_null_adversary),
        ("null-direct", _check_null_direct),
        ("proxy-claims", _check_proxy_claims),
        ("realworld-data", _make_data_check(data_path)),
    ]
    if args.only:
        checks = [(name, fn) for name, fn in checks if args.only in name]
        if not checks:
            raise UsageError(f"no validate check matches {args.only!r}")
    failures = 0
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    return EXIT_OK if failures == 0 else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(
        prog="tipleak",
        description=(
            "Tip-selection traffic analysis toolkit: closed-form link "
            "probabilities, seeded attack simulations, and experiment tables."
        ),
    )
    subparsers = parser.add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )
    _add_analytic_parser(subparsers)

    run = subparsers.add_parser("run", help="run an experiment and write files")
    run.add_argument("experiment", help=f"one of {', '.join(EXPERIMENTS)}")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--seed", type=int, default=experiments.DEFAULT_SEED)
    run.add_argument("--out", help=f"output directory (or ${OUT_ENV_VAR})")
    run.add_argument("--format", choices=results.FORMATS, default="csv")
    run.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    run.add_argument(
        "--workers", type=int, default=os.cpu_count() or 1,
        help="parallel workers; never affects results",
    )

    validate = subparsers.add_parser(
        "validate", help="run the fast self-checks and report PASS/FAIL"
    )
    validate.add_argument("--only", help="substring filter on check names")
    validate.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override a config key, e.g. realworld.data=PATH",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "analytic": cmd_analytic,
        "run": cmd_run,
        "validate": cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"tipleak: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ParameterError, ValueError) as exc:
        print(f"tipleak: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
