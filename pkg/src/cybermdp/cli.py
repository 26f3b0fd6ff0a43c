"""Command-line front end.

Subcommands::

    cybermdp validate GRAPH                  check a graph document
    cybermdp gen --out FILE                  generate a synthetic graph
    cybermdp build GRAPH --out FILE          compile to a decision process
    cybermdp train GRAPH --out DIR           train one variant, export curve
    cybermdp compare GRAPH --out DIR         matched-seed variant comparison
    cybermdp export-dot GRAPH --out FILE     render to Graphviz DOT

Exit codes: 0 success, 1 domain violation (failed validation, bad
parameters, non-convergence), 2 I/O or parse failure.  ``train`` and
``compare`` write a ``manifest.json`` recording the resolved configuration
and sha256 of every input and artifact; ``--config`` accepts either a plain
configuration document or such a manifest, so a finished run can be
reproduced byte-for-byte from its own manifest.  If a command with a
directory output fails midway, a ``FAILED`` marker file with the error text
is left next to the partial artifacts.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .evaluate import (
    MetricsReport,
    VariantMetrics,
    compare_variants,
    evaluate_variant,
    protocol_sweep,
)
from .graph import (
    AttackGraph,
    GraphFormatError,
    Protocol,
    export_dot,
    parse_attack_graph,
    serialize_attack_graph,
    validate,
)
from .mdp import ConvergenceError, build_cvss_mdp, serialize_mdp
from .netgen import ENTERPRISE_SCALE, TopologyParams, generate, plant_gauntlet
from .solver import ALGORITHMS, TrainConfig, train
from .terrain import TerrainConfig, TerrainMode, apply_terrain

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2

# Small default topology for quick local runs.
DESK_SCALE = TopologyParams(
    num_subnets=3,
    hosts_per_subnet=12,
    intra_edge_prob=0.06,
    inter_edge_count=2,
    firewall_prob=0.5,
    seed=0,
)

PRESETS = {
    "desk": DESK_SCALE,
    "enterprise": ENTERPRISE_SCALE,
}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Resolved knobs for train/compare, the unit the manifest records."""

    seed: int = 0
    gamma: float = 0.9
    w: float = -2.0
    protocol: str | None = None
    mode: str = "reward"
    protocols: bool = False
    episodes: int = 400
    algorithm: str = "tabular"
    max_steps_per_episode: int = 2500
    eval_interval: int = 4
    learning_rate: float = 0.2
    learning_rate_decay: float = 0.6
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int | None = None
    replay_capacity: int = 10_000
    batch_size: int = 32
    target_sync_interval: int = 250
    hidden_layers: tuple[int, ...] = (64, 64)

    def to_document(self) -> dict[str, Any]:
        doc = dataclasses.asdict(self)
        doc["hidden_layers"] = list(self.hidden_layers)
        return doc

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "hidden_layers" in doc:
            doc = dict(doc)
            doc["hidden_layers"] = tuple(doc["hidden_layers"])
        return cls(**doc)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            episodes=self.episodes,
            algorithm=self.algorithm,
            max_steps_per_episode=self.max_steps_per_episode,
            eval_interval=self.eval_interval,
            gamma=None,  # the process carries gamma
            learning_rate=self.learning_rate,
            learning_rate_decay=self.learning_rate_decay,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            epsilon_decay_episodes=self.epsilon_decay_episodes,
            replay_capacity=self.replay_capacity,
            batch_size=self.batch_size,
            target_sync_interval=self.target_sync_interval,
            hidden_layers=self.hidden_layers,
            seed=self.seed,
        )

    def restrict_protocol(self) -> Protocol | None:
        return Protocol(self.protocol) if self.protocol is not None else None


# ---------------------------------------------------------------------------
# small I/O helpers
# ---------------------------------------------------------------------------


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_graph(path: str) -> AttackGraph:
    # Lenient parse: semantic problems are left for the caller to report.
    return parse_attack_graph(_read_text(path), strict=False)


def _load_valid_graph(path: str) -> AttackGraph:
    graph = _load_graph(path)
    violations = validate(graph)
    if violations:
        raise ValueError(
            f"graph {path} fails validation:\n  " + "\n  ".join(violations)
        )
    return graph


def _load_json(path: str) -> Any:
    return json.loads(_read_text(path))


def _sha256_file(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _csv_text(rows: Sequence[Sequence[str]]) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _curve_rows(curve: Sequence[tuple[int, float]]) -> list[list[str]]:
    rows = [["episode", "eval_total_reward"]]
    for episode, total in curve:
        rows.append([str(episode), repr(float(total))])
    return rows


def _parse_protocol(token: str) -> Protocol:
    try:
        return Protocol(token.strip().lower())
    except ValueError:
        raise ValueError(
            f"unknown protocol {token!r}; expected one of "
            f"{[p.value for p in Protocol]}"
        ) from None


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """defaults < config file (or manifest) < explicit flags."""

    doc: dict[str, Any] = {}
    if args.config is not None:
        loaded = _load_json(args.config)
        if not isinstance(loaded, dict):
            raise GraphFormatError(f"config {args.config}: expected an object")
        if "resolved_config" in loaded:  # a manifest from an earlier run
            loaded = loaded["resolved_config"]
        doc.update(loaded)
    overrides = {
        "seed": args.seed,
        "gamma": args.gamma,
        "w": args.w,
        "protocol": args.protocol,
        "mode": getattr(args, "mode", None),
        "episodes": args.episodes,
        "algorithm": args.algorithm,
        "max_steps_per_episode": args.max_steps,
        "eval_interval": args.eval_interval,
        "learning_rate": args.learning_rate,
        "learning_rate_decay": args.learning_rate_decay,
    }
    if getattr(args, "protocols", False):
        overrides["protocols"] = True
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value
    return RunConfig.from_document(doc)


def _terrain_variants(cfg: RunConfig) -> list[TerrainConfig]:
    restrict = cfg.restrict_protocol()
    return [
        TerrainConfig(mode=TerrainMode.VANILLA),
        TerrainConfig(mode=TerrainMode.REWARD, strength=cfg.w, restrict=restrict),
        TerrainConfig(mode=TerrainMode.STATE, restrict=restrict),
    ]


def _variant_document(v: VariantMetrics) -> dict[str, Any]:
    return {
        "variant": v.name,
        "hops": v.hops,
        "distinct_vertices": v.distinct_vertices,
        "total_reward": v.total_reward,
        "reward_per_hop": v.reward_per_hop,
        "reached_terminal": v.reached_terminal,
        "path": list(v.path),
        "revisited": v.revisited,
    }


def _write_manifest(
    out_dir: Path,
    command: str,
    cfg: RunConfig,
    graph_path: str,
    artifact_names: list[str],
) -> None:
    manifest = {
        "command": command,
        "resolved_config": cfg.to_document(),
        "graph": graph_path,
        "inputs": {graph_path: _sha256_file(Path(graph_path))},
        "artifacts": {
            name: _sha256_file(out_dir / name) for name in sorted(artifact_names)
        },
    }
    _write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _path_dot(graph: AttackGraph, metrics: VariantMetrics) -> str:
    # A revisiting rollout can collapse to a vertex list that is not an edge
    # path; exporting without a highlight keeps the artifact deterministic.
    if metrics.revisited:
        return export_dot(graph)
    return export_dot(graph, highlight=metrics.path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    graph = _load_graph(args.graph)
    violations = validate(graph)
    if violations:
        for line in violations:
            print(line)
        return EXIT_DOMAIN
    print(f"OK: {graph.vertex_count} vertices, {graph.edge_count} edges")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    if args.config is not None and args.preset is not None:
        raise ValueError("give either --preset or --config, not both")
    if args.config is not None:
        doc = _load_json(args.config)
        params = _topology_from_document(doc)
    else:
        params = PRESETS[args.preset or "desk"]
    if args.seed is not None:
        params = dataclasses.replace(params, seed=args.seed)
    if args.gauntlet is not None:
        blocked = frozenset(_parse_protocol(t) for t in args.gauntlet.split(","))
        graph = plant_gauntlet(params, blocked)
    else:
        graph = generate(params)
    text = serialize_attack_graph(graph)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_text(Path(args.out), text)
        print(f"wrote {args.out}: {graph.vertex_count} vertices, {graph.edge_count} edges")
    return EXIT_OK


def _topology_from_document(doc: Any) -> TopologyParams:
    if not isinstance(doc, dict):
        raise GraphFormatError("topology config: expected an object")
    kwargs = dict(doc)
    if "protocol_weights" in kwargs:
        kwargs["protocol_weights"] = {
            _parse_protocol(k): float(v) for k, v in kwargs["protocol_weights"].items()
        }
    if "complexity_weights" in kwargs:
        from .graph import Complexity

        kwargs["complexity_weights"] = {
            Complexity(k): float(v) for k, v in kwargs["complexity_weights"].items()
        }
    try:
        return TopologyParams(**kwargs)
    except TypeError as exc:
        raise ValueError(f"topology config: {exc}") from exc


def cmd_build(args: argparse.Namespace) -> int:
    graph = _load_valid_graph(args.graph)
    gamma = args.gamma if args.gamma is not None else 0.9
    mdp = build_cvss_mdp(graph, gamma=gamma)
    mode = TerrainMode(args.mode or "vanilla")
    restrict = _parse_protocol(args.protocol) if args.protocol else None
    w = args.w if args.w is not None else -2.0
    mdp = apply_terrain(mdp, graph, TerrainConfig(mode=mode, strength=w if mode is TerrainMode.REWARD else 0.0, restrict=restrict))
    text = serialize_mdp(mdp)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_text(Path(args.out), text)
        print(f"wrote {args.out}: {mdp.num_states} states, {mdp.num_action_slots} actions")
    return EXIT_OK


def _run_dir_command(args: argparse.Namespace, body) -> int:
    """Run a directory-artifact command; leave a FAILED marker on error."""

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = out_dir / "FAILED"
    try:
        code = body(out_dir)
    except BaseException as exc:
        try:
            failed.write_text(f"{type(exc).__name__}: {exc}\n", encoding="utf-8")
        except OSError:
            pass
        raise
    if failed.exists():  # stale marker from an earlier crashed run
        failed.unlink()
    return code


def _q_table_rows(mdp, table) -> list[list[str]]:
    rows = [["state", "action", "value"]]
    for s in range(mdp.num_states):
        for k in range(mdp.num_actions(s)):
            rows.append([mdp.vertex_id(s), str(k), repr(float(table.action_values(s)[k]))])
    return rows


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    graph = _load_valid_graph(args.graph)

    def body(out_dir: Path) -> int:
        mode = TerrainMode(cfg.mode)
        terrain_cfg = TerrainConfig(
            mode=mode,
            strength=cfg.w if mode is TerrainMode.REWARD else 0.0,
            restrict=cfg.restrict_protocol(),
        )
        base = build_cvss_mdp(graph, gamma=cfg.gamma)
        mdp = apply_terrain(base, graph, terrain_cfg)
        train_cfg = cfg.train_config()
        result = train(mdp, train_cfg)
        metrics = evaluate_variant(terrain_cfg.label(), mdp, train_cfg, result=result)
        artifacts = ["curve.csv", "metrics.json", "path.dot"]
        _write_text(out_dir / "curve.csv", _csv_text(_curve_rows(metrics.curve)))
        _write_text(
            out_dir / "metrics.json",
            json.dumps(_variant_document(metrics), indent=2, sort_keys=True) + "\n",
        )
        _write_text(out_dir / "path.dot", _path_dot(graph, metrics))
        if cfg.algorithm == "tabular":
            artifacts.append("q.csv")
            _write_text(out_dir / "q.csv", _csv_text(_q_table_rows(mdp, result.q)))
        _write_manifest(out_dir, "train", cfg, args.graph, artifacts)
        print(
            f"{metrics.name}: hops={metrics.hops} total_reward={metrics.total_reward:.3f} "
            f"reached={str(metrics.reached_terminal).lower()}"
        )
        return EXIT_OK

    return _run_dir_command(args, body)


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    graph = _load_valid_graph(args.graph)

    def body(out_dir: Path) -> int:
        report = compare_variants(
            graph,
            _terrain_variants(cfg),
            cfg.train_config(),
            gamma=cfg.gamma,
        )
        artifacts = ["summary.csv", "metrics.json"]
        _write_text(out_dir / "summary.csv", _csv_text(report.summary_rows()))
        _write_text(
            out_dir / "metrics.json",
            json.dumps(
                [_variant_document(v) for v in report.variants],
                indent=2,
                sort_keys=True,
            )
            + "\n",
        )
        for v in report.variants:
            curve_name = f"curve_{v.name}.csv"
            dot_name = f"path_{v.name}.dot"
            _write_text(out_dir / curve_name, _csv_text(_curve_rows(v.curve)))
            _write_text(out_dir / dot_name, _path_dot(graph, v))
            artifacts.extend([curve_name, dot_name])
        if cfg.protocols:
            # Per-protocol restricted curves for both terrain modes.
            for mode in (TerrainMode.REWARD, TerrainMode.STATE):
                strength = cfg.w if mode is TerrainMode.REWARD else 0.0
                sweep = protocol_sweep(
                    graph, mode, strength, cfg.train_config(), gamma=cfg.gamma
                )
                for metrics in sweep.values():
                    curve_name = f"curve_{metrics.name}.csv"
                    _write_text(out_dir / curve_name, _csv_text(_curve_rows(metrics.curve)))
                    artifacts.append(curve_name)
        _write_manifest(out_dir, "compare", cfg, args.graph, artifacts)
        for v in report.variants:
            print(
                f"{v.name}: hops={v.hops} distinct={v.distinct_vertices} "
                f"total_reward={v.total_reward:.3f} reached={str(v.reached_terminal).lower()}"
            )
        return EXIT_OK

    return _run_dir_command(args, body)


def cmd_export_dot(args: argparse.Namespace) -> int:
    graph = _load_graph(args.graph)
    highlight: list[str] = []
    if args.highlight:
        highlight = [t.strip() for t in args.highlight.split(",") if t.strip()]
    text = export_dot(graph, highlight=highlight)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_text(Path(args.out), text)
        print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config document or a manifest.json")
    p.add_argument("--seed", type=int, help="training seed")
    p.add_argument("--gamma", type=float, help="discount factor in (0, 1]")
    p.add_argument("--w", type=float, help="reward-penalty strength (<= 0)")
    p.add_argument(
        "--protocol",
        help="restrict terrain to one protocol (ftp|smtp|http|ssh)",
    )
    p.add_argument("--episodes", type=int, help="training episodes")
    p.add_argument("--algorithm", choices=ALGORITHMS, help="solver algorithm")
    p.add_argument("--max-steps", type=int, help="episode step cap")
    p.add_argument("--eval-interval", type=int, help="episodes between greedy evals")
    p.add_argument("--learning-rate", type=float, help="update step size")
    p.add_argument(
        "--learning-rate-decay",
        type=float,
        help="per-visit polynomial decay exponent (tabular)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cybermdp",
        description="Attack-graph decision processes with cyber-terrain adjustments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a graph document")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="generate a synthetic attack graph")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="topology preset")
    p.add_argument("--config", help="TopologyParams JSON document")
    p.add_argument("--seed", type=int, help="override the topology seed")
    p.add_argument(
        "--gauntlet",
        metavar="PROTOCOLS",
        help="emit the two-route fixture instead; comma-separated blocked protocols",
    )
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", help="compile a graph to a decision process")
    p.add_argument("graph")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--gamma", type=float, help="discount factor in (0, 1]")
    p.add_argument(
        "--mode",
        choices=[m.value for m in TerrainMode],
        help="terrain adjustment to apply (default vanilla)",
    )
    p.add_argument("--w", type=float, help="reward-penalty strength (<= 0)")
    p.add_argument("--protocol", help="restrict terrain to one protocol")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train one variant and export its curve")
    p.add_argument("graph")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--mode",
        choices=[m.value for m in TerrainMode],
        help="terrain adjustment (default reward)",
    )
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="matched-seed comparison of all variants")
    p.add_argument("graph")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--protocols",
        action="store_true",
        default=None,
        help="also sweep each protocol restriction per terrain mode",
    )
    _add_train_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-dot", help="render a graph to Graphviz DOT")
    p.add_argument("graph")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument(
        "--highlight",
        metavar="PATH",
        help="comma-separated vertex ids forming a path to highlight",
    )
    p.set_defaults(func=cmd_export_dot)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GraphFormatError, json.JSONDecodeError, UnicodeDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
