"""Experiment driver CLI.

Subcommands:
  model        Monte-Carlo sweep of the stochastic honesty/coercion model
  sim          Monte-Carlo sweep of the agent-based world simulator
  validate     pointwise + global JSD between model and simulation maps
  verify-tree  run verification on an explicit tree/confirmations file

Every subcommand is deterministic given (config, seed), for any --jobs.
Exit codes for verify-tree: 0 truthful, 1 untruthful, 2 input error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from importlib import resources
from pathlib import Path

from . import core, metrics, model, output, world
from .config import ExperimentConfig, load_config, _theta_from_mapping
from .world import ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpop", description="Tree-Proof-of-Position experiments"
    )
    parser.add_argument("--config", type=Path, help="YAML experiment config")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--grid-step", type=float, help="override the grid step")
    parser.add_argument("--out", type=Path, help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("model", help="sweep the stochastic model over the grid")
    sub.add_parser("sim", help="sweep the agent-based simulator over the grid")

    p_val = sub.add_parser("validate", help="compare model and simulation maps")
    p_val.add_argument("--model-r", type=Path, help="model reliability CSV")
    p_val.add_argument("--model-s", type=Path, help="model security CSV")
    p_val.add_argument("--sim-r", type=Path, help="simulation reliability CSV")
    p_val.add_argument("--sim-s", type=Path, help="simulation security CSV")
    p_val.add_argument("--theta-label", default="", help="label stored in the report")

    p_ver = sub.add_parser("verify-tree", help="verify an explicit witness tree")
    p_ver.add_argument("tree", type=Path, help="tree JSON (may embed confirmations)")
    p_ver.add_argument(
        "--confirmations",
        type=Path,
        help="JSON list of [witness, parent, bool] triples",
    )
    p_ver.add_argument("--threshold", "-t", default=None, help="threshold t")
    p_ver.add_argument("--depth", "-d", type=int, default=None)
    p_ver.add_argument(
        "--witnesses", "-w", default=None, help="comma-separated counts, e.g. 2,2"
    )
    p_ver.add_argument(
        "--duplicate-policy",
        choices=[p.value for p in core.DuplicatePolicy],
        default=None,
    )
    return parser


def _experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.grid_step is not None:
        updates["grid_step"] = args.grid_step
    if args.out is not None:
        updates["output_dir"] = args.out
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _write_pair(outdir: Path, stem_r: str, stem_s: str, r_map, s_map, grid_step):
    outdir.mkdir(parents=True, exist_ok=True)
    for stem, pm, label in (
        (stem_r, r_map, "reliability"),
        (stem_s, s_map, "security"),
    ):
        csv_path = outdir / f"{stem}.csv"
        output.write_map_csv(csv_path, pm)
        output.render_heatmap_svg(
            outdir / f"{stem}.svg",
            pm.values,
            grid_step,
            f"{label} ({pm.source.value})",
        )
        print(f"wrote {csv_path}")


def cmd_model(cfg: ExperimentConfig, jobs: int) -> int:
    r_map, s_map = model.sweep_grid(
        cfg.theta, cfg.grid_step, cfg.model_trees_per_cell, cfg.master_seed, jobs=jobs
    )
    _write_pair(cfg.output_dir, "r_model", "s_model", r_map, s_map, cfg.grid_step)
    return 0


def cmd_sim(cfg: ExperimentConfig, jobs: int) -> int:
    r_map, s_map = world.sweep_world(
        cfg.world,
        cfg.theta,
        cfg.grid_step,
        cfg.sim_runs_per_cell,
        cfg.master_seed,
        jobs=jobs,
    )
    _write_pair(cfg.output_dir, "r_sim", "s_sim", r_map, s_map, cfg.grid_step)
    return 0


def cmd_validate(
    model_r: Path,
    model_s: Path,
    sim_r: Path,
    sim_s: Path,
    outdir: Path,
    theta_label: str = "",
) -> int:
    reports = []
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = [
        (metrics.MapKind.RELIABILITY, model_r, sim_r, "jsd_r"),
        (metrics.MapKind.SECURITY, model_s, sim_s, "jsd_s"),
    ]
    for kind, m_path, s_path, stem in pairs:
        m_map = output.read_map_csv(m_path, kind, metrics.MapSource.MODEL)
        s_map = output.read_map_csv(s_path, kind, metrics.MapSource.SIMULATION)
        report = metrics.JsdReport(
            kind=kind,
            theta_label=theta_label,
            global_value=metrics.global_jsd(m_map, s_map),
            pointwise=metrics.pointwise_jsd(m_map, s_map),
        )
        csv_path = outdir / f"{stem}.csv"
        output.write_grid_csv(csv_path, m_map.grid_step, report.pointwise)
        output.render_heatmap_svg(
            outdir / f"{stem}.svg",
            report.pointwise,
            m_map.grid_step,
            f"pointwise JSD ({kind.value})",
        )
        reports.append(report.to_json(str(csv_path)))
        print(f"global JSD ({kind.value}): {report.global_value:.6f}")
    (outdir / "jsd_report.json").write_text(
        json.dumps(reports, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {outdir / 'jsd_report.json'}")
    return 0


def bundled_example_path() -> Path:
    """The packaged worked-example tree (depth 2, two witnesses per node)."""
    return Path(resources.files("tpop") / "data" / "figure3.json")


def _verify_tree_params(args, cfg: ExperimentConfig) -> core.TPoPParams:
    if args.threshold is None and args.depth is None and args.witnesses is None:
        return cfg.theta
    if args.witnesses is None or args.threshold is None:
        raise core.InvalidInput(
            "--threshold and --witnesses are both required when overriding theta"
        )
    witnesses = tuple(int(w) for w in str(args.witnesses).split(","))
    depth = args.depth if args.depth is not None else len(witnesses)
    mapping = {
        "threshold": args.threshold,
        "depth": depth,
        "witnesses": witnesses,
    }
    if args.duplicate_policy:
        mapping["duplicate_policy"] = args.duplicate_policy
    return _theta_from_mapping(mapping)


def cmd_verify_tree(tree_path: Path, params: core.TPoPParams, confirmations_path) -> int:
    try:
        data = json.loads(Path(tree_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read tree file: {exc}", file=sys.stderr)
        return 2
    tree_data = data.get("tree", data) if isinstance(data, dict) else data
    if confirmations_path is not None:
        try:
            triples = json.loads(Path(confirmations_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read confirmations: {exc}", file=sys.stderr)
            return 2
    else:
        triples = data.get("confirmations") if isinstance(data, dict) else None
        if triples is None:
            print("error: no confirmations given", file=sys.stderr)
            return 2
    try:
        tree = core.WitnessTree.from_json(tree_data)
        confirmed = frozenset(
            (w, p) for w, p, flag in triples if bool(flag)
        )
        oracle = core.StaticOracle(confirmations=confirmed)
        outcome = core.verify(tree, params, oracle)
    except (core.InvalidInput, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("verdict: " + ("truthful" if outcome.verdict else "untruthful"))
    depth = params.depth
    for offset, m in enumerate(outcome.per_level_confirmed):
        print(f"confirmed at level {depth - offset}: {m}")
    print("eliminated: " + (", ".join(sorted(map(str, outcome.eliminated))) or "none"))
    if outcome.failure_level is not None:
        print(f"failed at level: {outcome.failure_level}")
    return 0 if outcome.verdict else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify-tree":
            cfg = _experiment_config(args)
            params = _verify_tree_params(args, cfg)
            return cmd_verify_tree(args.tree, params, args.confirmations)
        cfg = _experiment_config(args)
        if args.command == "model":
            return cmd_model(cfg, args.jobs)
        if args.command == "sim":
            return cmd_sim(cfg, args.jobs)
        if args.command == "validate":
            outdir = cfg.output_dir
            return cmd_validate(
                args.model_r or outdir / "r_model.csv",
                args.model_s or outdir / "s_model.csv",
                args.sim_r or outdir / "r_sim.csv",
                args.sim_s or outdir / "s_sim.csv",
                outdir,
                theta_label=args.theta_label,
            )
    except (ConfigError, core.InvalidInput, metrics.MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
