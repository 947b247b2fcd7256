"""Command-line pipeline: build splits, pretrain, unlearn, evaluate,
verify the objective-equivalence identities, and export embeddings.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric error.
A JSON config file (--config) supplies defaults per subcommand; explicit
flags override it.  Relative --out paths are resolved under
$KGUNLEARN_OUTPUT_ROOT when that variable is set.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import baselines
from .baselines import BaselineConfig, METHODS
from .equivalence import approximation_gap_sweep, check_out_boundary_equivalence, \
    check_uniform_equivalence, random_instance
from .errors import ConfigError, DataError, KgUnlearnError, NumericError
from .evaluation import CSV_HEADER, RankingConfig, evaluate_step
from .kg import load_graph
from .losses import LossWeights
from .model import load_checkpoint, save_checkpoint
from .preference import MODE_OUT_BOUNDARY, MODE_UNIFORM
from .splits import BuildConfig, build_timeline, load_timeline, write_manifest
from .training import PretrainConfig, pretrain
from .unlearn import UnlearnConfig, run_timeline

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "KGUNLEARN_OUTPUT_ROOT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _resolve_out(path):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ranking_config(graph, raw: bool) -> RankingConfig:
    if raw:
        return RankingConfig(filtered=False)
    return RankingConfig(filtered=True, filter_source=graph.triples)


def cmd_build(args) -> int:
    config = BuildConfig(rate=args.rate, steps=args.steps, seed=args.seed,
                         quota_mode=args.quota_mode)
    graph = load_graph(args.data)
    timeline = build_timeline(graph, config)
    out_dir = _resolve_out(args.out)
    manifest_path = write_manifest(timeline, out_dir)
    print(f"wrote {timeline.n_steps} steps to {out_dir} (manifest: {manifest_path})")
    return 0


def cmd_pretrain(args) -> int:
    config = PretrainConfig(dim=args.dim, margin=args.margin,
                            learning_rate=args.lr, epochs=args.epochs,
                            batch_size=args.batch_size,
                            negatives_per_positive=args.negatives,
                            seed=args.seed)
    graph = load_graph(args.data)
    out_path = _resolve_out(args.out)
    log_path = args.log or out_path + ".log"
    started = time.perf_counter()
    with open(log_path, "w", encoding="utf-8", newline="\n") as log_fh:
        def on_epoch(epoch, loss):
            log_fh.write(f"epoch={epoch} loss={loss:.6f} "
                         f"seconds={time.perf_counter() - started:.3f}\n")

        model = pretrain(graph, config, on_epoch=on_epoch)
    save_checkpoint(model, out_path)
    _write_json({"command": "pretrain", "config": asdict(config),
                 "data": args.data, "checkpoint": out_path,
                 "n_entities": graph.n_entities, "n_relations": graph.n_relations,
                 "n_triples": len(graph.triples),
                 "seconds": time.perf_counter() - started},
                out_path + ".json")
    print(f"wrote checkpoint {out_path}")
    return 0


def _unlearn_graphdpo(args, graph, timeline, model, eval_config, out_dir):
    weights = LossWeights(beta=args.beta, dpo=args.lambda_dpo,
                          replay=args.lambda_replay, distill=args.lambda_distill,
                          replay_margin=args.replay_margin)
    mode = MODE_UNIFORM if args.sampler == "uniform" else MODE_OUT_BOUNDARY
    config = UnlearnConfig(epochs=args.epochs, batch_size=args.batch_size,
                           learning_rate=args.lr, patience=args.patience or None,
                           sampler_mode=mode,
                           resample_each_epoch=args.resample_each_epoch,
                           replay_cap_fraction=args.replay_cap,
                           replay_on_scores=args.replay_on_scores,
                           seed=args.seed)
    log_path = os.path.join(out_dir, "run.log")
    with open(log_path, "w", encoding="utf-8", newline="\n") as log_fh:
        def on_epoch(step, rec):
            forget = "" if rec.forget_mrr is None else f" forget_mrr={rec.forget_mrr:.6f}"
            log_fh.write(f"step={step} epoch={rec.epoch} dpo={rec.dpo:.6f} "
                         f"replay={rec.replay:.6f} distill={rec.distill:.6f} "
                         f"total={rec.total:.6f}{forget} seconds={rec.seconds:.3f}\n")

        results = run_timeline(model, graph, timeline, weights, config,
                               eval_config, on_epoch=on_epoch)
    reports = []
    for step, (snapshot, report) in enumerate(results, start=1):
        save_checkpoint(snapshot, os.path.join(out_dir, f"step_{step}.ckpt"))
        reports.append(report)
    return reports, {"weights": asdict(weights), "unlearn": asdict(config)}


def _unlearn_baseline(args, graph, timeline, model, eval_config, out_dir):
    config = BaselineConfig(epochs=args.baseline_epochs,
                            learning_rate=args.baseline_lr,
                            batch_size=args.batch_size, margin=args.replay_margin,
                            seed=args.seed)
    reports = []
    current = model
    step_seeds = np.random.SeedSequence(args.seed).spawn(timeline.n_steps)
    for step in range(1, timeline.n_steps + 1):
        seed = int(step_seeds[step - 1].generate_state(1)[0])
        if args.method == baselines.METHOD_RETRAIN:
            pre = PretrainConfig(dim=model.dim, margin=args.replay_margin,
                                 learning_rate=args.baseline_lr,
                                 epochs=max(args.baseline_epochs, 1),
                                 batch_size=args.batch_size, seed=seed)
            current = baselines.retrain(graph, timeline.remain(step), pre)
        elif args.method == baselines.METHOD_FINETUNE:
            step_cfg = BaselineConfig(**{**asdict(config), "seed": seed})
            current = baselines.finetune(current, graph, timeline.remain(step), step_cfg)
        else:
            step_cfg = BaselineConfig(**{**asdict(config), "seed": seed})
            current = baselines.neg_gradient(current, graph, timeline.forget(step), step_cfg)
        save_checkpoint(current, os.path.join(out_dir, f"step_{step}.ckpt"))
        reports.append(evaluate_step(current, timeline, step, eval_config))
    return reports, {"baseline": asdict(config)}


def cmd_unlearn(args) -> int:
    graph = load_graph(args.data)
    timeline = load_timeline(args.splits, graph)
    model = load_checkpoint(args.checkpoint)
    if model.n_entities != graph.n_entities or model.n_relations != graph.n_relations:
        raise DataError("checkpoint dimensions do not match the graph")
    eval_config = _ranking_config(graph, args.raw)
    out_dir = _resolve_out(args.out)
    os.makedirs(out_dir, exist_ok=True)
    if args.method == baselines.METHOD_GRAPHDPO:
        reports, extra = _unlearn_graphdpo(args, graph, timeline, model,
                                           eval_config, out_dir)
    else:
        reports, extra = _unlearn_baseline(args, graph, timeline, model,
                                           eval_config, out_dir)
    csv_path = os.path.join(out_dir, "reports.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for report in reports:
            fh.write(report.csv_row() + "\n")
    _write_json({"command": "unlearn", "method": args.method, "seed": args.seed,
                 "data": args.data, "splits": args.splits,
                 "checkpoint": args.checkpoint, "raw_ranking": args.raw,
                 "reports": [r.as_dict() for r in reports], **extra},
                os.path.join(out_dir, "summary.json"))
    for report in reports:
        print(report.csv_row())
    return 0


def cmd_evaluate(args) -> int:
    graph = load_graph(args.data)
    timeline = load_timeline(args.splits, graph)
    model = load_checkpoint(args.checkpoint)
    eval_config = _ranking_config(graph, args.raw)
    steps = [args.step] if args.step else range(1, timeline.n_steps + 1)
    rows = [evaluate_step(model, timeline, step, eval_config) for step in steps]
    print(CSV_HEADER)
    for report in rows:
        print(report.csv_row())
    if args.out:
        out_path = _resolve_out(args.out)
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for report in rows:
                fh.write(report.csv_row() + "\n")
    return 0


def cmd_verify_theory(args) -> int:
    rng = np.random.default_rng(args.seed)
    instances = []
    all_pass = True
    for k in range(args.instances):
        n_entities = int(rng.integers(5, 51))
        n_relations = int(rng.integers(1, 4))
        n_triples = int(rng.integers(n_entities, 3 * n_entities))
        graph, model, queries = random_instance(
            n_entities, n_relations, n_triples, n_forget=min(10, n_triples),
            dim=8, seed=args.seed + 1000 + k)
        check = check_uniform_equivalence(model, graph, queries)
        ob = check_out_boundary_equivalence(model, graph, queries)
        offset = check.offset + (0.01 if args.corrupt else 0.0)
        residual = abs(check.e_pref - (check.scale * check.e_unlearn - offset))
        ok = residual < 1e-12 and check.bounds_ok and ob.exact_residual < 1e-12
        all_pass &= ok
        instances.append({
            "n_entities": n_entities, "scale": check.scale, "offset": offset,
            "uniform_residual": residual,
            "out_boundary_exact_residual": ob.exact_residual,
            "bounds_ok": check.bounds_ok, "pass": ok,
        })
    sweep = approximation_gap_sweep((10, 100, 1000), boundary_size=3,
                                    n_forget=2, dim=8, seed=args.seed)
    gaps = [row["approx_gap"] for row in sweep]
    sweep_ok = all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
    all_pass &= sweep_ok
    payload = {"command": "verify-theory", "seed": args.seed,
               "instances": instances, "approximation_sweep": sweep,
               "sweep_monotone": sweep_ok, "all_pass": all_pass}
    if args.out:
        _write_json(payload, _resolve_out(args.out))
    for row in instances:
        print(f"|E|={row['n_entities']:3d} scale={row['scale']:.6f} "
              f"offset={row['offset']:.6f} residual={row['uniform_residual']:.2e} "
              f"{'ok' if row['pass'] else 'FAIL'}")
    print(f"approximation gaps {gaps} monotone={sweep_ok}")
    if not all_pass:
        raise NumericError("equivalence verification failed")
    return 0


def cmd_export(args) -> int:
    graph = load_graph(args.data)
    model = load_checkpoint(args.checkpoint)
    if model.n_entities != graph.n_entities:
        raise DataError("checkpoint entity count does not match the graph")
    out_path = _resolve_out(args.out)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for i, name in enumerate(graph.entity_names):
            vec = "\t".join(f"{v:.17g}" for v in model.entities[i])
            fh.write(f"{i}\t{name}\t{vec}\n")
    print(f"wrote {graph.n_entities} rows to {out_path}")
    return 0


def _add_build(sub):
    p = sub.add_parser("build", help="construct per-step forgetting splits")
    p.add_argument("--data", required=True, help="TSV triple file")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quota-mode", choices=("constant", "per_candidate"),
                   default="constant")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build)


def _add_pretrain(sub):
    p = sub.add_parser("pretrain", help="train a fresh embedding model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--margin", type=float, default=8.0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_pretrain)


def _add_unlearn(sub):
    p = sub.add_parser("unlearn", help="run continual unlearning over a timeline")
    p.add_argument("--data", required=True)
    p.add_argument("--splits", required=True, help="directory from `build`")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--method", choices=METHODS, default="graphdpo")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="raw (unfiltered) ranking")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--lambda-dpo", type=float, default=1.0)
    p.add_argument("--lambda-replay", type=float, default=1.0)
    p.add_argument("--lambda-distill", type=float, default=1.0)
    p.add_argument("--replay-margin", type=float, default=8.0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--patience", type=int, default=5,
                   help="early-stop patience in epochs; 0 disables")
    p.add_argument("--sampler", choices=("out-boundary", "uniform"),
                   default="out-boundary")
    p.add_argument("--resample-each-epoch", action="store_true")
    p.add_argument("--replay-cap", type=float, default=0.10)
    p.add_argument("--replay-on-scores", action="store_true")
    p.add_argument("--baseline-epochs", type=int, default=10)
    p.add_argument("--baseline-lr", type=float, default=1e-3)
    p.set_defaults(func=cmd_unlearn)


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a timeline")
    p.add_argument("--data", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--raw", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)


def _add_verify(sub):
    p = sub.add_parser("verify-theory",
                       help="check the objective-equivalence identities")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--corrupt", action="store_true",
                   help="perturb a constant to confirm the checker fails")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify_theory)


def _add_export(sub):
    p = sub.add_parser("export", help="export entity embeddings as TSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgunlearn", description=__doc__)
    parser.add_argument("--config", default=None,
                        help="JSON file with per-subcommand defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.command_parsers = {}
    for add in (_add_build, _add_pretrain, _add_unlearn, _add_evaluate,
                _add_verify, _add_export):
        add(sub)
    parser.command_parsers = dict(sub.choices)
    return parser


def _apply_config_file(parser, argv):
    """Inject config-file values as subcommand defaults so explicit flags win."""
    if "--config" not in argv:
        return
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return
    path = argv[i + 1]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    command = next((a for a in argv[:i] + argv[i + 2:] if not a.startswith("-")), None)
    section = payload.get(command)
    if command in parser.command_parsers and isinstance(section, dict):
        parser.command_parsers[command].set_defaults(**section)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except KgUnlearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
