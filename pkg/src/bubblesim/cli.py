"""Command-line front end: ``bubblesim <command> --config run.toml``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import artifacts
from .agents import UserProfile
from .catalog import IngestError, load_generic_csv, load_movielens, write_generic_csv
from .config import REFERENCE_CONFIG, ConfigError, RunConfig, load_config
from .llm import LlmClient
from .metrics import (
    GROUPINGS,
    BepReport,
    bep,
    category_coverage,
    diversity,
    evaluate_accuracy,
    group_key,
    group_mean_bep,
    standardized_entropy,
    top1_genre_share,
)
from .simulation import run_contrastive
from .svg import bar_chart, line_chart, scatter

log = logging.getLogger("bubblesim")


def _say(args, msg: str):
    if not args.quiet:
        print(msg)


def load_dataset(cfg: RunConfig):
    if cfg.dataset_format == "movielens":
        return load_movielens(cfg.interactions_path, cfg.items_path)
    return load_generic_csv(cfg.interactions_path, cfg.items_path)


def _dataset_info(cfg: RunConfig) -> dict:
    return {"format": cfg.dataset_format, "interactions": cfg.interactions_path.name, "items": cfg.items_path.name}


def _item_coercer(catalog):
    if all(isinstance(i, int) for i in catalog.items):
        return int
    return str


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# --- commands ----------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, args) -> dict:
    catalog, raw = load_dataset(cfg)
    if not raw:
        raise IngestError("no interactions")
    users = {r.user_id for r in raw}
    summary = {"users": len(users), "items": len(catalog), "categories": catalog.n_categories, "interactions": len(raw)}
    snap = cfg.output_dir / "dataset"
    snap.mkdir(parents=True, exist_ok=True)
    write_generic_csv(catalog, raw, snap / "interactions.csv", snap / "items.csv")
    _say(args, " ".join(f"{k}={v}" for k, v in summary.items()))
    return summary


def _llm_client(cfg: RunConfig, out: Path):
    if not cfg.simulation.llm_enabled:
        return None
    return LlmClient(cfg.llm, trace_path=out / "llm_trace.jsonl", jitter_seed=cfg.simulation.master_seed)


def run_contrast_into(cfg: RunConfig, out: Path, catalog, raw, input_hash: str):
    out.mkdir(parents=True, exist_ok=True)
    client = _llm_client(cfg, out)
    if client is not None:
        (out / "llm_trace.jsonl").write_text("", encoding="utf-8")
    try:
        pair = run_contrastive(cfg.simulation, catalog, raw, client)
    finally:
        if client is not None:
            client.close()
    report = bep(pair, catalog)
    artifacts.write_contrast(out, pair, report, _dataset_info(cfg), input_hash)
    return pair, report


def cmd_contrast(cfg: RunConfig, args) -> BepReport:
    catalog, raw = load_dataset(cfg)
    digest = artifacts.file_digest(cfg.interactions_path, cfg.items_path)
    _, report = run_contrast_into(cfg, cfg.output_dir, catalog, raw, digest)
    _say(args, f"BEP={report.overall:.4f}")
    _say(args, "per_round=" + " ".join(f"{r:.4f}" for r in report.per_round))
    return report


def cmd_evaluate(cfg: RunConfig, args) -> dict:
    catalog, raw = load_dataset(cfg)
    spec = cfg.simulation.recommender.with_seed(cfg.simulation.master_seed)
    report = evaluate_accuracy(spec, raw, catalog, cfg.k_values)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    artifacts.write_json(cfg.output_dir / "accuracy_report.json", report.to_dict())
    for k in cfg.k_values:
        _say(args, f"HR@{k}={report.hr[k]:.4f} NDCG@{k}={report.ndcg[k]:.4f}")
    _say(args, f"MAP={report.map:.4f} excluded_users={report.excluded_users}")
    return report.to_dict()


def cmd_sweep(cfg: RunConfig, args) -> list:
    fractions = sorted(set(args.fractions if args.fractions else cfg.sweep_fractions))
    catalog, raw = load_dataset(cfg)
    digest = artifacts.file_digest(cfg.interactions_path, cfg.items_path)
    spec = cfg.simulation.recommender.with_seed(cfg.simulation.master_seed)
    k_values = sorted(set(cfg.k_values) | {20})
    rows = []
    for f in fractions:
        sub = replace(cfg, simulation=replace(cfg.simulation, randomize_fraction=f))
        _, report = run_contrast_into(sub, cfg.output_dir / "sweep" / f"fraction_{f:.2f}", catalog, raw, digest)
        acc = evaluate_accuracy(spec, raw, catalog, k_values, randomize_fraction=f)
        rows.append((f, acc.hr[20], acc.ndcg[20], report.overall))
        _say(args, f"fraction={f:.2f} HR@20={acc.hr[20]:.4f} NDCG@20={acc.ndcg[20]:.4f} BEP={report.overall:.4f}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(cfg.output_dir / "sweep.csv", ("fraction", "hr@20", "ndcg@20", "bep"), [[repr(v) for v in r] for r in rows])
    svg = scatter([(r[3], r[1], f"{r[0]:.0%}") for r in rows], "Accuracy vs BEP under page randomization", "BEP", "HR@20")
    (cfg.output_dir / "sweep.svg").write_text(svg, encoding="utf-8")
    return rows


def _profiles_from_csv(out: Path) -> list[UserProfile]:
    profiles = []
    for row in artifacts.read_profiles(out):
        tastes = {}
        for part in row["taste_weights"].split("|"):
            c, w = part.rsplit(":", 1)
            tastes[c] = float(w)
        profiles.append(
            UserProfile(row["user_id"], row["activity_level"], row["conformity_level"], row["diversity_level"], tastes)
        )
    return profiles


def cmd_groups(cfg: RunConfig, args) -> dict:
    out = cfg.output_dir
    data = artifacts.read_json(out / "bep_report.json")
    report = BepReport(data["per_round"], data["overall"], data["per_user"])
    profiles = _profiles_from_csv(out)
    result, rows = {}, []
    for grouping in GROUPINGS:
        means = group_mean_bep(report, profiles, grouping)
        sizes = Counter(group_key(p, grouping) for p in profiles)
        result[grouping] = means
        rows.extend([grouping, level, repr(v), sizes[level]] for level, v in means.items())
        svg = bar_chart(list(means), list(means.values()), f"Mean BEP by {grouping}", "mean per-user BEP")
        (out / f"groups_{grouping}.svg").write_text(svg, encoding="utf-8")
    _write_csv(out / "groups.csv", ("grouping", "level", "mean_bep", "n_users"), rows)
    for grouping, means in result.items():
        _say(args, f"{grouping}: " + " ".join(f"{k}={v:.3f}" for k, v in means.items()))
    return result


def _kl(p, q) -> float:
    return float(sum(a * math.log(a / b) for a, b in zip(p, q) if a > 0 and b > 0))


def cmd_report(cfg: RunConfig, args) -> dict:
    out = cfg.output_dir
    catalog, _ = load_dataset(cfg)
    pages = artifacts.read_pages(out, _item_coercer(catalog))
    trend_rows, metric_rows, trend = [], [], {}
    for arm in ("positive", "negative"):
        by_round: dict = {}
        for (u, t), items in pages[arm].items():
            by_round.setdefault(t, []).append(items)
        xs, ys = [], []
        for t in sorted(by_round):
            lists = by_round[t]
            mean_div = float(np.mean([diversity(p, catalog) for p in lists]))
            trend_rows.append([t, arm, repr(mean_div)])
            metric_rows.append([
                t, arm, repr(mean_div),
                repr(float(np.mean([standardized_entropy(p, catalog) for p in lists]))),
                repr(float(np.mean([category_coverage(p, catalog) for p in lists]))),
                repr(float(np.mean([top1_genre_share(p, catalog) for p in lists]))),
            ])
            xs.append(t)
            ys.append(mean_div)
        trend[arm] = (xs, ys)
    trend_rows.sort(key=lambda r: (r[0], r[1] != "positive"))
    metric_rows.sort(key=lambda r: (r[0], r[1] != "positive"))
    _write_csv(out / "trend.csv", ("round", "arm", "mean_diversity"), trend_rows)
    _write_csv(out / "metrics.csv", ("round", "arm", "diversity", "standardized_entropy", "category_coverage", "top1_genre"), metric_rows)
    svg = line_chart(trend, "Diversity of recommendations per round", "round", "mean distinct categories")
    (out / "trend.svg").write_text(svg, encoding="utf-8")

    result = {"trend": trend}
    ref_path = args.rating_reference or cfg.rating_reference
    if ref_path and Path(ref_path).is_file():
        with open(ref_path, encoding="utf-8", newline="") as fh:
            ref = {int(r["rating"]): float(r["ratio"]) for r in csv.DictReader(fh)}
        counts = Counter(int(r["rating"]) for r in artifacts.read_decisions(out))
        total = sum(counts.values())
        p = [counts.get(k, 0) / total for k in range(1, 6)]
        q = [ref.get(k, 0.0) for k in range(1, 6)]
        _write_csv(out / "ratings.csv", ("rating", "agent_ratio", "reference_ratio"),
                   [[k, repr(a), repr(b)] for k, a, b in zip(range(1, 6), p, q)])
        result["kl"] = _kl(p, q)
        _say(args, f"KL(agent||reference)={result['kl']:.4f}")
    for arm, (xs, ys) in trend.items():
        _say(args, f"{arm}: " + " ".join(f"{y:.2f}" for y in ys))
    return result


COMMANDS = {
    "ingest": cmd_ingest,
    "contrast": cmd_contrast,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
    "groups": cmd_groups,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=False, help="run configuration (TOML)")
    common.add_argument("--seed", type=int, help="override simulation.master_seed")
    common.add_argument("--out", help="override output_dir")
    common.add_argument("--llm", action="store_true", help="enable the LLM decision path")
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="bubblesim", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    ingest = sub.add_parser("ingest", parents=[common], help="parse a dataset and write a normalized snapshot")
    ingest.add_argument("--emit-defaults", metavar="PATH", help="write the commented reference config and exit")
    sub.add_parser("contrast", parents=[common], help="run both arms and compute BEP")
    sweep = sub.add_parser("sweep", parents=[common], help="randomization sweep: accuracy and BEP per fraction")
    sweep.add_argument("--fractions", type=float, nargs="+")
    sub.add_parser("evaluate", parents=[common], help="leave-one-out HR@k / NDCG@k / MAP")
    sub.add_parser("groups", parents=[common], help="mean per-user BEP by trait group")
    report = sub.add_parser("report", parents=[common], help="diversity trend and baseline metrics")
    report.add_argument("--rating-reference", help="CSV with columns rating,ratio")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "ingest" and args.emit_defaults:
        Path(args.emit_defaults).write_text(REFERENCE_CONFIG, encoding="utf-8")
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, llm=args.llm)
        COMMANDS[args.command](cfg, args)
    except (ConfigError, IngestError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
