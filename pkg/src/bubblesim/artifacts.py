"""Run-directory artifacts: manifest, page/decision/log CSVs, reports."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict
from pathlib import Path

from .metrics import BepReport
from .simulation import ContrastPair, RunRecord
from .seeding import derive_seed

PAGES_COLUMNS = ("arm", "user_id", "round", "rank", "item_id", "score")
DECISIONS_COLUMNS = ("arm", "user_id", "round", "item_id", "rating")
LOG_COLUMNS = ("arm", "user_id", "item_id", "rating", "round")
PROFILE_COLUMNS = ("user_id", "activity_level", "conformity_level", "diversity_level", "favorite_genre", "taste_weights")


def file_digest(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).name.encode())
        h.update(b"\0")
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _writer(path, header):
    fh = open(path, "w", encoding="utf-8", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    return fh, w


def manifest(pair: ContrastPair, dataset: dict, input_hash: str) -> dict:
    cfg = pair.config
    return {
        "dataset": dataset,
        "input_sha256": input_hash,
        "simulation": {
            "rounds": cfg.rounds,
            "page_size": cfg.page_size,
            "cohort_size": cfg.cohort_size,
            "frequent_pool": cfg.frequent_pool,
            "randomize_fraction": cfg.randomize_fraction,
            "llm_enabled": cfg.llm_enabled,
            "item_noun": cfg.item_noun,
        },
        "recommender": {"kind": cfg.recommender.kind, **cfg.recommender.hyperparameters},
        "policies": {arm: {**asdict(p), "conformity_alpha": dict(p.conformity_alpha)} for arm, p in cfg.policies.items()},
        "seeds": {
            "master_seed": cfg.master_seed,
            "round_seeds": [derive_seed(cfg.master_seed, t) for t in range(1, cfg.rounds + 1)],
        },
        "cohort": [str(u) for u in pair.cohort],
        "counters": {
            arm: {"dropped_picks": run.dropped_picks, "llm_fallbacks": run.llm_fallbacks}
            for arm, run in (("positive", pair.positive_run), ("negative", pair.negative_run))
        },
    }


def write_run_tables(out: Path, runs: list[RunRecord]) -> None:
    pages_fh, pages = _writer(out / "pages.csv", PAGES_COLUMNS)
    dec_fh, decs = _writer(out / "decisions.csv", DECISIONS_COLUMNS)
    log_fh, logw = _writer(out / "log.csv", LOG_COLUMNS)
    with pages_fh, dec_fh, log_fh:
        for run in runs:
            for u in run.cohort:
                for t in range(1, run.rounds + 1):
                    page = run.pages[(u, t)]
                    for rank, (item, score) in enumerate(zip(page.items, page.scores), start=1):
                        pages.writerow([run.arm, u, t, rank, item, repr(float(score))])
                    for item, rating in run.decisions[(u, t)].chosen:
                        decs.writerow([run.arm, u, t, item, rating])
            for e in run.log:
                logw.writerow([run.arm, e.user_id, e.item_id, e.rating, e.round])


def write_profiles(path, profiles: dict) -> None:
    fh, w = _writer(path, PROFILE_COLUMNS)
    with fh:
        for u in sorted(profiles):
            p = profiles[u]
            tastes = "|".join(f"{c}:{wt!r}" for c, wt in sorted(p.taste_weights.items()))
            w.writerow([u, p.activity_level, p.conformity_level, p.diversity_level, p.favorite_genre, tastes])


def write_contrast(out, pair: ContrastPair, report: BepReport, dataset: dict, input_hash: str) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", manifest(pair, dataset, input_hash))
    write_run_tables(out, [pair.positive_run, pair.negative_run])
    write_profiles(out / "profiles.csv", pair.positive_run.profiles)
    write_json(out / "bep_report.json", report.to_dict())


def _read_rows(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing artifact {path}; run 'contrast' first")
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def read_pages(out, coerce=lambda x: x) -> dict:
    """``{arm: {(user_id, round): [item_id, ...]}}`` with user ids as strings."""
    pages: dict = {}
    for row in _read_rows(Path(out) / "pages.csv"):
        key = (row["user_id"], int(row["round"]))
        pages.setdefault(row["arm"], {}).setdefault(key, []).append(coerce(row["item_id"]))
    return pages


def read_decisions(out) -> list[dict]:
    return _read_rows(Path(out) / "decisions.csv")


def read_profiles(out) -> list[dict]:
    return _read_rows(Path(out) / "profiles.csv")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing artifact {path}; run 'contrast' first")
    return json.loads(path.read_text(encoding="utf-8"))
