"""Strict TOML run configuration."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agents import DEFAULT_POLICIES, POLICY_KINDS, BehaviorPolicy
from .llm import LlmConfig
from .recommenders import DEFAULT_HYPERPARAMETERS, RecommenderSpec
from .simulation import SimulationConfig

DEFAULT_SWEEP = tuple(round(0.1 * k, 1) for k in range(10))


class ConfigError(ValueError):
    pass


REFERENCE_CONFIG = """\
# bubblesim run configuration (reference; every key shown with its default)

# Directory receiving all artifacts; relative paths resolve against this file.
output_dir = "runs/default"

[dataset]
format = "movielens"          # "movielens" (.dat, '::'-delimited) or "csv"
interactions = "ratings.dat"  # ratings file (MovieLens) or interactions CSV
items = "movies.dat"          # items file
item_noun = "movies"          # substituted for [item] in LLM prompts

[simulation]
rounds = 8                    # T
page_size = 20                # K
master_seed = 0
randomize_fraction = 0.0      # share of each page replaced by random items
frequent_pool = 1000          # most-active users forming the cold-start log
sample_size = 200             # cohort size N, drawn from the frequent pool
positive_policy = "positive"  # policy kind run by the positive arm
negative_policy = "negative"  # policy kind run by the negative arm

[recommender]
kind = "bpr_mf"               # random | popularity | item_knn | bpr_mf | graph_prop
latent_dim = 32
learning_rate = 0.05
regularization = 0.01
epochs = 30
neighbors = 50
propagation_layers = 2

# Per-kind overrides of the behavior policies, e.g.
# [policies.positive]
# n_match = 4
# n_explore = 2
# taste_threshold = 0.05
# conformity_alpha = { low = 0.2, mid = 0.5, high = 0.8 }

[llm]
enabled = false
endpoint_url = "http://localhost:8000/v1/chat/completions"
model_name = "Qwen2.5-14B-Instruct-1M"
temperature = 0.0
max_tokens = 512
timeout = 60000               # milliseconds
max_retries = 3
in_flight_limit = 4
api_key_env_var = "BUBBLESIM_API_KEY"

[evaluate]
k = [10, 20]

[sweep]
fractions = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

[report]
rating_reference = ""         # optional CSV with columns rating,ratio
"""

_SECTIONS = {
    "output_dir": None,
    "dataset": {"format", "interactions", "items", "item_noun"},
    "simulation": {
        "rounds", "page_size", "master_seed", "randomize_fraction", "frequent_pool",
        "sample_size", "positive_policy", "negative_policy",
    },
    "recommender": {"kind", *DEFAULT_HYPERPARAMETERS},
    "policies": None,
    "llm": {"enabled", *LlmConfig.__dataclass_fields__},
    "evaluate": {"k"},
    "sweep": {"fractions"},
    "report": {"rating_reference"},
}
_POLICY_KEYS = {"n_match", "n_explore", "n_top", "taste_threshold", "conformity_alpha"}


@dataclass
class RunConfig:
    output_dir: Path
    dataset_format: str
    interactions_path: Path
    items_path: Path
    simulation: SimulationConfig
    llm: LlmConfig | None = None
    k_values: tuple = (10, 20)
    sweep_fractions: tuple = DEFAULT_SWEEP
    rating_reference: Path | None = None
    raw: dict = field(default_factory=dict)


def _check_keys(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(unknown)}")


def load_config(path, seed: int | None = None, out: str | None = None, llm: bool = False) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(data, path.parent, seed=seed, out=out, llm=llm)


def parse_config(data: dict, base: Path = Path("."), seed=None, out=None, llm=False) -> RunConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    for name, allowed in _SECTIONS.items():
        if allowed is not None and name in data:
            if not isinstance(data[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            _check_keys(data[name], allowed, name)
    policies_table = data.get("policies", {})
    for kind, table in policies_table.items():
        if kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind [policies.{kind}]")
        _check_keys(table, _POLICY_KEYS, f"policies.{kind}")

    resolve = lambda p: (base / p) if p else None
    ds = data.get("dataset", {})
    fmt = ds.get("format", "movielens")
    if fmt not in ("movielens", "csv"):
        raise ConfigError(f"dataset.format must be 'movielens' or 'csv', got {fmt!r}")
    default_files = ("ratings.dat", "movies.dat") if fmt == "movielens" else ("interactions.csv", "items.csv")

    policies = {}
    for kind, default in DEFAULT_POLICIES.items():
        overrides = dict(policies_table.get(kind, {}))
        params = {**default.__dict__, **overrides}
        policies[kind] = BehaviorPolicy(**params)
    for kind, table in policies_table.items():
        if kind == "custom":
            policies["custom"] = BehaviorPolicy("custom", **table)

    sim = dict(data.get("simulation", {}))
    arms = {}
    for arm in ("positive", "negative"):
        kind = sim.pop(f"{arm}_policy", arm)
        if kind not in policies:
            raise ConfigError(f"simulation.{arm}_policy refers to undefined policy {kind!r}")
        arms[arm] = policies[kind]
    rec = dict(data.get("recommender", {}))
    try:
        spec = RecommenderSpec(rec.pop("kind", "bpr_mf"), rec)
        if seed is not None:
            sim["master_seed"] = seed
        simulation = SimulationConfig(recommender=spec, policies=arms, item_noun=ds.get("item_noun", "movies"), **sim)
        llm_table = dict(data.get("llm", {}))
        enabled = llm_table.pop("enabled", False) or llm
        llm_cfg = LlmConfig(**{"endpoint_url": "http://localhost:8000/v1/chat/completions", "model_name": "Qwen2.5-14B-Instruct-1M", **llm_table})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if enabled:
        simulation = SimulationConfig(**{**simulation.__dict__, "llm_enabled": True})

    k_values = tuple(int(k) for k in data.get("evaluate", {}).get("k", (10, 20)))
    fractions = tuple(float(f) for f in data.get("sweep", {}).get("fractions", DEFAULT_SWEEP))
    if not k_values or min(k_values) < 1:
        raise ConfigError("evaluate.k must list positive integers")
    if any(not 0.0 <= f <= 1.0 for f in fractions):
        raise ConfigError("sweep fractions must lie in [0, 1]")
    output_dir = Path(out) if out else resolve(data.get("output_dir", "runs/default"))
    return RunConfig(
        output_dir=output_dir,
        dataset_format=fmt,
        interactions_path=resolve(ds.get("interactions", default_files[0])),
        items_path=resolve(ds.get("items", default_files[1])),
        simulation=simulation,
        llm=llm_cfg if enabled else None,
        k_values=k_values,
        sweep_fractions=fractions,
        rating_reference=resolve(data.get("report", {}).get("rating_reference", "")),
        raw=data,
    )
