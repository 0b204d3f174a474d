"""Accuracy against bubble escape as more of each page is randomized.

Replacing part of every page with random unseen items costs hit rate but
lifts exposure diversity. This prints both sides for one seed.

    python3 demos/randomization_tradeoff.py [recommender]
"""

import sys

from bubblesim.metrics import bep, evaluate_accuracy
from bubblesim.recommenders import RecommenderSpec
from bubblesim.simulation import SimulationConfig, run_contrastive
from bubblesim.synthetic import make_synthetic

kind = sys.argv[1] if len(sys.argv) > 1 else "popularity"
catalog, raw = make_synthetic(seed=0)
spec = RecommenderSpec(kind, seed=0)

print(f"{'fraction':>8}  {'HR@20':>6}  {'NDCG@20':>7}  {'BEP':>6}")
for fraction in (0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0):
    acc = evaluate_accuracy(spec, raw, catalog, (20,), randomize_fraction=fraction)
    config = SimulationConfig(recommender=spec, randomize_fraction=fraction, frequent_pool=50, sample_size=50)
    value = bep(run_contrastive(config, catalog, raw), catalog).overall
    print(f"{fraction:8.1f}  {acc.hr[20]:6.3f}  {acc.ndcg[20]:7.4f}  {value:6.3f}")
