"""Drive every CLI command against a synthetic dataset in a scratch directory.

    python3 demos/cli_tour.py [workdir]

The same steps work on MovieLens: point ``[dataset]`` at ratings.dat and
movies.dat with ``format = "movielens"``.
"""

import sys
import tempfile
from pathlib import Path

from bubblesim.catalog import write_generic_csv
from bubblesim.cli import main
from bubblesim.synthetic import make_synthetic

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="bubblesim-"))
work.mkdir(parents=True, exist_ok=True)

catalog, raw = make_synthetic(seed=0)
write_generic_csv(catalog, raw, work / "interactions.csv", work / "items.csv")
(work / "rating_reference.csv").write_text("rating,ratio\n1,0.06\n2,0.11\n3,0.26\n4,0.35\n5,0.22\n")
(work / "run.toml").write_text(
    """\
output_dir = "out"

[dataset]
format = "csv"
item_noun = "items"

[simulation]
frequent_pool = 50
sample_size = 50

[recommender]
kind = "popularity"

[sweep]
fractions = [0.0, 0.3, 0.6, 0.9]

[report]
rating_reference = "rating_reference.csv"
"""
)
main(["ingest", "--emit-defaults", str(work / "reference.toml")])

config = str(work / "run.toml")
for command in ("ingest", "evaluate", "contrast", "groups", "report", "sweep"):
    print(f"\n$ bubblesim {command} --config run.toml")
    if main([command, "--config", config]) != 0:
        sys.exit(1)

print(f"\nartifacts in {work / 'out'}:")
for path in sorted((work / "out").iterdir()):
    print("  ", path.name)
