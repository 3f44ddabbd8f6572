"""Regenerate the bundled mini catalog and ratings under src/stereogen/data/."""

import csv
from pathlib import Path

from stereogen.ingest import catalog_from_rows
from stereogen.synth import GENRE_GROUPS, KEYWORD_GROUPS, mini_catalog_rows, synthetic_ratings

DATA = Path(__file__).resolve().parents[1] / "src" / "stereogen" / "data"


def main() -> None:
    rows = mini_catalog_rows()
    with open(DATA / "mini_catalog.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    catalog = catalog_from_rows(rows, ["genre", "keywords"])
    labels = {i: e["genre"] + e["keywords"] for i, e in catalog.items.items()}
    ratings = synthetic_ratings(labels, GENRE_GROUPS + KEYWORD_GROUPS, n_ratings=6000, seed=11)
    ratings.to_csv(DATA / "mini_ratings.csv", index=False, lineterminator="\n")


if __name__ == "__main__":
    main()
