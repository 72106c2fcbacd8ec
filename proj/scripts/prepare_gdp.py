#!/usr/bin/env python3
"""Build data/gdp.csv from the West Germany reunification panel.

The input is the long-format country/year panel from the replication files
of the synthetic control study of German reunification (repgermany.dta, or
a CSV export of it with columns country, year, gdp). It is not shipped
here; pass a local copy with --input, or a download link with --url.

Output is a wide table: first column year, then one column per series label
of data/gdp_graph.json, annual per capita GDP levels for 1960-2003.
With --check the script only validates an existing wide table.
"""

import argparse
import io
import json
import sys
import urllib.request
from pathlib import Path

import pandas as pd

ROOT = Path(__file__).resolve().parent.parent
NAMES = {
    "Australia": "AUS", "Austria": "AUT", "Belgium": "BEL", "Denmark": "DNK", "France": "FRA",
    "West Germany": "DEU", "Italy": "ITA", "Japan": "JPN", "Netherlands": "NLD", "New Zealand": "NZD",
    "Norway": "NOR", "Portugal": "PRT", "Spain": "ESP", "Switzerland": "CHE", "UK": "GBR", "USA": "USA",
}
YEARS = list(range(1960, 2004))


def labels():
    return json.loads((ROOT / "data" / "gdp_graph.json").read_text())["labels"]


def read_panel(raw, name):
    if name.endswith(".dta"):
        return pd.read_stata(io.BytesIO(raw))
    return pd.read_csv(io.BytesIO(raw))


def to_wide(panel):
    panel = panel.rename(columns=str.lower)
    missing = {"country", "year", "gdp"} - set(panel.columns)
    if missing:
        raise SystemExit(f"input lacks columns {sorted(missing)}")
    panel = panel[panel["year"].between(YEARS[0], YEARS[-1])].copy()
    panel["label"] = panel["country"].map(NAMES)
    unknown = sorted(set(panel.loc[panel["label"].isna(), "country"]))
    if unknown:
        raise SystemExit(f"unmapped countries: {unknown}")
    wide = panel.pivot(index="year", columns="label", values="gdp")
    wide.index = wide.index.astype(int)
    return wide[labels()]


def check(path):
    wide = pd.read_csv(path, index_col=0)
    errors = []
    if list(wide.columns) != labels():
        errors.append(f"columns {list(wide.columns)} do not match the graph labels")
    if list(wide.index) != YEARS:
        errors.append(f"years run {wide.index.min()}..{wide.index.max()} ({len(wide)} rows), want 1960..2003")
    na = wide.isna().stack()
    if na.any():
        errors.append("missing values at " + ", ".join(f"{y}/{c}" for y, c in na[na].index[:5]))
    if (wide <= 0).any().any():
        errors.append("non-positive GDP levels")
    return errors


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--input", type=Path, help="local repgermany.dta or CSV panel")
    src.add_argument("--url", help="download location of the panel file")
    ap.add_argument("--output", type=Path, default=ROOT / "data" / "gdp.csv")
    ap.add_argument("--check", action="store_true", help="only validate --output")
    args = ap.parse_args()
    if not args.check:
        if args.input:
            raw, name = args.input.read_bytes(), args.input.name
        elif args.url:
            with urllib.request.urlopen(args.url) as r:
                raw, name = r.read(), args.url.split("?")[0]
        else:
            ap.error("one of --input, --url or --check is required")
        to_wide(read_panel(raw, name)).to_csv(args.output, index_label="year")
    errors = check(args.output)
    for e in errors:
        print(f"{args.output}: {e}", file=sys.stderr)
    if not errors:
        print(f"{args.output}: ok, 44 years x {len(labels())} series")
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
