#!/usr/bin/env python3
"""Check an sgdlm output directory against the export schema.

Every CSV listed in manifest.json must have the header
t,kind,label,statistic,value with kind from the closed set and a value that
parses as a float (nan and inf allowed). diagnose.json is accepted as is.
Exit status 1 on the first directory with problems.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import jsonschema

HEADER = ["t", "kind", "label", "statistic", "value"]
KINDS = {"forecast", "posterior", "counterfactual", "marglik", "factor", "monitor"}
SCHEMA = Path(__file__).resolve().parent.parent / "schemas" / "manifest.schema.json"


def check_table(path):
    problems = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != HEADER:
            return [f"{path.name}: header {header}"]
        rows = 0
        for lineno, row in enumerate(reader, start=2):
            rows += 1
            if len(row) != 5:
                problems.append(f"{path.name}:{lineno}: {len(row)} fields")
                continue
            if row[1] not in KINDS:
                problems.append(f"{path.name}:{lineno}: kind '{row[1]}'")
            try:
                v = float(row[4])
            except ValueError:
                problems.append(f"{path.name}:{lineno}: value '{row[4]}'")
                continue
            if math.isnan(v) and row[4] != "nan":
                problems.append(f"{path.name}:{lineno}: nan spelled '{row[4]}'")
        if rows == 0:
            problems.append(f"{path.name}: no rows")
    return problems


def check_dir(d):
    manifest_path = d / "manifest.json"
    if not manifest_path.exists():
        return [f"{d}: no manifest.json"]
    manifest = json.loads(manifest_path.read_text())
    schema = json.loads(SCHEMA.read_text())
    try:
        jsonschema.validate(manifest, schema)
    except jsonschema.ValidationError as e:
        return [f"{manifest_path}: {e.message}"]
    problems = []
    for name in manifest["outputs"]:
        p = d / name
        if not p.exists():
            problems.append(f"{d}: missing output {name}")
        elif p.suffix == ".csv" and manifest["command"] != "simulate":
            problems.extend(check_table(p))
    return problems


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dirs", nargs="+", type=Path)
    args = ap.parse_args()
    bad = False
    for d in args.dirs:
        problems = check_dir(d)
        for p in problems[:20]:
            print(p, file=sys.stderr)
        bad = bad or bool(problems)
        print(f"{d}: {'FAIL' if problems else 'ok'}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
