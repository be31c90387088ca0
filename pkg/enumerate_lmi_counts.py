#!/usr/bin/env python3
"""
enumerate_lmi_counts.py - brute-force LMI block and scalar counts

Reads a system file as plain JSON (no package imports) and walks every index
tuple of every LMI family with itertools, so its numbers can be compared with
what the assembler produces.

Usage:
  python3 enumerate_lmi_counts.py switched_ts_lmi/data/paper_siv.sys
  python3 enumerate_lmi_counts.py my.sys --minimize-zeta --json
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path


def _sym(d: int) -> int:
    return d * (d + 1) // 2


def enumerate_counts(document: dict, minimize_zeta: bool = False) -> dict:
    subs = document["subsystems"]
    n = len(subs)
    rules = [[len(m["rules"]) for m in s["modes"]] for s in subs]
    counts = {"G1": 0, "G2": 0, "G3": 0, "G4stab": 0, "G4rob": 0}
    scalars = 0

    for i, s in enumerate(subs):
        nx, p, u = s["state_dim"], s["output_dim"], s["input_dim"]
        for j, r in enumerate(rules[i]):
            for _k in range(r):
                counts["G1"] += 3
                scalars += _sym(nx) + _sym(p) + _sym(u) + u * p
            for _s, _k in itertools.product(range(r), repeat=2):
                scalars += _sym(nx)
            for _s, _k, _l in itertools.product(range(r), repeat=3):
                counts["G2"] += 1
                counts["G4stab"] += 1
                for alpha in range(n):
                    if alpha != i:
                        counts["G4rob"] += 1
        for j, jp in itertools.permutations(range(len(rules[i])), 2):
            counts["G3"] += rules[i][j] * rules[i][jp]

    pairs = list(itertools.permutations(range(n), 2))
    scalars += len(pairs)
    if minimize_zeta and n >= 2:
        scalars += n
    return {"blocks": counts, "total_blocks": sum(counts.values()), "scalars": scalars}


def main() -> None:
    parser = argparse.ArgumentParser(description="Enumerate LMI block and scalar counts of a system file")
    parser.add_argument("system", help="System file (JSON)")
    parser.add_argument("--minimize-zeta", action="store_true", help="Count the zeta2 variables too")
    parser.add_argument("--json", action="store_true", help="Print the counts as JSON")
    args = parser.parse_args()

    path = Path(args.system)
    if not path.exists():
        print(f"[x] system file not found: {path}", file=sys.stderr)
        sys.exit(2)
    result = enumerate_counts(json.loads(path.read_text(encoding="utf-8")), args.minimize_zeta)
    if args.json:
        print(json.dumps(result, indent=2))
        return
    for fam, c in result["blocks"].items():
        print(f"{fam:7s} {c}")
    print(f"total   {result['total_blocks']}")
    print(f"scalars {result['scalars']}")


if __name__ == "__main__":
    main()
