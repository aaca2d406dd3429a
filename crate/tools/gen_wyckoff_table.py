#!/usr/bin/env python3
"""Convert pyxtal's Wyckoff and symbol databases into the bundled tables.

usage: gen_wyckoff_table.py path/to/pyxtal/database crates/core/data

Writes wyckoff_table.v1.jsonl and space_group_symbols.v1.txt.

Rows of the CSV are indexed by space group; each holds a Python literal list
of Wyckoff positions from the general position down to 'a', every position a
list of coordinate triplets such as '-x+1/2, y, 2z'.
"""

import ast
import csv
import json
import re
import sys
from fractions import Fraction

LETTERS = "abcdefghijklmnopqrstuvwxyzA"
RHOMBOHEDRAL = {146, 148, 155, 160, 161, 166, 167}
TERM = re.compile(r"([+-]?)(\d+(?:/\d+)?)?([xyz])?")


def lattice_class(sg):
    if sg <= 2:
        return "triclinic"
    if sg <= 15:
        return "monoclinic"
    if sg <= 74:
        return "orthorhombic"
    if sg <= 142:
        return "tetragonal"
    if sg <= 167:
        return "rhombohedral" if sg in RHOMBOHEDRAL else "trigonal"
    if sg <= 194:
        return "hexagonal"
    return "cubic"


def parse_component(expr):
    row = [Fraction(0)] * 4
    s = expr.replace(" ", "")
    pos = 0
    while pos < len(s):
        m = TERM.match(s, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse {expr!r}")
        sign, num, var = m.groups()
        if num is None and var is None:
            raise ValueError(f"cannot parse {expr!r}")
        v = Fraction(num) if num else Fraction(1)
        if sign == "-":
            v = -v
        row["xyz".index(var) if var else 3] += v
        pos = m.end()
    return row


def fmt(q):
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def main(src, dst):
    csv.field_size_limit(1 << 30)
    with open(f"{src}/symbols.json") as fh:
        symbols = json.load(fh)["space_group"]
    assert len(symbols) == 230
    with open(f"{dst}/space_group_symbols.v1.txt", "w") as fh:
        fh.write("\n".join(symbols) + "\n")
    with open(f"{src}/wyckoff_list.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    out = open(f"{dst}/wyckoff_table.v1.jsonl", "w")
    out.write("# wyckoff_table.v1: one Wyckoff position per line\n")
    for sg in range(1, 231):
        positions = ast.literal_eval(rows[sg][-1])
        n = len(positions)
        for i, ops in enumerate(reversed(positions)):
            maps = [[parse_component(c) for c in op.split(",")] for op in ops]
            free = [any(m[r][j] != 0 for m in maps for r in range(3)) for j in range(3)]
            rec = {
                "sg": sg,
                "letter": LETTERS[i],
                "mult": len(maps),
                "maps": [[[fmt(q) for q in r] for r in m] for m in maps],
                "free": free,
                "lattice_class": lattice_class(sg),
            }
            out.write(json.dumps(rec, separators=(",", ":")) + "\n")
        assert n <= len(LETTERS)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
