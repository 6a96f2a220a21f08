#!/usr/bin/env python3
"""Standalone lexical-overlap oracle.

Reimplements the token rules from the data files without sharing code with
the crate, and prints exact fractions for the fixture pairs. The Rust tests
freeze these numbers.

    python3 crates/core/tests/oracles/lexical_oracle.py
"""
import json
import re
from fractions import Fraction
from pathlib import Path

HERE = Path(__file__).resolve().parent
DATA = HERE.parent.parent / "data"
FIX = HERE.parent / "fixtures"


def words(path):
    out = []
    for raw in path.read_text().splitlines():
        w = raw.strip()
        if w and not w.startswith("#"):
            out.append(w)
    return out


STOP = set(words(DATA / "stopwords.txt"))
SUFFIXES = sorted(words(DATA / "suffixes.txt"), key=len, reverse=True)


def stem(tok):
    for suf in SUFFIXES:
        if tok.endswith(suf) and len(tok) - len(suf) >= 3:
            tok = tok[: -len(suf)]
            break
    if tok.endswith("e") and len(tok) - 1 >= 3:
        tok = tok[:-1]
    return tok


def tokens(text):
    parts = re.split(r"[^0-9a-z]+", text.lower())
    return {stem(p) for p in parts if len(p) >= 2 and p not in STOP}


def score(statement, span):
    s = tokens(statement)
    if not s:
        return Fraction(1)
    return Fraction(len(s & tokens(span)), len(s))


def lines(name, first):
    text = (FIX / name).read_text().rstrip("\n").split("\n")
    return {first + i: t for i, t in enumerate(text)}


def span(doc, a, b):
    return "\n".join(doc[n] for n in range(a, b + 1))


excerpt = lines("openai_excerpt.txt", 106)
raw = lines("openai_raw.txt", 1)
para = json.loads((FIX / "paragraph_terms.json").read_text())
mismatch = json.loads((FIX / "mismatch_term.json").read_text())

cases = [
    ("paragraph[0] vs 108-109", para[0]["term"], span(excerpt, 108, 109)),
    ("paragraph[1] vs 110-111", para[1]["term"], span(excerpt, 110, 111)),
    ("paragraph[2] vs 112-114", para[2]["term"], span(excerpt, 112, 114)),
    ("paragraph[3] vs 115", para[3]["term"], span(excerpt, 115, 115)),
    ("mismatch vs raw 28", mismatch["term"], span(raw, 28, 28)),
    ("mismatch vs raw 29", mismatch["term"], span(raw, 29, 29)),
]
for label, stmt, text in cases:
    f = score(stmt, text)
    print(f"{label}: {f.numerator}/{f.denominator} = {float(f):.6f}")
