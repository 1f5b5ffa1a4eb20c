#!/usr/bin/env python3
"""Builds the bundled fixture corpus and translation fixtures from the phrase bank.

Every phrase appears on its own, and the rest of the corpus pairs two phrases
as "a. b". Translations are composed the same way, so each fixture entry is a
faithful rendering of its corpus line. A handful of noise lines (fragments,
duplicates, stray whitespace) are mixed in for the filter to remove.

Usage: compose_fixture_corpus.py [--sentences 1000] [--seed 42]
"""

import argparse
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
PHRASES = ROOT / "data" / "fixtures" / "phrases.tsv"
CORPUS = ROOT / "data" / "corpus" / "messages.txt"
FIXTURES = ROOT / "data" / "fixtures" / "translations.tsv"

JOINERS = {"english": ". ", "hindi": "। ", "russian": ". "}


def load_phrases():
    rows = []
    for line in PHRASES.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        en, hi, ru = line.split("\t")
        rows.append({"english": en, "hindi": hi, "russian": ru})
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sentences", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    phrases = load_phrases()
    records = [dict(p) for p in phrases]

    pairs = [(i, j) for i in range(len(phrases)) for j in range(len(phrases)) if i != j]
    rng.shuffle(pairs)
    for i, j in pairs[: args.sentences - len(records)]:
        records.append({k: phrases[i][k] + JOINERS[k] + phrases[j][k] for k in JOINERS})
    rng.shuffle(records)

    lines = [r["english"] for r in records]
    assert len(set(lines)) == len(lines) == args.sentences

    # Noise the default filter drops: too short, exact repeats, and repeats
    # that only differ in whitespace.
    noise = ["ok", "k", "ya", "?", lines[3], lines[10], "  " + lines[20] + "  ", lines[30].replace(" ", "   ", 1)]
    for pos, extra in zip((5, 50, 120, 300, 450, 600, 800, 950), noise):
        lines.insert(pos, extra)

    CORPUS.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with FIXTURES.open("w", encoding="utf-8", newline="\n") as f:
        f.write("# source<TAB>target-label<TAB>translation\n")
        for r in records:
            for label in ("hindi", "russian"):
                f.write(f"{r['english']}\t{label}\t{r[label]}\n")


if __name__ == "__main__":
    main()
