#!/usr/bin/env python3
# Copyright 2026 The mdlm Authors
# SPDX-License-Identifier: Apache-2.0
"""Generates the small E2E-style restaurant corpora shipped under data/.

Outputs are deterministic; rerunning overwrites the files byte-for-byte.
"""
import json
import random
from pathlib import Path

NAMES = ["The Mill", "Aromi", "Zizzi", "Cotto", "Wildwood", "Fitzbillies",
         "Alimentum", "The Punter", "Blue Spice", "The Eagle", "Loch Fyne",
         "Strada", "Giraffe", "Clowns", "Browns"]
FOODS = ["Japanese", "Indian", "Italian", "French", "Chinese", "English"]
PRICES = ["cheap", "moderate", "expensive"]
AREAS = ["riverside", "city centre"]
EAT = ["restaurant", "pub", "coffee shop"]

TEMPLATES = [
    ("{name} is a {price} {food} {eat} .", ("name", "priceRange", "food", "eatType")),
    ("{name} serves {food} food in the {area} .", ("name", "food", "area")),
    ("there is a {food} {eat} called {name} .", ("food", "eatType", "name")),
    ("{name} is a {eat} near the {area} .", ("name", "eatType", "area")),
    ("the {food} {eat} {name} is {price} .", ("food", "eatType", "name", "priceRange")),
    ("{name} offers {price} {food} food .", ("name", "priceRange", "food")),
]


def make(rng, n):
    rows = []
    for _ in range(n):
        text, fields = rng.choice(TEMPLATES)
        values = {
            "name": rng.choice(NAMES),
            "food": rng.choice(FOODS),
            "priceRange": rng.choice(PRICES),
            "area": rng.choice(AREAS),
            "eatType": rng.choice(EAT),
        }
        sentence = text.format(name=values["name"], food=values["food"],
                               price=values["priceRange"], area=values["area"],
                               eat=values["eatType"])
        rows.append({"text": sentence,
                     "attributes": {f: values[f] for f in fields}})
    return rows


def write(path, rows):
    with open(path, "w", encoding="utf-8") as out:
        for row in rows:
            out.write(json.dumps(row, sort_keys=True) + "\n")


def main():
    here = Path(__file__).resolve().parent
    write(here / "toy50.jsonl", make(random.Random(7), 50))
    write(here / "toy_val.jsonl", make(random.Random(11), 60))
    write(here / "e2e_toy500.jsonl", make(random.Random(23), 500))


if __name__ == "__main__":
    main()
