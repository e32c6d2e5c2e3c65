#!/usr/bin/env python3
"""Regenerate the versioned data files under src/conceptnav/data/.

Everything here is deterministic (no RNG): the files are part of the
repository and this script only exists so they can be rebuilt or extended
in a controlled way.
"""

import json
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "conceptnav" / "data"

# Room -> objects found in that room. Labels are lowercase, single-space
# separated, and all appear in the detector vocabulary below.
ROOM_POOLS = {
    "hallway": [
        "coat rack", "doormat", "umbrella stand", "shoe rack",
        "console table", "picture frame", "key holder", "bench",
    ],
    "living room": [
        "sofa", "armchair", "television", "coffee table",
        "fireplace", "bookshelf", "rug", "cushion",
    ],
    "kitchen": [
        "oven", "stove", "refrigerator", "kettle",
        "toaster", "cutting board", "saucepan", "spice rack",
    ],
    "bedroom": [
        "bed", "pillow", "wardrobe", "dresser",
        "nightstand", "blanket", "alarm clock", "table lamp",
    ],
    "bathroom": [
        "toilet", "bathtub", "shower curtain", "towel rack",
        "washbasin", "toothbrush holder", "soap dish", "bath mat",
    ],
    "office": [
        "desk", "office chair", "computer monitor", "keyboard",
        "printer", "filing cabinet", "desk lamp", "notebook",
    ],
    "dining room": [
        "dining table", "dining chair", "sideboard", "wine glass",
        "napkin holder", "candlestick", "fruit bowl", "tablecloth",
    ],
    "laundry room": [
        "washing machine", "dryer", "laundry basket", "ironing board",
        "detergent bottle", "drying rack", "clothes hamper", "lint roller",
    ],
}

USED_FOR = {
    "coat rack": "hanging", "doormat": "wiping", "umbrella stand": "storage",
    "shoe rack": "storage", "console table": "decoration", "picture frame": "decoration",
    "key holder": "storage", "bench": "sitting",
    "sofa": "sitting", "armchair": "sitting", "television": "watching",
    "coffee table": "serving", "fireplace": "heating", "bookshelf": "storage",
    "rug": "decoration", "cushion": "sitting",
    "oven": "baking", "stove": "cooking", "refrigerator": "cooling",
    "kettle": "boiling", "toaster": "toasting", "cutting board": "chopping",
    "saucepan": "cooking", "spice rack": "storage",
    "bed": "sleeping", "pillow": "sleeping", "wardrobe": "storage",
    "dresser": "storage", "nightstand": "storage", "blanket": "warming",
    "alarm clock": "waking", "table lamp": "lighting",
    "toilet": "sanitation", "bathtub": "bathing", "shower curtain": "privacy",
    "towel rack": "hanging", "washbasin": "washing", "toothbrush holder": "storage",
    "soap dish": "storage", "bath mat": "drying",
    "desk": "working", "office chair": "sitting", "computer monitor": "displaying",
    "keyboard": "typing", "printer": "printing", "filing cabinet": "storage",
    "desk lamp": "lighting", "notebook": "writing",
    "dining table": "dining", "dining chair": "sitting", "sideboard": "storage",
    "wine glass": "drinking", "napkin holder": "storage", "candlestick": "lighting",
    "fruit bowl": "serving", "tablecloth": "decoration",
    "washing machine": "washing", "dryer": "drying", "laundry basket": "storage",
    "ironing board": "ironing", "detergent bottle": "cleaning",
    "drying rack": "drying", "clothes hamper": "storage", "lint roller": "cleaning",
}

IS_A = {
    "coat rack": "furniture", "doormat": "textile", "umbrella stand": "container",
    "shoe rack": "furniture", "console table": "furniture", "picture frame": "decoration",
    "key holder": "fixture", "bench": "furniture",
    "sofa": "furniture", "armchair": "furniture", "television": "appliance",
    "coffee table": "furniture", "fireplace": "fixture", "bookshelf": "furniture",
    "rug": "textile", "cushion": "textile",
    "oven": "appliance", "stove": "appliance", "refrigerator": "appliance",
    "kettle": "appliance", "toaster": "appliance", "cutting board": "utensil",
    "saucepan": "utensil", "spice rack": "fixture",
    "bed": "furniture", "pillow": "textile", "wardrobe": "furniture",
    "dresser": "furniture", "nightstand": "furniture", "blanket": "textile",
    "alarm clock": "device", "table lamp": "device",
    "toilet": "fixture", "bathtub": "fixture", "shower curtain": "textile",
    "towel rack": "fixture", "washbasin": "fixture", "toothbrush holder": "container",
    "soap dish": "container", "bath mat": "textile",
    "desk": "furniture", "office chair": "furniture", "computer monitor": "device",
    "keyboard": "device", "printer": "appliance", "filing cabinet": "furniture",
    "desk lamp": "device", "notebook": "stationery",
    "dining table": "furniture", "dining chair": "furniture", "sideboard": "furniture",
    "wine glass": "utensil", "napkin holder": "container", "candlestick": "fixture",
    "fruit bowl": "container", "tablecloth": "textile",
    "washing machine": "appliance", "dryer": "appliance", "laundry basket": "container",
    "ironing board": "furniture", "detergent bottle": "container",
    "drying rack": "fixture", "clothes hamper": "container", "lint roller": "device",
}

MADE_OF = {
    "coat rack": "wood", "doormat": "fiber", "umbrella stand": "metal",
    "shoe rack": "wood", "console table": "wood", "picture frame": "wood",
    "key holder": "metal", "bench": "wood",
    "sofa": "fabric", "armchair": "fabric", "television": "plastic",
    "coffee table": "wood", "fireplace": "stone", "bookshelf": "wood",
    "rug": "wool", "cushion": "fabric",
    "oven": "metal", "stove": "metal", "refrigerator": "metal",
    "kettle": "metal", "toaster": "metal", "cutting board": "wood",
    "saucepan": "metal", "spice rack": "wood",
    "bed": "wood", "pillow": "fabric", "wardrobe": "wood",
    "dresser": "wood", "nightstand": "wood", "blanket": "wool",
    "alarm clock": "plastic", "table lamp": "metal",
    "toilet": "ceramic", "bathtub": "ceramic", "shower curtain": "plastic",
    "towel rack": "metal", "washbasin": "ceramic", "toothbrush holder": "ceramic",
    "soap dish": "ceramic", "bath mat": "cotton",
    "desk": "wood", "office chair": "plastic", "computer monitor": "plastic",
    "keyboard": "plastic", "printer": "plastic", "filing cabinet": "metal",
    "desk lamp": "metal", "notebook": "paper",
    "dining table": "wood", "dining chair": "wood", "sideboard": "wood",
    "wine glass": "glass", "napkin holder": "metal", "candlestick": "brass",
    "fruit bowl": "ceramic", "tablecloth": "linen",
    "washing machine": "metal", "dryer": "metal", "laundry basket": "plastic",
    "ironing board": "metal", "detergent bottle": "plastic",
    "drying rack": "metal", "clothes hamper": "wicker", "lint roller": "plastic",
}

HAS_A = {
    "bed": "mattress", "sofa": "armrest", "wardrobe": "door",
    "dresser": "drawer", "desk": "drawer", "oven": "door",
    "refrigerator": "shelf", "bookshelf": "shelf", "kettle": "handle",
    "saucepan": "lid", "armchair": "cushion", "television": "screen",
    "washing machine": "drum", "printer": "tray", "filing cabinet": "drawer",
    "dining table": "leg", "bench": "leg", "bathtub": "drain",
    "table lamp": "shade", "desk lamp": "shade", "coffee table": "leg",
    "alarm clock": "dial", "keyboard": "key", "fireplace": "mantel",
}

RELATED_TO = {
    "pillow": "blanket", "stove": "oven", "toaster": "kettle",
    "towel rack": "bath mat", "keyboard": "computer monitor",
    "wine glass": "dining table", "dryer": "washing machine",
    "nightstand": "bed", "rug": "sofa", "doormat": "bench",
    "candlestick": "tablecloth", "cutting board": "saucepan",
    "printer": "desk", "toilet": "washbasin", "shoe rack": "coat rack",
    "laundry basket": "clothes hamper",
}

# Deliberate cross-room facts: knowledge retrieval has to cope with
# plausible but off-room associations.
EXTRA_AT_LOCATION = [
    ("cushion", "bedroom"),
    ("bookshelf", "office"),
    ("bench", "dining room"),
    ("laundry basket", "bathroom"),
    ("rug", "hallway"),
    ("table lamp", "living room"),
    ("towel rack", "laundry room"),
    ("notebook", "living room"),
]

EXTRA_NOUNS = [
    "curtain", "vase", "wall clock", "chandelier", "radiator", "trash can",
    "door", "window", "stool", "cabinet", "shelf", "basket", "box", "bag",
    "bottle", "cup", "mug", "bowl", "spoon", "knife", "fork", "pot", "tray",
    "jar", "tin", "ladder", "broom", "mop", "bucket", "vacuum cleaner",
    "fan", "heater", "air conditioner", "telephone", "speaker", "radio",
    "guitar", "piano", "painting", "poster", "photograph", "map", "globe",
    "trophy", "candle", "plant", "flower pot", "aquarium", "bird cage",
    "toy", "ball", "book", "magazine", "newspaper", "calendar", "whiteboard",
    "corkboard", "stapler", "scissors", "tape dispenser", "pencil", "eraser",
    "ruler", "backpack", "suitcase", "hat", "coat", "scarf", "glove", "shoe",
    "slipper", "boot", "umbrella", "towel", "mirror", "clock", "lamp",
    "chair", "table", "couch", "stand", "hook", "rail", "mat", "screen",
    "folder", "binder", "envelope", "marker", "crate", "hanger", "step stool",
    "power strip", "extension cord", "light switch", "thermostat",
]

MODIFIERS = [
    "wooden", "metal", "plastic", "glass", "leather",
    "marble", "vintage", "modern", "folding",
]


def build_vocabulary():
    base = []
    for pool in ROOM_POOLS.values():
        base.extend(pool)
    base.extend(EXTRA_NOUNS)
    assert len(base) == len(set(base)), "duplicate base noun"
    assert len(base) == 160, f"need 160 base nouns, got {len(base)}"
    labels = []
    for noun in base:
        labels.append(noun)
        labels.extend(f"{mod} {noun}" for mod in MODIFIERS)
    assert len(labels) == 1600
    return labels


def build_snapshot():
    triples = []
    for room, pool in ROOM_POOLS.items():
        for i, obj in enumerate(pool):
            triples.append((obj, "AtLocation", room))
            triples.append((obj, "LocatedNear", pool[(i + 1) % len(pool)]))
            triples.append((obj, "UsedFor", USED_FOR[obj]))
            triples.append((obj, "IsA", IS_A[obj]))
            triples.append((obj, "MadeOf", MADE_OF[obj]))
    for obj, part in sorted(HAS_A.items()):
        triples.append((obj, "HasA", part))
        triples.append((part, "PartOf", obj))
    for obj, other in sorted(RELATED_TO.items()):
        triples.append((obj, "RelatedTo", other))
    triples.extend((obj, "AtLocation", room) for obj, room in EXTRA_AT_LOCATION)
    return triples


def main():
    DATA_DIR.mkdir(parents=True, exist_ok=True)

    vocab = build_vocabulary()
    (DATA_DIR / "object_vocabulary.txt").write_text(
        "\n".join(vocab) + "\n", encoding="utf-8"
    )

    pools = {"schema_version": 1, "rooms": ROOM_POOLS}
    (DATA_DIR / "room_pools.json").write_text(
        json.dumps(pools, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    triples = build_snapshot()
    lines = [f"{s}\t{r}\t{e}" for s, r, e in triples]
    (DATA_DIR / "knowledge_snapshot.tsv").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(vocab)} vocabulary labels, {len(triples)} triples")


if __name__ == "__main__":
    main()
