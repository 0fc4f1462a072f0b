#!/usr/bin/env python3
"""Deterministic synthetic corpora and mock fixtures for desk-scale runs.

data/human.jsonl   functional, mostly triadic progressions (prior training set)
data/llm.jsonl     extension-heavy, chromatic progressions (proposal training set
                   and candidate pool)
fixtures/          mock LLM responses and transcription fixtures
"""

import argparse
import hashlib
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
PROMPTS = ROOT / "crates" / "core" / "prompts"

LETTERS = "CDEFGAB"
NATURAL = [0, 2, 4, 5, 7, 9, 11]
ACC = {-2: "bb", -1: "b", 0: "", 1: "#", 2: "x"}
KEYS = ["C", "G", "D", "A", "E", "B", "F#", "Db", "Ab", "Eb", "Bb", "F"]
SCALES = {
    "Maj": [0, 2, 4, 5, 7, 9, 11],
    "Min": [0, 2, 3, 5, 7, 8, 10],
    "Dor": [0, 2, 3, 5, 7, 9, 10],
    "Phr": [0, 1, 3, 5, 7, 8, 10],
    "Lyd": [0, 2, 4, 6, 7, 9, 11],
    "Mix": [0, 2, 4, 5, 7, 9, 10],
    "Loc": [0, 1, 3, 5, 6, 8, 10],
    "Hmin": [0, 2, 3, 5, 7, 8, 11],
    "Phdm": [0, 1, 4, 5, 7, 8, 10],
}


def parse_key(name):
    letter = LETTERS.index(name[0])
    offset = {"": 0, "#": 1, "b": -1}[name[1:]]
    return letter, (NATURAL[letter] + offset) % 12


def spell(key, degree, semis):
    """Root name for the scale degree `degree` sitting `semis` above the tonic."""
    k_letter, k_chroma = key
    letter = (k_letter + degree) % 7
    chroma = (k_chroma + semis) % 12
    acc = (chroma - NATURAL[letter] + 6) % 12 - 6
    if acc not in ACC:
        return None
    return LETTERS[letter] + ACC[acc]


def triad_quality(scale, degree):
    root = scale[degree]
    third = (scale[(degree + 2) % 7] - root) % 12
    fifth = (scale[(degree + 4) % 7] - root) % 12
    return {(4, 7): "", (3, 7): "m", (3, 6): "dim", (4, 8): "aug"}.get((third, fifth), "")


def diatonic(key, mode, degree):
    scale = SCALES[mode]
    return spell(key, degree, scale[degree]), triad_quality(scale, degree)


def bass_of(key, mode, degree, step):
    scale = SCALES[mode]
    d = (degree + step) % 7
    return spell(key, d, scale[d])


# functional degree walks: tonic -> predominant -> dominant -> tonic
HUMAN_TEMPLATES = [
    [0, 4, 5, 3], [5, 3, 0, 4], [0, 3, 4, 0], [1, 4, 0, 0], [0, 5, 3, 4],
    [0, 3, 0, 4], [3, 4, 0, 0], [0, 4, 3, 0], [0, 5, 1, 4], [3, 0, 4, 5],
    [0, 3, 5, 4], [5, 4, 3, 4], [0, 2, 3, 4], [0, 0, 3, 4],
]
HUMAN_NEXT = {
    0: [(3, 4), (4, 4), (5, 3), (1, 2), (2, 1)],
    1: [(4, 6), (6, 1), (0, 1)],
    2: [(5, 4), (3, 3)],
    3: [(4, 5), (0, 3), (1, 2)],
    4: [(0, 6), (5, 3), (3, 1)],
    5: [(3, 4), (1, 3), (4, 2)],
    6: [(0, 5), (2, 1)],
}


def weighted(rng, pairs):
    total = sum(w for _, w in pairs)
    x = rng.uniform(0, total)
    for item, w in pairs:
        x -= w
        if x <= 0:
            return item
    return pairs[-1][0]


def human_degrees(rng, bars):
    if rng.random() < 0.6:
        t = list(rng.choice(HUMAN_TEMPLATES))
        if bars == 3:
            t = t[:3]
        elif bars == 5:
            t.append(0)
        return t
    out = [0 if rng.random() < 0.7 else rng.choice([3, 5])]
    while len(out) < bars:
        out.append(weighted(rng, HUMAN_NEXT[out[-1]]))
    return out


def human_chord(rng, key, mode, degree):
    root, quality = diatonic(key, mode, degree)
    if mode in ("Min", "Hmin") and degree == 4 and rng.random() < 0.6:
        quality = ""  # raised leading tone
        root = spell(key, 4, 7)
    sym = root + quality
    r = rng.random()
    if degree == 4 and quality == "" and r < 0.2:
        sym += "7"
    elif quality == "m" and r < 0.08:
        sym += "7"
    elif degree == 4 and r < 0.24:
        sym += "sus4"
    elif degree == 0 and quality == "" and r < 0.05:
        sym += "/" + bass_of(key, mode, degree, 2)
    return sym


def human_record(rng):
    key_name = rng.choice(KEYS)
    mode = "Maj" if rng.random() < 0.72 else ("Min" if rng.random() < 0.9 else "Mix")
    bars = 4 if rng.random() < 0.85 else rng.choice([3, 5])
    key = parse_key(key_name)
    chords = [human_chord(rng, key, mode, d) for d in human_degrees(rng, bars)]
    return {"key": key_name, "mode": mode, "chords": chords, "source": "human_corpus"}


MAJ_EXT = ["maj7", "maj9", "6/9", "add9", "sus2", "7", "9", "13", "", ""]
MIN_EXT = ["7", "9", "11", "7", "add9", "", ""]
DOM_EXT = ["7", "9", "13", "7sus4", "7b9", "7#9", "7#5"]
BORROWED = [(6, 10, ""), (5, 8, ""), (2, 3, ""), (3, 5, "m"), (1, 1, ""), (1, 2, ""), (2, 4, ""), (5, 9, "")]


def llm_chord(rng, key, mode, degree):
    if rng.random() < 0.22:
        d, semis, quality = rng.choice(BORROWED)
        root = spell(key, d, semis)
    else:
        root, quality = diatonic(key, mode, degree)
    if root is None:
        root, quality = diatonic(key, mode, 0)
    r = rng.random()
    if quality == "":
        ext = rng.choice(DOM_EXT if degree == 4 or r < 0.25 else MAJ_EXT)
    elif quality == "m":
        ext = rng.choice(MIN_EXT)
    elif quality == "dim":
        ext = rng.choice(["", "7"])
    else:
        ext = ""
    if quality == "dim" and ext == "7" and rng.random() < 0.5:
        quality, ext = "m", "7b5"
    sym = root + quality + ext
    if rng.random() < 0.1 and "/" not in ext:
        bass = bass_of(key, mode, degree, rng.choice([2, 4, 6]))
        if bass:
            sym += "/" + bass
    return sym


def llm_record(rng, key_name=None, mode=None):
    key_name = key_name or rng.choice(KEYS)
    mode = mode or (rng.choice(list(SCALES)) if rng.random() < 0.3 else rng.choice(["Maj", "Min"]))
    key = parse_key(key_name)
    if rng.random() < 0.45:
        degrees = [rng.randrange(7) for _ in range(4)]
    else:
        degrees = list(rng.choice(HUMAN_TEMPLATES))
    chords = [llm_chord(rng, key, mode, d) for d in degrees]
    return {"key": key_name, "mode": mode, "chords": chords, "source": "llm_generated"}


def write_jsonl(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def request_hash(template_id, user):
    body = (PROMPTS / f"{template_id}.txt").read_text().rstrip()
    if template_id == "keyword_extraction":
        body = body.replace("{keyword_list}", (PROMPTS / "keyword_list.txt").read_text().rstrip())
    system = body.replace("{N}", "30" if template_id == "chord_batch_diverse" else "1")
    h = hashlib.sha256()
    for part in (template_id, system, user):
        h.update(part.encode())
        h.update(b"\0")
    return h.hexdigest()


def write_fixtures(rng, out):
    out.mkdir(parents=True, exist_ok=True)
    batch = [" ".join(llm_record(rng, "C", "Maj")["chords"]) for _ in range(30)]
    (out / "default_chord_batch_diverse.txt").write_text("\n".join(batch) + "\n")
    (out / "default_chord_single_baseline.txt").write_text("C G Am F\n")
    (out / "default_keyword_extraction.txt").write_text(
        "ambient, chillwave, dreamy, intimate, indie, atmospheric, mellow\n"
    )
    invalid = batch[:28] + ["Gmaj D Em C", "Cmin F G C"]
    (out / "batch_with_invalid.txt").write_text("\n".join(invalid) + "\n")

    # README example: dreamy, jazz in B major
    b_batch = [" ".join(llm_record(rng, "B", "Maj")["chords"]) for _ in range(30)]
    user = "User keywords: dreamy, jazz | Key: B | Mode: Maj | Bars: 4"
    (out / f"{request_hash('chord_batch_diverse', user)}.txt").write_text("\n".join(b_batch) + "\n")

    hope = ("Text Note: “Hope” is the thing with feathers - That perches in the soul - "
            "And sings the tune without the words - And never stops at all. | User Keywords: hopeful")
    (out / f"{request_hash('keyword_extraction', hope)}.txt").write_text(
        "emotional, ethereal, acoustic guitar, folk, atmospheric, storytelling ballad, soft-spoken harmonies\n"
    )

    tdir = out / "transcriptions"
    tdir.mkdir(exist_ok=True)
    timeline = lambda syms: [
        {"symbol": s, "start_s": 2.0 * i, "end_s": 2.0 * (i + 1)} for i, s in enumerate(syms)
    ]
    (tdir / "default.json").write_text(json.dumps(
        {"detected_key": "C", "detected_mode": "Maj", "chords": timeline(["C", "G", "Am", "F", "N", "C"])},
        indent=2) + "\n")
    (tdir / "gb_minor.json").write_text(json.dumps(
        {"detected_key": "Gb", "detected_mode": "Min", "chords": timeline(["Gbm", "Ebbmaj7", "Db7", "Gbm/A", "N", "Cb"])},
        indent=2) + "\n")

    # three-bar request in D minor
    d_batch = [" ".join(llm_record(rng, "D", "Min")["chords"][:3]) for _ in range(30)]
    user = "User keywords: calm, night | Key: D | Mode: Min | Bars: 3"
    (out / f"{request_hash('chord_batch_diverse', user)}.txt").write_text("\n".join(d_batch) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20241016)
    ap.add_argument("--human", type=int, default=2400)
    ap.add_argument("--llm", type=int, default=3000)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    write_jsonl(ROOT / "data" / "human.jsonl", [human_record(rng) for _ in range(args.human)])
    write_jsonl(ROOT / "data" / "llm.jsonl", [llm_record(rng) for _ in range(args.llm)])
    write_fixtures(rng, ROOT / "fixtures")


if __name__ == "__main__":
    main()
