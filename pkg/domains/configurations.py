import os
from typing import List

from domains.base import Problem
from domains.sliding_tile import (
    SlidingTilePuzzle,
    generate_stp_random,
    generate_stp_walks,
    parse_stp_file,
    serialize_stp,
)
from domains.sokoban import SokobanLevel, parse_boxoban_file, serialize_boxoban
from domains.synth_tree import SynthTree, parse_synth_file, serialize_synth
from domains.witness import WitnessPuzzle, generate_witness, parse_witness_file, serialize_witness
from utils.exceptions import ConfigError


DOMAIN_CFG = {
    "stp": {
        "problem_class": SlidingTilePuzzle,
        "parser": parse_stp_file,
        "serializer": serialize_stp,
        "feature_shape": (5, 5, 25),
        "initial_budget": 7000,
        "architecture": "conv",
        "generators": {"train": generate_stp_walks, "test": generate_stp_random},
    },
    "sokoban": {
        "problem_class": SokobanLevel,
        "parser": parse_boxoban_file,
        "serializer": serialize_boxoban,
        "feature_shape": (10, 10, 4),
        "initial_budget": 2000,
        "architecture": "conv",
        # Boxoban levels are ingested, never generated
        "generators": {},
    },
    "witness": {
        "problem_class": WitnessPuzzle,
        "parser": parse_witness_file,
        "serializer": serialize_witness,
        "feature_shape": (8, 8, 9),
        "initial_budget": 2000,
        "architecture": "conv",
        "generators": {"train": generate_witness, "test": generate_witness},
    },
    "synth": {
        "problem_class": SynthTree,
        "parser": parse_synth_file,
        "serializer": serialize_synth,
        "feature_shape": None,
        "initial_budget": 2000,
        # policy, heuristic and eta are stored in the tree
        "architecture": None,
        "generators": {},
    },
}


def get_domain_config(domain: str) -> dict:
    if domain not in DOMAIN_CFG:
        raise ConfigError(
            f"Domain {domain} not available. Choose from {list(DOMAIN_CFG.keys())}"
        )
    return DOMAIN_CFG[domain]


def load_problems(domain: str, path: str) -> List[Problem]:
    parser = get_domain_config(domain)["parser"]
    if not os.path.isfile(path):
        raise ConfigError(f"Problem file {path} does not exist")
    with open(path, "r", encoding="utf-8") as f:
        return parser(f.read())


def save_problems(domain: str, problems: List[Problem], path: str) -> None:
    serializer = get_domain_config(domain)["serializer"]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serializer(problems))
