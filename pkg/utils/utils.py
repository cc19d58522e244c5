import argparse
import logging
import os
from typing import Callable, Iterable, List, Optional, Sequence

import pandas as pd
import yaml

from utils.exceptions import ConfigError, ParseError, ShapeMismatchError


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str = "INFO") -> None:
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ConfigError(f"Log level {level} not available. Choose from [DEBUG, INFO, WARNING, ERROR]")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


def load_config(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"Config file {path} does not exist")
    with open(path, "r", encoding="utf-8") as f:
        try:
            config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Config file {path} is not valid YAML: {e}")
    if not isinstance(config, dict):
        raise ConfigError(f"Config file {path} must hold a mapping of flag names to values")
    return config


def parse_args_with_config(parser: argparse.ArgumentParser, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Values from `--config` become parser defaults, so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=str)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        config = {key.replace("-", "_"): value for key, value in load_config(known.config).items()}
        actions = {}
        for action in parser._actions:
            actions[action.dest] = action
            for option in action.option_strings:
                actions[option.lstrip("-").replace("-", "_")] = action
        unknown = sorted(set(config) - set(actions))
        if unknown:
            raise ConfigError(f"Unknown keys in {known.config}: {unknown}")
        for key in config:
            actions[key].required = False
        parser.set_defaults(**{actions[key].dest: value for key, value in config.items()})
    return parser.parse_args(argv)


def run_main(main: Callable[[argparse.Namespace], int], parser: argparse.ArgumentParser, argv=None) -> int:
    """Parse, configure logging and run a command; bad input exits with 2."""
    try:
        args = parse_args_with_config(parser, argv)
        setup_logging(args.log_level)
        return main(args)
    except (ConfigError, ParseError, ShapeMismatchError, FileNotFoundError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 2


def write_csv(rows: Iterable[dict], path: str, columns: List[str]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=columns)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return frame


def write_yaml(data, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(data, f, sort_keys=False)
