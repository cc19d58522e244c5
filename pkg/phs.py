"""Entry point: `python phs.py <command> [flags]`."""
import sys

import bench
import evaluate
import generate
import solve
import train
import verify

COMMANDS = {
    "solve": solve,
    "train": train,
    "test": evaluate,
    "gen": generate,
    "verify": verify,
    "bench": bench,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] not in COMMANDS:
        print(f"usage: phs.py {{{','.join(COMMANDS)}}} [flags]", file=sys.stderr)
        return 2
    return COMMANDS[argv[0]].run(argv[1:])


if __name__ == "__main__":
    sys.exit(main())
