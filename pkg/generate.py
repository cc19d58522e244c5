import logging
import os
import sys

from domains.configurations import get_domain_config, save_problems
from domains.sliding_tile import generate_stp_random, generate_stp_walks
from domains.witness import generate_witness
from utils.args import get_gen_parser
from utils.exceptions import ConfigError
from utils.utils import run_main, write_yaml

logger = logging.getLogger(__name__)


def generate(args):
    """Problems and the manifest entries describing how they were drawn."""
    generators = get_domain_config(args.domain)["generators"]
    if args.split not in generators:
        raise ConfigError(
            f"Split {args.split} not available for {args.domain}. Choose from {list(generators.keys())}"
        )
    generator = generators[args.split]
    if generator is generate_stp_walks:
        if not 1 <= args.min_length <= args.max_length:
            raise ConfigError(f"walk lengths must satisfy 1 <= {args.min_length} <= {args.max_length}")
        problems = generate_stp_walks(args.num, args.size, args.seed, args.min_length, args.max_length)
        return problems, {"size": args.size, "min_length": args.min_length, "max_length": args.max_length}
    if generator is generate_stp_random:
        return generate_stp_random(args.num, args.size, args.seed), {"size": args.size}
    if generator is generate_witness:
        problems = generate_witness(args.num, args.seed, args.rows, args.cols, args.fill)
        return problems, {"rows": args.rows, "cols": args.cols, "fill": args.fill}
    raise ConfigError(f"No generator for {args.domain} {args.split}")


def main(args) -> int:
    if args.num < 1:
        raise ConfigError(f"number of problems must be at least 1, got {args.num}")
    problems, parameters = generate(args)
    name = f"{args.domain}_{args.split}"
    os.makedirs(args.out, exist_ok=True)
    save_problems(args.domain, problems, os.path.join(args.out, f"{name}.txt"))
    write_yaml(
        {"domain": args.domain, "split": args.split, "seed": args.seed, "count": len(problems), **parameters},
        os.path.join(args.out, f"{name}.yaml"),
    )
    logger.info(f"wrote {len(problems)} {args.domain} problems to {args.out}/{name}.txt")
    return 0


def run(argv=None) -> int:
    return run_main(main, get_gen_parser(), argv)


if __name__ == "__main__":
    sys.exit(run())
