"""Entry point: ``python -m model_server --fixture trig3``."""

import argparse
import sys

from .scoring import FIXTURES
from .server import ServerConfig, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="model_server")
    parser.add_argument("--fixture", choices=sorted(FIXTURES), default="trig3")
    parser.add_argument("--q", type=int, help="override declared alphabet size")
    parser.add_argument("--n", type=int, help="override declared sequence length")
    parser.add_argument("--log-batches", action="store_true")
    args = parser.parse_args(argv)

    scorer, q, n = FIXTURES[args.fixture]
    config = ServerConfig(
        q=args.q if args.q is not None else q,
        n=args.n if args.n is not None else n,
        scorer=scorer,
        log_batches=args.log_batches,
    )
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
