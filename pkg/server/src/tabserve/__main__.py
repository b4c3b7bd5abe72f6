import argparse
import sys

from .regressors import MODES
from .server import serve_stdio, serve_tcp


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tabserve",
                                     description="fit/predict wire-protocol server")
    parser.add_argument("--mode", choices=MODES, default="ridge-fallback")
    parser.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7821)
    args = parser.parse_args(argv)

    try:
        if args.transport == "tcp":
            serve_tcp(args.mode, args.host, args.port)
        else:
            serve_stdio(args.mode)
    except RuntimeError as exc:  # e.g. tfm mode without its dependency
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
