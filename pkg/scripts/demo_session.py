#!/usr/bin/env python3
"""Generate a demo phantom and start the editing service against it.

Usage:
    python3 scripts/demo_session.py --data-root /tmp/surfseg-demo

Then build the UI (cd frontend && npm install && npm run build), serve
frontend/ statically, and open a session on the phantom name printed below
(or talk to the endpoints directly, e.g. POST /sessions {"volume": "demo"}).
"""
import argparse

from surfseg.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-root", default="/tmp/surfseg-demo")
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--port", type=int, default=8000)
    ap.add_argument("--lesions", type=int, default=2)
    args = ap.parse_args()

    cli_main(["--seed", str(args.seed), "--data-root", args.data_root,
              "phantom", "gen", "--name", "demo",
              "--lesions", str(args.lesions)])
    print(f"phantom 'demo' ready under {args.data_root}")
    return cli_main(["--data-root", args.data_root, "serve",
                     "--port", str(args.port)])


if __name__ == "__main__":
    raise SystemExit(main())
