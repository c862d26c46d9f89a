"""Start a small annotation service for the frontend integration tests.

Generates a two-observation dataset into --out, binds the HTTP service to a
free localhost port, and prints "PORT <n>" once it is about to serve so the
test harness knows where to connect.
"""

import argparse
import socket
from pathlib import Path

import uvicorn

from navpref import pipeline
from navpref.service import AnnotationService, create_app
from navpref.sim import build_scenario


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True)
    parser.add_argument("--observations", type=int, default=2)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    out = Path(args.out)
    cfg = pipeline.RunConfig(
        scenarios=("open_space",), observations=args.observations, seed=args.seed
    )
    samples = pipeline.gen_data(cfg, out)
    world, _, _ = build_scenario("open_space")
    service = AnnotationService(world, samples, cfg.gen, out, seed=cfg.seed)

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    print(f"PORT {port}", flush=True)
    uvicorn.run(create_app(service), host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
