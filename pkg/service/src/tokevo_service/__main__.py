"""Run the scoring service: ``tokevo-service [--host ... --port ...]``."""

import argparse

import uvicorn

from .app import create_app
from .config import ServiceConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tokevo-service")
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--backend", choices=("synthetic", "torch"), default=None)
    parser.add_argument("--max-batch", type=int, default=None)
    parser.add_argument("--artifact-dir", default=None)
    parser.add_argument("--vocab-path", default=None, help="word list for the synthetic backend")
    args = parser.parse_args(argv)

    overrides = {
        key: value
        for key, value in {
            "host": args.host,
            "port": args.port,
            "backend": args.backend,
            "max_batch": args.max_batch,
            "artifact_dir": args.artifact_dir,
            "vocab_path": args.vocab_path,
        }.items()
        if value is not None
    }
    config = ServiceConfig.from_env(**overrides)
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
