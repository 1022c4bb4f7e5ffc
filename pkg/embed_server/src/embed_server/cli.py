"""Command line entry point: embed-server --model NAME --port N --max-batch N."""

import argparse

import uvicorn

from .app import DEFAULT_MAX_BATCH, DEFAULT_MODEL, create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-server",
        description="Serve sentence embeddings over HTTP.")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="sentence-transformers model name, or "
                             "hash:<dim>[:<seed>] for the offline test encoder")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH,
                        help="largest accepted texts list (413 above)")
    args = parser.parse_args(argv)

    uvicorn.run(create_app(args.model, args.max_batch), port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
