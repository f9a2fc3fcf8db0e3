"""Command line interface.

Three subcommands: ``experiment`` runs a configured batch of trials and
writes ``summary.json`` plus ``trials.csv``; ``decompose`` reads a tensor
from JSON and prints its best rank-1 approximation; ``generate`` dumps one
sampled network and training set as JSON, e.g. for checking another
implementation against this one.

Exit codes: 0 on success, 2 for configuration problems (bad flags, bad or
missing files, invalid fields), 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .decomposition import rank1_decompose
from .harness import (
    ConfigError,
    ExperimentConfig,
    generate_operational_network,
    run_experiment,
    substream_seed,
    trial_seed,
)
from .tensors import TensorShape, tensorize

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deeptd",
        description="Learn the kernels of a deep non-overlapping CNN from data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    exp = sub.add_parser("experiment", help="run a batch of synthetic trials")
    exp.add_argument("--config", required=True, type=Path, help="JSON config file")
    exp.add_argument("--out", required=True, type=Path, help="output directory")
    exp.add_argument(
        "--threads", type=int, default=1, help="worker threads (default 1)"
    )

    dec = sub.add_parser(
        "decompose", help="best rank-1 approximation of a JSON tensor"
    )
    dec.add_argument(
        "--tensor",
        required=True,
        type=Path,
        help='JSON file with "shape" and "entries" (first mode fastest)',
    )

    gen = sub.add_parser(
        "generate", help="dump one sampled network and training set as JSON"
    )
    gen.add_argument("--config", required=True, type=Path, help="JSON config file")
    gen.add_argument("--out", required=True, type=Path, help="output JSON file")
    return parser


def _load_json(path: Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def _cmd_experiment(args: argparse.Namespace) -> int:
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    config = ExperimentConfig.from_dict(_load_json(args.config))
    report = run_experiment(config, out_dir=args.out, threads=args.threads)
    print(
        f"completed {len(report.results)}/{config.trials} trials, "
        f"{len(report.errors)} failed"
    )
    print(f"wrote {args.out / 'summary.json'} and {args.out / 'trials.csv'}")
    return 0


def _cmd_decompose(args: argparse.Namespace) -> int:
    raw = _load_json(args.tensor)
    for key in ("shape", "entries"):
        if key not in raw:
            raise ConfigError(f"tensor file needs a {key!r} field")
    try:
        shape = TensorShape(tuple(raw["shape"]))
        tensor = tensorize(np.asarray(raw["entries"], dtype=np.float64), shape)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad tensor: {exc}") from None
    result = rank1_decompose(tensor)
    json.dump(
        {
            "weight": result.weight,
            "converged": result.converged,
            "factors": [f.tolist() for f in result.factors],
        },
        sys.stdout,
        indent=2,
    )
    print()
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_dict(_load_json(args.config))
    seed = trial_seed(config.master_seed, 0)
    rng = np.random.default_rng(substream_seed(seed, 0))
    network, train, rejections = generate_operational_network(config, rng)
    payload = {
        "seed": seed,
        "widths": list(config.widths),
        "hidden_activation": config.hidden_activation,
        "final_activation": config.final_activation,
        "kernels": [k.tolist() for k in network.kernels],
        "rejections": rejections,
        "xs": train.xs.tolist(),
        "ys": train.ys.tolist(),
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    print(f"wrote {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "experiment": _cmd_experiment,
        "decompose": _cmd_decompose,
        "generate": _cmd_generate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
