"""Operator command line: train / infer / sweep / bench / serve / inspect.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tuneconv",
                                     description="tunable-convolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train from a JSON config file")
    p_train.add_argument("--config", required=True)

    p_infer = sub.add_parser("infer", help="restore one PNG at a given omega")
    p_infer.add_argument("--ckpt", required=True)
    p_infer.add_argument("--in", dest="input", required=True)
    p_infer.add_argument("--out", required=True)
    p_infer.add_argument("--omega", required=True,
                         help="comma-separated values, e.g. 1,0")

    p_sweep = sub.add_parser("sweep", help="omega/sigma evaluation grid")
    p_sweep.add_argument("--ckpt", required=True)
    p_sweep.add_argument("--data", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--sigmas", default="5,15,30")
    p_sweep.add_argument("--rhos", default="0")
    p_sweep.add_argument("--omega-step", type=float, default=0.25)

    p_bench = sub.add_parser("bench", help="traditional-vs-tunable overhead")
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--ks", default="3,5,7")
    p_bench.add_argument("--cs", default="4,8,16,32,64,128,256,512")
    p_bench.add_argument("--ps", default="1,2,3,4,5,6,7,8")
    p_bench.add_argument("--size", type=int, default=128)
    p_bench.add_argument("--reps", type=int, default=100)

    p_serve = sub.add_parser("serve", help="HTTP inference service")
    p_serve.add_argument("--ckpt", required=True)
    p_serve.add_argument("--port", type=int, default=8787)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--max-pixels", type=int, default=2_000_000)
    p_serve.add_argument("--static", default=None,
                         help="directory of UI assets to serve at /")

    p_inspect = sub.add_parser("inspect", help="print a checkpoint header")
    p_inspect.add_argument("--ckpt", required=True)
    return parser


def _parse_floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _cmd_train(args) -> int:
    from .train import TrainConfig, train
    cfg = TrainConfig.from_file(args.config)
    model, history = train(cfg, log_every=100)
    if history:
        print(f"final loss {history[-1]:.5f} over {len(history)} steps")
    if cfg.checkpoint_path:
        print(f"checkpoint written to {cfg.checkpoint_path}")
    return 0


def _cmd_infer(args) -> int:
    from .checkpoint import load_checkpoint
    from .data import load_image, save_image
    from .server import clamp_omega, infer_image
    model = load_checkpoint(args.ckpt)
    omega = np.asarray(_parse_floats(args.omega), dtype=np.float32)
    if omega.size != model.config.p:
        print(f"error: omega must have {model.config.p} values, got {omega.size}",
              file=sys.stderr)
        return 2
    clamped, changed = clamp_omega(omega)
    if changed:
        print(f"warning: omega clamped into [0,1]: {clamped.tolist()}",
              file=sys.stderr)
    image = load_image(args.input)
    save_image(infer_image(model, image, clamped), args.out)
    return 0


def _cmd_sweep(args) -> int:
    from .analysis import format_sweep_table, sweep_eval, write_sweep_csv
    from .checkpoint import load_checkpoint
    from .data import list_dataset, load_image
    model = load_checkpoint(args.ckpt)
    images = [load_image(p) for p in list_dataset(args.data)]
    steps = np.arange(0.0, 1.0 + 1e-9, args.omega_step)
    if model.config.p == 2:
        grid = [[float(s), float(1.0 - s)] for s in steps]
    else:
        grid = [[float(s)] * model.config.p for s in steps]
    rows = sweep_eval(model, images, _parse_floats(args.sigmas),
                      _parse_floats(args.rhos), grid)
    write_sweep_csv(rows, args.out)
    print(format_sweep_table(rows))
    return 0


def _cmd_bench(args) -> int:
    from .analysis import bench_overhead, write_overhead_csv
    rows = bench_overhead(
        ks=[int(v) for v in args.ks.split(",")],
        cs=[int(v) for v in args.cs.split(",")],
        ps=[int(v) for v in args.ps.split(",")],
        size=args.size, reps=args.reps)
    write_overhead_csv(rows, args.out)
    print(f"{len(rows)} rows written to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .server import serve
    serve(args.ckpt, port=args.port, host=args.host,
          max_pixels=args.max_pixels, static_dir=args.static)
    return 0


def _cmd_inspect(args) -> int:
    from .checkpoint import Checkpoint
    ckpt = Checkpoint.load(args.ckpt)
    meta = dict(ckpt.meta)
    meta["arrays"] = [{"name": name, "shape": list(arr.shape)}
                      for name, arr in ckpt.arrays.items()]
    print(json.dumps(meta, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "train": _cmd_train, "infer": _cmd_infer, "sweep": _cmd_sweep,
    "bench": _cmd_bench, "serve": _cmd_serve, "inspect": _cmd_inspect,
}


def cli_dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # surface as runtime error, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
