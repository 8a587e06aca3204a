"""Command line interface.

Subcommands: gen-dataset, decompose (classical solver), infer (unrolled
network), evaluate, inspect-weights. Output images are written to a
temporary file and renamed on success, so failures never leave partial
outputs behind.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from . import admm, harness, lprnet, synthgen
from .image import Image, Mask, read_image, write_image
from .operators import PatchConfig


def atomic_write_image(path, image: Image) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=os.path.splitext(path)[1])
    os.close(fd)
    try:
        write_image(tmp, image)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_mask(path, shape) -> Mask:
    if path is None:
        return Mask.ones(*shape)
    img = read_image(path)
    return Mask(img.data.astype(np.uint8))


def _parse_mask_kind(text) -> synthgen.MaskKind:
    if text == "none":
        return synthgen.MaskKind.none()
    if text.startswith("pixels:"):
        return synthgen.MaskKind.random_pixels(float(text.split(":", 1)[1]))
    if text.startswith("shapes:"):
        parts = text.split(":", 1)[1].split(",")
        count = int(parts[0])
        size_range = (float(parts[1]), float(parts[2])) if len(parts) == 3 else (4, 16)
        return synthgen.MaskKind.random_shapes(count, size_range)
    raise ValueError(f"bad --mask value {text!r} (use none | pixels:R | shapes:N[,MIN,MAX])")


def _cmd_gen_dataset(args) -> int:
    params = synthgen.GenParams(
        height=args.height, width=args.width, n_shapes=args.shapes,
        n_freqs=args.freqs, texture_amplitude=args.amplitude,
        freq_range=(args.freq_min, args.freq_max),
        mask_kind=_parse_mask_kind(args.mask),
    )
    samples = synthgen.gen_dataset(args.seed, args.count, params)
    synthgen.save_dataset(args.out, samples, args.seed, params)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_decompose(args) -> int:
    f = read_image(args.input)
    mask = _read_mask(args.mask, f.shape)
    cfg = admm.AdmmConfig(
        mu=args.mu, a=args.a, rho_t=args.rho_t, rho_s=args.rho_s, tau=args.tau,
        outer_iters=args.iters, pgd_iters=args.pgd,
        patch=PatchConfig(p=args.patch, o=args.overlap), tol=args.tol,
    )
    u, v, diag = admm.solve(f, mask, cfg)
    atomic_write_image(args.out_u, u)
    atomic_write_image(args.out_v, v)
    if args.diagnostics:
        diag.write_csv(args.diagnostics)
    if not diag.tau_stable:
        print("warning: tau exceeds the PGD stability bound", file=sys.stderr)
    return 0


def _cmd_infer(args) -> int:
    weights = lprnet.load_weights(args.weights)
    f = read_image(args.input)
    mask = _read_mask(args.mask, f.shape)
    u, v, _ = lprnet.forward(f, mask, weights)
    atomic_write_image(args.out_u, u)
    atomic_write_image(args.out_v, v)
    return 0


def _cmd_evaluate(args) -> int:
    if args.weights is not None:
        method = harness.UnrolledMethod.from_file(args.weights)
        report = harness.evaluate(method, args.dataset)
    else:
        cfg = admm.AdmmConfig(
            mu=args.mu, a=args.a, rho_t=args.rho_t, rho_s=args.rho_s, tau=args.tau,
            outer_iters=args.iters, pgd_iters=args.pgd,
            patch=PatchConfig(p=args.patch, o=args.overlap), tol=args.tol,
        )
        if args.sweep:
            spec = args.sweep
            if not spec.startswith("mu="):
                raise ValueError("only mu sweeps are supported: --sweep mu=MIN:MAX:STEPS")
            lo, hi, steps = spec[3:].split(":")
            report, _ = harness.sweep_mu(cfg, args.dataset, float(lo), float(hi), int(steps))
        else:
            report = harness.evaluate(harness.ClassicalMethod(cfg), args.dataset)
    print(report.to_text())
    if args.csv:
        report.write_csv(args.csv)
    return 0


def _cmd_inspect_weights(args) -> int:
    manifest, blob = lprnet.read_manifest(args.weights)
    lprnet.load_weights(args.weights)  # full validation
    print(f"K = {manifest['K']}")
    print(f"n = {manifest['n']}")
    print(f"config_id = {manifest['config_id']}")
    print(f"patch: p = {manifest['p']}, o = {manifest['o']}")
    print(f"blob bytes = {len(blob)}")
    print(f"{'name':<34} {'shape':<16} {'offset':>8}")
    for ent in manifest["tensors"]:
        shape = "x".join(str(s) for s in ent["shape"])
        print(f"{ent['name']:<34} {shape:<16} {ent['offset_bytes']:>8}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lprdec",
                                     description="structure-texture decomposition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-dataset", help="generate a synthetic dataset directory")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=400)
    g.add_argument("--height", type=int, default=64)
    g.add_argument("--width", type=int, default=64)
    g.add_argument("--shapes", type=int, default=5)
    g.add_argument("--freqs", type=int, default=3)
    g.add_argument("--amplitude", type=float, default=0.15)
    g.add_argument("--freq-min", type=float, default=8.0)
    g.add_argument("--freq-max", type=float, default=24.0)
    g.add_argument("--mask", default="none",
                   help="none | pixels:RATIO | shapes:COUNT[,MIN,MAX]")
    g.set_defaults(func=_cmd_gen_dataset)

    def add_solver_args(p):
        p.add_argument("--mu", type=float, default=0.05)
        p.add_argument("--a", type=float, default=0.0)
        p.add_argument("--rho-t", dest="rho_t", type=float, default=1.0)
        p.add_argument("--rho-s", dest="rho_s", type=float, default=1.0)
        p.add_argument("--tau", type=float, default=0.1)
        p.add_argument("--iters", type=int, default=100)
        p.add_argument("--pgd", type=int, default=20)
        p.add_argument("--patch", type=int, default=4)
        p.add_argument("--overlap", type=int, default=2)
        p.add_argument("--tol", type=float, default=0.0)

    d = sub.add_parser("decompose", help="classical solver on one image")
    d.add_argument("--input", required=True)
    d.add_argument("--mask")
    add_solver_args(d)
    d.add_argument("--out-u", required=True)
    d.add_argument("--out-v", required=True)
    d.add_argument("--diagnostics")
    d.set_defaults(func=_cmd_decompose)

    i = sub.add_parser("infer", help="unrolled network forward pass on one image")
    i.add_argument("--weights", required=True)
    i.add_argument("--input", required=True)
    i.add_argument("--mask")
    i.add_argument("--out-u", required=True)
    i.add_argument("--out-v", required=True)
    i.set_defaults(func=_cmd_infer)

    e = sub.add_parser("evaluate", help="evaluate a method over a dataset directory")
    e.add_argument("--dataset", required=True)
    e.add_argument("--weights", help="weight file (unrolled method)")
    add_solver_args(e)
    e.add_argument("--sweep", help="mu=MIN:MAX:STEPS grid, keep best mean joint PSNR")
    e.add_argument("--csv", help="write per-sample rows to this CSV file")
    e.set_defaults(func=_cmd_evaluate)

    w = sub.add_parser("inspect-weights", help="print a weight file's manifest")
    w.add_argument("weights")
    w.set_defaults(func=_cmd_inspect_weights)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a diagnostic, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
