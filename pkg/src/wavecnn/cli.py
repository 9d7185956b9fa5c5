"""The ``wavecnn`` command: one entry point over every module.

Exit codes: 0 success, 1 usage error (bad flags/arguments), 2 runtime error
(bad files, incompatible shapes, diverged training).  Results go to stdout or
to files; diagnostics go to stderr.

Subcommands: filters, transform, idwt, denoise, train, eval, robustness,
shift, flops.  Global flags (--seed, --precision, --threads) attach to each
subcommand; transforms and denoising default to f64 precision, training to
f32.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import struct
import sys

import numpy as np

from . import complexity, datasets, denoise, fileio, network, robustness
from .errors import FormatError, InvalidConfig, WaveError
from .filterbank import get_wavelet, wavelet_names
from .transform import Decomposition2D, dwt2d, idwt2d

SUBBANDS = ("ll", "lh", "hl", "hh")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract reserves 2 for
    runtime failures, so remap usage problems to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _shape2(text: str):
    try:
        h, w = (int(p) for p in text.lower().split("x"))
        if h < 1 or w < 1:
            raise ValueError
        return (h, w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW with positive ints, got {text!r}")


def _shape_n(text: str):
    try:
        dims = tuple(int(p) for p in text.lower().split("x"))
        if not dims or any(d < 1 for d in dims):
            raise ValueError
        return dims
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected dims like 1x1x28x28, got {text!r}")


def _sniff(path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:2] == b"P5":
        return "pgm"
    if head == fileio.TENSOR_MAGIC:
        return "tensor"
    raise FormatError(f"{path}: neither a PGM image nor a raw tensor file")


def _read_plane(path, dtype) -> np.ndarray:
    """Image file -> 2-D float array; PGM pixels keep their 0..255 scale."""
    if _sniff(path) == "pgm":
        return fileio.read_pgm(path).astype(dtype)
    arr = fileio.read_tensor(path).astype(dtype)
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected a 2-D tensor, got rank {arr.ndim}")
    return arr


def _write_plane(path, arr) -> None:
    """2-D array -> PGM (quantized) if the path ends in .pgm, else raw tensor."""
    if str(path).lower().endswith(".pgm"):
        fileio.write_pgm(path, arr)
    else:
        fileio.write_tensor(path, arr)


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _np_precision(name: str):
    return np.float32 if name == "f32" else np.float64


# --- subcommand bodies ---


def _cmd_filters(args) -> int:
    if args.list:
        _emit("\n".join(wavelet_names()) + "\n", args.out)
        return 0
    if not args.wavelet:
        args.parser.error("one of --wavelet or --list is required")
    spec = get_wavelet(args.wavelet)
    rows = [("analysis_low", spec.analysis_low), ("analysis_high", spec.analysis_high)]
    if spec.synthesis_low != spec.analysis_low or spec.synthesis_high != spec.analysis_high:
        rows += [("synthesis_low", spec.synthesis_low),
                 ("synthesis_high", spec.synthesis_high)]
    text = "".join(role + "," + ",".join(repr(float(c)) for c in coeffs) + "\n"
                   for role, coeffs in rows)
    _emit(text, args.out)
    return 0


def _cmd_transform(args) -> int:
    spec = get_wavelet(args.wavelet)
    plane = _read_plane(args.input, _np_precision(args.precision or "f64"))
    d = dwt2d(plane, spec)
    for name, band in zip(SUBBANDS, d.subbands()):
        path = f"{args.out_prefix}_{name}.wtn"
        fileio.write_tensor(path, band)
        print(path)
    return 0


def _cmd_idwt(args) -> int:
    spec = get_wavelet(args.wavelet)
    dt = _np_precision(args.precision or "f64")
    bands = [fileio.read_tensor(f"{args.in_prefix}_{name}.wtn").astype(dt)
             for name in SUBBANDS]
    d = Decomposition2D(*bands, original_shape=args.shape)
    _write_plane(args.out, idwt2d(d, spec))
    print(args.out)
    return 0


def _cmd_denoise(args) -> int:
    cfg = denoise.DenoiseConfig(wavelet=args.wavelet, threshold=args.lam)
    if _sniff(args.input) == "pgm":
        out = denoise.denoise_image(fileio.read_pgm(args.input), cfg)
        if not str(args.out).lower().endswith(".pgm"):
            out = out.astype(np.float64) / 255.0
    else:
        dt = _np_precision(args.precision or "f64")
        out = denoise.denoise_image(fileio.read_tensor(args.input).astype(dt), cfg)
        if str(args.out).lower().endswith(".pgm"):
            out = np.asarray(out) * 255.0
    _write_plane(args.out, out)
    print(args.out)
    return 0


_RUN_KEYS = {"arch", "mode", "wavelet", "wavelet_rewrite", "seed", "layers", "train"}


def _load_run_config(path) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InvalidConfig(f"{path}: run config must be a JSON object")
    unknown = set(cfg) - _RUN_KEYS
    if unknown:
        raise InvalidConfig(f"{path}: unknown run config keys: {sorted(unknown)}")
    return cfg


def _pick(flag_value, cfg: dict, key: str, default):
    if flag_value is not None:
        return flag_value
    return cfg.get(key, default)


def _model_config_from(cfg: dict, args, dataset=None) -> network.ModelConfig:
    seed = _pick(args.seed, cfg, "seed", 0)
    rewrite = _pick(getattr(args, "rewrite", None), cfg, "wavelet_rewrite", "")
    if "layers" in cfg:
        return network.ModelConfig.from_dict({
            "layers": cfg["layers"], "seed": seed, "wavelet_rewrite": rewrite})
    arch = cfg.get("arch", "mini")
    if arch != "mini":
        raise InvalidConfig(f"unknown architecture {arch!r}")
    mode = _pick(getattr(args, "mode", None), cfg, "mode", "max_pool")
    wavelet = _pick(getattr(args, "wavelet", None), cfg, "wavelet", "")
    kwargs = {}
    if dataset is not None:
        kwargs["image_hw"] = dataset.images.shape[-2:]
        kwargs["classes"] = max(int(dataset.labels.max()) + 1, 2)
    mc = network.mini_config(mode=mode, wavelet=wavelet, seed=seed, **kwargs)
    return dataclasses.replace(mc, wavelet_rewrite=rewrite)


def _train_config_from(cfg: dict, args) -> network.TrainConfig:
    base = dict(cfg.get("train", {}))
    for key, flag in (("lr", args.lr), ("momentum", args.momentum),
                      ("weight_decay", args.weight_decay),
                      ("batch", args.batch), ("epochs", args.epochs)):
        if flag is not None:
            base[key] = flag
    return network.TrainConfig.from_dict(base)


def _cmd_train(args) -> int:
    cfg = _load_run_config(args.config)
    ds = datasets.load_dataset(args.images, args.labels)
    val = None
    if args.val_images or args.val_labels:
        if not (args.val_images and args.val_labels):
            args.parser.error("--val-images and --val-labels go together")
        val = datasets.load_dataset(args.val_images, args.val_labels)
    model_cfg = _model_config_from(cfg, args, dataset=ds)
    hyper = _train_config_from(cfg, args)
    model = network.build_model(model_cfg, dtype=_np_precision(args.precision or "f32"))
    report = network.train(model, ds, hyper, val=val)
    if args.out:
        network.save_model(model, args.out)
        print(args.out, file=sys.stderr)
    _emit(report.to_csv(), args.report)
    return 0


def _cmd_eval(args) -> int:
    model = network.load_model(args.model)
    ds = datasets.load_dataset(args.images, args.labels)
    err = network.evaluate(model, ds)
    _emit(f"metric,value\ntop1_error,{err!r}\naccuracy,{1.0 - err!r}\n", args.out)
    return 0


def _cmd_robustness(args) -> int:
    model = network.load_model(args.model)
    ds = datasets.load_dataset(args.images, args.labels)
    matrix = robustness.error_matrix(
        model, ds, seed=args.seed or 0, workers=args.threads)
    if args.reference:
        if str(args.reference).lower().endswith(".json"):
            with open(args.reference) as fh:
                ref = robustness.ErrorMatrix.from_json_dict(json.load(fh))
        else:
            with open(args.reference) as fh:
                ref = robustness.ErrorMatrix.from_csv(fh.read())
        report = robustness.robustness_report(matrix, ref)
        csv_text, json_text = report.to_csv(), report.to_json()
    else:
        csv_text = matrix.to_csv()
        json_text = json.dumps(matrix.to_json_dict(), indent=2, sort_keys=True) + "\n"
    if args.out_prefix:
        for suffix, text in ((".csv", csv_text), (".json", json_text)):
            with open(args.out_prefix + suffix, "w") as fh:
                fh.write(text)
            print(args.out_prefix + suffix)
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_shift(args) -> int:
    model = network.load_model(args.model)
    ds = datasets.load_dataset(args.images, args.labels)
    cfg = robustness.ShiftTrialConfig(
        max_shift=args.range, pairs=args.pairs, padding=args.padding,
        seed=args.seed or 0)
    value = robustness.shift_consistency(model, ds, cfg)
    _emit(f"shift_consistency,{value!r}\n", args.out)
    return 0


def _cmd_flops(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InvalidConfig(f"{args.config}: model config must be a JSON object")
    if "layers" in cfg and "arch" not in cfg:
        model_cfg = network.ModelConfig.from_dict(cfg)
    else:
        unknown = set(cfg) - _RUN_KEYS
        if unknown:
            raise InvalidConfig(f"{args.config}: unknown keys: {sorted(unknown)}")
        model_cfg = _model_config_from(cfg, args)
    model = network.build_model(model_cfg)
    report = complexity.model_madds(model, args.input)
    if args.format == "csv":
        _emit(report.to_csv(), args.out)
    else:
        _emit(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
              args.out)
    return 0


# --- parser assembly ---


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="base RNG seed (default 0)")
    common.add_argument("--precision", choices=("f32", "f64"), default=None,
                        help="float width; transforms/denoise default f64, training f32")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads where a subcommand supports fan-out")

    top = _Parser(prog="wavecnn",
                  description="Wavelet transforms, wavelet-downsampled CNNs, "
                              "denoising, robustness metrics, and madds reports.")
    sub = top.add_subparsers(dest="command", metavar="SUBCOMMAND")
    names = wavelet_names()

    p = sub.add_parser("filters", parents=[common], help="print filter coefficients")
    p.add_argument("--wavelet", choices=names)
    p.add_argument("--list", action="store_true", help="list registry names")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=_cmd_filters, parser=p)

    p = sub.add_parser("transform", parents=[common],
                       help="2D wavelet analysis of an image into four subband files")
    p.add_argument("--wavelet", choices=names, required=True)
    p.add_argument("--in", dest="input", required=True, metavar="FILE",
                   help="input image (PGM or raw tensor)")
    p.add_argument("--out-prefix", required=True,
                   help="writes PREFIX_ll/_lh/_hl/_hh.wtn float tensors")
    p.set_defaults(func=_cmd_transform, parser=p)

    p = sub.add_parser("idwt", parents=[common],
                       help="2D wavelet synthesis from four subband files")
    p.add_argument("--wavelet", choices=names, required=True)
    p.add_argument("--in-prefix", dest="in_prefix", required=True)
    p.add_argument("--shape", type=_shape2, required=True, metavar="HxW",
                   help="spatial shape of the reconstruction")
    p.add_argument("--out", required=True, help="output image (.pgm quantizes)")
    p.set_defaults(func=_cmd_idwt, parser=p)

    p = sub.add_parser("denoise", parents=[common],
                       help="soft-shrinkage wavelet denoising of one image")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("--out", required=True)
    p.add_argument("--wavelet", choices=names, default="haar")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1,
                   help="shrinkage threshold on the [0,1] pixel scale")
    p.set_defaults(func=_cmd_denoise, parser=p)

    p = sub.add_parser("train", parents=[common],
                       help="train a model on an IDX dataset")
    p.add_argument("--config", help="JSON run config (architecture + hyperparameters)")
    p.add_argument("--images", required=True, help="IDX image file")
    p.add_argument("--labels", required=True, help="IDX label file")
    p.add_argument("--val-images")
    p.add_argument("--val-labels")
    p.add_argument("--mode", choices=network.DOWNSAMPLE_MODES,
                   help="downsample mode for the reference architecture")
    p.add_argument("--wavelet", choices=names, help="wavelet for dwt_* modes")
    p.add_argument("--rewrite", choices=names, metavar="WAVELET",
                   help="rewrite stride-2 convs to stride-1 + ll downsample")
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="checkpoint path to write")
    p.add_argument("--report", help="write the training report CSV here (default stdout)")
    p.set_defaults(func=_cmd_train, parser=p)

    p = sub.add_parser("eval", parents=[common],
                       help="top-1 error of a checkpoint on an IDX dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval, parser=p)

    p = sub.add_parser("robustness", parents=[common],
                       help="noise-corruption error matrix and CE/mCE report")
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--reference", help="reference error matrix (.csv or .json); "
                                       "omit to emit this model's matrix only")
    p.add_argument("--out-prefix", help="write PREFIX.csv and PREFIX.json")
    p.set_defaults(func=_cmd_robustness, parser=p)

    p = sub.add_parser("shift", parents=[common],
                       help="prediction consistency under random translations")
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--range", type=int, default=8, help="max shift in pixels")
    p.add_argument("--pairs", type=int, default=64, help="random shift pairs")
    p.add_argument("--padding", choices=("reflect", "edge", "constant"),
                   default="reflect")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_shift, parser=p)

    p = sub.add_parser("flops", parents=[common],
                       help="multiply-add report for a model config")
    p.add_argument("--config", required=True, help="model or run config JSON")
    p.add_argument("--input", type=_shape_n, required=True, metavar="NxCxHxW")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--mode", choices=network.DOWNSAMPLE_MODES)
    p.add_argument("--wavelet", choices=names)
    p.add_argument("--rewrite", choices=names, metavar="WAVELET")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_flops, parser=p)

    return top


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.error("a subcommand is required")
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except (WaveError, OSError, ValueError, KeyError,
            struct.error, json.JSONDecodeError) as exc:
        print(f"wavecnn {args.command}: error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
