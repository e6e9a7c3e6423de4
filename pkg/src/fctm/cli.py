"""Command-line front end.

    fctm encode    IN.fcft OUT.fcmb [options]
    fctm decode    IN.fcmb OUT.fcft [--external-encode CMD --external-decode CMD]
    fctm roundtrip IN.fcft [options] [--out DECODED.fcft]
    fctm eval      IN.fcft --qshifts 0,1,2,3 --out CURVE.csv [options]
    fctm bdrate    REF.csv TEST.csv
    fctm report    ROWS.csv [--csv]

Results go to stdout as ``key=value`` lines. Exit codes: 0 ok, 1 usage,
2 I/O, 3 codec or format failure, 4 no quality overlap between curves.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import Optional

from . import bitstream
from .errors import ConfigError, FcmError, NoQualityOverlap, TooFewPoints
from .evaluation import (
    ReportRow,
    bd_rate,
    fidelity,
    read_curve_csv,
    report_csv,
    report_text,
    sweep_points,
    RateCurve,
    write_curve_csv,
)
from .inner_codec import MAX_QSHIFT, CodecConfig, CodecId, DEFAULT_INTRA_PERIOD
from .pipeline import EncoderConfig, decode, encode
from .tensors import atomic_write_bytes, encode_feature_sequence, load_feature_sequence, shape_signature
from .transform import ImportanceOrder, TransformConfig, TransformId

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CODEC, EXIT_OVERLAP = 0, 1, 2, 3, 4

TRANSFORMS = {"identity": TransformId.IDENTITY, "pyramid_fuse": TransformId.PYRAMID_FUSE}
CODECS = {"ref_lossless": CodecId.REF_LOSSLESS, "ref_lossy": CodecId.REF_LOSSY,
          "external": CodecId.EXTERNAL}
ORDERS = {"none": ImportanceOrder.NONE, "variance_desc": ImportanceOrder.VARIANCE_DESC}

# config-file key -> parser turning the raw string into a value
CONFIG_KEYS = {
    "transform": str,
    "target_channels": int,
    "importance_order": str,
    "gain": str,
    "ratio": int,
    "alpha": float,
    "bitdepth": int,
    "codec": str,
    "qshift": int,
    "intra_period": int,
    "refresh_period": int,
    "global_stats_period": int,
    "external_encode": str,
    "external_decode": str,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys fail."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = CONFIG_KEYS[key](raw)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value {raw!r} for {key}") from None
    return values


def _choice(table: dict, key: str, value):
    if value not in table:
        raise ConfigError(f"{key} must be one of {', '.join(table)}, got {value!r}")
    return table[value]


def build_config(args: argparse.Namespace) -> EncoderConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    gain = None
    if values.get("gain"):
        try:
            gain = tuple(float(g) for g in values["gain"].split(","))
        except ValueError:
            raise ConfigError("gain must be a comma-separated list of numbers") from None
    if values.get("ratio", 1) not in (1, 2):
        raise ConfigError("ratio must be 1 or 2")
    alpha = values.get("alpha", 0.1)
    if not 0.0 <= alpha < 1.0:
        raise ConfigError("alpha must be in [0, 1); 0 disables channel adjustment")
    bitdepth = values.get("bitdepth", 10)
    if not 1 <= bitdepth <= 16:
        raise ConfigError("bitdepth must be within 1..16")
    qshift = values.get("qshift", 0)
    if not 0 <= qshift <= MAX_QSHIFT:
        raise ConfigError(f"qshift must be within 0..{MAX_QSHIFT}")
    for key in ("intra_period", "refresh_period", "global_stats_period", "target_channels"):
        if key in values and values[key] < 1:
            raise ConfigError(f"{key} must be >= 1")

    codec_id = _choice(CODECS, "codec", values.get("codec", "ref_lossless"))
    try:
        return EncoderConfig(
            transform=TransformConfig(
                transform_id=_choice(TRANSFORMS, "transform", values.get("transform", "pyramid_fuse")),
                target_channels=values.get("target_channels"),
                importance_order=_choice(ORDERS, "importance_order",
                                         values.get("importance_order", "none")),
                gain_vector=gain,
            ),
            codec=CodecConfig(
                codec_id=codec_id,
                qshift=qshift,
                intra_period=values.get("intra_period", DEFAULT_INTRA_PERIOD),
                external_cmd_encode=values.get("external_encode"),
                external_cmd_decode=values.get("external_decode"),
            ),
            ratio=values.get("ratio", 1),
            alpha=alpha,
            bitdepth=bitdepth,
            refresh_period=values.get("refresh_period"),
            global_stats_period=values.get("global_stats_period"),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _add_codec_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--transform", choices=sorted(TRANSFORMS))
    p.add_argument("--target-channels", dest="target_channels", type=int, metavar="N")
    p.add_argument("--importance-order", dest="importance_order", choices=sorted(ORDERS))
    p.add_argument("--gain", metavar="G0,G1,...", help="per-channel gain vector")
    p.add_argument("--ratio", type=int, choices=(1, 2), help="temporal sampling ratio")
    p.add_argument("--alpha", type=float, help="channel-adjust threshold scale; 0 disables")
    p.add_argument("--bitdepth", type=int, metavar="N")
    p.add_argument("--codec", choices=sorted(CODECS))
    p.add_argument("--qshift", type=int, metavar="N")
    p.add_argument("--intra-period", dest="intra_period", type=int, metavar="N")
    p.add_argument("--refresh-period", dest="refresh_period", type=int, metavar="N")
    p.add_argument("--global-stats-period", dest="global_stats_period", type=int, metavar="N")
    _add_external_options(p)


def _add_external_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--external-encode", dest="external_encode", metavar="CMD")
    p.add_argument("--external-decode", dest="external_decode", metavar="CMD")


def _emit(**kv) -> None:
    for k, v in kv.items():
        print(f"{k}={v}")


def _shape_str(shapes) -> str:
    return ",".join(f"{c}x{h}x{w}" for c, h, w in shapes)


def cmd_encode(args) -> int:
    cfg = build_config(args)
    seq = load_feature_sequence(args.input)
    data = encode(seq, cfg)
    atomic_write_bytes(args.output, data)
    rate = bitstream.measure_rate(data, len(seq), args.fps)
    _emit(bytes=len(data), bits=rate.total_bits, bits_per_element=f"{rate.bits_per_element:.6f}",
          bits_per_second=f"{rate.bits_per_second:.1f}", sets=len(seq))
    return EXIT_OK


def _external_pair(args):
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    enc = args.external_encode or values.get("external_encode")
    dec = args.external_decode or values.get("external_decode")
    return (enc or "", dec) if dec else None


def cmd_decode(args) -> int:
    with open(args.input, "rb") as f:
        data = f.read()
    seq = decode(data, _external_pair(args))
    atomic_write_bytes(args.output, encode_feature_sequence(seq))
    _emit(sets=len(seq), shapes=_shape_str(shape_signature(seq)))
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    cfg = build_config(args)
    seq = load_feature_sequence(args.input)
    data = encode(seq, cfg)
    out = decode(data, (cfg.codec.external_cmd_encode, cfg.codec.external_cmd_decode)
                 if cfg.codec.codec_id == CodecId.EXTERNAL else None)
    if args.out:
        atomic_write_bytes(args.out, encode_feature_sequence(out))
    fid = fidelity(seq, out)
    _emit(bytes=len(data), bits_per_element=f"{8 * len(data) / seq.element_count:.6f}",
          mse=f"{fid.mse:.9g}", psnr=f"{fid.psnr:.4f}", cosine=f"{fid.cosine:.9f}")
    for i, m in enumerate(fid.layer_mse):
        print(f"layer_{i}_mse={m:.9g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        qshifts = sorted({int(q) for q in args.qshifts.split(",") if q.strip()})
    except ValueError:
        raise UsageError("--qshifts must be a comma-separated list of integers") from None
    if len(qshifts) < 2:
        raise UsageError("eval needs at least 2 distinct qshift values to form a curve")
    if any(not 0 <= q <= MAX_QSHIFT for q in qshifts):
        raise UsageError(f"qshift values must be within 0..{MAX_QSHIFT}")
    cfg = build_config(args)
    seq = load_feature_sequence(args.input)
    pts = sweep_points(seq, cfg, qshifts)
    curve = RateCurve.from_points((p.bits_per_element, p.cosine) for p in pts)
    write_curve_csv(curve, args.out)
    for p in pts:
        print(f"qshift={p.qshift} bytes={p.bytes} bits_per_element={p.bits_per_element:.6f} "
              f"cosine={p.cosine:.9f}")
    _emit(points=len(pts))
    return EXIT_OK


def cmd_bdrate(args) -> int:
    ref = read_curve_csv(args.reference)
    test = read_curve_csv(args.test)
    _emit(bd_rate_percent=f"{bd_rate(ref, test):.3f}")
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.rows, newline="") as f:
        rows = [ReportRow(r["task"], r["dataset"], float(r["bd_rate"]),
                          float(r["encode_ratio"]), float(r["decode_ratio"]))
                for r in csv.DictReader(f)]
    sys.stdout.write(report_csv(rows) if args.csv else report_text(rows))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fctm", description="Feature coding test model codec")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="compress an FCFT feature file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--fps", type=float, default=30.0)
    _add_codec_options(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="restore an FCFT feature file from a container")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--config", metavar="PATH")
    _add_external_options(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("roundtrip", help="encode, decode and report fidelity")
    p.add_argument("input")
    p.add_argument("--out", metavar="PATH", help="also write the decoded features")
    _add_codec_options(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("eval", help="qshift sweep to a rate,quality CSV")
    p.add_argument("input")
    p.add_argument("--qshifts", required=True)
    p.add_argument("--out", required=True, metavar="CSV")
    _add_codec_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bdrate", help="BD-rate of TEST against REF curve CSVs")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("report", help="render task/dataset rows as a table")
    p.add_argument("rows")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = make_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError, TooFewPoints) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NoQualityOverlap as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OVERLAP
    except OSError as e:
        where = f" {e.filename}" if getattr(e, "filename", None) else ""
        print(f"error: I/O failure on{where}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO
    except FcmError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CODEC
    except ValueError as e:
        # malformed CSV rows and similar user input
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
