"""Command-line front end: synth, enroll, match, segment, normalize, evaluate.

Every subcommand is a thin adapter over the library; on pipeline errors it
prints one machine-parsable line ``ERROR <Type>: <message>`` to stderr and
exits 1 (argparse usage problems exit 2 as usual).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import evaluation, imaging, synthdata
from .encoding import make_encoder, read_code, write_code
from .exceptions import CrossIrisError
from .matching import match_with_shifts
from .normalization import RubberSheetNormalizer
from .segmentation import IrisSegmenter
from .types import CHANNELS, EYE_COLORS, EyeImage, IrisCode

logger = logging.getLogger("crossiris")

CODE_SUFFIX = ".ixc"


def _load_gray(args, path: str) -> EyeImage:
    """Load an image and reduce it to one plane via the channel arguments."""
    img = imaging.load_image(path)
    if img.band != "RGB":
        return img
    channel = args.channel
    if channel is None:
        policy = (
            imaging.load_policy(args.policy) if args.policy
            else imaging.default_policy()
        )
        if args.eye_color is None:
            raise CrossIrisError(
                "RGB input needs --channel, or --eye-color for a policy lookup"
            )
        channel = imaging.select_channel(args.eye_color, args.encoder, policy)
    return imaging.extract_channel(img, channel)


def _code_from_arg(args, path: str) -> IrisCode:
    if path.endswith(CODE_SUFFIX):
        return read_code(path)
    img = _load_gray(args, path)
    seg = IrisSegmenter().segment(img)
    normalized = RubberSheetNormalizer().normalize(img, seg)
    return make_encoder(args.encoder).encode(normalized)


def _cmd_synth(args) -> int:
    manifest = synthdata.generate_dataset(
        out_dir=args.out,
        subjects=args.subjects,
        eyes_per_subject=args.eyes_per_subject,
        nir_per_iris=args.nir_per_iris,
        vis_per_iris=args.vis_per_iris,
        seed=args.seed,
        noise_sigma=args.noise_sigma,
        with_highlight=not args.no_highlight,
    )
    print(
        f"wrote {len(manifest.entries)} images for {manifest.subjects} subjects "
        f"({manifest.irises} irises) under {args.out}"
    )
    return 0


def _cmd_enroll(args) -> int:
    code = _code_from_arg(args, args.image)
    write_code(code, args.out)
    print(f"{args.out} {code.encoder_id} {code.shape[0]}x{code.shape[1]} "
          f"valid_bits={code.n_valid}")
    return 0


def _cmd_match(args) -> int:
    a = _code_from_arg(args, args.a)
    b = _code_from_arg(args, args.b)
    result = match_with_shifts(a, b, max_shift=args.max_shift)
    print(f"{result.score:.6f} {result.best_shift} {result.valid_bits}")
    return 0


def _cmd_segment(args) -> int:
    img = _load_gray(args, args.image)
    seg = IrisSegmenter().segment(img)
    lines = (
        f"{seg.pupil.cx:.1f} {seg.pupil.cy:.1f} {seg.pupil.r:.1f}\n"
        f"{seg.limbus.cx:.1f} {seg.limbus.cy:.1f} {seg.limbus.r:.1f}\n"
    )
    sys.stdout.write(lines)
    if args.out_prefix:
        prefix = Path(args.out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}_circles.txt").write_text(lines, encoding="utf-8")
        mask = (seg.noise_mask.astype(np.uint8)) * 255
        Image.fromarray(mask, mode="L").save(f"{prefix}_mask.png")
    return 0


def _cmd_normalize(args) -> int:
    img = _load_gray(args, args.image)
    seg = IrisSegmenter().segment(img)
    normalized = RubberSheetNormalizer().normalize(img, seg)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    texture = np.round(normalized.texture * 255.0).astype(np.uint8)
    Image.fromarray(texture, mode="L").save(f"{prefix}_texture.png")
    Image.fromarray(normalized.mask.astype(np.uint8) * 255, mode="L").save(
        f"{prefix}_mask.png"
    )
    print(f"wrote {prefix}_texture.png and {prefix}_mask.png")
    return 0


def _cmd_evaluate(args) -> int:
    settings = (
        evaluation.load_run_settings(args.config)
        if args.config
        else evaluation.RunSettings()
    )
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.max_shift is not None:
        overrides["max_shift"] = args.max_shift
    if args.seed is not None:
        overrides["seed"] = args.seed
    cache_dir = (
        args.cache_dir
        or os.environ.get(evaluation.CACHE_ENV_VAR)
        or settings.cache_dir
    )
    overrides["cache_dir"] = cache_dir
    settings = settings.replace(**overrides)

    manifest = evaluation.load_manifest(args.manifest)
    result = evaluation.run_protocol(manifest, settings)
    rows = []
    for score_set in result.score_sets:
        curve = None
        if score_set.genuine and score_set.impostor:
            curve = evaluation.compute_roc(score_set)
        rows.append((score_set, curve))
    written = evaluation.emit_report(rows, args.out)
    for score_set, curve in rows:
        eer = f"{curve.eer:.4f}" if curve is not None else "n/a"
        print(
            f"{score_set.cell_name}: eer={eer} genuine={len(score_set.genuine)} "
            f"impostor={len(score_set.impostor)} failures={score_set.failed_pairs}"
        )
    print(f"report: {written[-2]}")
    return 0


def _add_channel_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--channel", choices=CHANNELS, default=None,
                        help="RGB plane to extract from color inputs")
    parser.add_argument("--encoder", choices=("gabor", "dct"), default="gabor")
    parser.add_argument("--policy", default=None,
                        help="channel policy file (used when --channel is absent)")
    parser.add_argument("--eye-color", choices=EYE_COLORS, default=None,
                        help="eye color label for policy lookups")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossiris",
        description="Cross-spectral iris recognition pipeline and evaluation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log pipeline progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multispectral dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--eyes-per-subject", type=int, default=2, choices=(1, 2))
    p.add_argument("--nir-per-iris", type=int, default=6)
    p.add_argument("--vis-per-iris", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=synthdata.DEFAULT_NOISE_SIGMA)
    p.add_argument("--no-highlight", action="store_true",
                   help="render visible-light images without a flash highlight")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("enroll", help="image -> serialized iris code (.ixc)")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    _add_channel_args(p)
    p.set_defaults(func=_cmd_enroll)

    p = sub.add_parser("match", help="score two images or two .ixc codes")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--max-shift", type=int, default=8)
    _add_channel_args(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("segment", help="print pupil/limbus circles (cx cy r)")
    p.add_argument("image")
    p.add_argument("--out-prefix", default=None,
                   help="also write <prefix>_circles.txt and <prefix>_mask.png")
    _add_channel_args(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("normalize", help="dump the unwrapped texture and mask")
    p.add_argument("image")
    p.add_argument("--out-prefix", required=True)
    _add_channel_args(p)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("evaluate", help="run the full cross-spectral protocol")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None, help="run settings file")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--max-shift", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cache-dir", default=None,
                   help=f"template cache (or ${evaluation.CACHE_ENV_VAR})")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CrossIrisError as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
