"""Command-line entry point: ``smicqa score | evaluate | attention-dump``."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import backbone as bb
from .evaluation import load_manifest, report_payload, run_benchmark, write_report
from .exceptions import SmicqaError
from .imageio import load_image, save_attention_png
from .scoring import METRICS, ScoreConfig, StageRange, score_pair, stage_attention
from .smic import INDEPENDENT, SHARED

log = logging.getLogger("smicqa")


def _on_off(text):
    text = text.strip().lower()
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")
    return text == "on"


def resolve_backbone(spec, config_path=None):
    """``synthetic``, a ``.toml`` config, an ``.onnx`` file, or the environment."""
    if spec is None:
        spec = os.environ.get(bb.MODEL_PATH_ENV) or config_path
    if spec is None or spec == "synthetic":
        if spec is None:
            log.warning("no backbone given; using the synthetic backbone")
        return bb.synthetic_backbone()
    if str(spec).endswith(".toml"):
        return bb.load_backbone(bb.BackboneConfig.from_toml(spec))
    return bb.load_backbone(bb.BackboneConfig(model_path=str(spec)))


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=32, help="projections per patch")
    p.add_argument("--stages", type=StageRange.parse, default=StageRange(3, 4), help="m:n")
    p.add_argument("--proj", choices=(SHARED, INDEPENDENT), default=SHARED)
    p.add_argument("--backbone", default=None, help="ONNX file, TOML config, or 'synthetic'")
    p.add_argument("--config", default=None, help="TOML file with a [backbone] table")


def build_parser():
    parser = argparse.ArgumentParser(prog="smicqa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one image pair")
    p.add_argument("--metric", choices=METRICS, required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--smic", type=_on_off, default=True)
    p.add_argument("--out", default="json", help="'json' for stdout or a .json path")
    _common(p)

    p = sub.add_parser("evaluate", help="benchmark metrics on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", default=".")
    p.add_argument("--metrics", default="psnr,ssim,lpips")
    p.add_argument("--smic", default="on,off")
    p.add_argument("--out", required=True, help="report.json or report.csv")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--force-attention-one", action="store_true",
                   help="debug: replace every attention map by ones")
    _common(p)

    p = sub.add_parser("attention-dump", help="write attention maps as 8-bit PNGs")
    p.add_argument("--ref", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stride", type=int, default=7)
    _common(p)
    return parser


def _cmd_score(args):
    backbone = resolve_backbone(args.backbone, args.config)
    config = ScoreConfig(metric=args.metric, smic=args.smic, seed=args.seed, k=args.k,
                         stages=args.stages, proj_mode=args.proj, backbone=backbone)
    score = score_pair(config, load_image(args.ref), load_image(args.dist))
    payload = score.to_dict()
    payload["seed"] = args.seed
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out == "json":
        print(text)
    else:
        Path(args.out).write_text(text + "\n")
    return 0


def _cmd_evaluate(args):
    backbone = resolve_backbone(args.backbone, args.config)
    manifest = load_manifest(args.manifest, args.root)
    flags = [_on_off(v) for v in args.smic.split(",") if v.strip()]
    configs = []
    for metric in [m.strip() for m in args.metrics.split(",") if m.strip()]:
        for flag in flags:
            configs.append(ScoreConfig(metric=metric, smic=flag, seed=args.seed, k=args.k,
                                       stages=args.stages, proj_mode=args.proj,
                                       backbone=backbone,
                                       force_attention_one=args.force_attention_one))
    reports = run_benchmark(manifest, configs, workers=args.workers)
    write_report(report_payload(manifest, reports, args.seed), args.out)
    for r in reports:
        if r.error:
            print(f"{r.metric} smic={'on' if r.smic_enabled else 'off'}: ABORTED {r.error}",
                  file=sys.stderr)
        else:
            print(f"{r.metric} smic={'on' if r.smic_enabled else 'off'}: "
                  f"SRCC={r.srcc:.4f} PLCC={r.plcc:.4f}")
    return 1 if any(r.error for r in reports) else 0


def _cmd_attention_dump(args):
    backbone = resolve_backbone(args.backbone, args.config)
    config = ScoreConfig(metric="psnr", smic=True, seed=args.seed, k=args.k,
                         stages=args.stages, proj_mode=args.proj, backbone=backbone)
    ref_feats = backbone.extract_stage_features(load_image(args.ref))
    dist_feats = backbone.extract_stage_features(load_image(args.dist))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for s in args.stages.stages:
        att = stage_attention(config, ref_feats, dist_feats, s, args.stride)
        path = out_dir / f"attention_stage{s}.png"
        save_attention_png(att, path)
        print(path)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    commands = {"score": _cmd_score, "evaluate": _cmd_evaluate,
                "attention-dump": _cmd_attention_dump}
    try:
        return commands[args.command](args)
    except (SmicqaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
