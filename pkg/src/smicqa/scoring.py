"""Attention-weighted pooling of distortion maps into quality scores."""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np

from . import maps, mic
from . import smic as smic_mod
from .exceptions import PreconditionError

METRICS = ("psnr", "ssim", "lpips")
TRADITIONAL = ("psnr", "ssim")
PSNR_DB_CAP = 100.0
PSNR_MSE_FLOOR = 1e-10


@dataclass(frozen=True)
class StageRange:
    m: int = 3
    n: int = 4

    def __post_init__(self):
        if not 1 <= self.m <= self.n <= 5:
            raise PreconditionError(f"invalid stage range {self.m}:{self.n}")

    @property
    def stages(self):
        return tuple(range(self.m, self.n + 1))

    @property
    def count(self):
        return self.n - self.m + 1

    @classmethod
    def parse(cls, text):
        m, _, n = str(text).partition(":")
        return cls(int(m), int(n or m))


@dataclass(frozen=True)
class QualityScore:
    value: float
    metric: str
    smic_enabled: bool
    db: Optional[float] = None
    per_stage_terms: Optional[Dict[int, float]] = None

    def to_dict(self):
        out = {"metric": self.metric, "value": self.value, "smic": self.smic_enabled}
        if self.db is not None:
            out["db"] = self.db
        out["per_stage_terms"] = (
            None if self.per_stage_terms is None
            else {str(k): v for k, v in sorted(self.per_stage_terms.items())}
        )
        return out


def psnr_db(mse):
    """``10 log10(1 / mse)`` for [0, 1] images, capped at 100 dB."""
    if mse < PSNR_MSE_FLOOR:
        return PSNR_DB_CAP
    return 10.0 * math.log10(1.0 / mse)


def _axis_weights(n_src, n_dst):
    if n_src == 1 or n_dst == 1:
        pos = np.zeros(n_dst)
    else:
        pos = np.arange(n_dst) * (n_src - 1) / (n_dst - 1)
    i0 = np.minimum(np.floor(pos).astype(np.int64), max(n_src - 2, 0))
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, pos - i0


def resize_bilinear(grid, target_h, target_w):
    """Bilinear resize with corner-aligned sampling (``align_corners=True``)."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or min(grid.shape) < 1:
        raise PreconditionError(f"expected a non-empty 2-D grid, got shape {grid.shape}")
    if target_h < 1 or target_w < 1:
        raise PreconditionError(f"target size must be positive, got {target_h}x{target_w}")
    if grid.shape == (target_h, target_w):
        return grid.copy()
    r0, r1, fr = _axis_weights(grid.shape[0], target_h)
    c0, c1, fc = _axis_weights(grid.shape[1], target_w)
    top, bottom = grid[r0], grid[r1]
    rows = top + (bottom - top) * fr[:, None]
    left, right = rows[:, c0], rows[:, c1]
    return left + (right - left) * fc[None, :]


def _require_stages(mapping, stages, what):
    for s in stages:
        if s not in mapping:
            raise PreconditionError(f"missing {what} for stage {s}")


def score_traditional(metric, distortion, attentions, stage_range=StageRange()):
    """Pool a pixel-domain map with the averaged, resized attention maps."""
    if metric not in TRADITIONAL:
        raise PreconditionError(f"{metric!r} is not a traditional metric")
    _require_stages(attentions, stage_range.stages, "attention map")
    h, w = distortion.values.shape
    total = None
    att_means = {}
    for s in stage_range.stages:
        resized = resize_bilinear(attentions[s].values, h, w)
        att_means[s] = float(np.mean(attentions[s].values))
        total = resized if total is None else total + resized
    weights = total / stage_range.count
    assert weights.shape == distortion.values.shape
    value = float(np.mean(weights * distortion.values))
    db = psnr_db(value) if metric == "psnr" else None
    return QualityScore(value, metric, True, db, att_means)


def score_deep(metric, per_stage_distortion, attentions, stage_range=StageRange(),
               stage_average=False):
    """Sum of per-stage distances, attention-weighted on the selected stages.

    With ``stage_average`` the weighted stage terms are divided by the number
    of selected stages before adding the remaining stages.
    """
    if metric != "lpips":
        raise PreconditionError(f"{metric!r} is not a supported deep metric")
    _require_stages(per_stage_distortion, range(1, 6), "distortion map")
    _require_stages(attentions, stage_range.stages, "attention map")
    terms = {}
    for s in range(1, 6):
        d = per_stage_distortion[s].values
        if s in stage_range.stages:
            a = attentions[s].values
            if a.shape != d.shape:
                raise PreconditionError(
                    f"stage {s}: attention grid {a.shape} does not match distortion grid {d.shape}"
                )
            term = float(np.mean(a * d))
            terms[s] = term / stage_range.count if stage_average else term
        else:
            terms[s] = float(np.mean(d))
    value = 0.0
    for s in range(1, 6):
        value += terms[s]
    return QualityScore(value, metric, True, None, terms)


@dataclass(frozen=True)
class ScoreConfig:
    metric: str = "psnr"
    smic: bool = True
    seed: int = 0
    k: int = smic_mod.DEFAULT_K
    stages: StageRange = field(default_factory=StageRange)
    proj_mode: str = smic_mod.SHARED
    backbone: Any = None
    patch: int = maps.DEFAULT_PATCH
    deep_stride: int = 7
    traditional_stride: int = 1
    normalize: bool = True
    bound_exponent: float = mic.DEFAULT_BOUND_EXPONENT
    force_attention_one: bool = False
    stage_average: bool = False
    resample_per_patch: bool = False

    def __post_init__(self):
        if self.metric not in METRICS:
            raise PreconditionError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if (self.smic or self.metric == "lpips") and self.backbone is None:
            raise PreconditionError(f"metric {self.metric!r} with smic={self.smic} needs a backbone")

    def with_(self, **changes):
        return replace(self, **changes)


def stage_attention(config, ref_feats, dist_feats, stage, stride):
    """Attention map for one stage under ``config`` (or all ones if forced)."""
    ref, dist = ref_feats[stage], dist_feats[stage]
    if config.force_attention_one:
        gh, gw = maps.patch_grid_shape(ref.shape, config.patch, stride, stage)
        return smic_mod.AttentionMap(np.ones((gh, gw)), stage, config.patch, stride)
    bank = smic_mod.sample_projection_bank(ref.shape[2], config.k, config.seed, config.proj_mode)
    return smic_mod.attention_map_for_stage(
        ref, dist, bank, patch=config.patch, stride=stride, stage=stage,
        bound_exponent=config.bound_exponent, resample_per_patch=config.resample_per_patch)


def score_pair(config, ref, dist):
    """Score one reference/distorted image pair."""
    ref, dist = maps.as_image(ref), maps.as_image(dist)
    if ref.shape != dist.shape:
        raise PreconditionError(f"image shapes differ: {ref.shape} vs {dist.shape}")
    metric = config.metric

    if metric in TRADITIONAL:
        dmap = maps.psnr_error_map(ref, dist) if metric == "psnr" else maps.ssim_local_map(ref, dist)
        if not config.smic:
            value = dmap.mean()
            return QualityScore(value, metric, False, psnr_db(value) if metric == "psnr" else None)
        ref_feats = config.backbone.extract_stage_features(ref)
        dist_feats = config.backbone.extract_stage_features(dist)
        attentions = {s: stage_attention(config, ref_feats, dist_feats, s, config.traditional_stride)
                      for s in config.stages.stages}
        return score_traditional(metric, dmap, attentions, config.stages)

    ref_feats = config.backbone.extract_stage_features(ref)
    dist_feats = config.backbone.extract_stage_features(dist)
    dmaps = {s: maps.deep_distortion_map(ref_feats[s], dist_feats[s], stage=s, patch=config.patch,
                                         stride=config.deep_stride, normalize=config.normalize)
             for s in range(1, 6)}
    if not config.smic:
        terms = {s: dmaps[s].mean() for s in range(1, 6)}
        value = 0.0
        for s in range(1, 6):
            value += terms[s]
        return QualityScore(value, metric, False, None, terms)
    attentions = {s: stage_attention(config, ref_feats, dist_feats, s, config.deep_stride)
                  for s in config.stages.stages}
    return score_deep(metric, dmaps, attentions, config.stages, config.stage_average)
