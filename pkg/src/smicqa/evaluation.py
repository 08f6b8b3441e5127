"""Benchmark manifests, SRCC/PLCC with logistic alignment, and benchmark runs."""

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import optimize, special, stats

from .exceptions import (DegenerateRanksError, DuplicateRowError, ManifestError,
                         ManifestParseError, PreconditionError, UnresolvablePathError)
from .imageio import load_image
from .scoring import score_pair

log = logging.getLogger(__name__)

MIN_REPORT_ROWS = 10
POLARITIES = ("mos", "dmos")
# quality direction of each metric's primary value: +1 higher-is-better
METRIC_DIRECTION = {"psnr": -1.0, "ssim": 1.0, "lpips": -1.0}

NM_STARTS = 5
NM_MAXITER = 2000
NM_TOL = 1e-9


@dataclass(frozen=True)
class ManifestRow:
    ref: Path
    dist: Path
    mos: float
    split: Optional[str] = None


@dataclass(frozen=True)
class BenchmarkManifest:
    name: str
    rows: Tuple[ManifestRow, ...]
    polarity: str = "mos"

    def __len__(self):
        return len(self.rows)


def load_manifest(path, root="."):
    """Read a ``ref,dist,mos[,split][,polarity]`` CSV; paths are joined to ``root``."""
    path = Path(path)
    root = Path(root)
    if not path.is_file():
        raise UnresolvablePathError(f"manifest not found: {path}")
    rows, seen, polarities = [], set(), set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = {"ref", "dist", "mos"} - set(header)
        if missing:
            raise ManifestParseError(1, f"header lacks column(s) {sorted(missing)}")
        reader.fieldnames = header
        for raw in reader:
            line = reader.line_num
            if None in raw or any(raw.get(k) is None for k in ("ref", "dist", "mos")):
                raise ManifestParseError(line, "wrong number of fields")
            ref, dist = raw["ref"].strip(), raw["dist"].strip()
            try:
                mos = float(raw["mos"])
            except ValueError:
                raise ManifestParseError(line, f"MOS {raw['mos']!r} is not numeric") from None
            if not math.isfinite(mos):
                raise ManifestParseError(line, f"MOS {raw['mos']!r} is not finite")
            if (ref, dist) in seen:
                raise DuplicateRowError(f"line {line}: duplicate pair ({ref}, {dist})")
            seen.add((ref, dist))
            pol = (raw.get("polarity") or "").strip().lower()
            if pol:
                if pol not in POLARITIES:
                    raise ManifestParseError(line, f"unknown polarity {pol!r}")
                polarities.add(pol)
            ref_path, dist_path = root / ref, root / dist
            for p in (ref_path, dist_path):
                if not p.is_file():
                    raise UnresolvablePathError(f"line {line}: cannot resolve {p}")
            split = (raw.get("split") or "").strip() or None
            rows.append(ManifestRow(ref_path, dist_path, mos, split))
    if len(polarities) > 1:
        raise ManifestError(f"mixed polarity values in {path}: {sorted(polarities)}")
    return BenchmarkManifest(path.stem, tuple(rows), polarities.pop() if polarities else "mos")


def _pearson(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return float("nan")
    return float(dx @ dy) / denom


def _check_lengths(pred, mos, minimum):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    mos = np.asarray(mos, dtype=np.float64).ravel()
    if pred.shape != mos.shape:
        raise PreconditionError(f"length mismatch: {pred.size} vs {mos.size}")
    if pred.size < minimum:
        raise PreconditionError(f"need at least {minimum} values, got {pred.size}")
    return pred, mos


def srcc(pred, mos):
    """Spearman correlation: Pearson correlation of average-tie ranks."""
    pred, mos = _check_lengths(pred, mos, 3)
    rp, rm = stats.rankdata(pred), stats.rankdata(mos)
    if np.all(rp == rp[0]) or np.all(rm == rm[0]):
        raise DegenerateRanksError("degenerate ranks: an input has zero rank variance")
    return _pearson(rp, rm)


def logistic5(s, b1, b2, b3, b4, b5):
    """``b1 * (1/2 - 1/(1 + exp(b2 (s - b3)))) + b4 s + b5``."""
    s = np.asarray(s, dtype=np.float64)
    return b1 * (0.5 - special.expit(-b2 * (s - b3))) + b4 * s + b5


class LogisticFit(NamedTuple):
    params: Tuple[float, float, float, float, float]
    plcc: float
    converged: bool


def _unstandardize(b, mu_s, sd_s, mu_y, sd_y):
    b1, b2, b3, b4, b5 = b
    return (sd_y * b1, b2 / sd_s, mu_s + sd_s * b3, sd_y * b4 / sd_s,
            mu_y + sd_y * (b5 - b4 * mu_s / sd_s))


def fit_logistic_and_plcc(pred, mos):
    """Fit the five-parameter logistic from ``pred`` to ``mos``; PLCC after mapping.

    Fitting is done on standardized data with Nelder-Mead from several
    starts, one of which is the least-squares affine fit, so the fitted
    curve's PLCC is never below the raw |Pearson| (the logistic family is
    closed under affine maps of its output). If no start converges the
    affine fit is returned with ``converged=False``.
    """
    pred, mos = _check_lengths(pred, mos, MIN_REPORT_ROWS)
    mu_s, sd_s = pred.mean(), pred.std()
    mu_y, sd_y = mos.mean(), mos.std()
    if sd_s == 0.0 or sd_y == 0.0:
        raise PreconditionError("predictions and MOS must both vary")
    s = (pred - mu_s) / sd_s
    y = (mos - mu_y) / sd_y
    r = _pearson(s, y)
    spread = float(y.max() - y.min())
    sign = 1.0 if r >= 0 else -1.0
    med = float(np.median(s))
    starts = [
        (0.0, 1.0, 0.0, r, 0.0),
        (sign * spread, 1.0, 0.0, 0.0, 0.0),
        (sign * spread, 3.0, med, 0.0, 0.0),
        (sign * spread, 0.5, med, r / 2, 0.0),
        (sign * spread / 2, 2.0, 0.0, r / 2, 0.0),
    ][:NM_STARTS]

    def sse(b):
        resid = y - logistic5(s, *b)
        return float(resid @ resid)

    affine = np.array(starts[0])
    best_b, best_sse, converged = affine, sse(affine), False
    for x0 in starts:
        res = optimize.minimize(sse, np.array(x0), method="Nelder-Mead",
                                options={"maxiter": NM_MAXITER, "maxfev": 4 * NM_MAXITER,
                                         "xatol": NM_TOL, "fatol": NM_TOL})
        if not res.success:
            continue
        converged = True
        if res.fun < best_sse:
            best_b, best_sse = res.x, float(res.fun)
    if not converged:
        best_b = affine
    params = _unstandardize(best_b, mu_s, sd_s, mu_y, sd_y)
    fitted = logistic5(pred, *params)
    plcc = abs(_pearson(fitted, mos))
    return LogisticFit(tuple(float(v) for v in params), plcc, converged)


@dataclass
class CorrelationReport:
    metric: str
    smic_enabled: bool
    n: int
    srcc: Optional[float] = None
    plcc: Optional[float] = None
    logistic_params: Optional[List[float]] = None
    converged: Optional[bool] = None
    polarity: str = "mos"
    srcc_improvement_pct: Optional[float] = None
    plcc_improvement_pct: Optional[float] = None
    error: Optional[str] = None
    scores: List[float] = field(default_factory=list)

    def to_dict(self, with_scores=False):
        out = asdict(self)
        if not with_scores:
            out.pop("scores")
        return out


def _oriented(values, metric, polarity):
    sign = METRIC_DIRECTION[metric] * (1.0 if polarity == "mos" else -1.0)
    return [sign * v for v in values]


def _score_cell(manifest, config, images, workers):
    def one(i):
        ref, dist = images(i)
        return score_pair(config, ref, dist).value

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one, i) for i in range(len(manifest))]
            values = []
            for i, fut in enumerate(futures):
                try:
                    values.append(fut.result())
                except Exception as exc:
                    for f in futures[i + 1:]:
                        f.cancel()
                    raise _RowError(i, manifest.rows[i], exc) from exc
            return values
    values = []
    for i in range(len(manifest)):
        try:
            values.append(one(i))
        except Exception as exc:
            raise _RowError(i, manifest.rows[i], exc) from exc
    return values


class _RowError(Exception):
    def __init__(self, index, row, exc):
        super().__init__(f"row {index} ({row.ref.name}, {row.dist.name}): "
                         f"{type(exc).__name__}: {exc}")


def correlation_report(values, manifest, metric, smic_enabled):
    mos = [row.mos for row in manifest.rows]
    pred = _oriented(values, metric, manifest.polarity)
    fit = fit_logistic_and_plcc(pred, mos)
    return CorrelationReport(metric, smic_enabled, len(values), srcc(pred, mos), fit.plcc,
                             list(fit.params), fit.converged, manifest.polarity,
                             scores=list(values))


def run_benchmark(manifest, configs, workers=1, loader=load_image):
    """Score every pair under each config and report SRCC/PLCC per cell.

    A failing pair aborts only its own cell (recorded in ``error``). Cells
    with SMIC on get the relative improvement over the matching SMIC-off
    cell, in percent.
    """
    if len(manifest) < MIN_REPORT_ROWS:
        raise ManifestError(
            f"manifest {manifest.name!r} has {len(manifest)} rows; "
            f"correlation reports need at least {MIN_REPORT_ROWS}"
        )
    cache = {}

    def images(i):
        if i not in cache:
            row = manifest.rows[i]
            cache[i] = (loader(row.ref), loader(row.dist))
        return cache[i]

    reports = []
    for config in configs:
        try:
            values = _score_cell(manifest, config, images, workers)
            report = correlation_report(values, manifest, config.metric, config.smic)
        except (_RowError, ValueError) as exc:
            log.error("cell %s smic=%s aborted: %s", config.metric, config.smic, exc)
            report = CorrelationReport(config.metric, config.smic, len(manifest),
                                       polarity=manifest.polarity, error=str(exc))
        reports.append(report)

    baselines = {r.metric: r for r in reports if not r.smic_enabled and r.error is None}
    for r in reports:
        base = baselines.get(r.metric)
        if r.smic_enabled and r.error is None and base is not None:
            r.srcc_improvement_pct = _relative(r.srcc, base.srcc)
            r.plcc_improvement_pct = _relative(r.plcc, base.plcc)
    return reports


def _relative(new, old):
    if old == 0:
        return None
    return 100.0 * (new - old) / abs(old)


def report_payload(manifest, reports, seed):
    return {
        "manifest": manifest.name,
        "n": len(manifest),
        "polarity": manifest.polarity,
        "seed": seed,
        "optimizer": {"method": "nelder-mead", "starts": NM_STARTS,
                      "maxiter": NM_MAXITER, "tol": NM_TOL},
        "cells": [r.to_dict() for r in reports],
    }


def write_report(payload, path):
    """Write a report as JSON (``.json``) or one-row-per-cell CSV (anything else)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return
    columns = ["metric", "smic_enabled", "n", "srcc", "plcc", "srcc_improvement_pct",
               "plcc_improvement_pct", "converged", "polarity", "error"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for cell in payload["cells"]:
            writer.writerow(cell)
