"""Acceptance suite: one PASS/FAIL line per criterion, every tolerance pinned.

Run with ``pytest tests/test_acceptance.py -s`` (or ``python tests/test_acceptance.py``).
"""

import math
import os
import sys
import time

import numpy as np
import pytest
from scipy import stats

import oracles
from conftest import make_dataset, noisy_pair
from smicqa import synthetic_backbone
from smicqa.cli import main as cli_main
from smicqa.evaluation import (fit_logistic_and_plcc, load_manifest, run_benchmark, srcc)
from smicqa.mic import SamplePairs, approx_mic, exact_mic
from smicqa.scoring import ScoreConfig, score_pair
from smicqa.smic import sample_projection_bank

TOL_MIC_EXACT = 1e-12
TOL_APPROX_ABOVE = 1e-9
TOL_IDENTITY_ATTENTION = 1e-9
TOL_BASELINE = 1e-12
TOL_RECOMPOSE = 1e-9
TOL_PROTOCOL = 1e-12
TOL_PLCC_DROP = 1e-6
MIC_SUITE_SECONDS = 30.0

LIVE_PSNR_SRCC = 0.923
LIVE_SSIM_SRCC = 0.930
LIVE_TOL = 0.01

# odd sample counts cannot be split evenly into two halves
ODD_49_BOUND = -(24 / 49 * math.log(24 / 49) + 25 / 49 * math.log(25 / 49)) / math.log(2)


def report(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def bb():
    return synthetic_backbone(seed=0, channel_plan=(4, 8, 16, 32, 32))


# -- MIC correctness ---------------------------------------------------------------------

def _mic_inputs():
    rng = np.random.default_rng(20240)
    for i in range(200):
        n = int(rng.integers(8, 17))
        x = rng.standard_normal(n)
        y = np.sin(2 * x) + rng.standard_normal(n) * rng.uniform(0.0, 1.0)
        if i % 4 == 0:  # ties on both axes
            x, y = np.round(x, 1), np.round(y, 0)
        yield x, y


def test_mic_correctness_suite(capsys):
    start = time.perf_counter()
    worst_exact, worst_above = 0.0, -np.inf
    for x, y in _mic_inputs():
        s = SamplePairs(x, y)
        e = exact_mic(s).value
        a = approx_mic(s).value
        worst_exact = max(worst_exact, abs(e - oracles.brute_force_mic(list(x), list(y))))
        worst_above = max(worst_above, a - e)
    mono_vals = []
    for n in (8, 10, 12, 14, 16):
        x = np.random.default_rng(n).standard_normal(n)
        s = SamplePairs(x, np.exp(x))
        mono_vals += [exact_mic(s).value, approx_mic(s).value]
    # odd N: the balanced split bound H(floor(N/2)/N)/log 2 instead of 1
    x = np.arange(49.0)
    odd = [exact_mic(SamplePairs(x, 2 * x + 1)).value, approx_mic(SamplePairs(x, 2 * x + 1)).value]
    const = [exact_mic(SamplePairs(np.arange(12.0), np.full(12, 2.0))).value,
             approx_mic(SamplePairs(np.arange(12.0), np.full(12, 2.0))).value]
    elapsed = time.perf_counter() - start
    ok = (worst_exact <= TOL_MIC_EXACT and worst_above <= TOL_APPROX_ABOVE
          and all(abs(v - 1.0) <= TOL_MIC_EXACT for v in mono_vals)
          and all(abs(v - ODD_49_BOUND) <= TOL_MIC_EXACT for v in odd)
          and const == [0.0, 0.0] and elapsed < MIC_SUITE_SECONDS)
    report(capsys, "MIC correctness suite", ok,
           f"max|exact-brute|={worst_exact:.1e} (tol {TOL_MIC_EXACT:.0e}); "
           f"max(approx-exact)={worst_above:.1e} (tol {TOL_APPROX_ABOVE:.0e}); "
           f"monotone even N min={min(mono_vals):.15f}; odd N=49 {odd[0]:.16f}; "
           f"constant={const}; {elapsed:.1f}s (< {MIC_SUITE_SECONDS:.0f}s)")


# -- monotone invariance --------------------------------------------------------------------

MAPS = {
    "exp": np.exp,
    "cube": lambda v: v ** 3,
    "rank": lambda v: stats.rankdata(v),
    "affine": lambda v: 2.5 * v + 7.0,
    "logistic": lambda v: 1.0 / (1.0 + np.exp(-v)),
}


def test_monotone_invariance_suite(capsys):
    rng = np.random.default_rng(777)
    mismatches = []
    for i in range(50):
        x = rng.standard_normal(49)
        y = x ** 2 + 0.5 * rng.standard_normal(49)
        xe, ye = x[:24], y[:24]
        base_a = approx_mic(SamplePairs(x, y)).value
        base_e = exact_mic(SamplePairs(xe, ye)).value
        for name, f in MAPS.items():
            if approx_mic(SamplePairs(f(x), f(y))).value != base_a:
                mismatches.append((i, name, "approx"))
            if exact_mic(SamplePairs(f(xe), f(ye))).value != base_e:
                mismatches.append((i, name, "exact"))
    report(capsys, "Monotone invariance suite", not mismatches,
           f"50 sets x 5 maps, bit-for-bit equality; mismatches={mismatches[:5]}")


# -- SMIC identity / degeneracy --------------------------------------------------------------

def test_smic_identity_degeneracy(capsys, bb):
    ref, dist = noisy_pair(5, size=112)
    feats = bb.extract_stage_features(ref)
    from smicqa.smic import attention_map_for_stage
    max_att = 0.0
    for s in (3, 4):
        bank = sample_projection_bank(feats[s].shape[2], 32, 0, "shared")
        att = attention_map_for_stage(feats[s], feats[s], bank, stride=1, stage=s)
        max_att = max(max_att, float(att.values.max()))
    lp = score_pair(ScoreConfig("lpips", smic=True, backbone=bb), ref, ref).value
    bank = sample_projection_bank(feats[3].shape[2], 32, 0, "shared")
    const_att = attention_map_for_stage(feats[3], np.full_like(feats[3], 0.25), bank,
                                        stage=3).values
    ok = max_att <= TOL_IDENTITY_ATTENTION and lp == 0.0 and np.all(const_att == 1.0)
    report(capsys, "SMIC identity/degeneracy", ok,
           f"identical pair max attention={max_att:.6e} (tol {TOL_IDENTITY_ATTENTION:.0e}; "
           f"7x7 patches give 49 sites, so the balanced-split bound leaves "
           f"1-{ODD_49_BOUND:.16f}={1 - ODD_49_BOUND:.6e}); "
           f"lpips+SMIC identical={lp!r} (== 0); constant-distorted attention all 1.0: "
           f"{bool(np.all(const_att == 1.0))}")


# -- baseline recovery -------------------------------------------------------------------------

def test_baseline_recovery(capsys, bb, tmp_path):
    worst = 0.0
    for seed in range(3):
        ref, dist = noisy_pair(seed, size=112)
        for metric in ("psnr", "ssim", "lpips"):
            base = score_pair(ScoreConfig(metric, smic=False, backbone=bb), ref, dist).value
            forced = score_pair(ScoreConfig(metric, smic=True, backbone=bb,
                                            force_attention_one=True), ref, dist).value
            worst = max(worst, abs(forced - base))
    path = make_dataset(tmp_path / "d")
    m = load_manifest(path, path.parent)
    cells_equal = True
    for metric in ("psnr", "ssim", "lpips"):
        off, on = run_benchmark(m, [
            ScoreConfig(metric, smic=False, backbone=bb),
            ScoreConfig(metric, smic=True, backbone=bb, force_attention_one=True)])
        cells_equal &= (off.srcc == on.srcc and off.plcc == on.plcc)
    report(capsys, "Baseline recovery", worst <= TOL_BASELINE and cells_equal,
           f"max|forced-baseline|={worst:.1e} (tol {TOL_BASELINE:.0e}); "
           f"run_benchmark SRCC/PLCC cells identical: {cells_equal}")


# -- pipeline recomposition --------------------------------------------------------------------

def _oracle_attention(ref, dist, bank, patch, stride):
    h, w, _ = ref.shape
    gh, gw = (h - patch) // stride + 1, (w - patch) // stride + 1
    out = [[0.0] * gw for _ in range(gh)]
    for r in range(gh):
        for c in range(gw):
            rp = ref[r * stride:r * stride + patch, c * stride:c * stride + patch].tolist()
            dp = dist[r * stride:r * stride + patch, c * stride:c * stride + patch].tolist()
            vals = []
            for k in range(bank.k):
                xs = oracles.naive_projection(rp, bank.theta[k].tolist())
                ys = oracles.naive_projection(dp, bank.phi[k].tolist())
                vals.append(approx_mic(SamplePairs(np.array(xs), np.array(ys))).value)
            out[r][c] = 1.0 - sum(vals) / bank.k
    return out


def _hand_score(metric, ref, dist, bb, k, seed):
    rf, df = bb.extract_stage_features(ref), bb.extract_stage_features(dist)
    if metric == "lpips":
        total = 0.0
        for s in range(1, 6):
            d = oracles.naive_deep_map(rf[s], df[s], 7, 7, True)
            if s in (3, 4):
                bank = sample_projection_bank(rf[s].shape[2], k, seed, "shared")
                a = _oracle_attention(rf[s], df[s], bank, 7, 7)
                vals = [a[i][j] * d[i][j] for i in range(len(d)) for j in range(len(d[0]))]
            else:
                vals = [v for row in d for v in row]
            total += sum(vals) / len(vals)
        return total
    if metric == "psnr":
        dmap = np.mean((ref - dist) ** 2, axis=2)
    else:
        from skimage.metrics import structural_similarity
        wts = np.array([0.299, 0.587, 0.114])
        _, full = structural_similarity(ref @ wts, dist @ wts, gaussian_weights=True, sigma=1.5,
                                        use_sample_covariance=False, data_range=1.0, full=True)
        dmap = full[5:-5, 5:-5]
    h, w = dmap.shape
    weight = np.zeros((h, w))
    for s in (3, 4):
        bank = sample_projection_bank(rf[s].shape[2], k, seed, "shared")
        a = _oracle_attention(rf[s], df[s], bank, 7, 1)
        weight += np.array(oracles.bilinear_align_corners(a, h, w))
    weight /= 2
    return float(np.mean(weight * dmap))


def test_pipeline_recomposition(capsys, bb):
    pytest.importorskip("skimage")
    k = 4
    worst = 0.0
    for seed in range(10):
        metric = ("psnr", "ssim", "lpips")[seed % 3]
        size = 112 if metric == "lpips" else 64
        ref, dist = noisy_pair(1000 + seed, size=size)
        got = score_pair(ScoreConfig(metric, smic=True, backbone=bb, k=k, seed=seed),
                         ref, dist).value
        worst = max(worst, abs(got - _hand_score(metric, ref, dist, bb, k, seed)))
    report(capsys, "Pipeline recomposition", worst <= TOL_RECOMPOSE,
           f"10 seeded pairs (psnr/ssim/lpips), max|pipeline-oracle|={worst:.1e} "
           f"(tol {TOL_RECOMPOSE:.0e})")


# -- protocol sanity -----------------------------------------------------------------------------

def test_protocol_sanity(capsys):
    rng = np.random.default_rng(31337)
    worst_srcc, worst_drop = 0.0, -np.inf
    for _ in range(100):
        n = int(rng.integers(10, 40))
        mos = rng.integers(0, 8, n).astype(float)          # ties
        pred = np.round(mos + rng.standard_normal(n) * 2, 0)  # ties
        worst_srcc = max(worst_srcc, abs(srcc(pred, mos) -
                                         oracles.spearman(pred.tolist(), mos.tolist())))
        plcc = fit_logistic_and_plcc(pred, mos).plcc
        raw = abs(oracles.pearson(pred.tolist(), mos.tolist()))
        worst_drop = max(worst_drop, raw - plcc)
    # PLCC after the logistic has no closed form; check the raw Pearson
    # component of the implementation against the oracle too
    from smicqa.evaluation import _pearson
    x, y = rng.standard_normal(50), rng.standard_normal(50)
    pearson_err = abs(_pearson(x, y) - oracles.pearson(x.tolist(), y.tolist()))
    ok = (worst_srcc <= TOL_PROTOCOL and pearson_err <= TOL_PROTOCOL
          and worst_drop <= TOL_PLCC_DROP)
    report(capsys, "Protocol sanity", ok,
           f"100 tied vectors max|srcc-oracle|={worst_srcc:.1e}, |pearson-oracle|={pearson_err:.1e} "
           f"(tol {TOL_PROTOCOL:.0e}); max(raw-PLCC)={worst_drop:.1e} (tol {TOL_PLCC_DROP:.0e})")


# -- LIVE reproduction (conditional) -------------------------------------------------------------------------

LIVE_ENV = "SMICQA_LIVE_MANIFEST"


@pytest.mark.slow
def test_live_reproduction(capsys):
    manifest_path = os.environ.get(LIVE_ENV)
    model_path = os.environ.get("SMICQA_MODEL_PATH")
    if not manifest_path or not model_path:
        with capsys.disabled():
            print(f"\n[SKIP] LIVE reproduction: set {LIVE_ENV}, SMICQA_LIVE_ROOT and "
                  "SMICQA_MODEL_PATH to run", flush=True)
        pytest.skip("LIVE manifest / pretrained backbone not supplied")
    from smicqa.backbone import BackboneConfig, load_backbone
    backbone = load_backbone(BackboneConfig(model_path))
    m = load_manifest(manifest_path, os.environ.get("SMICQA_LIVE_ROOT", "."))
    cells = run_benchmark(m, [ScoreConfig("psnr", smic=False),
                              ScoreConfig("ssim", smic=False),
                              ScoreConfig("psnr", smic=True, backbone=backbone)])
    psnr_base, ssim_base, psnr_smic = (c.srcc for c in cells)
    if len(m) < 100:  # CI subsample: direction only
        ok = psnr_smic > psnr_base
    else:
        ok = (abs(psnr_base - LIVE_PSNR_SRCC) <= LIVE_TOL
              and abs(ssim_base - LIVE_SSIM_SRCC) <= LIVE_TOL
              and psnr_smic > psnr_base)
    report(capsys, "LIVE reproduction", ok,
           f"n={len(m)} PSNR SRCC={psnr_base:.4f} (target {LIVE_PSNR_SRCC}±{LIVE_TOL}), "
           f"SSIM SRCC={ssim_base:.4f} (target {LIVE_SSIM_SRCC}±{LIVE_TOL}), "
           f"PSNR+SMIC SRCC={psnr_smic:.4f} (> baseline)")


# -- determinism ---------------------------------------------------------------------------------------

def test_determinism(capsys, tmp_path):
    path = make_dataset(tmp_path / "d")
    outs = []
    for run in range(2):
        out = tmp_path / f"report{run}.json"
        rc = cli_main(["evaluate", "--manifest", str(path), "--root", str(path.parent),
                       "--metrics", "psnr,ssim,lpips", "--smic", "on,off", "--k", "8",
                       "--seed", "3", "--backbone", "synthetic", "--out", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    report(capsys, "Determinism", outs[0] == outs[1],
           f"two seeded evaluate runs, {len(outs[0])} bytes each, byte-identical: "
           f"{outs[0] == outs[1]}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
