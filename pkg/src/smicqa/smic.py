"""Sliced MIC between reference and distorted features, and attention maps.

Each slice projects the channel vectors at every site of a patch onto a
random Gaussian direction, giving two scalar sequences (one per image)
whose MIC is computed. Averaging over the slices gives the sliced MIC of
the patch; attention is one minus that value.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import mic
from .exceptions import PreconditionError
from .maps import DEFAULT_PATCH, patch_grid_shape

SHARED = "shared"
INDEPENDENT = "independent"
DEFAULT_K = 32

# tiles per MIC batch; bounds peak memory on stride-1 maps
_TILE_CHUNK = 2048


@dataclass(frozen=True)
class ProjectionBank:
    """``k`` pairs of Gaussian projection vectors over ``channels`` channels.

    In shared mode ``phi`` is a copy of ``theta``, so both feature stacks
    go through the same projection (a single depth-wise layer).
    """

    channels: int
    k: int
    seed: int
    mode: str
    theta: np.ndarray
    phi: np.ndarray


def sample_projection_bank(channels, k=DEFAULT_K, seed=0, mode=SHARED):
    """Draw a deterministic bank from ``seed``.

    ``theta`` and ``phi`` come from separate child streams, so for a fixed
    seed the first rows of a larger bank equal a smaller bank.
    """
    if channels < 1 or k < 1:
        raise PreconditionError(f"channels and k must be >= 1 (got {channels}, {k})")
    if mode not in (SHARED, INDEPENDENT):
        raise PreconditionError(f"unknown projection mode {mode!r}")
    theta_seq, phi_seq = np.random.SeedSequence(int(seed)).spawn(2)
    theta = np.random.default_rng(theta_seq).standard_normal((k, channels))
    if mode == SHARED:
        phi = theta.copy()
    else:
        phi = np.random.default_rng(phi_seq).standard_normal((k, channels))
    theta.setflags(write=False)
    phi.setflags(write=False)
    return ProjectionBank(channels, k, int(seed), mode, theta, phi)


def project_patch(patch, vector):
    """Project every site of an ``(H, W, C)`` patch onto ``vector``.

    Returns the ``H * W`` scalars in row-major site order.
    """
    patch = np.asarray(patch, dtype=np.float64)
    vector = np.asarray(vector, dtype=np.float64)
    if patch.ndim != 3 or vector.shape != (patch.shape[2],):
        raise PreconditionError(
            f"projection vector of shape {vector.shape} does not match patch {patch.shape}"
        )
    return patch.reshape(-1, patch.shape[2]) @ vector


@dataclass(frozen=True)
class FeaturePatchPair:
    ref_patch: np.ndarray
    dist_patch: np.ndarray
    stage: Optional[int] = None

    def __post_init__(self):
        ref = np.asarray(self.ref_patch, dtype=np.float64)
        dist = np.asarray(self.dist_patch, dtype=np.float64)
        if ref.shape != dist.shape or ref.ndim != 3:
            raise PreconditionError(f"patch shapes differ or are not HxWxC: {ref.shape} vs {dist.shape}")
        if ref.shape[0] * ref.shape[1] < mic.MIN_SAMPLES:
            raise PreconditionError(f"patch needs at least {mic.MIN_SAMPLES} sites")
        object.__setattr__(self, "ref_patch", ref)
        object.__setattr__(self, "dist_patch", dist)


@dataclass(frozen=True)
class AttentionMap:
    values: np.ndarray
    stage: Optional[int] = None
    patch: int = DEFAULT_PATCH
    stride: int = DEFAULT_PATCH

    @property
    def shape(self):
        return self.values.shape


def _check_bank(bank, channels):
    if bank.channels != channels:
        raise PreconditionError(
            f"projection bank has {bank.channels} channels, features have {channels}"
        )


def sliced_mic(ref_proj, dist_proj, bound_exponent=mic.DEFAULT_BOUND_EXPONENT):
    """Mean MIC over slices for ``(tiles, k, n)`` projected sequences."""
    t, k, n = ref_proj.shape
    values = mic.approx_mic_batch(ref_proj.reshape(t * k, n), dist_proj.reshape(t * k, n),
                                  bound_exponent)
    return values.reshape(t, k).sum(axis=1) / k


def smic_patch(pair, bank, bound_exponent=mic.DEFAULT_BOUND_EXPONENT):
    """Sliced MIC of one patch pair, in [0, 1]."""
    _check_bank(bank, pair.ref_patch.shape[2])
    c = bank.channels
    ref = (pair.ref_patch.reshape(-1, c) @ bank.theta.T).T
    dist = (pair.dist_patch.reshape(-1, c) @ bank.phi.T).T
    return float(sliced_mic(ref[None], dist[None], bound_exponent)[0])


def _tiles(projected, patch, stride):
    """``(H, W, K)`` projected map -> ``(gh, gw, K, patch * patch)`` tiles."""
    win = sliding_window_view(projected, (patch, patch), axis=(0, 1))[::stride, ::stride]
    gh, gw, k = win.shape[:3]
    return win.reshape(gh, gw, k, patch * patch)


def attention_map_for_stage(ref_features, dist_features, bank, patch=DEFAULT_PATCH,
                            stride=DEFAULT_PATCH, stage=None,
                            bound_exponent=mic.DEFAULT_BOUND_EXPONENT,
                            resample_per_patch=False):
    """One minus the sliced MIC of every complete tile of a stage.

    With ``resample_per_patch`` each tile gets its own bank, seeded from
    ``(bank.seed, tile index)``; otherwise ``bank`` is shared by all tiles.
    """
    ref = np.asarray(ref_features, dtype=np.float64)
    dist = np.asarray(dist_features, dtype=np.float64)
    if ref.shape != dist.shape or ref.ndim != 3:
        raise PreconditionError(
            f"feature shapes must match and be HxWxC: {ref.shape} vs {dist.shape}"
        )
    gh, gw = patch_grid_shape(ref.shape, patch, stride, stage)
    _check_bank(bank, ref.shape[2])

    if resample_per_patch:
        smic = _smic_resampled(ref, dist, bank, patch, stride, gh, gw, bound_exponent)
    else:
        ref_tiles = _tiles(ref @ bank.theta.T, patch, stride)
        dist_tiles = _tiles(dist @ bank.phi.T, patch, stride)
        flat_ref = ref_tiles.reshape(gh * gw, bank.k, patch * patch)
        flat_dist = dist_tiles.reshape(gh * gw, bank.k, patch * patch)
        smic = np.empty(gh * gw)
        for start in range(0, gh * gw, _TILE_CHUNK):
            stop = min(start + _TILE_CHUNK, gh * gw)
            smic[start:stop] = sliced_mic(flat_ref[start:stop], flat_dist[start:stop],
                                          bound_exponent)
        smic = smic.reshape(gh, gw)
    return AttentionMap(1.0 - smic, stage, patch, stride)


def _smic_resampled(ref, dist, bank, patch, stride, gh, gw, bound_exponent):
    out = np.empty((gh, gw))
    for r in range(gh):
        for c in range(gw):
            tile_seed = np.random.SeedSequence([bank.seed, r * gw + c]).generate_state(1)[0]
            local = sample_projection_bank(bank.channels, bank.k, int(tile_seed), bank.mode)
            rs, cs = r * stride, c * stride
            pair = FeaturePatchPair(ref[rs:rs + patch, cs:cs + patch],
                                    dist[rs:rs + patch, cs:cs + patch])
            out[r, c] = smic_patch(pair, local, bound_exponent)
    return out
