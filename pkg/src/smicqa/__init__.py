"""Training-free attention weighting for full-reference image quality metrics.

Attention is estimated per patch as one minus the sliced maximal
information coefficient between reference and distorted deep features,
and used to re-weight the local distortion maps of PSNR, SSIM and an
LPIPS-style feature distance.
"""

from ._kernels import BACKEND
from .backbone import (BackboneConfig, FeatureStack, extract_stage_features, load_backbone,
                       synthetic_backbone)
from .evaluation import (BenchmarkManifest, CorrelationReport, fit_logistic_and_plcc,
                         load_manifest, run_benchmark, srcc)
from .maps import (DistortionMap, deep_distortion_map, extract_patch_grid, psnr_error_map,
                   ssim_local_map)
from .mic import (GridPartition, MicResult, SamplePairs, admissible_grid_shapes, approx_mic,
                  exact_mic, mi_under_grid)
from .scoring import (QualityScore, ScoreConfig, StageRange, resize_bilinear, score_deep,
                      score_pair, score_traditional)
from .smic import (AttentionMap, FeaturePatchPair, ProjectionBank, attention_map_for_stage,
                   project_patch, sample_projection_bank, smic_patch)

__version__ = "0.1.0"
