"""Select the compiled MIC kernel when available, else the numpy fallback.

Set ``SMICQA_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _mic_py

BACKEND = "python"
approx_mic_ranks = _mic_py.approx_mic_ranks

if os.environ.get("SMICQA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _mic_ext
    except ImportError:  # extension not built
        pass
    else:
        approx_mic_ranks = _mic_ext.approx_mic_ranks
        BACKEND = "cython"

__all__ = ["BACKEND", "approx_mic_ranks"]
