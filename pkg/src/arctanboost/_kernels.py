"""Select the split-scan backend at import time.

The compiled Cython kernel is used when it was built; otherwise the NumPy
implementation is used. Set ``ARCTANBOOST_PURE=1`` to force the fallback.
"""
import os

from . import _split_py

if os.environ.get("ARCTANBOOST_PURE") == "1":
    scan_feature = _split_py.scan_feature
    BACKEND = "python"
else:
    try:
        from ._split_cy import scan_feature
        BACKEND = "cython"
    except ImportError:
        scan_feature = _split_py.scan_feature
        BACKEND = "python"

BACKENDS = {"python": _split_py.scan_feature}
try:
    from ._split_cy import scan_feature as _cy_scan

    BACKENDS["cython"] = _cy_scan
except ImportError:
    pass
