"""Numeric kernels with a compiled fast path.

The Cython extension `_core` is optional: when it is missing (no compiler at
install time) or when SINGDEC_PURE_PYTHON=1 is set, the numpy fallback in
`_fallback` is used instead. Both implement identical contracts.
"""
import os

from . import _fallback

if os.environ.get("SINGDEC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

nccf = _impl.nccf
viterbi_path = _impl.viterbi_path
harmonic_synth = _impl.harmonic_synth


def backend() -> str:
    """Name of the active kernel backend: 'compiled' or 'fallback'."""
    return "fallback" if _impl is _fallback else "compiled"
