"""Hot kernels (convolution, bilinear resampling) with backend selection.

The compiled Cython module is used when it was built; otherwise the numpy
implementations are used. Set ``PRIORCANON_KERNELS=python`` to force the
fallback, or ``PRIORCANON_KERNELS=compiled`` to use the compiled kernels
everywhere and fail loudly if the extension is missing.

In the default ``auto`` mode large convolutions still go to numpy: its
BLAS-backed GEMMs beat the compiled direct loops once a call exceeds about
``CONV_GEMM_THRESHOLD`` multiply-adds (see ``benchmarks/bench_kernels.py``).
"""
import os

from . import _pykernels

_choice = os.environ.get("PRIORCANON_KERNELS", "auto").lower()

compiled = None
try:
    from . import _ckernels as compiled
except ImportError:  # pragma: no cover - depends on build
    if _choice == "compiled":
        raise

if _choice == "python" or compiled is None:
    _impl = _pykernels
else:
    _impl = compiled

python = _pykernels
BACKEND = _impl.NAME
CONV_GEMM_THRESHOLD = 10_000_000


def _macs(B, O, C, k, Ho, Wo):
    return B * O * C * k * k * Ho * Wo


if _impl is compiled and _choice == "auto":
    def conv2d_forward(x, w, pad):
        O, C, k, _ = w.shape
        Ho, Wo = x.shape[2] + 2 * pad - k + 1, x.shape[3] + 2 * pad - k + 1
        impl = _pykernels if _macs(x.shape[0], O, C, k, Ho, Wo) > CONV_GEMM_THRESHOLD else compiled
        return impl.conv2d_forward(x, w, pad)

    def conv2d_grad_weight(gout, x, pad, k):
        B, O, Ho, Wo = gout.shape
        impl = _pykernels if _macs(B, O, x.shape[1], k, Ho, Wo) > CONV_GEMM_THRESHOLD else compiled
        return impl.conv2d_grad_weight(gout, x, pad, k)

    def conv2d_grad_input(gout, w, pad):
        B, O, Ho, Wo = gout.shape
        impl = _pykernels if _macs(B, O, w.shape[1], w.shape[2], Ho, Wo) > CONV_GEMM_THRESHOLD else compiled
        return impl.conv2d_grad_input(gout, w, pad)
else:
    conv2d_forward = _impl.conv2d_forward
    conv2d_grad_weight = _impl.conv2d_grad_weight
    conv2d_grad_input = _impl.conv2d_grad_input
bilinear_gather = _impl.bilinear_gather
bilinear_scatter = _impl.bilinear_scatter


def available_backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _pykernels}
    if compiled is not None:
        out["compiled"] = compiled
    return out
