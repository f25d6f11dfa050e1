"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
Inputs are C-contiguous float64 arrays; outputs are freshly allocated.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "python"


def _pad(x, pad):
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x


def _windows(x, k):
    return sliding_window_view(x, (k, k), axis=(2, 3))


# Each routine unfolds whichever operand has fewer channels, so the unfolded
# copy holds min(C, O) * k * k values per pixel instead of always C * k * k.

def conv2d_forward(x, w, pad):
    """Cross-correlate ``x[B,C,H,W]`` with ``w[O,C,k,k]`` under zero padding."""
    O, C, k, _ = w.shape
    xp = _pad(x, pad)
    Ho, Wo = xp.shape[2] - k + 1, xp.shape[3] - k + 1
    if C <= O:
        out = np.tensordot(_windows(xp, k), w, axes=([1, 4, 5], [1, 2, 3]))
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    z = np.tensordot(w, xp, axes=([1], [1]))  # [O, k, k, B, Hp, Wp]
    out = np.zeros((O, x.shape[0], Ho, Wo))
    for i in range(k):
        for j in range(k):
            out += z[:, i, j, :, i:i + Ho, j:j + Wo]
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d_grad_weight(gout, x, pad, k):
    O, C = gout.shape[1], x.shape[1]
    xp = _pad(x, pad)
    if C <= O:
        gw = np.tensordot(gout, _windows(xp, k), axes=([0, 2, 3], [0, 2, 3]))  # [O, C, k, k]
        return np.ascontiguousarray(gw)
    gp = _pad(gout, k - 1)
    gw = np.tensordot(xp, _windows(gp, k), axes=([0, 2, 3], [0, 2, 3]))  # [C, O, k, k] flipped
    return np.ascontiguousarray(gw[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))


def conv2d_grad_input(gout, w, pad):
    O, C, k, _ = w.shape
    B, _, Ho, Wo = gout.shape
    if O <= C:
        gp = _pad(gout, k - 1)
        gxp = np.tensordot(_windows(gp, k), w[:, :, ::-1, ::-1], axes=([1, 4, 5], [0, 2, 3]))
        gxp = gxp.transpose(0, 3, 1, 2)
    else:
        z = np.tensordot(w, gout, axes=([0], [1]))  # [C, k, k, B, Ho, Wo]
        gxp = np.zeros((C, B, Ho + k - 1, Wo + k - 1))
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + Ho, j:j + Wo] += z[:, i, j]
        gxp = gxp.transpose(1, 0, 2, 3)
    if pad:
        gxp = gxp[:, :, pad:-pad, pad:-pad]
    return np.ascontiguousarray(gxp)


def bilinear_gather(x, idx, wts):
    """Apply a 4-tap resampling operator along the last axis.

    ``x`` is ``[L, P_in]``; ``idx``/``wts`` are ``[P_out, 4]``.
    """
    return np.ascontiguousarray((x[:, idx] * wts).sum(axis=-1))


def bilinear_scatter(g, idx, wts, n_in):
    """Transpose of :func:`bilinear_gather`."""
    L, p_out = g.shape
    flat = (idx[None, :, :] + (np.arange(L) * n_in)[:, None, None]).ravel()
    vals = (g[:, :, None] * wts[None, :, :]).ravel()
    return np.bincount(flat, weights=vals, minlength=L * n_in).reshape(L, n_in)
