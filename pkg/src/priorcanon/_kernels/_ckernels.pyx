# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np

NAME = "compiled"


def conv2d_forward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w, int pad):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t Ho = H + 2 * pad - K + 1, Wo = W + 2 * pad - K + 1
    out_arr = np.zeros((B, O, Ho, Wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, o, c, ky, kx, i, j, iy, j0, j1, off
    cdef double wv
    with nogil:
        for b in range(B):
            for o in range(O):
                for c in range(C):
                    for ky in range(K):
                        for kx in range(K):
                            wv = w[o, c, ky, kx]
                            off = kx - pad
                            j0 = pad - kx if pad > kx else 0
                            j1 = W - off if W - off < Wo else Wo
                            for i in range(Ho):
                                iy = i + ky - pad
                                if iy < 0 or iy >= H:
                                    continue
                                for j in range(j0, j1):
                                    out[b, o, i, j] += wv * x[b, c, iy, j + off]
    return out_arr


def conv2d_grad_weight(const double[:, :, :, ::1] gout, const double[:, :, :, ::1] x, int pad, int k):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = gout.shape[1], Ho = gout.shape[2], Wo = gout.shape[3]
    cdef Py_ssize_t K = k
    gw_arr = np.zeros((O, C, K, K), dtype=np.float64)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, o, c, ky, kx, i, j, iy, j0, j1, off
    cdef double acc
    with nogil:
        for o in range(O):
            for c in range(C):
                for ky in range(K):
                    for kx in range(K):
                        off = kx - pad
                        j0 = pad - kx if pad > kx else 0
                        j1 = W - off if W - off < Wo else Wo
                        acc = 0.0
                        for b in range(B):
                            for i in range(Ho):
                                iy = i + ky - pad
                                if iy < 0 or iy >= H:
                                    continue
                                for j in range(j0, j1):
                                    acc = acc + gout[b, o, i, j] * x[b, c, iy, j + off]
                        gw[o, c, ky, kx] = acc
    return gw_arr


def conv2d_grad_input(const double[:, :, :, ::1] gout, const double[:, :, :, ::1] w, int pad):
    cdef Py_ssize_t B = gout.shape[0], O = gout.shape[1], Ho = gout.shape[2], Wo = gout.shape[3]
    cdef Py_ssize_t C = w.shape[1], K = w.shape[2]
    cdef Py_ssize_t H = Ho - 2 * pad + K - 1, W = Wo - 2 * pad + K - 1
    gx_arr = np.zeros((B, C, H, W), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t b, o, c, ky, kx, i, j, iy, j0, j1, off
    cdef double wv
    with nogil:
        for b in range(B):
            for c in range(C):
                for o in range(O):
                    for ky in range(K):
                        for kx in range(K):
                            wv = w[o, c, ky, kx]
                            off = kx - pad
                            j0 = pad - kx if pad > kx else 0
                            j1 = W - off if W - off < Wo else Wo
                            for i in range(Ho):
                                iy = i + ky - pad
                                if iy < 0 or iy >= H:
                                    continue
                                for j in range(j0, j1):
                                    gx[b, c, iy, j + off] += wv * gout[b, o, i, j]
    return gx_arr


def bilinear_gather(const double[:, ::1] x, const long[:, ::1] idx, const double[:, ::1] wts):
    cdef Py_ssize_t L = x.shape[0], P = idx.shape[0], T = idx.shape[1]
    out_arr = np.zeros((L, P), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t l, p, t
    cdef double acc
    with nogil:
        for l in range(L):
            for p in range(P):
                acc = 0.0
                for t in range(T):
                    acc = acc + x[l, idx[p, t]] * wts[p, t]
                out[l, p] = acc
    return out_arr


def bilinear_scatter(const double[:, ::1] g, const long[:, ::1] idx, const double[:, ::1] wts, Py_ssize_t n_in):
    cdef Py_ssize_t L = g.shape[0], P = idx.shape[0], T = idx.shape[1]
    out_arr = np.zeros((L, n_in), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t l, p, t
    with nogil:
        for l in range(L):
            for p in range(P):
                for t in range(T):
                    out[l, idx[p, t]] += g[l, p] * wts[p, t]
    return out_arr
