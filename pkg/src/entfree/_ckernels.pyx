# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics mirror ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def kron(const double complex[:, ::1] a, const double complex[:, ::1] b):
    cdef Py_ssize_t ra = a.shape[0], ca = a.shape[1]
    cdef Py_ssize_t rb = b.shape[0], cb = b.shape[1]
    out = np.empty((ra * rb, ca * cb), dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64)
    cdef const double[:, ::1] bf = np.asarray(b).view(np.float64)
    cdef Py_ssize_t i, j, k, l, col
    cdef double ar, ai, br, bi
    for i in range(ra):
        for k in range(rb):
            for j in range(ca):
                ar = a[i, j].real
                ai = a[i, j].imag
                col = 2 * j * cb
                for l in range(cb):
                    br = bf[k, 2 * l]
                    bi = bf[k, 2 * l + 1]
                    o[i * rb + k, col + 2 * l] = ar * br - ai * bi
                    o[i * rb + k, col + 2 * l + 1] = ar * bi + ai * br
    return out


def partial_trace(const double complex[:, ::1] m, Py_ssize_t d_a, Py_ssize_t d_b,
                  bint keep_a):
    cdef Py_ssize_t i, j, k, l
    cdef double complex acc
    if keep_a:
        out = np.zeros((d_a, d_a), dtype=np.complex128)
    else:
        out = np.zeros((d_b, d_b), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    if keep_a:
        for i in range(d_a):
            for j in range(d_a):
                acc = 0
                for k in range(d_b):
                    acc = acc + m[i * d_b + k, j * d_b + k]
                o[i, j] = acc
    else:
        for k in range(d_b):
            for l in range(d_b):
                acc = 0
                for i in range(d_a):
                    acc = acc + m[i * d_b + k, i * d_b + l]
                o[k, l] = acc
    return out


def phase_kick(double complex[::1] psi, const double[::1] v, double factor):
    """In place: psi[i] *= exp(-1j * factor * v[i])."""
    cdef Py_ssize_t i, n = psi.shape[0]
    cdef double th, c, s, re, im
    for i in range(n):
        th = factor * v[i]
        c = cos(th)
        s = sin(th)
        re = psi[i].real
        im = psi[i].imag
        psi[i] = (re * c + im * s) + 1j * (im * c - re * s)


def abs2_sum(const double complex[::1] psi):
    cdef Py_ssize_t i, n = psi.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    return acc
