# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled field kernel (rotation recurrence over the evaluation grid)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def block_field(const double[::1] log_p, const double[::1] amp, const double[::1] phase,
                const cnp.int64_t[::1] block_starts, Py_ssize_t grid_size,
                Py_ssize_t resync=1024, Py_ssize_t i_start=0, i_stop=None):
    cdef Py_ssize_t stop = grid_size + 1 if i_stop is None else i_stop
    cdef Py_ssize_t n_blocks = block_starts.shape[0] - 1
    cdef Py_ssize_t width = stop - i_start
    out_arr = np.zeros((n_blocks, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t b, j, i
    cdef double step, cd, sd, c, s, a, ang, tmp
    with nogil:
        for b in range(n_blocks):
            for j in range(block_starts[b], block_starts[b + 1]):
                step = log_p[j] / grid_size
                cd = cos(step)
                sd = sin(step)
                a = amp[j]
                ang = i_start * step - phase[j]
                c = cos(ang)
                s = sin(ang)
                for i in range(i_start, stop):
                    if i % resync == 0:
                        ang = i * step - phase[j]
                        c = cos(ang)
                        s = sin(ang)
                    out[b, i - i_start] += a * c
                    tmp = c * cd - s * sd
                    s = s * cd + c * sd
                    c = tmp
    return out_arr
