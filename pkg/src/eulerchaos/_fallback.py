"""Pure-numpy implementation of the field kernel (same algorithm as ``_kernels.pyx``)."""
from __future__ import annotations

import numpy as np


def block_field(log_p, amp, phase, block_starts, grid_size, resync=1024, i_start=0, i_stop=None):
    """Per-block sums ``sum_j amp_j cos(x_i log_p_j - phase_j)`` at ``x_i = i / grid_size``.

    The angle of every prime advances by ``log_p / grid_size`` per grid step; the
    (cos, sin) pair is rotated by a fixed 2x2 rotation and re-synchronised from
    direct trigonometry whenever ``i % resync == 0``.
    Returns an array of shape ``(n_blocks, i_stop - i_start)``.
    """
    if i_stop is None:
        i_stop = grid_size + 1
    log_p = np.asarray(log_p, dtype=np.float64)
    amp = np.asarray(amp, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    starts = np.asarray(block_starts, dtype=np.int64)
    n_blocks = len(starts) - 1
    out = np.zeros((n_blocks, i_stop - i_start))
    if len(log_p) == 0:
        return out
    step = log_p / grid_size
    cd, sd = np.cos(step), np.sin(step)
    nonempty = starts[:-1] < starts[1:]
    heads = starts[:-1][nonempty]
    c = s = None
    for i in range(i_start, i_stop):
        if c is None or i % resync == 0:
            ang = i * step - phase
            c, s = np.cos(ang), np.sin(ang)
        out[nonempty, i - i_start] = np.add.reduceat(amp * c, heads)
        c, s = c * cd - s * sd, s * cd + c * sd
    return out
