"""Cell-blocked operations along one axis of a tensor-product nodal array.

Every axis of a field array stores ``n_cells * n_local`` values, cell-major.
"""

from __future__ import annotations

import numpy as np


def apply_blockwise(arr: np.ndarray, axis: int, mat: np.ndarray) -> np.ndarray:
    """Apply ``mat`` (``p_out x p_in``) inside every cell along ``axis``."""
    mat = np.asarray(mat)
    p_out, p_in = mat.shape
    a = np.moveaxis(arr, axis, -1)
    n = a.shape[-1] // p_in
    if n * p_in != a.shape[-1]:
        raise ValueError(f"axis length {a.shape[-1]} is not a multiple of {p_in}")
    blocks = a.reshape(a.shape[:-1] + (n, p_in))
    out = blocks @ mat.T
    return np.moveaxis(out.reshape(a.shape[:-1] + (n * p_out,)), -1, axis)


def apply_all_axes(arr: np.ndarray, mats) -> np.ndarray:
    for axis, mat in enumerate(mats):
        if mat is not None:
            arr = apply_blockwise(arr, axis, mat)
    return arr


def broadcast_axis(values: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    """Reshape a 1D array so it varies along ``axis`` of an ``ndim`` array."""
    shape = [1] * ndim
    shape[axis] = -1
    return np.asarray(values).reshape(shape)
