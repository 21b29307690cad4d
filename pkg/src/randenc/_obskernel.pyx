# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled observation-grouping kernel.

Same contract as randenc._obs_py.observation_groups; the inner loop packs
and insertion-sorts each subset's (encoded value, label) codes without
allocating per pair.  Keys assume a little-endian host.
"""

import numpy as np

cimport numpy as cnp


def observation_groups(tables, labels, subsets, int n_labels):
    cdef cnp.int32_t[:, ::1] t = np.ascontiguousarray(tables, dtype=np.int32)
    cdef cnp.int32_t[::1] l = np.ascontiguousarray(labels, dtype=np.int32)
    cdef cnp.int32_t[:, ::1] s = np.ascontiguousarray(subsets, dtype=np.int32)
    cdef Py_ssize_t n_enc = t.shape[0]
    cdef Py_ssize_t n_sub = s.shape[0]
    cdef Py_ssize_t n = s.shape[1]
    cdef Py_ssize_t si, fi, j, k, x
    cdef cnp.int32_t code

    key_arr = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] key = key_arr
    groups = {}
    cdef list hit
    for si in range(n_sub):
        for fi in range(n_enc):
            for j in range(n):
                x = s[si, j]
                code = t[fi, x] * n_labels + l[x]
                k = j
                while k > 0 and key[k - 1] > code:
                    key[k] = key[k - 1]
                    k -= 1
                key[k] = code
            b = key_arr.tobytes()
            hit = <list> groups.get(b)
            if hit is None:
                hit = []
                groups[b] = hit
            hit.append((fi, si))
    return {
        kk: np.asarray(vv, dtype=np.int32).reshape(-1, 2) for kk, vv in groups.items()
    }
