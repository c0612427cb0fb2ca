# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: batched ancestral sampling and elimination-plan execution."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def sample_rows(const signed char[:, ::1] interventions,
                const double[:, ::1] uniforms,
                const double[::1] latent_p,
                const long long[::1] par_ptr,
                const long long[::1] par_idx,
                const long long[::1] cpt_ptr,
                const double[::1] cpt):
    cdef Py_ssize_t n = interventions.shape[0]
    cdef Py_ssize_t n_obs = interventions.shape[1]
    cdef Py_ssize_t n_lat = latent_p.shape[0]
    cdef Py_ssize_t r, i, j, k
    cdef long long mask
    cdef signed char iv
    out = np.empty((n, n_obs), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef unsigned char *vals = <unsigned char *> malloc((n_lat + n_obs) * sizeof(unsigned char))
    if vals == NULL:
        raise MemoryError()
    try:
        with nogil:
            for r in range(n):
                for j in range(n_lat):
                    vals[j] = uniforms[r, j] < latent_p[j]
                for i in range(n_obs):
                    iv = interventions[r, i]
                    if iv >= 0:
                        vals[n_lat + i] = <unsigned char> iv
                    else:
                        mask = 0
                        j = 0
                        for k in range(par_ptr[i], par_ptr[i + 1]):
                            mask |= (<long long> vals[par_idx[k]]) << j
                            j += 1
                        vals[n_lat + i] = uniforms[r, n_lat + i] < cpt[cpt_ptr[i] + mask]
                    o[r, i] = vals[n_lat + i]
    finally:
        free(vals)
    return out


def run_plan(tables, plan):
    cdef const long long[::1] nunion = plan.nunion
    cdef const long long[::1] elim = plan.elim
    cdef const long long[::1] in_ptr = plan.in_ptr
    cdef const long long[::1] in_slot = plan.in_slot
    cdef const long long[::1] pos_ptr = plan.pos_ptr
    cdef const long long[::1] pos = plan.pos
    cdef Py_ssize_t s, k, f, nin, j
    cdef long long n, e, a, idx, lo_mask, size
    cdef double p
    cdef double[::1] out
    cdef const double[::1] mv
    cdef const double **ptrs
    cdef long long *pstart
    cdef long long *plen
    slots = list(tables)
    for s in range(nunion.shape[0]):
        n = nunion[s]
        e = elim[s]
        nin = in_ptr[s + 1] - in_ptr[s]
        keep = []
        ptrs = <const double **> malloc(nin * sizeof(double *))
        pstart = <long long *> malloc(nin * sizeof(long long))
        plen = <long long *> malloc(nin * sizeof(long long))
        try:
            for f in range(nin):
                k = in_ptr[s] + f
                arr = np.ascontiguousarray(slots[in_slot[k]], dtype=np.float64)
                keep.append(arr)
                mv = arr
                ptrs[f] = &mv[0]
                pstart[f] = pos_ptr[k]
                plen[f] = pos_ptr[k + 1] - pos_ptr[k]
            res = np.zeros(1 << (n - 1), dtype=np.float64)
            out = res
            size = 1 << n
            lo_mask = (1 << e) - 1
            with nogil:
                for a in range(size):
                    p = 1.0
                    for f in range(nin):
                        idx = 0
                        for j in range(plen[f]):
                            idx |= ((a >> pos[pstart[f] + j]) & 1) << j
                        if f == 0:
                            p = ptrs[f][idx]
                        else:
                            p = p * ptrs[f][idx]
                    out[(a & lo_mask) | ((a >> (e + 1)) << e)] += p
        finally:
            free(ptrs)
            free(pstart)
            free(plen)
        slots.append(res)
    result = 1.0
    for k in plan.final_slots:
        result *= float(slots[k][0])
    return result
