# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled collapsed-Gibbs sweep for MG-LDA.

Mirrors ``_sweep_py.sweep`` operation for operation (same factor order, same
left-to-right cumulative sum) so both backends draw identical chains from
the same uniforms.
"""

import numpy as np

ctypedef long long i64


def sweep(
    const double[::1] uniforms,
    const i64[::1] tok_word,
    const i64[::1] tok_doc,
    const i64[::1] tok_sent,
    const i64[::1] sent_win0,
    i64[::1] tok_j,
    i64[::1] tok_r,
    i64[::1] tok_z,
    i64[:, ::1] n_sv,
    const i64[::1] n_s,
    i64[:, ::1] n_vr,
    i64[::1] n_v,
    i64[:, ::1] n_dz_glo,
    i64[::1] n_d_glo,
    i64[:, ::1] n_vz_loc,
    i64[:, ::1] n_zw_glo,
    i64[:, ::1] n_zw_loc,
    i64[::1] n_z_glo,
    i64[::1] n_z_loc,
    int W,
    int V,
    double alpha_glo,
    double alpha_loc,
    double alpha_mix_glo,
    double alpha_mix_loc,
    double beta_glo,
    double beta_loc,
    double gamma,
):
    cdef Py_ssize_t N = tok_word.shape[0]
    cdef int Kg = n_z_glo.shape[0]
    cdef int Kl = n_z_loc.shape[0]
    cdef int K = Kg + Kl
    cdef double[::1] cum = np.empty(W * K, dtype=np.float64)
    cdef double[::1] wg = np.empty(Kg, dtype=np.float64)
    cdef double[::1] wl = np.empty(Kl, dtype=np.float64)
    cdef double[::1] tg = np.empty(Kg, dtype=np.float64)

    cdef double vbg = V * beta_glo
    cdef double vbl = V * beta_loc
    cdef double kag = Kg * alpha_glo
    cdef double kal = Kl * alpha_loc
    cdef double wgam = W * gamma
    cdef double amix = alpha_mix_glo + alpha_mix_loc

    cdef Py_ssize_t i
    cdef i64 w, d, s, j, r, z, v, win0
    cdef int jj, zz, idx, lo, hi, mid
    cdef double den_s, wf, gg, gl, tl, denl, p, total, u

    for i in range(N):
        w = tok_word[i]
        d = tok_doc[i]
        s = tok_sent[i]
        win0 = sent_win0[s]
        j = tok_j[i]
        r = tok_r[i]
        z = tok_z[i]
        v = win0 + j

        n_sv[s, j] -= 1
        n_vr[v, r] -= 1
        n_v[v] -= 1
        if r == 0:
            n_dz_glo[d, z] -= 1
            n_d_glo[d] -= 1
            n_zw_glo[z, w] -= 1
            n_z_glo[z] -= 1
        else:
            n_vz_loc[v, z] -= 1
            n_zw_loc[z, w] -= 1
            n_z_loc[z] -= 1

        for zz in range(Kg):
            wg[zz] = (n_zw_glo[zz, w] + beta_glo) / (n_z_glo[zz] + vbg)
            tg[zz] = (n_dz_glo[d, zz] + alpha_glo) / (n_d_glo[d] + kag)
        for zz in range(Kl):
            wl[zz] = (n_zw_loc[zz, w] + beta_loc) / (n_z_loc[zz] + vbl)

        den_s = (n_s[s] - 1) + wgam
        total = 0.0
        idx = 0
        for jj in range(W):
            v = win0 + jj
            wf = (n_sv[s, jj] + gamma) / den_s
            gg = (n_vr[v, 0] + alpha_mix_glo) / (n_v[v] + amix)
            gl = (n_vr[v, 1] + alpha_mix_loc) / (n_v[v] + amix)
            for zz in range(Kg):
                p = ((wf * gg) * tg[zz]) * wg[zz]
                total += p
                cum[idx] = total
                idx += 1
            denl = n_vr[v, 1] + kal
            for zz in range(Kl):
                tl = (n_vz_loc[v, zz] + alpha_loc) / denl
                p = ((wf * gl) * tl) * wl[zz]
                total += p
                cum[idx] = total
                idx += 1

        # first index with cum > u (searchsorted side='right')
        u = uniforms[i] * total
        lo = 0
        hi = W * K
        while lo < hi:
            mid = (lo + hi) >> 1
            if cum[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        idx = lo if lo < W * K else W * K - 1

        j = idx // K
        zz = idx - j * K
        if zz < Kg:
            r = 0
            z = zz
        else:
            r = 1
            z = zz - Kg
        v = win0 + j

        tok_j[i] = j
        tok_r[i] = r
        tok_z[i] = z
        n_sv[s, j] += 1
        n_vr[v, r] += 1
        n_v[v] += 1
        if r == 0:
            n_dz_glo[d, z] += 1
            n_d_glo[d] += 1
            n_zw_glo[z, w] += 1
            n_z_glo[z] += 1
        else:
            n_vz_loc[v, z] += 1
            n_zw_loc[z, w] += 1
            n_z_loc[z] += 1
