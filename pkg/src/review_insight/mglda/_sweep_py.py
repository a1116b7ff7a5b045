"""Pure numpy Gibbs sweep; the fallback when the compiled kernel is unavailable.

Floating-point operations are ordered exactly as in ``_gibbs.pyx`` so the two
backends produce identical chains.
"""

from __future__ import annotations

import numpy as np


def sweep(
    uniforms, tok_word, tok_doc, tok_sent, sent_win0, tok_j, tok_r, tok_z,
    n_sv, n_s, n_vr, n_v, n_dz_glo, n_d_glo, n_vz_loc, n_zw_glo, n_zw_loc, n_z_glo, n_z_loc,
    W, V, alpha_glo, alpha_loc, alpha_mix_glo, alpha_mix_loc, beta_glo, beta_loc, gamma,
):
    Kg = n_z_glo.shape[0]
    Kl = n_z_loc.shape[0]
    K = Kg + Kl
    vbg = V * beta_glo
    vbl = V * beta_loc
    kag = Kg * alpha_glo
    kal = Kl * alpha_loc
    wgam = W * gamma
    amix = alpha_mix_glo + alpha_mix_loc
    offsets = np.arange(W)
    block = np.empty((W, K))

    for i in range(tok_word.shape[0]):
        w = tok_word[i]
        d = tok_doc[i]
        s = tok_sent[i]
        win0 = sent_win0[s]
        j, r, z = tok_j[i], tok_r[i], tok_z[i]
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

        wg = (n_zw_glo[:, w] + beta_glo) / (n_z_glo + vbg)
        tg = (n_dz_glo[d] + alpha_glo) / (n_d_glo[d] + kag)
        wl = (n_zw_loc[:, w] + beta_loc) / (n_z_loc + vbl)

        vs = win0 + offsets
        den_s = (n_s[s] - 1) + wgam
        wf = (n_sv[s] + gamma) / den_s
        nv = n_v[vs] + amix
        gg = (n_vr[vs, 0] + alpha_mix_glo) / nv
        gl = (n_vr[vs, 1] + alpha_mix_loc) / nv
        tl = (n_vz_loc[vs] + alpha_loc) / (n_vr[vs, 1] + kal)[:, None]
        block[:, :Kg] = ((wf * gg)[:, None] * tg[None, :]) * wg[None, :]
        block[:, Kg:] = ((wf * gl)[:, None] * tl) * wl[None, :]
        cum = np.cumsum(block.ravel())

        u = uniforms[i] * cum[-1]
        idx = int(np.searchsorted(cum, u, side="right"))
        if idx >= W * K:
            idx = W * K - 1
        j, zz = divmod(idx, K)
        if zz < Kg:
            r, z = 0, zz
        else:
            r, z = 1, zz - Kg
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
