"""Compiled inner loops for the open-system integrators.

Two engines share one contract:

* a two-mode kernel specialized to the pumped-Kerr network structure
  (diagonal Kerr/detuning part, two-photon pump, symmetric hopping),
  operating on the state as a (d1, d2, d1, d2) tensor;
* a generic kernel for any mode count and any Hermitian Hamiltonian,
  given in CSR form, operating on the flat (D, D) matrix.

Both implement the Euler-Maruyama step of the conditional homodyne
evolution

    rho' = rho + dt ( -i[H, rho] + sum_i gamma (nbar+1) D[a_i] rho
                                       + gamma nbar D[a_i^dag] rho )
               + sum_i sqrt(gamma) dW_i ( c_i rho + rho c_i^dag
                                          - tr(c_i rho + rho c_i^dag) rho ),
    c_i = (nbar + 1) a_i - nbar a_i^dag,

followed by trace renormalization (the step functions return the trace
found before rescaling so the caller can monitor drift), plus the
deterministic right-hand side alone for Runge-Kutta master-equation
integration.

The Euler kernels assume the state is Hermitian, which the evolution
preserves; the right-hand-side kernels do not rely on it.
"""

import numba as nb
import numpy as np

_SIG_FAST = {"fastmath": True, "boundscheck": False, "cache": True}


# ---------------------------------------------------------------------------
# two-mode network kernels
# ---------------------------------------------------------------------------

@nb.njit(**_SIG_FAST)
def kim2_measurement_traces(rho, se, nbar):
    """tr(c_i rho + rho c_i^dag) for both modes of a (d,d,d,d) state."""
    d = rho.shape[0]
    np1 = nbar + 1.0
    tr1 = 0.0
    tr2 = 0.0
    for n1 in range(d):
        for n2 in range(d):
            if n1 < d - 1:
                tr1 += np1 * se[n1 + 1] * (rho[n1 + 1, n2, n1, n2]).real
            if n1 > 0 and nbar != 0.0:
                tr1 -= nbar * se[n1] * (rho[n1 - 1, n2, n1, n2]).real
            if n2 < d - 1:
                tr2 += np1 * se[n2 + 1] * (rho[n1, n2 + 1, n1, n2]).real
            if n2 > 0 and nbar != 0.0:
                tr2 -= nbar * se[n2] * (rho[n1, n2 - 1, n1, n2]).real
    return 2.0 * tr1, 2.0 * tr2


@nb.njit(**_SIG_FAST)
def kim2_euler_step(rho, out, diagH, se, c2e, eps, eta, dt, gamma, nbar, dw1, dw2):
    """One Euler-Maruyama step for the two-mode network; returns pre-renorm trace."""
    d = rho.shape[0]
    ec = np.conj(eps)
    g1 = gamma * (nbar + 1.0)
    g2 = gamma * nbar
    sg = np.sqrt(gamma)
    np1 = nbar + 1.0
    tr1, tr2 = kim2_measurement_traces(rho, se, nbar)
    w1 = sg * dw1
    w2 = sg * dw2
    scal = 1.0 - w1 * tr1 - w2 * tr2
    for n1 in range(d):
        ket_pu1 = n1 >= 2
        ket_pd1 = n1 <= d - 3
        for n2 in range(d):
            dh_ket = diagH[n1, n2]
            nk = n1 + n2
            ku2 = n2 >= 2
            kd2 = n2 <= d - 3
            hu = (n1 >= 1) and (n2 <= d - 2)
            hd = (n1 <= d - 2) and (n2 >= 1)
            chu = eta * se[n1] * se[n2 + 1]
            chd = eta * se[n2] * se[n1 + 1]
            for m1 in range(d):
                bra_pu1 = m1 <= d - 3
                bra_pd1 = m1 >= 2
                jump1 = (n1 <= d - 2) and (m1 <= d - 2)
                up1ok = (n1 >= 1) and (m1 >= 1)
                cj1 = g1 * se[n1 + 1] * se[m1 + 1]
                cu1 = g2 * se[n1] * se[m1]
                s_n1 = np1 * se[n1 + 1]
                s_m1 = np1 * se[m1 + 1]
                damp0 = 0.5 * g1 * (nk + m1) + 0.5 * g2 * (nk + m1 + 4.0)
                dampc = 0.5 * (g1 + g2)
                for m2 in range(d):
                    r = rho[n1, n2, m1, m2]
                    hk = dh_ket * r
                    if ket_pu1:
                        hk -= eps * c2e[n1] * rho[n1 - 2, n2, m1, m2]
                    if ket_pd1:
                        hk -= ec * c2e[n1 + 2] * rho[n1 + 2, n2, m1, m2]
                    if ku2:
                        hk -= eps * c2e[n2] * rho[n1, n2 - 2, m1, m2]
                    if kd2:
                        hk -= ec * c2e[n2 + 2] * rho[n1, n2 + 2, m1, m2]
                    if hu:
                        hk += chu * rho[n1 - 1, n2 + 1, m1, m2]
                    if hd:
                        hk += chd * rho[n1 + 1, n2 - 1, m1, m2]
                    hb = diagH[m1, m2] * r
                    if bra_pu1:
                        hb -= eps * c2e[m1 + 2] * rho[n1, n2, m1 + 2, m2]
                    if bra_pd1:
                        hb -= ec * c2e[m1] * rho[n1, n2, m1 - 2, m2]
                    if m2 <= d - 3:
                        hb -= eps * c2e[m2 + 2] * rho[n1, n2, m1, m2 + 2]
                    if m2 >= 2:
                        hb -= ec * c2e[m2] * rho[n1, n2, m1, m2 - 2]
                    if (m1 <= d - 2) and (m2 >= 1):
                        hb += eta * se[m1 + 1] * se[m2] * rho[n1, n2, m1 + 1, m2 - 1]
                    if (m1 >= 1) and (m2 <= d - 2):
                        hb += eta * se[m2 + 1] * se[m1] * rho[n1, n2, m1 - 1, m2 + 1]
                    v = -1j * (hk - hb)
                    v -= (damp0 + dampc * m2) * r
                    if jump1:
                        v += cj1 * rho[n1 + 1, n2, m1 + 1, m2]
                    if (n2 <= d - 2) and (m2 <= d - 2):
                        v += g1 * se[n2 + 1] * se[m2 + 1] * rho[n1, n2 + 1, m1, m2 + 1]
                    if g2 != 0.0:
                        if up1ok:
                            v += cu1 * rho[n1 - 1, n2, m1 - 1, m2]
                        if (n2 >= 1) and (m2 >= 1):
                            v += g2 * se[n2] * se[m2] * rho[n1, n2 - 1, m1, m2 - 1]
                    c1 = 0.0j
                    if n1 <= d - 2:
                        c1 += s_n1 * rho[n1 + 1, n2, m1, m2]
                    if m1 <= d - 2:
                        c1 += s_m1 * rho[n1, n2, m1 + 1, m2]
                    c2t = 0.0j
                    if n2 <= d - 2:
                        c2t += np1 * se[n2 + 1] * rho[n1, n2 + 1, m1, m2]
                    if m2 <= d - 2:
                        c2t += np1 * se[m2 + 1] * rho[n1, n2, m1, m2 + 1]
                    if nbar != 0.0:
                        if n1 >= 1:
                            c1 -= nbar * se[n1] * rho[n1 - 1, n2, m1, m2]
                        if m1 >= 1:
                            c1 -= nbar * se[m1] * rho[n1, n2, m1 - 1, m2]
                        if n2 >= 1:
                            c2t -= nbar * se[n2] * rho[n1, n2 - 1, m1, m2]
                        if m2 >= 1:
                            c2t -= nbar * se[m2] * rho[n1, n2, m1, m2 - 1]
                    out[n1, n2, m1, m2] = scal * r + dt * v + w1 * c1 + w2 * c2t
    tr = 0.0
    for n1 in range(d):
        for n2 in range(d):
            tr += out[n1, n2, n1, n2].real
    inv = 1.0 / tr
    flat = out.reshape(-1)
    for k in range(flat.shape[0]):
        flat[k] *= inv
    return tr


@nb.njit(**_SIG_FAST)
def kim2_rhs(rho, out, diagH, se, c2e, eps, eta, gamma, nbar):
    """Deterministic Lindblad right-hand side for the two-mode network."""
    d = rho.shape[0]
    ec = np.conj(eps)
    g1 = gamma * (nbar + 1.0)
    g2 = gamma * nbar
    for n1 in range(d):
        ket_pu1 = n1 >= 2
        ket_pd1 = n1 <= d - 3
        for n2 in range(d):
            dh_ket = diagH[n1, n2]
            nk = n1 + n2
            ku2 = n2 >= 2
            kd2 = n2 <= d - 3
            hu = (n1 >= 1) and (n2 <= d - 2)
            hd = (n1 <= d - 2) and (n2 >= 1)
            chu = eta * se[n1] * se[n2 + 1]
            chd = eta * se[n2] * se[n1 + 1]
            for m1 in range(d):
                bra_pu1 = m1 <= d - 3
                bra_pd1 = m1 >= 2
                jump1 = (n1 <= d - 2) and (m1 <= d - 2)
                up1ok = (n1 >= 1) and (m1 >= 1)
                cj1 = g1 * se[n1 + 1] * se[m1 + 1]
                cu1 = g2 * se[n1] * se[m1]
                damp0 = 0.5 * g1 * (nk + m1) + 0.5 * g2 * (nk + m1 + 4.0)
                dampc = 0.5 * (g1 + g2)
                for m2 in range(d):
                    r = rho[n1, n2, m1, m2]
                    hk = dh_ket * r
                    if ket_pu1:
                        hk -= eps * c2e[n1] * rho[n1 - 2, n2, m1, m2]
                    if ket_pd1:
                        hk -= ec * c2e[n1 + 2] * rho[n1 + 2, n2, m1, m2]
                    if ku2:
                        hk -= eps * c2e[n2] * rho[n1, n2 - 2, m1, m2]
                    if kd2:
                        hk -= ec * c2e[n2 + 2] * rho[n1, n2 + 2, m1, m2]
                    if hu:
                        hk += chu * rho[n1 - 1, n2 + 1, m1, m2]
                    if hd:
                        hk += chd * rho[n1 + 1, n2 - 1, m1, m2]
                    hb = diagH[m1, m2] * r
                    if bra_pu1:
                        hb -= eps * c2e[m1 + 2] * rho[n1, n2, m1 + 2, m2]
                    if bra_pd1:
                        hb -= ec * c2e[m1] * rho[n1, n2, m1 - 2, m2]
                    if m2 <= d - 3:
                        hb -= eps * c2e[m2 + 2] * rho[n1, n2, m1, m2 + 2]
                    if m2 >= 2:
                        hb -= ec * c2e[m2] * rho[n1, n2, m1, m2 - 2]
                    if (m1 <= d - 2) and (m2 >= 1):
                        hb += eta * se[m1 + 1] * se[m2] * rho[n1, n2, m1 + 1, m2 - 1]
                    if (m1 >= 1) and (m2 <= d - 2):
                        hb += eta * se[m2 + 1] * se[m1] * rho[n1, n2, m1 - 1, m2 + 1]
                    v = -1j * (hk - hb)
                    v -= (damp0 + dampc * m2) * r
                    if jump1:
                        v += cj1 * rho[n1 + 1, n2, m1 + 1, m2]
                    if (n2 <= d - 2) and (m2 <= d - 2):
                        v += g1 * se[n2 + 1] * se[m2 + 1] * rho[n1, n2 + 1, m1, m2 + 1]
                    if g2 != 0.0:
                        if up1ok:
                            v += cu1 * rho[n1 - 1, n2, m1 - 1, m2]
                        if (n2 >= 1) and (m2 >= 1):
                            v += g2 * se[n2] * se[m2] * rho[n1, n2 - 1, m1, m2 - 1]
                    out[n1, n2, m1, m2] = v


# ---------------------------------------------------------------------------
# generic kernels (any mode count, CSR Hamiltonian)
# ---------------------------------------------------------------------------

@nb.njit(**_SIG_FAST)
def generic_measurement_traces(rho, up, dn, st, nbar):
    n_modes = up.shape[0]
    big = rho.shape[0]
    out = np.zeros(n_modes)
    np1 = nbar + 1.0
    for i in range(n_modes):
        si = st[i]
        acc = 0.0
        for k in range(big):
            u = up[i, k]
            if u != 0.0:
                acc += np1 * u * (rho[k + si, k]).real
            if nbar != 0.0:
                w = dn[i, k]
                if w != 0.0:
                    acc -= nbar * w * (rho[k - si, k]).real
        out[i] = 2.0 * acc
    return out


@nb.njit(**_SIG_FAST)
def generic_euler_step(rho, hr, out, hdata, hind, hptr, up, dn, st, ntot,
                       dt, gamma, nbar, dws):
    """Euler-Maruyama step on the flat (D, D) state; Hermitian rho assumed."""
    big = rho.shape[0]
    n_modes = up.shape[0]
    for k in range(big):
        for m in range(big):
            hr[k, m] = 0.0
        for ptr in range(hptr[k], hptr[k + 1]):
            h = -1j * hdata[ptr]
            j = hind[ptr]
            for m in range(big):
                hr[k, m] += h * rho[j, m]
    trs = generic_measurement_traces(rho, up, dn, st, nbar)
    sg = np.sqrt(gamma)
    g1 = gamma * (nbar + 1.0)
    g2 = gamma * nbar
    np1 = nbar + 1.0
    scal = 1.0
    for i in range(n_modes):
        scal -= sg * dws[i] * trs[i]
    for k in range(big):
        nk = ntot[k]
        for m in range(big):
            v = hr[k, m] + np.conj(hr[m, k])
            v -= (0.5 * g1 * (nk + ntot[m]) + 0.5 * g2 * (nk + ntot[m] + 2.0 * n_modes)) * rho[k, m]
            for i in range(n_modes):
                si = st[i]
                uk = up[i, k]
                um = up[i, m]
                if uk != 0.0 and um != 0.0:
                    v += g1 * uk * um * rho[k + si, m + si]
                if g2 != 0.0:
                    dk = dn[i, k]
                    dm = dn[i, m]
                    if dk != 0.0 and dm != 0.0:
                        v += g2 * dk * dm * rho[k - si, m - si]
            w = rho[k, m]
            acc = w + dt * v
            for i in range(n_modes):
                si = st[i]
                uk = up[i, k]
                um = up[i, m]
                c = -trs[i] * w
                if uk != 0.0:
                    c += np1 * uk * rho[k + si, m]
                if um != 0.0:
                    c += np1 * um * rho[k, m + si]
                if nbar != 0.0:
                    dk = dn[i, k]
                    dm = dn[i, m]
                    if dk != 0.0:
                        c -= nbar * dk * rho[k - si, m]
                    if dm != 0.0:
                        c -= nbar * dm * rho[k, m - si]
                acc += (sg * dws[i]) * c
            out[k, m] = acc
    tr = 0.0
    for k in range(big):
        tr += out[k, k].real
    inv = 1.0 / tr
    for k in range(big):
        for m in range(big):
            out[k, m] *= inv
    return tr


@nb.njit(**_SIG_FAST)
def generic_rhs(rho, hr, out, hdata, hind, hptr, htdata, htind, htptr,
                up, dn, st, ntot, gamma, nbar):
    """Deterministic Lindblad right-hand side; makes no Hermiticity assumption."""
    big = rho.shape[0]
    n_modes = up.shape[0]
    for k in range(big):
        for m in range(big):
            hr[k, m] = 0.0
        for ptr in range(hptr[k], hptr[k + 1]):
            h = hdata[ptr]
            j = hind[ptr]
            for m in range(big):
                hr[k, m] += h * rho[j, m]
    g1 = gamma * (nbar + 1.0)
    g2 = gamma * nbar
    for k in range(big):
        nk = ntot[k]
        for m in range(big):
            rh = 0.0j
            for ptr in range(htptr[m], htptr[m + 1]):
                rh += htdata[ptr] * rho[k, htind[ptr]]
            v = -1j * (hr[k, m] - rh)
            v -= (0.5 * g1 * (nk + ntot[m]) + 0.5 * g2 * (nk + ntot[m] + 2.0 * n_modes)) * rho[k, m]
            for i in range(n_modes):
                si = st[i]
                uk = up[i, k]
                um = up[i, m]
                if uk != 0.0 and um != 0.0:
                    v += g1 * uk * um * rho[k + si, m + si]
                if g2 != 0.0:
                    dk = dn[i, k]
                    dm = dn[i, m]
                    if dk != 0.0 and dm != 0.0:
                        v += g2 * dk * dm * rho[k - si, m - si]
            out[k, m] = v
