"""Jitted inner loop of the first-order system propagation.

One classical fourth-order Runge-Kutta pass over a fixed (possibly
non-uniform) mesh.  The system is Y' = (F(x) + Lam - rho I) Y where Lam is
the rank-one spectral block (entry (n, 1) equal to lambda) and rho is an
optional exponential scaling shift; the caller multiplies exp(rho x) back in.
F samples are taken at mesh nodes *and* midpoints, interleaved, so the same
sample array serves the full mesh and (via stride 2) the half mesh used for
Richardson error estimates.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def rk4_transfer(fsamp, xs2, lams, rhos, cp_nodes, out, fail):  # pragma: no cover - jitted
    """Propagate a batch of spectral parameters over one shared mesh.

    fsamp    : (2S+1, n, n) complex, F at interleaved abscissae xs2
    xs2      : (2S+1,) float, xs2[0] = 0, xs2[-1] = final x
    lams     : (B,) complex spectral parameters
    rhos     : (B,) complex scaling shifts (0 disables scaling)
    cp_nodes : (K,) int64 increasing node indices (in 0..S) to record
    out      : (B, K, n, n) complex, written
    fail     : (B,) int64, -1 on success else index of the failing step
    """
    n = fsamp.shape[1]
    S = (fsamp.shape[0] - 1) // 2
    B = lams.shape[0]
    K = cp_nodes.shape[0]
    Y = np.empty((n, n), np.complex128)
    k1 = np.empty((n, n), np.complex128)
    k2 = np.empty((n, n), np.complex128)
    k3 = np.empty((n, n), np.complex128)
    k4 = np.empty((n, n), np.complex128)
    T = np.empty((n, n), np.complex128)
    for b in range(B):
        lam = lams[b]
        rho = rhos[b]
        fail[b] = -1
        for i in range(n):
            for j in range(n):
                Y[i, j] = 0.0
        for k in range(n):
            Y[n - 1 - k, k] = 1.0
        ci = 0
        if K > 0 and cp_nodes[0] == 0:
            for i in range(n):
                for j in range(n):
                    out[b, 0, i, j] = Y[i, j]
            ci = 1
        for s in range(S):
            i0 = 2 * s
            h = xs2[i0 + 2] - xs2[i0]
            hh = 0.5 * h
            A = fsamp[i0]
            for i in range(n):
                for j in range(n):
                    acc = -rho * Y[i, j]
                    for k in range(n):
                        acc += A[i, k] * Y[k, j]
                    k1[i, j] = acc
            for j in range(n):
                k1[n - 1, j] += lam * Y[0, j]

            for i in range(n):
                for j in range(n):
                    T[i, j] = Y[i, j] + hh * k1[i, j]
            A = fsamp[i0 + 1]
            for i in range(n):
                for j in range(n):
                    acc = -rho * T[i, j]
                    for k in range(n):
                        acc += A[i, k] * T[k, j]
                    k2[i, j] = acc
            for j in range(n):
                k2[n - 1, j] += lam * T[0, j]

            for i in range(n):
                for j in range(n):
                    T[i, j] = Y[i, j] + hh * k2[i, j]
            for i in range(n):
                for j in range(n):
                    acc = -rho * T[i, j]
                    for k in range(n):
                        acc += A[i, k] * T[k, j]
                    k3[i, j] = acc
            for j in range(n):
                k3[n - 1, j] += lam * T[0, j]

            for i in range(n):
                for j in range(n):
                    T[i, j] = Y[i, j] + h * k3[i, j]
            A = fsamp[i0 + 2]
            for i in range(n):
                for j in range(n):
                    acc = -rho * T[i, j]
                    for k in range(n):
                        acc += A[i, k] * T[k, j]
                    k4[i, j] = acc
            for j in range(n):
                k4[n - 1, j] += lam * T[0, j]

            h6 = h / 6.0
            for i in range(n):
                for j in range(n):
                    Y[i, j] += h6 * (k1[i, j] + 2.0 * (k2[i, j] + k3[i, j]) + k4[i, j])

            if (s & 63) == 0 and not (
                np.isfinite(Y[0, 0].real) and np.isfinite(Y[0, 0].imag)
            ):
                fail[b] = s
                break

            if ci < K and cp_nodes[ci] == s + 1:
                for i in range(n):
                    for j in range(n):
                        out[b, ci, i, j] = Y[i, j]
                ci += 1
