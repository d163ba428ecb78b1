"""Compiled inner loop for the Langevin trajectories.

One call advances a batch of trajectories through a block of pre-drawn
noise.  Each trajectory is integrated independently in a fixed operation
order, so its result does not depend on which batch it shares.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _linear_drift(out, x, indptr, indices, data, fric, U):
    # out = -i (H x + U |x|^2 x) - fric * x
    L = x.shape[0]
    for l in range(L):
        hr = 0.0
        hi = 0.0
        for p in range(indptr[l], indptr[l + 1]):
            c = data[p]
            v = x[indices[p]]
            hr += c.real * v.real - c.imag * v.imag
            hi += c.real * v.imag + c.imag * v.real
        xr = x[l].real
        xi = x[l].imag
        un = U * (xr * xr + xi * xi)
        hr += un * xr
        hi += un * xi
        out[l] = complex(hi - fric[l] * xr, -hr - fric[l] * xi)


@numba.njit(cache=True, nogil=True)
def _rotate(x, tau):
    # exact flow of the on-site term: x -> x exp(-i tau |x|^2)
    for l in range(x.shape[0]):
        ph = -tau * (x[l].real * x[l].real + x[l].imag * x[l].imag)
        x[l] = x[l] * complex(np.cos(ph), np.sin(ph))


@numba.njit(cache=True, nogil=True)
def advance(
    a, indptr, indices, data, fric, U, split, sig0, sigL, dt, xi, step0,
    avg_start, avg_every, acc, pop_every, pops,
):
    """Advance every row of ``a`` by ``xi.shape[1]`` steps in place.

    xi[i, s, 0] and xi[i, s, 1] are unit complex Gaussians (E|xi|^2 = 1)
    driving sites 0 and L-1; sig0 and sigL already include sqrt(dt).
    Global step numbers run from step0 + 1.  After a global step k with
    k > avg_start and (k - avg_start) % avg_every == 0, x x^dag is added to
    acc[i]; with pop_every > 0 and k % pop_every == 0, |x|^2 is written to
    pops[i, k // pop_every - 1].
    """
    n, L = a.shape
    n_steps = xi.shape[1]
    f0 = np.empty(L, np.complex128)
    f1 = np.empty(L, np.complex128)
    xp = np.empty(L, np.complex128)
    u_drift = 0.0 if split else U
    rotate = split and U != 0.0
    for i in range(n):
        x = a[i]
        synced = True
        for s in range(n_steps):
            k = step0 + s + 1
            if rotate:
                _rotate(x, (0.5 if synced else 1.0) * dt * U)
            w0 = sig0 * xi[i, s, 0]
            wL = sigL * xi[i, s, 1]
            _linear_drift(f0, x, indptr, indices, data, fric, u_drift)
            for l in range(L):
                xp[l] = x[l] + dt * f0[l]
            xp[0] += w0
            xp[L - 1] += wL
            _linear_drift(f1, xp, indptr, indices, data, fric, u_drift)
            for l in range(L):
                x[l] = x[l] + 0.5 * dt * (f0[l] + f1[l])
            x[0] += w0
            x[L - 1] += wL

            sample = k > avg_start and (k - avg_start) % avg_every == 0
            record = pop_every > 0 and k % pop_every == 0
            if rotate:
                if sample or record or s == n_steps - 1:
                    _rotate(x, 0.5 * dt * U)
                    synced = True
                else:
                    synced = False
            if sample:
                for l in range(L):
                    for m in range(L):
                        acc[i, l, m] += x[l] * np.conj(x[m])
            if record:
                row = k // pop_every - 1
                for l in range(L):
                    pops[i, row, l] = x[l].real * x[l].real + x[l].imag * x[l].imag
