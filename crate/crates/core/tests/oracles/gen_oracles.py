"""Generates frozen reference values for the SDP and BPDN solvers.

Every instance is solved with a generic interior-point conic solver through
cvxpy, independently of the Rust code paths. Run from this directory:

    python3 gen_oracles.py

and commit the resulting JSON files under ../data/.
"""
import json

import cvxpy as cp
import numpy as np

rng = np.random.default_rng(20240611)


def steering(k, phi):
    return np.exp(-2j * np.pi * phi * np.arange(k))


def cplx(a):
    a = np.asarray(a)
    return [[float(z.real), float(z.imag)] for z in a.ravel()]


def cross_checked(prob):
    """Solves with Clarabel and SCS; the two must agree to 1e-6 relative."""
    prob.solve(solver=cp.CLARABEL)
    assert prob.status in ("optimal", "optimal_inaccurate"), prob.status
    first = float(prob.value)
    prob.solve(solver=cp.SCS, eps=1e-10, max_iters=500000)
    assert prob.status in ("optimal", "optimal_inaccurate"), prob.status
    second = float(prob.value)
    assert abs(first - second) <= 1e-6 * max(1.0, abs(first)), (first, second)
    return first


def anm_rows_fixed(k, j, rows, data):
    """min 1/2 tr(Z) s.t. Z = [[T, X],[X^H, W]] >= 0, T Toeplitz, X[rows] = data."""
    n = k + j
    z = cp.Variable((n, n), hermitian=True)
    cons = [z >> 0]
    for a in range(k - 1):
        for b in range(a, k - 1):
            cons.append(z[a, b] == z[a + 1, b + 1])
    for r, row in enumerate(rows):
        for c in range(j):
            cons.append(z[row, k + c] == data[r, c])
    prob = cp.Problem(cp.Minimize(0.5 * cp.real(cp.trace(z))), cons)
    return cross_checked(prob)


def anm_cols_fixed(k, j, cols, data):
    """X is j x k with X[:, cols] = data; atoms b f_k^H(tau)."""
    n = k + j
    z = cp.Variable((n, n), hermitian=True)  # [[W, X],[X^H, T]]
    cons = [z >> 0]
    for a in range(k - 1):
        for b in range(a, k - 1):
            cons.append(z[j + a, j + b] == z[j + a + 1, j + b + 1])
    for c, col in enumerate(cols):
        for r in range(j):
            cons.append(z[r, j + col] == data[r, c])
    prob = cp.Problem(cp.Minimize(0.5 * cp.real(cp.trace(z))), cons)
    return cross_checked(prob)


def sdp_instances(count):
    out = []
    for idx in range(count):
        k = int(rng.integers(3, 9))
        j = int(rng.integers(1, min(4, 12 - k) + 1))
        axis = "columns" if idx % 5 == 4 else "rows"
        full = idx % 2 == 0
        if full:
            fixed = list(range(k))
        else:
            size = int(rng.integers((k + 1) // 2 + 1, k + 1))
            fixed = sorted(int(v) for v in rng.choice(k, size=size, replace=False))
        # a few harmonics plus a little noise keeps instances away from trivial
        n_atoms = int(rng.integers(1, 3))
        full_x = np.zeros((k, j), dtype=complex)
        for _ in range(n_atoms):
            phi = rng.random()
            b = rng.standard_normal(j) + 1j * rng.standard_normal(j)
            full_x += np.outer(steering(k, phi), b.conj())
        full_x += 0.1 * (rng.standard_normal((k, j)) + 1j * rng.standard_normal((k, j)))
        if axis == "rows":
            data = full_x[fixed, :]
            obj = anm_rows_fixed(k, j, fixed, data)
        else:
            xt = full_x.conj().T  # j x k
            data = xt[:, fixed]
            obj = anm_cols_fixed(k, j, fixed, data)
        out.append(
            {
                "axis": axis,
                "free_dim": k,
                "mmv_dim": j,
                "fixed": fixed,
                "data_rows": int(data.shape[0]),
                "data_cols": int(data.shape[1]),
                "data": cplx(data),
                "objective": obj,
            }
        )
    return out


def bpdn_instances(count):
    out = []
    m = n = 8
    for idx in range(count):
        g_aoa = 16
        g_delay = 12
        delay_max = 0.25
        full = idx % 2 == 0
        if full:
            ants = list(range(m))
            pils = list(range(n))
        else:
            ants = sorted(int(v) for v in rng.choice(m, size=6, replace=False))
            pils = sorted(int(v) for v in rng.choice(n, size=5, replace=False))
        theta = np.arange(g_aoa) / g_aoa
        tau = np.linspace(0.0, delay_max, g_delay)
        a = np.stack([steering(m, t)[ants] for t in theta], axis=1)  # mp x ga
        b = np.stack([steering(n, t)[pils] for t in tau], axis=1)  # np x gd
        # dictionary column (g, h) is vec of a_g b_h^H, row-major over (m, n)
        phi = np.zeros((len(ants) * len(pils), g_aoa * g_delay), dtype=complex)
        for g in range(g_aoa):
            for h in range(g_delay):
                phi[:, g * g_delay + h] = np.outer(a[:, g], b[:, h].conj()).ravel()
        # off-grid channel plus noise
        h_true = np.zeros((m, n), dtype=complex)
        for _ in range(2):
            c = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
            h_true += c * np.outer(steering(m, rng.random()), steering(n, 0.25 * rng.random()).conj())
        y = h_true[np.ix_(ants, pils)]
        y = y + 0.1 * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        yv = y.ravel()
        eps = float(0.3 * np.linalg.norm(yv))
        s = cp.Variable(phi.shape[1], complex=True)
        prob = cp.Problem(cp.Minimize(cp.norm1(s)), [cp.norm(yv - phi @ s, 2) <= eps])
        l1 = cross_checked(prob)
        out.append(
            {
                "M": m,
                "N": n,
                "antennas": ants,
                "pilots": pils,
                "grid_aoa": g_aoa,
                "grid_delay": g_delay,
                "delay_max": delay_max,
                "y": cplx(y),
                "epsilon": eps,
                "l1": l1,
            }
        )
    return out


if __name__ == "__main__":
    with open("../data/sdp_oracle.json", "w") as f:
        json.dump(sdp_instances(20), f, indent=1)
    with open("../data/bpdn_oracle.json", "w") as f:
        json.dump(bpdn_instances(6), f, indent=1)
