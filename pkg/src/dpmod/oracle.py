"""Brute-force and closed-form oracles for tiny instances.

These share no algorithmic machinery with the continuation solver: the grid
oracle maximizes f(x) by dense search over the free node values, checking
feasibility by direct evaluation of the p-energy and Holder seminorm, and
the 1-D oracle is pure calculus.

1-D closed form (derivation)
----------------------------
On a chain with per-cell length density a = sqrt(g) (so |grad f|_g = f'/a and
dV_g = a dx), the p-energy is  E = integral |f'|^p a^{1-p} dx.  Maximizing
f(end) - f(0) under E <= 1, the Lagrange condition gives
f' proportional to (a^{1-p})^{-1/(p-1)} = a, i.e. the extremal is linear in
g-arclength.  Writing l = integral a dx for the total length, f' = c a gives
E = c^p l, so c = l^{-1/p} and the value is l^{(p-1)/p}.  With the cap the
endpoint bound D d_{g0}(ends)^{(p-1)/p} applies; when the uncapped value
exceeds it, scaling the linear candidate to hit the cap is optimal (the cap
is itself an upper bound for any feasible f).  Either way the candidate is
checked against every interior vertex-pair Holder constraint; if one binds,
the closed form is invalid and the caller must fall back to the grid oracle.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import OracleError

MAX_ORACLE_NODES = 6
_POINT_BUDGET = 2_000_000
_CHUNK = 262_144


def _free_axis_values(lo, hi, pitch):
    """Symmetric-ish grid on [lo, hi] with the given pitch, always >= 1 point."""
    k_lo = math.floor(-lo / pitch)
    k_hi = math.floor(hi / pitch)
    return np.arange(-k_lo, k_hi + 1) * pitch


def brute_force_dp(x, y, g, g0, params):
    """Dense grid maximum of f(x) over {E_p <= 1, H <= D, f(y) = 0}.

    Initial step B/50 (coarsened if the full product grid would exceed the
    point budget), then local refinement rounds of 21 points per axis in
    windows of +-3 steps, shrinking the step 0.3x per round until it is
    <= B/50000.  The argmax of f(x) is degenerate in the axes f(x) does not
    depend on, so a micro tie-break toward the smallest p-energy (far below
    one grid step) pins each round's best point to the minimum-energy
    completion; without it the windows recenter on an arbitrary point of the
    argmax set and can drift away from the true optimizer.
    """
    mesh = params.mesh
    N = mesh.num_nodes
    if N > MAX_ORACLE_NODES:
        raise OracleError(f"brute force limited to {MAX_ORACLE_NODES} nodes, mesh has {N}")
    if x == y:
        raise OracleError("source equals sink")
    D = params.D
    if math.isinf(D):
        raise OracleError("brute force needs a finite cap D")
    t = params.t
    d0y = params.d0[y, :]
    B = D * (d0y ** t).max()

    free = [v for v in range(N) if v != y]
    caps = np.array([min(B, D * d0y[v] ** t) for v in free])

    # energy and Holder data for vectorized feasibility checks
    Binv = mesh.gradient_operator()
    Ginv = np.linalg.inv(g.tensors)
    w = np.sqrt(np.linalg.det(g.tensors)) * mesh.volumes
    cn = mesh.cells_nodes
    iu, iv = params.iu, params.iv
    inv_dt = params.d0[iu, iv] ** (-t)
    p = params.p

    def evaluate(axes, tie):
        """Best feasible f(x) over the product grid; ``tie`` breaks the
        degenerate argmax toward low energy (must be << one grid step)."""
        sizes = np.array([len(ax) for ax in axes], dtype=np.int64)
        total = int(sizes.prod())
        radix = np.ones_like(sizes)
        for i in range(len(sizes) - 2, -1, -1):
            radix[i] = radix[i + 1] * sizes[i + 1]
        best_score, best_val, best_point = -np.inf, -np.inf, None
        for start in range(0, total, _CHUNK):
            idx = np.arange(start, min(start + _CHUNK, total))
            F = np.zeros((idx.size, N))
            for j, v in enumerate(free):
                F[:, v] = axes[j][(idx // radix[j]) % sizes[j]]
            # Holder feasibility
            ok = np.ones(idx.size, dtype=bool)
            for k in range(iu.size):
                ok &= np.abs(F[:, iu[k]] - F[:, iv[k]]) * inv_dt[k] <= D
            # energy feasibility
            E = np.zeros(idx.size)
            for c in range(mesh.num_cells):
                df = F[:, cn[c]] @ Binv[c].T
                q = np.einsum("ki,ij,kj->k", df, Ginv[c], df)
                E += w[c] * np.maximum(q, 0.0) ** (p / 2.0)
            ok &= E <= 1.0
            if ok.any():
                score = np.where(ok, F[:, x] - tie * E, -np.inf)
                k = int(np.argmax(score))
                if score[k] > best_score:
                    best_score = float(score[k])
                    best_val = float(F[k, x])
                    best_point = F[k].copy()
        return best_val, best_point

    # initial pass: step B/50, halved resolution until within budget
    step = B / 50.0
    while True:
        axes = [_free_axis_values(-caps[j], caps[j], step) for j in range(len(free))]
        if np.prod([float(len(ax)) for ax in axes]) <= _POINT_BUDGET:
            break
        step *= 2.0
    best_val, best_point = evaluate(axes, 1e-3 * step)
    assert best_point is not None, "f = 0 is always feasible"

    # local refinement until the final step is <= B/50000
    while step > B / 50000.0:
        half = 3.0 * step
        axes = []
        for j, v in enumerate(free):
            lo = max(-caps[j], best_point[v] - half)
            hi = min(caps[j], best_point[v] + half)
            axes.append(np.linspace(lo, hi, 21))
        step *= 0.3
        val, point = evaluate(axes, 1e-3 * step)
        if point is not None:
            best_point = point
            best_val = max(best_val, val)
    return best_val


def analytic_1d_dp(a, lengths, p, D, a0=None):
    """Closed-form capped distance across a 1-D chain (see module docstring).

    a, a0 : per-cell length densities sqrt(g), sqrt(g0) (a0 defaults to a)
    lengths : per-cell chart lengths
    Returns (value, clean); ``clean`` is False when an interior vertex pair
    violates its Holder bound, in which case the value is not trustworthy
    and the caller should use brute_force_dp.
    """
    a = np.asarray(a, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    a0 = a if a0 is None else np.asarray(a0, dtype=float)
    if a.ndim != 1 or a.shape != lengths.shape or a0.shape != a.shape:
        raise OracleError("analytic oracle needs matching 1-D per-cell arrays")
    if a.size == 0 or np.any(a <= 0) or np.any(lengths <= 0) or np.any(a0 <= 0):
        raise OracleError("densities and lengths must be positive")
    if not p > 1:
        raise OracleError(f"need p > 1, got {p}")
    t = (p - 1.0) / p

    pos_g = np.concatenate([[0.0], np.cumsum(a * lengths)])     # g-arclength
    pos_0 = np.concatenate([[0.0], np.cumsum(a0 * lengths)])    # g0-arclength
    ell = pos_g[-1]
    v_unc = ell ** t
    cap = D * pos_0[-1] ** t

    if v_unc <= cap:
        value, f = v_unc, pos_g * ell ** (-1.0 / p)
    else:
        value, f = cap, (cap / v_unc) * pos_g * ell ** (-1.0 / p)

    clean = True
    for i in range(len(f)):
        for j in range(i + 1, len(f)):
            if abs(f[j] - f[i]) > D * (pos_0[j] - pos_0[i]) ** t * (1 + 1e-12):
                clean = False
    return float(value), clean
