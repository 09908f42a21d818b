"""Shared helpers: deterministic random geometry and tiny reference meshes."""

import numpy as np
import pytest

from dpmod.mesh import build_mesh
from dpmod.metric import MetricField


def random_spd_tensors(rng, num_cells, n, cond_max=100.0, scale_lo=0.5, scale_hi=2.0):
    """(C, n, n) random SPD matrices with condition number <= cond_max."""
    out = np.empty((num_cells, n, n))
    for c in range(num_cells):
        A = rng.normal(size=(n, n))
        Q, _ = np.linalg.qr(A)
        cond = rng.uniform(1.0, cond_max)
        # eigenvalues spread symmetrically about a random overall scale
        lo, hi = 1.0 / np.sqrt(cond), np.sqrt(cond)
        eig = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
        eig[0], eig[-1] = lo, hi  # hit the condition number exactly
        scale = rng.uniform(scale_lo, scale_hi)
        out[c] = (Q * (scale * eig)) @ Q.T
    return out


def random_metric(rng, mesh, cond_max=100.0, scale_lo=0.5, scale_hi=2.0):
    return MetricField(
        mesh, random_spd_tensors(rng, mesh.num_cells, mesh.dim, cond_max,
                                 scale_lo, scale_hi)
    )


def chain_mesh(positions):
    """1-D mesh with the given strictly increasing vertex coordinates."""
    positions = np.asarray(positions, dtype=float)
    verts = positions.reshape(-1, 1)
    cells = np.column_stack([np.arange(len(positions) - 1),
                             np.arange(1, len(positions))])
    return build_mesh(verts, cells)


def strip_mesh(nx, ny=1, jitter=0.0, rng=None):
    """Triangulated (nx x ny)-square strip on [0,nx]x[0,ny], NE diagonals.

    jitter displaces interior-chart vertices by up to ``jitter`` (< 0.29
    keeps every triangle non-degenerate).
    """
    verts = np.array([[i, j] for j in range(ny + 1) for i in range(nx + 1)],
                     dtype=float)
    if jitter:
        verts = verts + rng.uniform(-jitter, jitter, size=verts.shape)
    cells = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 1, a + nx + 2
            cells += [(a, b, d), (a, d, c)]
    return build_mesh(verts, np.array(cells))


@pytest.fixture
def rng():
    return np.random.default_rng(20260818)
