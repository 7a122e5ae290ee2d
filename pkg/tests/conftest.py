"""Shared generators for randomized tests.

Everything takes an explicit numpy Generator so individual tests stay
reproducible with their own seeds.
"""

import numpy as np

from reachdec import BallP, BlockMatrix, HPolygon, Hyperrectangle, Singleton


def random_box(rng, dim, scale=2.0):
    center = rng.uniform(-scale, scale, dim)
    radius = rng.uniform(0.1, scale, dim)
    return Hyperrectangle(center, radius)


def random_ball(rng, dim, p=2.0):
    return BallP(rng.uniform(-2, 2, dim), rng.uniform(0.2, 2.0), p)


def random_singleton(rng, dim):
    return Singleton(rng.uniform(-2, 2, dim))


def spanning_angles(rng, m):
    """m angles whose cyclic gaps are all below pi (bounded polygon)."""
    while True:
        angles = np.sort(rng.uniform(-np.pi, np.pi, m))
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
        if gaps.max() < np.pi - 0.05:
            return angles


def random_polygon(rng, m_min=3, m_max=40):
    """Bounded polygon with the origin in the interior; the raw constraint
    list may contain redundant rows (canonicalization handles them)."""
    m = int(rng.integers(m_min, m_max + 1))
    angles = spanning_angles(rng, max(m, 3))
    normals = np.column_stack([np.cos(angles), np.sin(angles)])
    offsets = rng.uniform(0.5, 2.0, len(angles))
    return HPolygon(normals, offsets)


def random_set(rng, dim):
    kind = rng.integers(0, 4 if dim == 2 else 3)
    if kind == 0:
        return random_box(rng, dim)
    if kind == 1:
        p = float(rng.choice([1.0, 2.0, np.inf]))
        return random_ball(rng, dim, p)
    if kind == 2:
        return random_singleton(rng, dim)
    return random_polygon(rng, 4, 10)


def random_stable_matrix(rng, n, cap=0.95, sparse=False):
    """Matrix with infinity norm at most cap."""
    M = rng.standard_normal((n, n))
    norm = np.abs(M).sum(axis=1).max()
    M *= rng.uniform(0.3, 1.0) * cap / norm
    if sparse:
        import scipy.sparse as sp

        return BlockMatrix(sp.csr_array(M))
    return BlockMatrix(M)


def polygon_vertices_bruteforce(normals, offsets, tol=1e-9):
    """All feasible intersection points of constraint pairs -- an
    independent vertex enumeration for small polygons."""
    A = np.asarray(normals, dtype=float)
    b = np.asarray(offsets, dtype=float)
    m = len(b)
    vertices = []
    for i in range(m):
        for j in range(i + 1, m):
            det = A[i, 0] * A[j, 1] - A[i, 1] * A[j, 0]
            if abs(det) < 1e-12:
                continue
            x = (b[i] * A[j, 1] - b[j] * A[i, 1]) / det
            y = (A[i, 0] * b[j] - A[j, 0] * b[i]) / det
            v = np.array([x, y])
            if np.all(A @ v <= b + tol):
                vertices.append(v)
    return np.array(vertices)
