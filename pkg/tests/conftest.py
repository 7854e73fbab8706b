"""Independent oracles: plain-Python flood fills and brute-force counts.

None of these reuse library code, so agreement is evidence rather than
tautology.
"""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from streamdec.field import ScalarField

N4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
N8 = N4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def flood_labels(bits, neighbors=N4):
    """Breadth-first labeling; labels start at 1 in row-major order of the first cell."""
    bits = np.asarray(bits, dtype=bool)
    ny, nx = bits.shape
    lab = np.zeros(bits.shape, dtype=int)
    n = 0
    for j in range(ny):
        for i in range(nx):
            if bits[j, i] and not lab[j, i]:
                n += 1
                lab[j, i] = n
                q = deque([(j, i)])
                while q:
                    a, b = q.popleft()
                    for dj, di in neighbors:
                        c, d = a + dj, b + di
                        if 0 <= c < ny and 0 <= d < nx and bits[c, d] and not lab[c, d]:
                            lab[c, d] = n
                            q.append((c, d))
    return lab, n


def brute_perimeter(bits):
    """Count in/out neighbor pairs cell by cell, the outside counting as out."""
    bits = np.asarray(bits, dtype=bool)
    ny, nx = bits.shape
    count = 0
    for j in range(ny):
        for i in range(nx):
            if not bits[j, i]:
                continue
            for dj, di in N4:
                c, d = j + dj, i + di
                if not (0 <= c < ny and 0 <= d < nx) or not bits[c, d]:
                    count += 1
    return count


def brute_holes(bits):
    """Complement components (8-connected) on a padded grid that miss the padding."""
    bits = np.asarray(bits, dtype=bool)
    pad = np.ones((bits.shape[0] + 2, bits.shape[1] + 2), dtype=bool)
    pad[1:-1, 1:-1] = ~bits
    lab, n = flood_labels(pad, N8)
    outer = lab[0, 0]
    out = []
    for k in range(1, n + 1):
        if k != outer:
            out.append(lab[1:-1, 1:-1] == k)
    return out


def brute_tv(values, h=1.0):
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    total = 0.0
    for j in range(-1, ny):
        for i in range(-1, nx):
            a = v[j, i] if 0 <= j < ny and 0 <= i < nx else 0.0
            for dj, di in ((0, 1), (1, 0)):
                c, d = j + dj, i + di
                b = v[c, d] if 0 <= c < ny and 0 <= d < nx else 0.0
                total += abs(a - b)
    return total * h


def random_mask(rng, n=64, p=None):
    p = rng.uniform(0.3, 0.7) if p is None else p
    return rng.random((n, n)) < p


def blob(rng, n=48, k=6):
    """A smooth random field whose positive part has holes now and then."""
    y, x = np.mgrid[0:n, 0:n] / n
    v = np.zeros((n, n))
    for _ in range(k):
        cx, cy, s, a = rng.random(), rng.random(), rng.uniform(0.05, 0.2), rng.normal()
        v += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / s**2)
    v[0, :] = v[-1, :] = v[:, 0] = v[:, -1] = 0.0
    return v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def field(values, h=1.0, origin=(0.0, 0.0)):
    return ScalarField(np.asarray(values, dtype=float), h, origin)
