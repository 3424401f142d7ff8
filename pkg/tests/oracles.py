"""Slow, literal reference implementations used to check the fast code."""
import math

import numpy as np


def ring_of(rho, l_max, n_rings):
    for i in range(1, n_rings + 1):
        if (i - 1) * l_max / n_rings <= rho < i * l_max / n_rings:
            return i
    return n_rings


def sector_of(theta, n_sectors):
    for j in range(1, n_sectors + 1):
        if (j - 1) * 2 * math.pi / n_sectors <= theta < j * 2 * math.pi / n_sectors:
            return j
    # theta == 2*pi (and rounding just below it) folds into the last sector
    return n_sectors


def layer_of(z, h_min, h_max, n_layers):
    step = (h_max - h_min) / n_layers
    for a in range(1, n_layers + 1):
        if h_min + (a - 1) * step <= z < h_min + a * step:
            return a
    return n_layers


def brute_force_descriptors(xyz, p):
    """Dict ``(ring, sector) -> [d_diff, d_enc, sorted point indices]`` by a point loop."""
    bins = {}
    for k, (x, y, z) in enumerate(np.asarray(xyz, dtype=float).tolist()):
        rho = math.sqrt(x * x + y * y)
        if not (rho < p.l_max and p.h_min < z < p.h_max):
            continue
        key = (ring_of(rho, p.l_max, p.n_rings), sector_of(math.atan2(y, x) + math.pi, p.n_sectors))
        bins.setdefault(key, []).append((k, z, layer_of(z, p.h_min, p.h_max, p.n_layers)))
    out = {}
    for key, pts in bins.items():
        zs = [z for _, z, _ in pts]
        enc = 0
        for _, _, a in pts:
            enc |= 1 << (a - 1)
        out[key] = [max(zs) - min(zs), enc, sorted(k for k, _, _ in pts)]
    return out


def neighbor_has_dynamic(dynamic, i, j, rng_):
    n_r, n_s = dynamic.shape
    for p in range(n_r):
        for q in range(n_s):
            if (p, q) == (i, j) or abs(p - i) > rng_:
                continue
            dq = abs(q - j)
            if min(dq, n_s - dq) <= rng_ and dynamic[p, q]:
                return True
    return False
