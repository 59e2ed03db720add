"""Topology-switching displacement: minimum total element movement.

The cost between two equal-size layouts is the minimum, over all bijections
between their elements, of the summed planar Euclidean displacements. It is
solved exactly with a shortest-augmenting-path Hungarian method in O(n^3).
"""

import csv
import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ContractError
from .geometry import (Family, build_auxiliary, build_fuca, build_uca, build_uniform_cuca,
                       element_positions, standard_fuca_spec, DEFAULT_MIN_SPACING)
from .errors import GeometryError


@dataclass(frozen=True)
class AssignmentResult:
    total_distance: float
    permutation: tuple
    cost_matrix_checksum: str


def hungarian(cost):
    """Minimum-cost perfect matching of a square cost matrix.

    Returns ``(total, assignment)`` where ``assignment[i]`` is the column
    matched to row i.
    """
    C = np.asarray(cost, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n):
        raise ContractError(f"cost matrix must be square, got {C.shape}")
    if n == 0:
        return 0.0, ()
    # 1-based potentials; column 0 is a virtual start node
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=int)  # match[j] = row assigned to column j
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            used_idx = np.flatnonzero(used)
            u[match[used_idx]] += delta
            v[used_idx] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assignment = np.zeros(n, dtype=int)
    for j in range(1, n + 1):
        assignment[match[j] - 1] = j - 1
    total = float(C[np.arange(n), assignment].sum())
    return total, tuple(int(a) for a in assignment)


def _checksum(C):
    return hashlib.sha256(np.round(C, 12).tobytes()).hexdigest()[:16]


def switching_cost(A, B):
    """Minimum aggregate planar displacement to morph layout A into layout B."""
    pa = element_positions(A)[:, :2]
    pb = element_positions(B)[:, :2]
    if len(pa) != len(pb):
        raise ContractError(f"element counts differ: {A.label} has {len(pa)}, "
                            f"{B.label} has {len(pb)}")
    C = cdist(pa, pb)
    total, perm = hungarian(C)
    return AssignmentResult(total, perm, _checksum(C))


@dataclass
class CostMatrix:
    labels: list
    values: np.ndarray

    def to_dict(self):
        return {"labels": list(self.labels),
                "matrix": [[float(f"{x:.12g}") for x in row] for row in self.values]}


def cost_matrix(catalog):
    """Symmetric matrix of pairwise switching costs with zero diagonal."""
    n = len(catalog)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = switching_cost(catalog[i], catalog[j]).total_distance
    return CostMatrix([t.label for t in catalog], values)


def heatmap_csv(cm):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["from", "to", "distance_m"])
    for i, a in enumerate(cm.labels):
        for j, b in enumerate(cm.labels):
            w.writerow([a, b, f"{cm.values[i, j]:.12e}"])
    return buf.getvalue()


def _topologies_with_count(n, aperture, min_spacing):
    out = []

    def attempt(fn, *args, **kwargs):
        try:
            out.append(fn(*args, min_spacing=min_spacing, **kwargs))
        except GeometryError:
            pass

    if n % 2 == 0:
        attempt(build_uca, n, aperture)
    for N in range(2, n // 4 + 1):
        if n % N == 0 and (n // N) % 2 == 0:
            attempt(build_uniform_cuca, N, n // N, aperture)
    for N in range(2, n // 4 + 1):
        if n % N == 0 and (n // N) % 2 == 0:
            attempt(build_fuca, standard_fuca_spec(N, n // N, aperture))
    if math.isqrt(n) ** 2 == n:
        attempt(build_auxiliary, Family.URA, n, aperture)
    attempt(build_auxiliary, Family.RLA, n, aperture)
    attempt(build_auxiliary, Family.SPIRAL, n, aperture)
    return out


def catalog_for_budget(budget, aperture, exact=False, min_spacing=DEFAULT_MIN_SPACING):
    """Every named-family layout feasible within an element budget.

    With ``exact=False`` (default) all element counts from 4 to `budget` are
    included, so catalogs grow with the budget; ``exact=True`` keeps only layouts
    using exactly `budget` elements, as needed for count-matched cost matrices.
    Order: by element count, then UCA, CUCA, FUCA, URA, RLA, SPIRAL.
    """
    if not 4 <= budget <= 64:
        raise ValueError(f"budget must lie in 4..64, got {budget}")
    counts = [budget] if exact else range(4, budget + 1)
    out = []
    for n in counts:
        out.extend(_topologies_with_count(n, aperture, min_spacing))
    return out


def figure_catalog(aperture=2.0, min_spacing=DEFAULT_MIN_SPACING):
    """The six 16-element layouts compared in the switching-cost heatmap.

    An RLA with arms aligned to the ring azimuths coincides with the CUCA of the
    same structure, so the grid layout stands in for the fourth panel.
    """
    return [
        build_uca(16, aperture, min_spacing=min_spacing),
        build_uniform_cuca(2, 8, aperture, min_spacing=min_spacing),
        build_uniform_cuca(4, 4, aperture, min_spacing=min_spacing),
        build_auxiliary(Family.URA, 16, aperture, min_spacing=min_spacing),
        build_fuca(standard_fuca_spec(4, 4, aperture), min_spacing=min_spacing),
        build_auxiliary(Family.SPIRAL, 16, aperture, min_spacing=min_spacing),
    ]
