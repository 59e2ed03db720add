"""Alternating topology optimisation over families, ring structure and radii.

The outer loop visits the CUCA and FUCA families. Within a family, each round
generates a neighbourhood of discrete (ring count, elements per ring)
structures, fits the continuous radii of every candidate on a grid, and moves to
the best one; the incumbent competes in every round so the objective never
decreases. Capacities are total SE in bit/s.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import Method
from .errors import GeometryError
from .geometry import (Family, FucaSpec, Region, build_cuca, build_fuca, cuca_rings,
                       element_positions, uniform_radii, validate)
from .metrics import total_se
from .transceiver import TransceiverPlan


@dataclass(frozen=True)
class TopologyParams:
    """Discrete structure plus radii.

    For CUCA `radii` lists ring radii outermost first; for FUCA it is
    ``(primary, secondary)``. A single-ring UCA is a one-ring CUCA, or the
    degenerate FUCA ``(1, K)`` with primary radius 0.
    """

    family: Family
    ring_count: int
    elements_per_ring: int
    radii: tuple

    @property
    def structure(self):
        return (self.ring_count, self.elements_per_ring)

    @property
    def element_count(self):
        return self.ring_count * self.elements_per_ring

    @property
    def label(self):
        if self.ring_count == 1:
            return f"UCA-{self.elements_per_ring}"
        return f"{self.family.value} {self.ring_count}x{self.elements_per_ring}"

    def build(self, min_spacing, aperture=None):
        """Materialise the topology; raises GeometryError if infeasible."""
        region = Region(aperture) if aperture else None
        if self.family is Family.FUCA and self.ring_count > 1:
            spec = FucaSpec(self.ring_count, self.elements_per_ring, *self.radii)
            return build_fuca(spec, region=region, min_spacing=min_spacing)
        radii = self.radii if self.family is not Family.FUCA else (self.radii[1],)
        return build_cuca(cuca_rings(radii, self.elements_per_ring), region=region,
                          min_spacing=min_spacing)

    def to_dict(self):
        return {"family": self.family.value, "N": self.ring_count, "K": self.elements_per_ring,
                "radii": list(self.radii)}


@dataclass(frozen=True)
class OptimizerConfig:
    budget: int = 16
    aperture: float = 2.0
    epsilon: float = 1.0
    resolution: float = 0.02
    max_iterations: int = 50
    method: Method = Method.DISCRETE

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.budget < 4:
            raise ValueError("budget must allow at least one 4-element ring")


@dataclass
class TraceEntry:
    family: str
    iteration: int
    candidates: int
    capacity: float
    params: dict


@dataclass
class OptimizationResult:
    family: Family
    params: TopologyParams
    tx_positions: np.ndarray
    rx_positions: np.ndarray
    beamformers: list
    capacity: float
    trace: list = field(default_factory=list)
    stop_reasons: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "family": self.family.value,
            "N": self.params.ring_count,
            "K": self.params.elements_per_ring,
            "radii": [float(f"{r:.12g}") for r in self.params.radii],
            "capacity_bps": self.capacity,
            "trace": [
                {"family": t.family, "iteration": t.iteration, "candidates": t.candidates,
                 "capacity_bps": t.capacity, "params": t.params}
                for t in self.trace
            ],
            "stop_reasons": dict(self.stop_reasons),
            "positions": [[float(f"{v:.12g}") for v in row] for row in self.tx_positions],
        }


def initial_params(family, cfg):
    """Single-ring UCA at the aperture with the largest even K within budget."""
    K = cfg.budget - cfg.budget % 2
    radii = (cfg.aperture,) if family is Family.CUCA else (0.0, cfg.aperture)
    return TopologyParams(family, 1, K, radii)


def _seed_radii(family, N, aperture):
    if family is Family.CUCA:
        return tuple(uniform_radii(N, aperture))
    if N == 1:
        return (0.0, aperture)
    return (0.6 * aperture, 0.4 * aperture)


def _feasible(params, link, cfg):
    try:
        top = params.build(link.spacing, cfg.aperture)
    except GeometryError:
        return None
    if not validate(top, link.spacing, cfg.aperture, cfg.budget).ok:
        return None
    return top


def generate_candidates(family, current, cfg, link, first=False):
    """Feasible structures near `current`.

    All (N', K') with ``N' K' <= budget``, K' even and >= 4, ``|N' - N| <= 1``;
    on the first round every exact divisor pair ``N' K' = budget`` is added.
    FUCA candidates need N' >= 2. Each carries uniformly seeded radii and is
    dropped if those violate the geometry constraints.
    """
    family = Family(family)
    min_rings = 2 if family is Family.FUCA else 1
    structures = set()
    for N in range(max(min_rings, current.ring_count - 1), current.ring_count + 2):
        for K in range(4, cfg.budget // N + 1, 2):
            structures.add((N, K))
    if first:
        for N in range(min_rings, cfg.budget // 4 + 1):
            if cfg.budget % N == 0 and (cfg.budget // N) % 2 == 0:
                structures.add((N, cfg.budget // N))
    out = []
    for N, K in sorted(structures):
        params = TopologyParams(family, N, K, _seed_radii(family, N, cfg.aperture))
        if _feasible(params, link, cfg) is not None:
            out.append(params)
    return out


def capacity(params, link, cfg):
    top = _feasible(params, link, cfg)
    if top is None:
        return None
    return total_se(top, top, link, method=cfg.method).total


def _grid(cfg):
    steps = max(1, int(math.floor(cfg.aperture / cfg.resolution + 1e-9)))
    return [cfg.aperture * i / steps for i in range(1, steps + 1)]


def optimize_radii(candidate, cfg, link):
    """Grid/coordinate search of the continuous radii of a fixed structure.

    CUCA: each ring radius is swept over the grid, outermost ring first, until a
    full pass gives no improvement. FUCA: the secondary/aperture split ratio is
    swept with primary + secondary = aperture. Returns ``(params, capacity)``;
    raises GeometryError if no feasible radii exist.
    """
    best = candidate
    best_c = capacity(candidate, link, cfg)
    if candidate.family is Family.FUCA and candidate.ring_count > 1:
        for R1 in _grid(cfg):
            trial = replace(candidate, radii=(cfg.aperture - R1, R1))
            c = capacity(trial, link, cfg)
            if c is not None and (best_c is None or c > best_c):
                best, best_c = trial, c
    else:
        grid = _grid(cfg)
        improved = True
        while improved:
            improved = False
            for i in range(best.ring_count):
                for R in grid:
                    radii = list(best.radii)
                    if radii[i] == R or any(abs(R - r) < 1e-12 for j, r in enumerate(radii) if j != i):
                        continue
                    radii[i] = R
                    trial = replace(best, radii=tuple(radii))
                    c = capacity(trial, link, cfg)
                    if c is not None and (best_c is None or c > best_c):
                        best, best_c, improved = trial, c, True
    if best_c is None:
        raise GeometryError(f"no feasible radii for {candidate.label}")
    return best, best_c


def _rank_key(item):
    params, c = item
    # highest capacity, then fewer rings, larger K, smaller radii
    return (-c, params.ring_count, -params.elements_per_ring, tuple(params.radii))


def alternating_optimize(cfg, link):
    """Maximise total SE over CUCA and FUCA topologies within the element budget."""
    trace, stops = [], {}
    best_overall = None
    running = -math.inf
    for family in (Family.CUCA, Family.FUCA):
        current = initial_params(family, cfg)
        current_c = capacity(current, link, cfg)
        if current_c is None:
            current_c = 0.0
        visited = set()
        i = 0
        reason = "max_iterations"
        while i < cfg.max_iterations:
            cands = [c for c in generate_candidates(family, current, cfg, link, first=(i == 0))
                     if c.structure not in visited]
            if not cands:
                reason = "exhausted"
                break
            scored = []
            for cand in cands:
                visited.add(cand.structure)
                try:
                    scored.append(optimize_radii(cand, cfg, link))
                except GeometryError:
                    continue
            if not scored:
                reason = "exhausted"
                break
            nxt, nxt_c = min(scored, key=_rank_key)
            if nxt_c <= current_c:
                nxt, nxt_c = current, current_c
            delta = abs(nxt_c - current_c)
            current, current_c = nxt, nxt_c
            running = max(running, current_c)
            trace.append(TraceEntry(family.value, i + 1, len(cands), running, current.to_dict()))
            i += 1
            if delta < cfg.epsilon:
                reason = "converged"
                break
        stops[family.value] = reason
        if best_overall is None or current_c > best_overall[1]:
            best_overall = (current, current_c)

    params, cap = best_overall
    top = params.build(link.spacing, cfg.aperture)
    plan = TransceiverPlan.for_link(top, top, link)
    family = Family.FUCA if top.family is Family.FUCA else Family.CUCA
    rx_pos = element_positions(top).copy()
    rx_pos[:, 2] = link.distance
    return OptimizationResult(family, params, element_positions(top), rx_pos,
                              plan.modulation_matrices(), cap, trace, stops)
