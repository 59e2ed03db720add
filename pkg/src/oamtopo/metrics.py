"""Spectral efficiency and bit-error-rate evaluation.

Per-mode SE sums ``B log2(1 + p_n / (delta^2 [(H^H H)^-1]_nn))`` over the ZF
output streams, where ``delta^2 = sigma^2 / V`` is the per-mode noise variance
after the 1/V-normalised spatial DFT. Sweeps use transmit SNR ``P_max / sigma^2``.
"""

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .channel import Method, full_element_matrix, mode_channel_matrices
from .errors import SingularMatrixError
from .numerics import DEFAULT_MAX_CONDITION, zf_noise_amplifications
from .transceiver import TransceiverPlan, demodulate_all, modulate, zf_pseudo_inverse


@dataclass(frozen=True)
class NoiseModel:
    element_noise_power: float
    elements_per_ring: int

    @property
    def mode_noise_power(self):
        return self.element_noise_power / self.elements_per_ring


@dataclass
class SEBreakdown:
    """Total SE in bit/s plus per-mode contributions and singular-mode flags."""

    total: float
    per_mode: dict
    singular_modes: tuple = ()

    def __float__(self):
        return self.total


@dataclass
class SweepResult:
    label: str
    axis_name: str
    axis: list
    metric: str
    values: list
    seed: object = None
    meta: dict = field(default_factory=dict)


@dataclass
class SurfaceResult:
    label: str
    distances: list
    radii: list
    values: np.ndarray


def se_per_mode(H_l, alloc, delta2, bandwidth, max_condition=DEFAULT_MAX_CONDITION):
    """SE of one mode in bit/s from per-stream ZF post-processing SNRs."""
    H = H_l.entries if hasattr(H_l, "entries") else np.asarray(H_l)
    amps = zf_noise_amplifications(np.atleast_2d(H), max_condition)
    alloc = np.broadcast_to(np.asarray(alloc, dtype=float), amps.shape)
    return float(bandwidth * np.sum(np.log2(1.0 + alloc / (delta2 * amps))))


def total_se(tx, rx, cfg, plan=None, method=Method.DISCRETE, max_condition=DEFAULT_MAX_CONDITION):
    """Sum of per-mode SE over the plan's mode set; singular modes count zero."""
    if plan is None:
        plan = TransceiverPlan.for_link(tx, rx, cfg)
    delta2 = NoiseModel(cfg.noise_power, rx.elements_per_ring).mode_noise_power
    mats = mode_channel_matrices(tx, rx, cfg, plan.mode_set, method)
    per_mode, singular = {}, []
    for i, mat in enumerate(mats):
        try:
            per_mode[mat.mode] = se_per_mode(mat, plan.power[:, i], delta2, cfg.bandwidth,
                                             max_condition)
        except SingularMatrixError:
            per_mode[mat.mode] = 0.0
            singular.append(mat.mode)
    return SEBreakdown(float(sum(per_mode.values())), per_mode, tuple(singular))


def _se_from_mats(mats, power, delta2, bandwidth, max_condition):
    total = 0.0
    for i, mat in enumerate(mats):
        try:
            total += se_per_mode(mat, power[:, i], delta2, bandwidth, max_condition)
        except SingularMatrixError:
            pass
    return total


def se_vs_snr(topologies, cfg, snr_grid_db, method=Method.DISCRETE):
    """SE (bit/s) versus transmit SNR for each topology, used as tx and rx."""
    results = []
    for top in topologies:
        plan = TransceiverPlan.for_link(top, top, cfg)
        mats = mode_channel_matrices(top, top, cfg, plan.mode_set, method)
        values = []
        for snr in snr_grid_db:
            link = cfg.with_snr_db(snr)
            power = plan.power * (link.power_budget / cfg.power_budget if cfg.power_budget else 1.0)
            delta2 = link.noise_power / top.elements_per_ring
            values.append(_se_from_mats(mats, power, delta2, link.bandwidth, DEFAULT_MAX_CONDITION))
        results.append(SweepResult(top.label, "snr_db", list(snr_grid_db), "se_bps", values))
    return results


def se_surface(builder, cfg, distance_grid, radius_grid, label=None, method=Method.DISCRETE):
    """SE over a (distance, aperture) grid.

    `builder(aperture)` returns the topology at that aperture, with its ring
    radii scaled in proportion.
    """
    from dataclasses import replace

    distance_grid = list(distance_grid)
    radius_grid = list(radius_grid)
    for grid in (distance_grid, radius_grid):
        if any(g <= 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grids must be positive and strictly ascending")
    values = np.zeros((len(distance_grid), len(radius_grid)))
    name = label
    for j, R in enumerate(radius_grid):
        top = builder(R)
        name = name or top.label
        for i, d in enumerate(distance_grid):
            link = replace(cfg, distance=d, aperture=R)
            values[i, j] = total_se(top, top, link, method=method).total
    return SurfaceResult(name, distance_grid, radius_grid, values)


def local_maxima(values):
    """Indices of strict interior local maxima of a 1-D sequence."""
    v = np.asarray(values)
    return [i for i in range(1, len(v) - 1) if v[i] > v[i - 1] and v[i] > v[i + 1]]


# -- BER ---------------------------------------------------------------------

_QPSK_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])


def _qpsk_map(bits):
    # Gray: first bit -> sign of I, second bit -> sign of Q
    return ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / math.sqrt(2.0)


def _qpsk_demap(symbols):
    return np.stack([(symbols.real < 0).astype(np.int8), (symbols.imag < 0).astype(np.int8)], -1)


_PAM4_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])  # index = 2-bit Gray label -> level


def _qam16_map(bits):
    i = _PAM4_LEVELS[bits[..., 0] * 2 + bits[..., 1]]
    q = _PAM4_LEVELS[bits[..., 2] * 2 + bits[..., 3]]
    return (i + 1j * q) / math.sqrt(10.0)


def _pam4_demap(x):
    b0 = (x > 0).astype(np.int8)
    b1 = (np.abs(x) < 2.0).astype(np.int8)
    return b0, b1


def _qam16_demap(symbols):
    s = symbols * math.sqrt(10.0)
    i0, i1 = _pam4_demap(s.real)
    q0, q1 = _pam4_demap(s.imag)
    return np.stack([i0, i1, q0, q1], -1)


CONSTELLATIONS = {
    "qpsk": (2, _qpsk_map, _qpsk_demap),
    "16qam": (4, _qam16_map, _qam16_demap),
}


def qpsk_ber_theory(snr_linear):
    """Gray-QPSK bit error rate ``Q(sqrt(SNR))`` for per-symbol SNR Es/N0."""
    return 0.5 * erfc(np.sqrt(np.asarray(snr_linear) / 2.0))


def point_rng(seed, index):
    """Counter-based generator for sweep point `index`, independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _ber_point(H_full, mats, plan, noise_power, frames, rng, constellation, max_condition):
    bits_per_symbol, mapper, demapper = CONSTELLATIONS[constellation]
    N, L = plan.ring_count, len(plan.mode_set)
    bits = rng.integers(0, 2, size=(frames, N, L, bits_per_symbol), dtype=np.int8)
    symbols = mapper(bits)
    y = modulate(symbols, plan) @ H_full.T
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    y = y + math.sqrt(noise_power / 2.0) * noise
    r = demodulate_all(y, plan)
    decided = np.empty_like(bits)
    scale = np.sqrt(plan.power)
    for i, mat in enumerate(mats):
        try:
            G = zf_pseudo_inverse(mat.entries, max_condition)
        except SingularMatrixError:
            # ZF cannot separate the streams; the decision is a coin flip
            decided[:, :, i] = rng.integers(0, 2, size=decided[:, :, i].shape, dtype=np.int8)
            continue
        est = r[:, :, i] @ G.T
        with np.errstate(divide="ignore", invalid="ignore"):
            est = np.where(scale[:, i] > 0, est / np.where(scale[:, i] > 0, scale[:, i], 1.0), 0.0)
        decided[:, :, i] = demapper(est)
    return int(np.count_nonzero(decided != bits)), int(bits.size)


def ber_monte_carlo(tx, rx, cfg, plan, snr_grid_db, frames_per_point=10_000, seed=0,
                    constellation="qpsk", method=Method.DISCRETE,
                    max_condition=DEFAULT_MAX_CONDITION, batch=2_000):
    """Simulated BER per transmit-SNR point, averaged over every stream and mode.

    Bits travel the full element-level path: modulate, exact propagation,
    per-element AWGN, spatial DFT, per-mode ZF. Streams on modes whose matrix ZF
    cannot invert are decided at random. Deterministic for a given seed.
    """
    if frames_per_point < 1:
        raise ValueError("frames_per_point must be >= 1")
    if plan is None:
        plan = TransceiverPlan.for_link(tx, rx, cfg)
    H_full = full_element_matrix(tx, rx, cfg)
    mats = mode_channel_matrices(tx, rx, cfg, plan.mode_set, method)
    values, errors, totals = [], [], []
    for idx, snr in enumerate(snr_grid_db):
        noise_power = cfg.power_budget / 10.0 ** (snr / 10.0) if np.isfinite(snr) else 0.0
        rng = point_rng(seed, idx)
        err = tot = 0
        remaining = frames_per_point
        while remaining:
            n = min(batch, remaining)
            e, t = _ber_point(H_full, mats, plan, noise_power, n, rng, constellation,
                              max_condition)
            err += e
            tot += t
            remaining -= n
        errors.append(err)
        totals.append(tot)
        values.append(err / tot)
    return SweepResult(tx.label, "snr_db", list(snr_grid_db), "ber", values, seed,
                       {"errors": errors, "bits": totals, "frames": frames_per_point,
                        "constellation": constellation})


def binomial_sigma(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


# -- export ------------------------------------------------------------------

def sweep_csv(results):
    """CSV ``topology,<axis>,<metric>`` rows for a list of SweepResult."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not results:
        w.writerow(["topology", "snr_db", "value"])
        return buf.getvalue()
    w.writerow(["topology", results[0].axis_name, results[0].metric])
    for res in results:
        for x, v in zip(res.axis, res.values):
            w.writerow([res.label, f"{x:.6g}", f"{v:.12e}"])
    return buf.getvalue()


def surface_csv(surface):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d_m", "r_m", "se_bps"])
    for i, d in enumerate(surface.distances):
        for j, r in enumerate(surface.radii):
            w.writerow([f"{d:.6g}", f"{r:.6g}", f"{surface.values[i, j]:.12e}"])
    return buf.getvalue()


def sweep_json(results, seed=None, cfg=None):
    meta = {"seed": seed}
    if cfg is not None:
        blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
        meta["cfg_hash"] = hashlib.sha256(blob).hexdigest()
    return {
        "meta": meta,
        "results": [
            {"topology": r.label, "axis": r.axis_name, "metric": r.metric,
             "x": list(r.axis), "y": list(r.values), "extra": r.meta}
            for r in results
        ],
    }
