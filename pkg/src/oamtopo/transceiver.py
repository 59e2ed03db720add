"""OAM modulation, spatial-DFT demodulation and zero-forcing detection."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .channel import (Method, _check_pair, full_element_matrix, mode_channel_matrices,
                      mode_set)
from .errors import ContractError, DomainError
from .numerics import DEFAULT_MAX_CONDITION, zf_pseudo_inverse


def _mode_matrix(K, offset, modes):
    phi = 2.0 * np.pi * np.arange(K) / K + offset
    return np.exp(1j * np.outer(phi, np.asarray(modes)))


def modulation_matrix(K, ring_index, sigma_t):
    """K x K structured beamforming matrix of ring `ring_index` (1-based).

    Column for mode l holds ``exp(j l phi_k)`` with
    ``phi_k = 2 pi (k-1)/K + ring_index * sigma_t``; modes run 1-K/2 .. K/2.
    """
    if K < 4 or K % 2:
        raise DomainError(f"modulation needs an even K >= 4, got {K}")
    return _mode_matrix(K, ring_index * sigma_t, mode_set(K))


@dataclass(frozen=True)
class TransceiverPlan:
    """Mode set, ring azimuth offsets and per-(ring, mode) power in watts.

    `tx_offsets` / `rx_offsets` are the azimuths of the first element of each
    ring, i.e. ``n * sigma`` for rings built from a common rotation step.
    """

    mode_set: tuple
    elements_per_ring: int
    tx_offsets: tuple
    rx_offsets: tuple
    power: np.ndarray

    def __post_init__(self):
        K = self.elements_per_ring
        allowed = set(mode_set(K))
        bad = [l for l in self.mode_set if l not in allowed]
        if bad:
            raise DomainError(f"modes {bad} outside the {K}-element mode set")
        if len(set(self.mode_set)) != len(self.mode_set):
            raise DomainError("duplicate modes in plan")
        p = np.asarray(self.power, dtype=float)
        if p.shape != (len(self.tx_offsets), len(self.mode_set)):
            raise DomainError(f"power shape {p.shape} != (rings, modes) "
                              f"{(len(self.tx_offsets), len(self.mode_set))}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise DomainError("power allocation must be finite and non-negative")

    @property
    def ring_count(self):
        return len(self.tx_offsets)

    @property
    def total_power(self):
        return float(np.sum(self.power))

    def check_budget(self, power_budget, tol=1e-12):
        if self.total_power > power_budget + tol:
            raise ContractError(f"allocated {self.total_power} W exceeds budget {power_budget} W")

    def modulation_matrices(self):
        """Per-ring K x |mode_set| matrices (full K x K for the full mode set)."""
        return [_mode_matrix(self.elements_per_ring, off, self.mode_set) for off in self.tx_offsets]

    @classmethod
    def for_link(cls, tx, rx, cfg, modes=None, power=None):
        """Plan matched to a topology pair; equal power split by default."""
        K, V = _check_pair(tx, rx)
        if K != V:
            raise ContractError(f"transmit K={K} and receive V={V} differ")
        modes = mode_set(K) if modes is None else tuple(modes)
        N = tx.ring_count
        if power is None:
            share = cfg.power_budget / (N * len(modes)) if modes else 0.0
            power = np.full((N, len(modes)), share)
        plan = cls(tuple(modes), K,
                   tuple(s.rotation for s in tx.subarrays),
                   tuple(s.rotation for s in rx.subarrays),
                   np.asarray(power, dtype=float))
        plan.check_budget(cfg.power_budget)
        return plan


def modulate(frame, plan):
    """Element excitations ``x = sum_l sqrt(p/K) s exp(j l phi)``, ring-major.

    `frame` is a (rings x modes) symbol array; a leading batch axis is allowed.
    """
    s = np.asarray(frame, dtype=complex)
    expected = (plan.ring_count, len(plan.mode_set))
    if s.shape[-2:] != expected:
        raise DomainError(f"frame shape {s.shape[-2:]} != plan shape {expected}")
    scaled = s * np.sqrt(plan.power) / math.sqrt(plan.elements_per_ring)
    parts = [scaled[..., n, :] @ W.T for n, W in enumerate(plan.modulation_matrices())]
    return np.concatenate(parts, axis=-1)


def demodulate(samples, V, ring_index, sigma_r, modes):
    """V-point spatial DFT of one receive ring, normalised by ``1/V``.

    ``r_l = (1/V) sum_v r_v exp(-j l [2 pi (v-1)/V + ring_index * sigma_r])``.
    """
    return _demodulate(samples, V, ring_index * sigma_r, modes)


def _demodulate(samples, V, offset, modes):
    if V < 2 or V % 2:
        raise DomainError(f"demodulation needs an even V, got {V}")
    modes = tuple(modes)
    for l in modes:
        if abs(l) > V // 2:
            raise DomainError(f"mode {l} outside +-V/2 = {V // 2}")
    r = np.asarray(samples, dtype=complex)
    if r.shape[-1] != V:
        raise DomainError(f"expected {V} samples, got {r.shape[-1]}")
    return r @ np.conj(_mode_matrix(V, offset, modes)) / V


def demodulate_all(samples, plan):
    """Demodulate every receive ring; returns (..., rings, modes)."""
    V = plan.elements_per_ring
    r = np.asarray(samples, dtype=complex)
    parts = [_demodulate(r[..., m * V:(m + 1) * V], V, off, plan.mode_set)
             for m, off in enumerate(plan.rx_offsets)]
    return np.stack(parts, axis=-2)


def zf_detect(H_l, r_l, max_condition=DEFAULT_MAX_CONDITION):
    """Zero-forcing estimate ``(H^H H)^-1 H^H r`` (r may carry a leading batch axis)."""
    H = H_l.entries if hasattr(H_l, "entries") else np.asarray(H_l)
    G = zf_pseudo_inverse(np.atleast_2d(H), max_condition)
    return np.asarray(r_l, dtype=complex) @ G.T


def end_to_end(tx, rx, cfg, plan, frame, noise_seed=None, method=Method.DISCRETE):
    """Modulate, propagate exactly, add element noise, demodulate, ZF per mode.

    Returns the estimate of the *power-scaled* symbols ``sqrt(p) * s``.
    Noise is circularly-symmetric complex Gaussian with variance
    ``cfg.noise_power`` per receive element; ``noise_seed=None`` disables it.
    """
    x = modulate(frame, plan)
    y = x @ full_element_matrix(tx, rx, cfg).T
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        y = y + math.sqrt(cfg.noise_power / 2.0) * (
            rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    r = demodulate_all(y, plan)
    mats = mode_channel_matrices(tx, rx, cfg, plan.mode_set, method)
    est = np.empty(np.shape(frame), dtype=complex)
    for i, mat in enumerate(mats):
        est[..., :, i] = zf_detect(mat, r[..., :, i])
    return est


def frame_csv(frame, modes):
    """Debug dump ``ring,mode,re,im`` of a (rings x modes) frame."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ring", "mode", "re", "im"])
    s = np.asarray(frame, dtype=complex)
    for n in range(s.shape[0]):
        for i, l in enumerate(modes):
            w.writerow([n, l, f"{s[n, i].real:.12e}", f"{s[n, i].imag:.12e}"])
    return buf.getvalue()
