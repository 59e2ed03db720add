"""Line-of-sight channels: exact element-wise and per-OAM-mode effective.

Two routes produce the per-mode ring-to-ring matrix ``H_l``:

* ``Method.DISCRETE`` composes the exact element channel with the transmit
  modulation and the receive spatial DFT (normalised by ``1/V``);
* ``Method.ANALYTIC`` uses the paraxial closed form, a Bessel function of the
  mode order whose argument is ``kappa0 * R_m * R_n / sqrt(d^2 + R_m^2 + R_n^2)``.

DISCRETE is exact and serves as the oracle for ANALYTIC.
"""

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ContractError, DomainError
from .geometry import Family, element_positions, fuca_projection
from .numerics import bessel_j_vec


class Method(str, enum.Enum):
    ANALYTIC = "ANALYTIC"
    DISCRETE = "DISCRETE"


@dataclass(frozen=True)
class LinkConfig:
    """Physical link parameters; defaults reproduce the reference scenario.

    ``min_spacing`` defaults to half a wavelength when left as None.
    """

    distance: float = 100.0
    carrier: float = 5.8e9
    beta: float = 4.0 * math.pi
    noise_power: float = 10e-3
    power_budget: float = 1.0
    bandwidth: float = 10e6
    min_spacing: Optional[float] = None
    aperture: float = 2.0
    rf_chain_budget: Optional[int] = None

    def __post_init__(self):
        for name in ("distance", "carrier", "beta", "noise_power", "bandwidth", "aperture"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"LinkConfig.{name} must be positive and finite, got {value}")
        if not (np.isfinite(self.power_budget) and self.power_budget >= 0):
            raise DomainError(f"LinkConfig.power_budget must be >= 0, got {self.power_budget}")
        if self.min_spacing is not None and self.min_spacing < 0:
            raise DomainError("LinkConfig.min_spacing must be >= 0")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier

    @property
    def wavenumber(self):
        return 2.0 * math.pi / self.wavelength

    @property
    def spacing(self):
        return self.wavelength / 2.0 if self.min_spacing is None else self.min_spacing

    @property
    def snr_db(self):
        return 10.0 * math.log10(self.power_budget / self.noise_power)

    def with_snr_db(self, snr_db):
        """Copy whose noise power gives transmit SNR ``P_max / sigma^2 = snr_db``."""
        return replace(self, noise_power=self.power_budget / 10.0 ** (snr_db / 10.0))

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ModeChannelMatrix:
    mode: int
    entries: np.ndarray
    method: Method = Method.DISCRETE

    @property
    def shape(self):
        return self.entries.shape


def exact_element_channel(tx_pos, rx_pos, cfg):
    """``beta * exp(-j k0 r) / (2 k0 r)`` for the exact distance r between two points."""
    r = float(np.linalg.norm(np.asarray(rx_pos, float) - np.asarray(tx_pos, float)))
    if r <= 0.0:
        raise DomainError("transmit and receive positions coincide")
    k0 = cfg.wavenumber
    return cfg.beta * np.exp(-1j * k0 * r) / (2.0 * k0 * r)


def approx_ring_distance(R_rx, R_tx, theta, phi, d):
    """Paraxial distance between ring elements at azimuths theta (rx) and phi (tx)."""
    if not d > 0:
        raise DomainError(f"link distance must be positive, got {d}")
    base = math.sqrt(d * d + R_rx * R_rx + R_tx * R_tx)
    return base - R_rx * R_tx * math.cos(theta - phi) / base


def _element_matrix_xy(tx_xy, rx_xy, cfg):
    diff = rx_xy[:, None, :] - tx_xy[None, :, :]
    r = np.sqrt(cfg.distance ** 2 + np.sum(diff * diff, axis=-1))
    k0 = cfg.wavenumber
    return cfg.beta * np.exp(-1j * k0 * r) / (2.0 * k0 * r)


def full_element_matrix(tx, rx, cfg):
    """Exact ``N_r x N_t`` element channel, ring-major on both sides.

    The receive plane sits at ``cfg.distance`` along boresight regardless of the
    topologies' own plane offsets.
    """
    return _element_matrix_xy(element_positions(tx)[:, :2], element_positions(rx)[:, :2], cfg)


def _check_pair(tx, rx):
    if not (tx.family.transmits and rx.family.transmits):
        raise ContractError(f"{tx.label} -> {rx.label}: only UCA/CUCA/FUCA carry OAM modes")
    if (tx.family is Family.FUCA) != (rx.family is Family.FUCA):
        raise ContractError(f"family mismatch: {tx.family.value} vs {rx.family.value}")
    K, V = tx.elements_per_ring, rx.elements_per_ring
    if K is None or V is None:
        raise ContractError("every ring of a topology must carry the same element count")
    return K, V


def mode_set(element_count):
    """Integer OAM modes ``1 - K/2, ..., K/2`` supported by a K-element ring."""
    if element_count < 2 or element_count % 2:
        raise DomainError(f"mode set needs an even element count, got {element_count}")
    half = element_count // 2
    return tuple(range(1 - half, half + 1))


def _check_mode(l, K):
    if abs(l) > K // 2:
        raise DomainError(f"mode {l} exceeds K/2 = {K // 2}")


def _closed_form(l, R_rx, R_tx, K, cfg):
    d = cfg.distance
    k0 = cfg.wavenumber
    D = np.sqrt(d * d + R_rx ** 2 + R_tx ** 2)
    scale = cfg.beta * math.sqrt(K) / (2.0 * k0 * d) * (1j ** l)
    return scale * np.exp(-1j * k0 * D) * bessel_j_vec(l, k0 * R_rx * R_tx / D)


def mode_gain_cuca(m, n, l, tx, rx, cfg):
    """Closed-form effective gain of mode `l` from transmit ring n to receive ring m."""
    K, _ = _check_pair(tx, rx)
    if tx.family is Family.FUCA:
        raise ContractError("mode_gain_cuca needs UCA/CUCA topologies")
    _check_mode(l, K)
    return complex(_closed_form(l, rx.subarrays[m].radius, tx.subarrays[n].radius, K, cfg))


def _fuca_virtual(m, n, tx, rx):
    V = rx.fuca.elements_per_subarray
    proj = [fuca_projection(tx.fuca, rx.fuca, n, m, v) for v in range(V)]
    radii = np.array([p.virtual_radius for p in proj])
    azim = np.array([p.virtual_azimuth for p in proj])
    return radii, azim, rx.fuca.local_azimuths(m)


def mode_gain_fuca(m, n, v, l, tx, rx, cfg):
    """Closed-form gain of mode `l` for receive element v of sub-UCA m from sub-UCA n.

    The virtual radius replaces the receive ring radius. The residual phase
    ``exp(j l (theta_virtual - theta_element))`` is kept; it is 1 for coaxial pairs.
    """
    K, _ = _check_pair(tx, rx)
    if tx.family is not Family.FUCA:
        raise ContractError("mode_gain_fuca needs FUCA topologies")
    _check_mode(l, K)
    p = fuca_projection(tx.fuca, rx.fuca, n, m, v)
    theta = rx.fuca.local_azimuths(m)[v]
    g = _closed_form(l, p.virtual_radius, tx.fuca.secondary_radius, K, cfg)
    return complex(g * np.exp(1j * l * (p.virtual_azimuth - theta)))


def _steering(subarray, l):
    return np.exp(1j * l * subarray.azimuths)


def _discrete_blocks(tx, rx, cfg, target_modes, source_modes, H=None):
    """Tensor ``[t, s, m, n]``: source mode s demodulated as target mode t."""
    K, V = _check_pair(tx, rx)
    if H is None:
        H = full_element_matrix(tx, rx, cfg)
    tx_off = np.cumsum((0,) + tx.group_sizes)
    rx_off = np.cumsum((0,) + rx.group_sizes)
    M, N = rx.ring_count, tx.ring_count
    out = np.zeros((len(target_modes), len(source_modes), M, N), dtype=complex)
    # columns: modulation vectors; rows: demodulation vectors (fixed k-then-v order)
    B = np.zeros((tx.element_count, len(source_modes) * N), dtype=complex)
    for s, l in enumerate(source_modes):
        for n, sub in enumerate(tx.subarrays):
            B[tx_off[n]:tx_off[n + 1], s * N + n] = _steering(sub, l) / math.sqrt(K)
    A = np.zeros((len(target_modes) * M, rx.element_count), dtype=complex)
    for t, l in enumerate(target_modes):
        for m, sub in enumerate(rx.subarrays):
            A[t * M + m, rx_off[m]:rx_off[m + 1]] = np.conj(_steering(sub, l)) / V
    full = A @ (H @ B)
    return full.reshape(len(target_modes), M, len(source_modes), N).transpose(0, 2, 1, 3)


def _analytic_entries(tx, rx, l, cfg):
    K, _ = _check_pair(tx, rx)
    _check_mode(l, K)
    M, N = rx.ring_count, tx.ring_count
    out = np.zeros((M, N), dtype=complex)
    if tx.family is Family.FUCA:
        R_t1 = tx.fuca.secondary_radius
        for m in range(M):
            for n in range(N):
                radii, azim, theta = _fuca_virtual(m, n, tx, rx)
                g = _closed_form(l, radii, R_t1, K, cfg) * np.exp(1j * l * (azim - theta))
                out[m, n] = np.mean(g)
    else:
        rx_r = np.array([s.radius for s in rx.subarrays])
        tx_r = np.array([s.radius for s in tx.subarrays])
        out[:] = _closed_form(l, rx_r[:, None], tx_r[None, :], K, cfg)
    return out


def mode_channel_matrix(tx, rx, l, cfg, method=Method.DISCRETE):
    """Effective ``M x N`` ring-to-ring matrix for OAM mode `l`."""
    method = Method(method)
    K, V = _check_pair(tx, rx)
    _check_mode(l, K)
    if method is Method.ANALYTIC:
        return ModeChannelMatrix(l, _analytic_entries(tx, rx, l, cfg), method)
    _check_mode(l, V)
    return ModeChannelMatrix(l, _discrete_blocks(tx, rx, cfg, [l], [l])[0, 0], method)


def mode_channel_matrices(tx, rx, cfg, modes=None, method=Method.DISCRETE):
    """Mode matrices for every mode in `modes` (default: the full mode set)."""
    method = Method(method)
    K, V = _check_pair(tx, rx)
    modes = mode_set(K) if modes is None else tuple(modes)
    for l in modes:
        _check_mode(l, K)
    if method is Method.ANALYTIC:
        return [ModeChannelMatrix(l, _analytic_entries(tx, rx, l, cfg), method) for l in modes]
    H = full_element_matrix(tx, rx, cfg)
    mats = []
    for l in modes:
        _check_mode(l, V)
        mats.append(ModeChannelMatrix(l, _discrete_blocks(tx, rx, cfg, [l], [l], H)[0, 0], method))
    return mats


def mode_coupling(tx, rx, cfg, modes):
    """Leakage tensor ``[l_target, l_source, m, n]`` of the DISCRETE link.

    The diagonal ``l_target == l_source`` equals the DISCRETE mode matrices.
    """
    modes = tuple(modes)
    M, N = rx.ring_count, tx.ring_count
    if not modes:
        return np.zeros((0, 0, M, N), dtype=complex)
    K, V = _check_pair(tx, rx)
    for l in modes:
        _check_mode(l, K)
        _check_mode(l, V)
    return _discrete_blocks(tx, rx, cfg, modes, modes)


def max_leakage_ratio(coupling):
    """Largest off-diagonal leakage magnitude over the largest diagonal magnitude."""
    L = coupling.shape[0]
    if L == 0:
        return 0.0
    mags = np.abs(coupling)
    diag = max(mags[i, i].max() for i in range(L))
    off = mags.copy()
    for i in range(L):
        off[i, i] = 0.0
    return float(off.max() / diag) if diag > 0 else float("inf")


def channel_csv(matrices):
    """CSV ``mode,m,n,re,im,method`` for a sequence of ModeChannelMatrix."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "m", "n", "re", "im", "method"])
    for mat in matrices:
        M, N = mat.entries.shape
        for m in range(M):
            for n in range(N):
                z = mat.entries[m, n]
                w.writerow([mat.mode, m, n, f"{z.real:.12e}", f"{z.imag:.12e}", mat.method.value])
    return buf.getvalue()


def leakage_csv(coupling, modes):
    """CSV ``l_target,l_source,m,n,abs`` for a mode-coupling tensor."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l_target", "l_source", "m", "n", "abs"])
    L, _, M, N = coupling.shape
    for t in range(L):
        for s in range(L):
            for m in range(M):
                for n in range(N):
                    w.writerow([modes[t], modes[s], m, n, f"{abs(coupling[t, s, m, n]):.12e}"])
    return buf.getvalue()
