"""Near-field channel evaluation, SINR/rate metrics and optimal receive beamformers.

Array conventions: UAV positions are ``(L, N, 3)``, UE positions ``(K, 3)``,
channels ``(K, N, L)`` complex and beamformers ``(K, N, L)`` complex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DegenerateGeometryError, Scenario, SwarmTrajectory, ValidationError


def distance(q, w) -> float:
    return float(np.linalg.norm(np.asarray(q, float) - np.asarray(w, float)))


def ue_uav_distances(positions: np.ndarray, ue_positions: np.ndarray) -> np.ndarray:
    """Distances r[k, n, l] between every UE and every UAV slot position."""
    q = np.asarray(positions, float)
    w = np.asarray(ue_positions, float)
    diff = q.transpose(1, 0, 2)[None, :, :, :] - w[:, None, None, :]
    return np.sqrt(np.einsum("knlc,knlc->knl", diff, diff))


def _steering(scenario: Scenario, dist: np.ndarray, amp_dist: np.ndarray) -> np.ndarray:
    if np.any(dist == 0.0) or np.any(amp_dist == 0.0):
        raise DegenerateGeometryError("a UAV coincides with a UE (zero distance)")
    r_ref = np.array([u.reference_distance for u in scenario.users])[:, None, None]
    alpha = np.array([u.reference_coefficient for u in scenario.users])[:, None, None]
    k0 = scenario.rf.wavenumber
    return alpha * (r_ref / amp_dist) * np.exp(-1j * k0 * (dist - r_ref))


def channel_matrix(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """Exact spherical-wave channels h[k, n, l] for a trajectory of shape (L, N, 3)."""
    dist = ue_uav_distances(positions, scenario.ue_positions)
    return _steering(scenario, dist, dist)


def fixed_amplitude_channels(scenario: Scenario, positions: np.ndarray,
                             amplitude_positions: np.ndarray) -> np.ndarray:
    """Channels whose amplitudes come from ``amplitude_positions`` and phases from ``positions``."""
    w = scenario.ue_positions
    return _steering(scenario, ue_uav_distances(positions, w),
                     ue_uav_distances(amplitude_positions, w))


@dataclass(frozen=True)
class ChannelVector:
    entries: np.ndarray
    ue: int
    slot: int


def channel_vector(scenario: Scenario, trajectory: SwarmTrajectory, ue_index: int, slot: int) -> ChannelVector:
    if trajectory.positions.shape[:2] != (scenario.L, scenario.N):
        raise ValidationError("trajectory shape does not match scenario L, N")
    user = scenario.users[ue_index]
    r = np.linalg.norm(trajectory.positions[:, slot, :] - user.position, axis=-1)
    if np.any(r == 0.0):
        raise DegenerateGeometryError("a UAV coincides with a UE (zero distance)")
    r_k = user.reference_distance
    h = user.reference_coefficient * (r_k / r) * np.exp(-1j * scenario.rf.wavenumber * (r - r_k))
    return ChannelVector(entries=h, ue=ue_index, slot=slot)


def _entries(h) -> np.ndarray:
    return h.entries if isinstance(h, ChannelVector) else np.asarray(h, complex)


def snr_mrc(channel, pbar: float) -> float:
    """SNR with maximal-ratio combining: pbar * ||h||^2."""
    h = _entries(channel)
    return float(pbar * np.vdot(h, h).real)


def sinr(beamformer, channels, pbars, k: int) -> float:
    """SINR of UE ``k`` for receive vector ``beamformer``; ``channels`` is (K, L)."""
    v = np.asarray(beamformer, complex)
    hs = np.array([_entries(h) for h in channels])
    gains = np.abs(hs.conj() @ v) ** 2 * np.asarray(pbars, float)
    interference = gains.sum() - gains[k]
    return float(gains[k] / (interference + 1.0))


def rate_metrics(sinrs):
    """Per-slot rates log2(1 + sinr) and their average over the slots."""
    rates = np.log2(1.0 + np.asarray(sinrs, float))
    return rates, float(rates.mean())


def interference_covariance(channels: np.ndarray, pbars, k: int) -> np.ndarray:
    hs = np.asarray(channels, complex)
    p = np.asarray(pbars, float).copy()
    p[k] = 0.0
    return np.eye(hs.shape[1]) + (hs.T * p) @ hs.conj()


def mmse_beamformer(channels, pbars, k: int) -> np.ndarray:
    """Unit-norm C_k^{-1} h_k with C_k the interference-plus-noise covariance."""
    hs = np.array([_entries(h) for h in channels])
    c = interference_covariance(hs, pbars, k)
    v = np.linalg.solve(c, hs[k])
    return v / np.linalg.norm(v)


def mmse_beamformers(channels: np.ndarray, pbars) -> np.ndarray:
    """MMSE receive vectors for all (k, n); ``channels`` is (K, N, L)."""
    h = np.asarray(channels, complex)
    K, N, L = h.shape
    p = np.asarray(pbars, float)
    hn = h.transpose(1, 0, 2)  # (N, K, L)
    total = np.eye(L)[None] + np.einsum("nkl,k,nkm->nlm", hn, p, hn.conj())
    out = np.empty_like(h)
    for k in range(K):
        ck = total - p[k] * np.einsum("nl,nm->nlm", hn[:, k], hn[:, k].conj())
        v = np.linalg.solve(ck, hn[:, k][..., None])[..., 0]
        out[k] = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return out


def mrc_beamformers(channels: np.ndarray) -> np.ndarray:
    h = np.asarray(channels, complex)
    return h / np.linalg.norm(h, axis=-1, keepdims=True)


def sinr_matrix(channels: np.ndarray, beamformers: np.ndarray, pbars) -> np.ndarray:
    """SINR[k, n] for all UEs and slots."""
    g = beam_gains(channels, beamformers)  # (K_v, K_h, N)
    p = np.asarray(pbars, float)[None, :, None]
    pg = p * g
    own = np.einsum("kkn->kn", pg)
    return own / (pg.sum(axis=1) - own + 1.0)


def beam_gains(channels: np.ndarray, beamformers: np.ndarray) -> np.ndarray:
    """g[k, i, n] = |v_k[n]^H h_i[n]|^2."""
    return np.abs(np.einsum("knl,inl->kin", np.conj(beamformers), channels)) ** 2


def correlation_sq(a, b) -> float:
    """Squared correlation |a^H b|^2 / (||a||^2 ||b||^2)."""
    x, y = _entries(a), _entries(b)
    num = abs(np.vdot(x, y)) ** 2
    return float(num / (np.vdot(x, x).real * np.vdot(y, y).real))


def mmse_sinr_two_ue(h_k, h_kp, pbar_k: float, pbar_kp: float) -> float:
    """Closed-form MMSE SINR of UE k when a single other UE interferes."""
    hk, hkp = _entries(h_k), _entries(h_kp)
    gk = pbar_k * np.vdot(hk, hk).real
    gkp = pbar_kp * np.vdot(hkp, hkp).real
    rho = correlation_sq(hk, hkp)
    return float(gk * (1.0 - gkp * rho / (gkp + 1.0)))


@dataclass(frozen=True)
class BeamformerSet:
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, complex)
        if v.ndim != 3:
            raise ValidationError("beamformers must have shape (K, N, L)")
        if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1.0) > 1e-12):
            raise ValidationError("every beamformer must have unit norm")
        object.__setattr__(self, "vectors", v)


@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray
    rates: np.ndarray
    average: np.ndarray

    @property
    def min_average(self) -> float:
        return float(self.average.min())


def evaluate(scenario: Scenario, positions: np.ndarray, beamformers: np.ndarray | None = None) -> RateReport:
    """Exact-channel rates of a trajectory; MMSE receive beamforming unless given."""
    h = channel_matrix(scenario, positions)
    v = mmse_beamformers(h, scenario.pbars) if beamformers is None else beamformers
    s = sinr_matrix(h, v, scenario.pbars)
    rates = np.log2(1.0 + s)
    return RateReport(sinr=s, rates=rates, average=rates.mean(axis=1))
