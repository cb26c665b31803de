"""Domain types shared by every optimizer: RF constants, users, scenarios, trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """A scenario or trajectory violates one of its invariants."""


class DegenerateGeometryError(ValueError):
    """A UAV coincides with a UE, so the channel is undefined."""


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a finite 3-vector from three scalars or a length-3 sequence."""
    if y is None and z is None:
        v = np.asarray(x, dtype=float).reshape(-1)
    else:
        v = np.array([x, y, z], dtype=float)
    if v.shape != (3,):
        raise ValidationError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("vector components must be finite")
    return v


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def wavelength_from_beta0(beta0: float) -> float:
    """Invert beta0 = (lambda / 4 pi)^2."""
    return 4.0 * math.pi * math.sqrt(beta0)


def beta0_from_wavelength(wavelength: float) -> float:
    return (wavelength / (4.0 * math.pi)) ** 2


@dataclass(frozen=True)
class RfParams:
    """Reference gain (linear, at 1 m), carrier wavelength (m) and noise power (W)."""

    beta0: float
    wavelength: float
    noise_power: float

    def __post_init__(self):
        if not (self.beta0 > 0 and self.wavelength > 0 and self.noise_power > 0):
            raise ValidationError("rf: beta0, wavelength and noise_power must be positive")
        expected = beta0_from_wavelength(self.wavelength)
        if abs(expected - self.beta0) > 1e-9 * self.beta0:
            raise ValidationError("rf: beta0 must equal (wavelength / 4pi)^2")

    @classmethod
    def from_db(cls, beta0_db: float = -61.4, noise_dbm: float = -94.0,
                wavelength: Optional[float] = None) -> "RfParams":
        """Build from dB quantities.

        When ``wavelength`` is given it wins and beta0 is recomputed from it,
        otherwise the wavelength is derived from beta0.
        """
        if wavelength is None:
            beta0 = db_to_linear(beta0_db)
            wavelength = wavelength_from_beta0(beta0)
        else:
            beta0 = beta0_from_wavelength(wavelength)
        return cls(beta0=beta0, wavelength=wavelength, noise_power=dbm_to_watt(noise_dbm))

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class UserTerminal:
    position: np.ndarray
    tx_power: float
    reference_distance: float
    reference_coefficient: complex

    @classmethod
    def create(cls, position, tx_power: float, reference_point, rf: RfParams) -> "UserTerminal":
        w = vec3(position)
        if w[2] != 0.0:
            raise ValidationError("user position must lie on the ground (z == 0)")
        if not tx_power >= 0:
            raise ValidationError("user tx_power must be non-negative")
        r_k = float(np.linalg.norm(vec3(reference_point) - w))
        if r_k == 0.0:
            raise DegenerateGeometryError("reference point coincides with a user")
        alpha = math.sqrt(rf.beta0) / r_k * np.exp(-1j * rf.wavenumber * r_k)
        return cls(position=w, tx_power=float(tx_power), reference_distance=r_k,
                   reference_coefficient=complex(alpha))


@dataclass(frozen=True)
class SolverSettings:
    """Outer-loop thresholds and convex-kernel tolerances."""

    eps1: float = 1e-4
    eps2: float = 1e-4
    feas_tol: float = 1e-8
    opt_tol: float = 1e-6
    max_iters: int = 5000
    max_outer: int = 100
    max_stage1: int = 50
    max_stage2: int = 30

    def __post_init__(self):
        for name in ("eps1", "eps2", "feas_tol", "opt_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"solver.{name} must be positive")
        for name in ("max_iters", "max_outer", "max_stage1", "max_stage2"):
            if getattr(self, name) < 1:
                raise ValidationError(f"solver.{name} must be >= 1")


@dataclass(frozen=True)
class Scenario:
    users: tuple
    L: int
    N: int
    slot_length: float
    v_max: float
    d_min: float
    H: float
    reference_point: np.ndarray
    rf: RfParams
    initial_positions: Optional[np.ndarray] = None
    final_positions: Optional[np.ndarray] = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.L < 1 or self.N < 1:
            raise ValidationError("swarm: L and N must be >= 1")
        if not self.d_min > 0:
            raise ValidationError("swarm: d_min must be positive")
        if not self.H > 0:
            raise ValidationError("swarm: H must be positive")
        if not self.v_max > 0:
            raise ValidationError("swarm: vmax must be positive")
        if not self.slot_length > 0:
            raise ValidationError("swarm: slot length must be positive")
        for name in ("initial_positions", "final_positions"):
            pts = getattr(self, name)
            if pts is None:
                continue
            if pts.shape != (self.L, 3):
                raise ValidationError(f"swarm: {name} must have L={self.L} rows")
            if np.any(pts[:, 2] < self.H):
                raise ValidationError(f"swarm: {name} must satisfy z >= H")
            if min_pairwise_distance(pts) < self.d_min:
                raise ValidationError(f"swarm: {name} violate the d_min separation")
        if (self.initial_positions is None) != (self.final_positions is None):
            raise ValidationError("swarm: initial and final positions must be given together")

    @classmethod
    def create(cls, ue_positions: Sequence, tx_powers: Sequence[float], *, L: int, N: int = 1,
               slot_length: float = 1.0, v_max: float = 30.0, d_min: float = 5.0,
               H: float = 100.0, rf: Optional[RfParams] = None, initial_positions=None,
               final_positions=None, reference_point=None,
               solver: Optional[SolverSettings] = None) -> "Scenario":
        """Assemble a scenario, deriving the reference point and per-user constants.

        ``tx_powers`` are in watts. ``final_positions`` defaults to the initial
        positions (UAVs return to base) when only initial positions are given.
        """
        rf = rf or RfParams.from_db()
        q_i = None if initial_positions is None else np.asarray(initial_positions, float).reshape(-1, 3)
        if final_positions is None:
            q_f = None if q_i is None else q_i.copy()
        else:
            q_f = np.asarray(final_positions, float).reshape(-1, 3)
        if reference_point is None:
            if q_i is not None:
                c = q_i.mean(axis=0)
                reference_point = [c[0], c[1], H]
            else:
                reference_point = [0.0, 0.0, H]
        q_r = vec3(reference_point)
        ue_positions = np.asarray(ue_positions, float).reshape(-1, 3)
        if len(tx_powers) != len(ue_positions):
            raise ValidationError("users: one tx power per user required")
        if len(ue_positions) == 0:
            raise ValidationError("users: at least one user required")
        users = tuple(UserTerminal.create(w, p, q_r, rf) for w, p in zip(ue_positions, tx_powers))
        return cls(users=users, L=int(L), N=int(N), slot_length=float(slot_length),
                   v_max=float(v_max), d_min=float(d_min), H=float(H), reference_point=q_r,
                   rf=rf, initial_positions=q_i, final_positions=q_f,
                   solver=solver or SolverSettings())

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def v_step(self) -> float:
        """Per-slot displacement budget V_max * delta_t."""
        return self.v_max * self.slot_length

    @property
    def ue_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.users])

    @property
    def pbars(self) -> np.ndarray:
        """Transmit-power-to-noise ratios P_k / sigma^2."""
        return np.array([u.tx_power for u in self.users]) / self.rf.noise_power

    @property
    def has_endpoints(self) -> bool:
        return self.initial_positions is not None

    def with_users(self, ue_positions, tx_powers) -> "Scenario":
        users = tuple(UserTerminal.create(w, p, self.reference_point, self.rf)
                      for w, p in zip(np.asarray(ue_positions, float).reshape(-1, 3), tx_powers))
        return replace(self, users=users)

    def with_changes(self, **changes) -> "Scenario":
        """Copy with swarm/solver fields replaced; users are re-derived if rf changes."""
        out = replace(self, **changes)
        if "rf" in changes or "reference_point" in changes:
            out = out.with_users(self.ue_positions, [u.tx_power for u in self.users])
        return out


def min_pairwise_distance(points: np.ndarray) -> float:
    pts = np.asarray(points, float)
    if len(pts) < 2:
        return math.inf
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(len(pts), 1)
    return float(d[iu].min())


@dataclass(frozen=True)
class FeasibilityReport:
    speed: float
    collision: float
    altitude: float
    endpoints: float
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.speed, self.collision, self.altitude, self.endpoints)

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


@dataclass(frozen=True)
class SwarmTrajectory:
    """UAV positions indexed as ``positions[l, n]`` (shape L x N x 3, meters)."""

    positions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValidationError("trajectory positions must have shape (L, N, 3)")
        if not np.all(np.isfinite(p)):
            raise ValidationError("trajectory positions must be finite")
        object.__setattr__(self, "positions", p)

    @property
    def L(self) -> int:
        return self.positions.shape[0]

    @property
    def N(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def from_placement(cls, points, N: int = 1) -> "SwarmTrajectory":
        pts = np.asarray(points, float).reshape(-1, 3)
        return cls(np.repeat(pts[:, None, :], N, axis=1))

    def violations(self, scenario: Scenario, *, endpoints: bool = True, tol: float = 1e-6) -> FeasibilityReport:
        """Worst violation (meters) of each swarm constraint."""
        p = self.positions
        if p.shape[:2] != (scenario.L, scenario.N):
            raise ValidationError("trajectory shape does not match scenario L, N")
        speed = 0.0
        if scenario.N > 1:
            steps = np.linalg.norm(np.diff(p, axis=1), axis=-1)
            speed = max(0.0, float(steps.max() - scenario.v_step))
        collision = 0.0
        if scenario.L > 1:
            gaps = [min_pairwise_distance(p[:, n]) for n in range(scenario.N)]
            collision = max(0.0, scenario.d_min - min(gaps))
        altitude = max(0.0, float(scenario.H - p[:, :, 2].min()))
        ends = 0.0
        if endpoints and scenario.has_endpoints:
            ends = max(float(np.abs(p[:, 0] - scenario.initial_positions).max()),
                       float(np.abs(p[:, -1] - scenario.final_positions).max()))
        return FeasibilityReport(speed, collision, altitude, ends, tol)

    def is_feasible(self, scenario: Scenario, *, endpoints: bool = True, tol: float = 1e-6) -> bool:
        return self.violations(scenario, endpoints=endpoints, tol=tol).ok
