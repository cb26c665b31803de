"""Analytical placements: single UAV, the optimal two-UAV pair, IUI-free hyperbolic pairs and rings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ValidationError, vec3

SYMMETRIC = "symmetric"
ASYMMETRIC_PLUS = "asymmetric_plus"
ASYMMETRIC_MINUS = "asymmetric_minus"


class NoFeasibleNuError(ValueError):
    """No hyperbola with semi-axis below the focal half-distance separates the pair by d_min."""


def optimal_single_uav(ue, H: float) -> np.ndarray:
    w = vec3(ue)
    if w[2] != 0.0:
        raise ValidationError("ue must lie on the ground (z == 0)")
    return np.array([w[0], w[1], float(H)])


# -- two UAVs, one UE -----------------------------------------------------------

def pair_gain(x, H: float, d_min: float):
    """Sum of inverse squared distances for UAVs at [x,0,H] and [x+d_min,0,H], UE at the origin."""
    x = np.asarray(x, float)
    return 1.0 / (x * x + H * H) + 1.0 / ((x + d_min) ** 2 + H * H)


def pair_stationarity_residual(x: float, H: float, d_min: float) -> float:
    """Stationarity polynomial y [y^4 + 2d^2 c y^2 + d^4 c (zeta^2 - 3/4)] scaled by d^5.

    Here y = x + d/2 and c = zeta^2 + 1/4; its roots are the critical points of
    :func:`pair_gain`.
    """
    y = x + d_min / 2.0
    zeta = H / d_min
    c = zeta * zeta + 0.25
    poly = y * (y ** 4 + 2.0 * d_min ** 2 * c * y * y + d_min ** 4 * c * (zeta * zeta - 0.75))
    return float(poly / d_min ** 5)


@dataclass(frozen=True)
class TwoUavSolution:
    x_star: float
    positions: tuple
    branch: str
    zeta: float
    ue: np.ndarray
    alternatives: tuple = ()

    @property
    def objective(self) -> float:
        """Sum of inverse squared UE distances (SNR divided by pbar * beta0)."""
        return float(sum(1.0 / float((p - self.ue) @ (p - self.ue)) for p in self.positions))


def optimal_two_uav(H: float, d_min: float, ue=(0.0, 0.0, 0.0)) -> TwoUavSolution:
    """Best pair placement for one UE; both mirrored maximizers are returned when asymmetric.

    The ``asymmetric_plus`` maximizer is the canonical one; the other is in
    ``alternatives``.
    """
    if not (H > 0 and d_min > 0):
        raise ValidationError("H and d_min must be positive")
    w = vec3(ue)
    zeta = H / d_min

    def build(x, branch):
        pts = (np.array([w[0] + x, w[1], H]), np.array([w[0] + x + d_min, w[1], H]))
        return x, pts, branch

    if zeta > math.sqrt(3.0) / 2.0:
        x, pts, branch = build(-d_min / 2.0, SYMMETRIC)
        alternatives = ()
    else:
        c = zeta * zeta + 0.25
        offset = d_min * math.sqrt(max(math.sqrt(c) - c, 0.0))
        x, pts, branch = build(-d_min / 2.0 + offset, ASYMMETRIC_PLUS)
        alternatives = (TwoUavSolution(*build(-d_min / 2.0 - offset, ASYMMETRIC_MINUS), zeta=zeta, ue=w),)
    return TwoUavSolution(x_star=x, positions=pts, branch=branch, zeta=zeta, ue=w,
                          alternatives=alternatives)


# -- hyperbolic IUI-free placement --------------------------------------------

def semi_axis(nu: int, wavelength: float) -> float:
    return (2 * nu + 1) * wavelength / 8.0


def pair_separation(nu: int, X: float, wavelength: float, H: float) -> float:
    """Horizontal separation of the mirrored pair on the branch at altitude H."""
    a = semi_axis(nu, wavelength)
    return 2.0 * a * math.sqrt(H * H / (X * X - a * a) + 1.0)


def min_feasible_nu(X: float, wavelength: float, H: float, d_min: float) -> int:
    """Smallest nu >= 0 whose mirrored pair at altitude H is at least d_min apart.

    Scans nu upward while the semi-axis stays below X.
    """
    if not (X > 0 and wavelength > 0 and H > 0 and d_min > 0):
        raise ValidationError("X, wavelength, H and d_min must be positive")
    nu = 0
    while semi_axis(nu, wavelength) < X:
        if pair_separation(nu, X, wavelength, H) >= d_min:
            return nu
        nu += 1
    raise NoFeasibleNuError(
        f"no nu with semi-axis below X={X} separates the pair by d_min={d_min}")


@dataclass(frozen=True)
class HyperbolaPlacement:
    nu: int
    a: float
    X: float
    positions: np.ndarray
    z: np.ndarray
    ue_positions: np.ndarray

    @property
    def L(self) -> int:
        return len(self.positions)


def _branch_x(a: float, X: float, z) -> np.ndarray:
    z = np.asarray(z, float)
    return a * np.sqrt(z * z / (X * X - a * a) + 1.0)


def _frame(ue_pair):
    """Rigid map from the canonical frame (UEs at [+X,0,0], [-X,0,0]) to the given UEs."""
    if ue_pair is None:
        return None
    w1, w2 = vec3(ue_pair[0]), vec3(ue_pair[1])
    if w1[2] != 0 or w2[2] != 0:
        raise ValidationError("UEs must lie on the ground (z == 0)")
    span = w1 - w2
    X = float(np.linalg.norm(span)) / 2.0
    if X == 0:
        raise ValidationError("the two UEs must be distinct")
    return X, (w1 + w2) / 2.0, span / (2.0 * X)


def _to_world(canon: np.ndarray, frame) -> np.ndarray:
    if frame is None:
        return canon
    _, center, ex = frame
    return center + canon[:, :1] * ex + canon[:, 2:3] * np.array([0.0, 0.0, 1.0])


def hyperbola_positions(L: int, nu: int, X: float, wavelength: float, z_list: Sequence[float],
                        H: float | None = None) -> HyperbolaPlacement:
    """Mirrored pairs on the hyperbola with foci at [+-X, 0, 0] and semi-axis (2nu+1) lambda / 8."""
    if L < 2 or L % 2:
        raise ValidationError("L must be even and >= 2")
    z = np.asarray(z_list, float)
    if z.shape != (L // 2,):
        raise ValidationError("z_list must have L/2 entries")
    if H is not None and np.any(z < H):
        raise ValidationError("all z must be >= H")
    a = semi_axis(nu, wavelength)
    if not a < X:
        raise NoFeasibleNuError(f"semi-axis {a} is not below X={X}")
    x = _branch_x(a, X, z)
    right = np.column_stack([x, np.zeros_like(x), z])
    left = right * np.array([-1.0, 1.0, 1.0])
    ues = np.array([[X, 0.0, 0.0], [-X, 0.0, 0.0]])
    return HyperbolaPlacement(nu=nu, a=a, X=X, positions=np.vstack([right, left]), z=z, ue_positions=ues)


def successive_hyperbola_placement(L: int, X: float, wavelength: float, H: float, d_min: float,
                                   ue_pair=None) -> HyperbolaPlacement:
    """Right-branch UAVs stacked upward at chord d_min from their predecessor, then mirrored.

    With ``ue_pair`` the construction is done in the canonical frame of the
    two UEs and mapped back; ``X`` is then taken from the UE separation.
    """
    frame = _frame(ue_pair)
    if frame is not None:
        X = frame[0]
    nu = min_feasible_nu(X, wavelength, H, d_min)
    a = semi_axis(nu, wavelength)
    z = [float(H)]
    for _ in range(1, L // 2):
        z0 = z[-1]
        p0 = np.array([_branch_x(a, X, z0), z0])

        def gap(zz):
            return math.hypot(_branch_x(a, X, zz) - p0[0], zz - p0[1]) - d_min

        lo, hi = z0, z0 + 2.0 * d_min
        while hi - lo > 1e-12 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if gap(mid) < 0:
                lo = mid
            else:
                hi = mid
        z.append(hi)
    out = hyperbola_positions(L, nu, X, wavelength, z, H=H)
    if frame is None:
        return out
    return HyperbolaPlacement(nu=nu, a=a, X=X, positions=_to_world(out.positions, frame), z=out.z,
                              ue_positions=np.array([vec3(ue_pair[0]), vec3(ue_pair[1])]))


# -- rings --------------------------------------------------------------------

def ring_radius(L: int, d_min: float) -> float:
    return d_min / (2.0 * math.sin(math.pi / L))


def circular_placement(L: int, d_min: float, H: float, center=(0.0, 0.0)) -> np.ndarray:
    """L UAVs evenly spaced on a horizontal ring with adjacent spacing d_min; shape (L, 3)."""
    if L < 2:
        raise ValidationError("circular placement needs L >= 2")
    R = ring_radius(L, d_min)
    th = 2.0 * math.pi * np.arange(L) / L
    return np.column_stack([center[0] + R * np.cos(th), center[1] + R * np.sin(th), np.full(L, float(H))])
