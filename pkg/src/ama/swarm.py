"""Constraint builders shared by the trajectory subproblems (speed, separation, altitude, endpoints).

Variables are addressed through an index array ``idx[l, n, c]`` giving the
position of coordinate ``c`` of UAV ``l`` at slot ``n`` in the decision
vector, or -1 when that UAV is held fixed in the subproblem. An optional
``shift`` (L x N x 3) means the variables hold ``q - shift`` rather than ``q``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import solver
from .model import Scenario


def full_layout(L: int, N: int, offset: int = 0) -> np.ndarray:
    return offset + np.arange(L * N * 3).reshape(L, N, 3)


def single_layout(L: int, N: int, l: int, offset: int = 0) -> np.ndarray:
    idx = -np.ones((L, N, 3), dtype=np.int64)
    idx[l] = offset + np.arange(N * 3).reshape(N, 3)
    return idx


def _shift(idx, shift):
    return np.zeros(idx.shape) if shift is None else np.asarray(shift, float)


def speed_block(dim: int, idx: np.ndarray, v_step: float, shift=None):
    mask = idx[:, 0, 0] >= 0
    live = idx[mask]
    if live.shape[1] < 2 or len(live) == 0:
        return None
    s = _shift(idx, shift)[mask]
    offset = (s[:, :-1] - s[:, 1:]).reshape(-1, 3)
    return solver.norm_ball(dim, live[:, 1:].reshape(-1, 3), live[:, :-1].reshape(-1, 3),
                            offset=offset, radius=v_step)


def altitude_block(dim: int, idx: np.ndarray, H: float, shift=None):
    mask = idx[:, 0, 0] >= 0
    live = idx[mask]
    if len(live) == 0:
        return None
    s = _shift(idx, shift)[mask]
    return solver.half_space(dim, live[..., 2].ravel(), H - s[..., 2].ravel(), ">=")


def collision_block(dim: int, idx: np.ndarray, anchor: np.ndarray, d_min: float, shift=None):
    """Separation rows linearized at ``anchor`` (shape L x N x 3).

    Uses ||q_a - q_b||^2 >= 2 D.(q_a - q_b) - ||D||^2 with D the anchor
    difference; positions of fixed UAVs are taken from ``anchor``.
    """
    L, N, _ = anchor.shape
    sh = _shift(idx, shift)
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for n in range(N):
        for a in range(L):
            for b in range(a + 1, L):
                va, vb = idx[a, n, 0] >= 0, idx[b, n, 0] >= 0
                if not (va or vb):
                    continue
                D = anchor[a, n] - anchor[b, n]
                bound = -d_min ** 2 - float(D @ D)
                if va:
                    rows += [r] * 3; cols += list(idx[a, n]); vals += list(-2.0 * D)
                    bound += 2.0 * float(D @ sh[a, n])
                else:
                    bound += 2.0 * float(D @ anchor[a, n])
                if vb:
                    rows += [r] * 3; cols += list(idx[b, n]); vals += list(2.0 * D)
                    bound -= 2.0 * float(D @ sh[b, n])
                else:
                    bound -= 2.0 * float(D @ anchor[b, n])
                rhs.append(bound)
                r += 1
    if r == 0:
        return None
    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, dim))
    return solver.affine(dim, A, np.array(rhs))


def endpoint_pins(idx: np.ndarray, scenario: Scenario, shift=None):
    """Indices and values pinning the first and last slot to the scenario endpoints."""
    if not scenario.has_endpoints:
        return np.zeros(0, np.int64), np.zeros(0)
    live = idx[:, 0, 0] >= 0
    s = _shift(idx, shift)
    fi = [idx[live, 0].ravel(), idx[live, -1].ravel()]
    fv = [(scenario.initial_positions[live] - s[live, 0]).ravel(),
          (scenario.final_positions[live] - s[live, -1]).ravel()]
    return np.concatenate(fi), np.concatenate(fv)


def trajectory_blocks(dim: int, idx: np.ndarray, anchor: np.ndarray, scenario: Scenario,
                      speed: bool = True, shift=None) -> list:
    blocks = [altitude_block(dim, idx, scenario.H, shift),
              collision_block(dim, idx, anchor, scenario.d_min, shift)]
    if speed:
        blocks.append(speed_block(dim, idx, scenario.v_step, shift))
    return [b for b in blocks if b is not None]
