"""Virtual rigid-body model: joint-space inertia, simplified forward mapping, integration.

The virtual model shares the chain geometry with the plant but carries its own
mass/inertia assignment: one value pair for the last link and another for the
remaining links.  The forward mapping deliberately drops gravity, Coriolis and
joint-torque terms; each control cycle treats the model as accelerating from
rest, so only H(q)^-1 J^T f is ever computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve

from .errors import ContractError, SingularConfigurationError
from .kinematics import (
    ChainFrames,
    KinematicChain,
    chain_frames,
    jacobian_from_frames,
)

CONDITION_LIMIT = 1e12


def _default_last_inertia():
    return np.eye(3)


def _default_other_inertia():
    return 1e-6 * np.eye(3)


@dataclass(frozen=True)
class VirtualModel:
    """Chain plus the virtual mass/inertia assignment used for control."""

    chain: KinematicChain
    last_link_mass: float = 1.0
    other_link_mass: float = 0.01
    last_link_inertia: np.ndarray = field(default_factory=_default_last_inertia)
    other_link_inertia: np.ndarray = field(default_factory=_default_other_inertia)

    def __post_init__(self):
        if self.last_link_mass <= 0.0 or self.other_link_mass < 0.0:
            raise ContractError("virtual masses must be positive (last link) / non-negative")
        for name in ("last_link_inertia", "other_link_inertia"):
            inertia = np.asarray(getattr(self, name), dtype=float)
            if inertia.shape != (3, 3):
                raise ContractError(f"{name} must be 3x3")
            object.__setattr__(self, name, inertia)

    @cached_property
    def effective_chain(self) -> KinematicChain:
        n = self.chain.joint_count
        masses = [self.other_link_mass] * (n - 1) + [self.last_link_mass]
        inertias = [self.other_link_inertia] * (n - 1) + [self.last_link_inertia]
        return self.chain.with_inertia(masses, inertias)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _skew_batch(v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    out = np.zeros((n, 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def _inertia_from_frames(chain: KinematicChain, frames: ChainFrames) -> np.ndarray:
    """Composite-rigid-body inertia using spatial inertias about the base origin.

    Twist convention [w; v_origin]: the spatial inertia of a body of mass m,
    world COM c and world rotational inertia Ic (about the COM) is
        [[Ic + m Cx Cx^T, m Cx], [m Cx^T, m I3]],  Cx = skew(c).
    Summing these over links j..n gives the composite directly (the parallel
    axis shift is built into the common reference point), and
        H[i, j] = S_i^T I_comp[j] S_j,  S_i = [a_i; o_i x a_i]   (i <= j).
    """
    n = chain.joint_count
    R = frames.rotations
    Iw = np.einsum("nij,njk,nlk->nil", R, chain._inertias, R)
    m = chain._masses
    Cx = _skew_batch(frames.coms)
    mCx = m[:, None, None] * Cx
    blocks = np.zeros((n, 6, 6))
    blocks[:, :3, :3] = Iw + np.einsum("nij,nkj->nik", mCx, Cx)
    blocks[:, :3, 3:] = mCx
    blocks[:, 3:, :3] = mCx.transpose(0, 2, 1)
    idx = np.arange(3)
    blocks[:, 3 + idx, 3 + idx] = m[:, None]
    composite = np.cumsum(blocks[::-1], axis=0)[::-1]  # composite[j] = sum over j..n-1

    S = np.empty((6, n))
    S[:3] = frames.axes.T
    S[3:] = np.cross(frames.origins, frames.axes).T
    F = np.einsum("jab,bj->aj", composite, S)
    M = S.T @ F  # valid on the upper triangle (i <= j) for a serial chain
    H = np.triu(M)
    H = H + H.T - np.diag(np.diag(H))
    return H


def joint_space_inertia(model: VirtualModel, q) -> np.ndarray:
    """Symmetric positive-definite joint-space inertia H(q) of the virtual model."""
    frames = chain_frames(model.effective_chain, q)
    return _inertia_from_frames(model.effective_chain, frames)


def _solve_accel(H: np.ndarray, tau: np.ndarray, q: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError(q=np.array(q), condition=np.inf) from exc
    d = np.diag(L)
    # cond2(H) = cond2(L)^2 and max/min of diag(L) bounds cond2(L) from below
    cond_est = (d.max() / d.min()) ** 2
    if cond_est > CONDITION_LIMIT:
        raise SingularConfigurationError(q=np.array(q), condition=float(cond_est))
    return cho_solve((L, True), tau, check_finite=False)


def accel_from_frames(model: VirtualModel, frames: ChainFrames, wrench6: np.ndarray, q) -> np.ndarray:
    """H^-1 J^T f reusing an existing kinematic pass (hot path of the control loop)."""
    J = jacobian_from_frames(frames)
    H = _inertia_from_frames(model.effective_chain, frames)
    return _solve_accel(H, J.T @ wrench6, q)


def simplified_forward_dynamics(model: VirtualModel, q, f) -> np.ndarray:
    """Joint accelerations H(q)^-1 J^T f; no gravity, Coriolis or joint torques.

    f is a Wrench or a plain 6-vector [fx, fy, fz, tx, ty, tz].
    """
    f6 = f.as_array() if hasattr(f, "as_array") else np.asarray(f, dtype=float)
    if f6.shape != (6,):
        raise ContractError("wrench must be a 6-vector")
    frames = chain_frames(model.effective_chain, q)
    return accel_from_frames(model, frames, f6, q)


def integrate_step(q, qdot, qddot, dt: float):
    """One semi-implicit Euler step: velocity first, then position with the new velocity."""
    if not dt > 0.0:
        raise ContractError("dt must be > 0")
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)
    if not (np.isfinite(q).all() and np.isfinite(qdot).all() and np.isfinite(qddot).all()):
        raise ContractError("integrate_step inputs must be finite")
    qdot_next = qdot + qddot * dt
    q_next = q + qdot_next * dt
    return q_next, qdot_next
