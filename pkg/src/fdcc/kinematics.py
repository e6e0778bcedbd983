"""Serial-chain kinematics: links, forward kinematics, and the geometric Jacobian.

A chain is an ordered list of links.  Each link contributes a fixed rigid
transform from its parent followed by a revolute joint about a unit axis
expressed in the post-transform frame.  The chain ends with a fixed tip
transform (flange plus probe).  All world-frame quantities are expressed in
the base frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

TIP_FRAME_DOC = "tip pose is the probe-tip frame expressed in the base frame"


# ---------------------------------------------------------------------------
# small rotation helpers


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix for fixed-axis roll/pitch/yaw (x, then y, then z)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation about a unit axis (Rodrigues); fast path for the common z axis."""
    c, s = math.cos(angle), math.sin(angle)
    ax, ay, az = axis
    if ax == 0.0 and ay == 0.0 and az == 1.0:
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    t = 1.0 - c
    return np.array(
        [
            [c + ax * ax * t, ax * ay * t - az * s, ax * az * t + ay * s],
            [ay * ax * t + az * s, c + ay * ay * t, ay * az * t - ax * s],
            [az * ax * t - ay * s, az * ay * t + ax * s, c + az * az * t],
        ]
    )


def quat_from_matrix(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix, canonical sign w >= 0."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    q /= np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector of a rotation matrix (angle in [0, pi])."""
    cos_angle = max(-1.0, min(1.0, 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)))
    angle = math.acos(cos_angle)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = 2.0 * math.sin(angle)
    if angle < 1e-8:
        return 0.5 * w  # first-order: R ~ I + [w]x
    if math.pi - angle < 1e-6:
        # near pi the off-diagonal difference vanishes; recover axis from diagonal
        axis = np.sqrt(np.maximum(0.0, (np.diag(R) + 1.0) * 0.5))
        # fix signs using the largest component
        k = int(np.argmax(axis))
        if axis[k] > 0.0:
            if k == 0:
                axis[1] = math.copysign(axis[1], R[0, 1] + R[1, 0])
                axis[2] = math.copysign(axis[2], R[0, 2] + R[2, 0])
            elif k == 1:
                axis[0] = math.copysign(axis[0], R[0, 1] + R[1, 0])
                axis[2] = math.copysign(axis[2], R[1, 2] + R[2, 1])
            else:
                axis[0] = math.copysign(axis[0], R[0, 2] + R[2, 0])
                axis[1] = math.copysign(axis[1], R[1, 2] + R[2, 1])
        n = np.linalg.norm(axis)
        if n > 0.0:
            axis /= n
        return angle * axis
    return (angle / s) * w


def _as_vector(v, size, name):
    a = np.asarray(v, dtype=float)
    if a.shape != (size,):
        raise ContractError(f"{name} must have shape ({size},), got {a.shape}")
    if not np.isfinite(a).all():
        raise ContractError(f"{name} must be finite")
    return a


# ---------------------------------------------------------------------------
# model types


@dataclass(frozen=True)
class Transform:
    """Rigid transform: rotation matrix plus translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def from_xyz_rpy(cls, xyz, rpy) -> "Transform":
        return cls(rpy_matrix(*rpy), _as_vector(xyz, 3, "xyz"))

    @classmethod
    def identity(cls) -> "Transform":
        return cls()


@dataclass(frozen=True)
class Link:
    """One rigid body: fixed offset from the parent, then a revolute joint."""

    parent_offset: Transform
    joint_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    mass: float = 0.0
    inertia_tensor: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        axis = _as_vector(self.joint_axis, 3, "joint_axis")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ContractError("joint_axis must be unit-norm")
        object.__setattr__(self, "joint_axis", axis)
        object.__setattr__(self, "com_offset", _as_vector(self.com_offset, 3, "com_offset"))
        if self.mass < 0.0:
            raise ContractError("mass must be >= 0")
        inertia = np.asarray(self.inertia_tensor, dtype=float)
        if inertia.shape != (3, 3):
            raise ContractError("inertia_tensor must be 3x3")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ContractError("inertia_tensor must be symmetric")
        if np.linalg.eigvalsh(inertia)[0] < -1e-12:
            raise ContractError("inertia_tensor must be positive semi-definite")
        object.__setattr__(self, "inertia_tensor", inertia)


@dataclass(frozen=True)
class KinematicChain:
    """Ordered links plus the fixed probe-tip transform carried by the last link."""

    links: tuple
    tip_offset: Transform = field(default_factory=Transform.identity)
    name: str = "chain"

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        if len(self.links) < 1:
            raise ContractError("chain needs at least one link")
        reach = sum(np.linalg.norm(l.parent_offset.translation) for l in self.links)
        reach += np.linalg.norm(self.tip_offset.translation)
        if reach <= 0.0:
            raise ContractError("chain must have positive total length")
        # packed constants for the kinematic/dynamic hot paths
        n = len(self.links)
        object.__setattr__(self, "_off_R", np.stack([l.parent_offset.rotation for l in self.links]))
        object.__setattr__(self, "_off_t", np.stack([l.parent_offset.translation for l in self.links]))
        object.__setattr__(self, "_axes_local", np.stack([l.joint_axis for l in self.links]))
        object.__setattr__(self, "_coms_local", np.stack([l.com_offset for l in self.links]))
        object.__setattr__(self, "_masses", np.array([l.mass for l in self.links]))
        object.__setattr__(self, "_inertias", np.stack([l.inertia_tensor for l in self.links]))

    @property
    def joint_count(self) -> int:
        return len(self.links)

    def with_inertia(self, masses, inertias) -> "KinematicChain":
        """Copy of the chain with per-link mass and COM inertia replaced."""
        links = tuple(
            Link(l.parent_offset, l.joint_axis, m, inertia, l.com_offset)
            for l, m, inertia in zip(self.links, masses, inertias)
        )
        return KinematicChain(links, self.tip_offset, self.name)


@dataclass(frozen=True)
class Pose:
    """Position plus unit quaternion (w, x, y, z)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vector(self.position, 3, "position"))
        q = _as_vector(self.orientation, 4, "orientation")
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ContractError("orientation quaternion must be unit-norm")
        object.__setattr__(self, "orientation", q)

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)


@dataclass(frozen=True)
class JointState:
    """Joint positions and velocities."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        qd = np.asarray(self.qdot, dtype=float)
        if q.shape != qd.shape or q.ndim != 1:
            raise ContractError("q and qdot must be 1-d with matching length")
        if not (np.isfinite(q).all() and np.isfinite(qd).all()):
            raise ContractError("joint state must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qd)


# ---------------------------------------------------------------------------
# kinematic passes


class ChainFrames:
    """World-frame quantities from one kinematic pass (see chain_frames)."""

    __slots__ = ("origins", "axes", "rotations", "coms", "tip_position", "tip_rotation")

    def __init__(self, origins, axes, rotations, coms, tip_position, tip_rotation):
        self.origins = origins
        self.axes = axes
        self.rotations = rotations
        self.coms = coms
        self.tip_position = tip_position
        self.tip_rotation = tip_rotation

    def tip_pose(self) -> Pose:
        return Pose(self.tip_position, quat_from_matrix(self.tip_rotation))


def _check_q(chain: KinematicChain, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.joint_count,):
        raise ContractError(
            f"q must have shape ({chain.joint_count},) for this chain, got {q.shape}"
        )
    if not np.isfinite(q).all():
        raise ContractError("q must be finite")
    return q


def _joint_rotations(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """All joint rotation matrices at once (vectorized Rodrigues)."""
    c = np.cos(q)
    s = np.sin(q)
    a = chain._axes_local
    t = 1.0 - c
    ax, ay, az = a[:, 0], a[:, 1], a[:, 2]
    Rj = np.empty((len(q), 3, 3))
    Rj[:, 0, 0] = c + ax * ax * t
    Rj[:, 0, 1] = ax * ay * t - az * s
    Rj[:, 0, 2] = ax * az * t + ay * s
    Rj[:, 1, 0] = ay * ax * t + az * s
    Rj[:, 1, 1] = c + ay * ay * t
    Rj[:, 1, 2] = ay * az * t - ax * s
    Rj[:, 2, 0] = az * ax * t - ay * s
    Rj[:, 2, 1] = az * ay * t + ax * s
    Rj[:, 2, 2] = c + az * az * t
    return Rj


def chain_frames(chain: KinematicChain, q) -> ChainFrames:
    """One forward pass: joint origins, world joint axes, link rotations, link COMs, tip."""
    q = _check_q(chain, q)
    n = chain.joint_count
    origins = np.empty((n, 3))
    axes = np.empty((n, 3))
    rotations = np.empty((n, 3, 3))
    Rj = _joint_rotations(chain, q)
    off_R = chain._off_R
    off_t = chain._off_t
    ax_local = chain._axes_local
    R = np.eye(3)
    p = np.zeros(3)
    for i in range(n):
        p = p + R @ off_t[i]
        R = R @ off_R[i]
        origins[i] = p
        axes[i] = R @ ax_local[i]
        R = R @ Rj[i]
        rotations[i] = R
    coms = origins + np.einsum("nij,nj->ni", rotations, chain._coms_local)
    tip_p = p + R @ chain.tip_offset.translation
    tip_R = R @ chain.tip_offset.rotation
    return ChainFrames(origins, axes, rotations, coms, tip_p, tip_R)


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """Pose of the probe-tip frame in the base frame."""
    return chain_frames(chain, q).tip_pose()


def geometric_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """6 x n Jacobian mapping qdot to the tip twist [v; w] in base coordinates."""
    frames = chain_frames(chain, q)
    return jacobian_from_frames(frames)


def jacobian_from_frames(frames: ChainFrames) -> np.ndarray:
    J = np.empty((6, frames.axes.shape[0]))
    J[:3] = np.cross(frames.axes, frames.tip_position - frames.origins).T
    J[3:] = frames.axes.T
    return J


def tip_twist(frames: ChainFrames, qdot: np.ndarray) -> np.ndarray:
    """Tip twist [v; w] for a joint velocity vector, reusing a kinematic pass."""
    lin = np.cross(frames.axes, frames.tip_position - frames.origins)
    out = np.empty(6)
    out[:3] = qdot @ lin
    out[3:] = qdot @ frames.axes
    return out


def forward_kinematics_batch(chain: KinematicChain, Q) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized tip poses for Q of shape (N, n): returns (positions, quaternions)."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != chain.joint_count:
        raise ContractError(f"Q must have shape (N, {chain.joint_count})")
    N = Q.shape[0]
    R = np.broadcast_to(np.eye(3), (N, 3, 3)).copy()
    p = np.zeros((N, 3))
    for i, link in enumerate(chain.links):
        off = link.parent_offset
        p += R @ off.translation
        R = R @ off.rotation
        c = np.cos(Q[:, i])
        s = np.sin(Q[:, i])
        ax, ay, az = link.joint_axis
        t = 1.0 - c
        Rj = np.empty((N, 3, 3))
        Rj[:, 0, 0] = c + ax * ax * t
        Rj[:, 0, 1] = ax * ay * t - az * s
        Rj[:, 0, 2] = ax * az * t + ay * s
        Rj[:, 1, 0] = ay * ax * t + az * s
        Rj[:, 1, 1] = c + ay * ay * t
        Rj[:, 1, 2] = ay * az * t - ax * s
        Rj[:, 2, 0] = az * ax * t - ay * s
        Rj[:, 2, 1] = az * ay * t + ax * s
        Rj[:, 2, 2] = c + az * az * t
        R = R @ Rj
    p += R @ chain.tip_offset.translation
    R = R @ chain.tip_offset.rotation
    return p, _quat_from_matrix_batch(R)


def _quat_from_matrix_batch(R: np.ndarray) -> np.ndarray:
    """Vectorized quaternion extraction, canonical sign w >= 0."""
    m00, m11, m22 = R[:, 0, 0], R[:, 1, 1], R[:, 2, 2]
    # four squared-magnitude candidates, pick the largest for stability
    qw2 = np.maximum(0.0, 1.0 + m00 + m11 + m22)
    qx2 = np.maximum(0.0, 1.0 + m00 - m11 - m22)
    qy2 = np.maximum(0.0, 1.0 - m00 + m11 - m22)
    qz2 = np.maximum(0.0, 1.0 - m00 - m11 + m22)
    cands = np.stack([qw2, qx2, qy2, qz2], axis=1)
    best = np.argmax(cands, axis=1)
    q = np.empty((R.shape[0], 4))
    for k in range(4):
        idx = np.nonzero(best == k)[0]
        if idx.size == 0:
            continue
        r = R[idx]
        s = 2.0 * np.sqrt(cands[idx, k])
        if k == 0:
            q[idx, 0] = 0.25 * s
            q[idx, 1] = (r[:, 2, 1] - r[:, 1, 2]) / s
            q[idx, 2] = (r[:, 0, 2] - r[:, 2, 0]) / s
            q[idx, 3] = (r[:, 1, 0] - r[:, 0, 1]) / s
        elif k == 1:
            q[idx, 0] = (r[:, 2, 1] - r[:, 1, 2]) / s
            q[idx, 1] = 0.25 * s
            q[idx, 2] = (r[:, 0, 1] + r[:, 1, 0]) / s
            q[idx, 3] = (r[:, 0, 2] + r[:, 2, 0]) / s
        elif k == 2:
            q[idx, 0] = (r[:, 0, 2] - r[:, 2, 0]) / s
            q[idx, 1] = (r[:, 0, 1] + r[:, 1, 0]) / s
            q[idx, 2] = 0.25 * s
            q[idx, 3] = (r[:, 1, 2] + r[:, 2, 1]) / s
        else:
            q[idx, 0] = (r[:, 1, 0] - r[:, 0, 1]) / s
            q[idx, 1] = (r[:, 0, 2] + r[:, 2, 0]) / s
            q[idx, 2] = (r[:, 1, 2] + r[:, 2, 1]) / s
            q[idx, 3] = 0.25 * s
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0.0] *= -1.0
    return q
