"""Deterministic plant: low-level servo tracking, penalty contact, wrist sensing.

The simulated robot is a stiff industrial arm: joints track their commands
through simple servo laws (first order for the velocity interface, second
order for the position interface) and contact forces do not push the joints
around.  Contact is a probe-tip sphere against planar faces with a
Kelvin-Voigt normal law and regularized Coulomb friction.

contact_wrench returns the reaction on the probe (environment pushing the
tip out of the surface).  The harness negates it before feeding the
controller, whose measured channel is tool-applies-to-environment (see
controller module docstring).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .controller import JointCommand, Mode, Wrench
from .errors import ContractError, SimulationFault
from .kinematics import KinematicChain, Pose, chain_frames, tip_twist

PROBE_TIP_RADIUS = 0.005  # m, sphere at the probe end

FRICTION_EPS = 1e-4  # m/s, Coulomb regularization knee


@dataclass(frozen=True)
class ServoModel:
    """Per-joint tracking dynamics of the robot's low-level controller.

    Velocity interface: first-order pole at velocity_bandwidth (rad/s).
    Position interface: qddot = position_stiffness * (cmd - q)
                                - position_damping * qdot,
    overdamped by default so the two interfaces are deliberately not
    dynamically equivalent.
    """

    mode: Mode
    velocity_bandwidth: float = 80.0  # rad/s
    position_stiffness: float = 400.0  # 1/s^2  (natural frequency 20 rad/s)
    position_damping: float = 48.0  # 1/s    (damping ratio 1.2)
    velocity_limit: float = 2.0  # rad/s
    acceleration_limit: float = 20.0  # rad/s^2

    def __post_init__(self):
        if self.velocity_bandwidth <= 0.0 or self.position_stiffness <= 0.0:
            raise ContractError("servo bandwidth/stiffness must be > 0")
        if self.velocity_limit <= 0.0 or self.acceleration_limit <= 0.0:
            raise ContractError("servo limits must be > 0")
        if self.position_damping ** 2 < 4.0 * self.position_stiffness:
            raise ContractError("position servo must be critically damped or overdamped")


@dataclass(frozen=True)
class ContactSurface:
    """A bounded rectangular face: plane point/normal plus in-plane axes and half-extents."""

    label: str
    plane_point: np.ndarray
    plane_normal: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    half_u: float
    half_v: float
    stiffness_env: float = 1e5  # N/m
    damping_env: float = 200.0  # N s/m
    friction_mu: float = 0.3
    smoothing_depth: float = 2e-4  # m, ramp on the damping term near first touch

    def __post_init__(self):
        for name in ("plane_point", "plane_normal", "u_axis", "v_axis"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.isfinite(v).all():
                raise ContractError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)
        for name in ("plane_normal", "u_axis", "v_axis"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-9:
                raise ContractError(f"{name} must be unit-norm")
        if abs(self.plane_normal @ self.u_axis) > 1e-9 or abs(self.plane_normal @ self.v_axis) > 1e-9:
            raise ContractError("u_axis/v_axis must lie in the plane")
        if self.stiffness_env <= 0.0:
            raise ContractError("stiffness_env must be > 0")
        if self.friction_mu < 0.0 or self.damping_env < 0.0:
            raise ContractError("friction_mu and damping_env must be >= 0")
        if self.half_u <= 0.0 or self.half_v <= 0.0:
            raise ContractError("half extents must be > 0")

    def corners(self) -> np.ndarray:
        offs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
        return (
            self.plane_point
            + offs[:, :1] * self.half_u * self.u_axis
            + offs[:, 1:] * self.half_v * self.v_axis
        )


@dataclass(frozen=True)
class Artefact:
    """Connected sequence of faces forming a test profile."""

    surfaces: tuple

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if not self.surfaces:
            raise ContractError("artefact needs at least one surface")
        for a, b in zip(self.surfaces, self.surfaces[1:]):
            if _shared_corner_count(a, b) < 2:
                raise ContractError(
                    f"surfaces {a.label!r} and {b.label!r} do not share an edge"
                )


def _shared_corner_count(a: ContactSurface, b: ContactSurface, tol=1e-6) -> int:
    ca, cb = a.corners(), b.corners()
    d = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=2)
    return int((d.min(axis=1) < tol).sum())


@dataclass(frozen=True)
class PlantState:
    q: np.ndarray
    qdot: np.ndarray
    tip_pose: Pose
    contact_wrench_true: Wrench
    time: float

    @classmethod
    def at_rest(cls, chain: KinematicChain, q0) -> "PlantState":
        q0 = np.asarray(q0, dtype=float)
        frames = chain_frames(chain, q0)
        return cls(q0.copy(), np.zeros_like(q0), frames.tip_pose(), Wrench.zero(), 0.0)


@dataclass
class SensorModel:
    """Wrist force/torque sensing: bias plus seeded Gaussian noise, zero-order held.

    The noise value for sample k is a pure function of (seed, k), so streams
    are reproducible regardless of call pattern.  noise_std and bias are
    per-axis 6-vectors.
    """

    noise_std: np.ndarray = field(default_factory=lambda: np.zeros(6))
    bias: np.ndarray = field(default_factory=lambda: np.zeros(6))
    sample_rate: float = 500.0  # Hz
    seed: int = 0
    _held_index: int = field(default=-1, repr=False, compare=False)
    _held_value: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        std = np.asarray(self.noise_std, dtype=float)
        if std.shape == ():
            std = np.full(6, float(std))
        if std.shape != (6,) or (std < 0.0).any():
            raise ContractError("noise_std must be a non-negative 6-vector (or scalar)")
        self.noise_std = std
        bias = np.asarray(self.bias, dtype=float)
        if bias.shape != (6,):
            raise ContractError("bias must be a 6-vector")
        self.bias = bias
        if self.sample_rate <= 0.0:
            raise ContractError("sample_rate must be > 0")

    @property
    def is_ideal(self) -> bool:
        return not self.noise_std.any() and not self.bias.any()

    def reset(self):
        self._held_index = -1
        self._held_value = None


def read_sensor(true_wrench: Wrench, sensor: SensorModel, time: float) -> Wrench:
    """Measured wrench: truth plus bias plus held noise sample."""
    if sensor.is_ideal:
        return true_wrench
    k = int(np.floor(time * sensor.sample_rate + 1e-9))
    if k != sensor._held_index:
        rng = np.random.default_rng([sensor.seed, k])
        noise = rng.standard_normal(6) * sensor.noise_std
        sensor._held_index = k
        sensor._held_value = true_wrench.as_array() + sensor.bias + noise
    return Wrench.from_array(sensor._held_value)


def contact_wrench(tip_pose: Pose, tip_velocity, env: Artefact | None, tip_radius: float = PROBE_TIP_RADIUS) -> Wrench:
    """Reaction wrench on the probe-tip sphere, expressed at the tip frame origin.

    Per face with penetration depth d > 0 under the sphere: normal force
    stiffness_env * d plus damping_env * penetration rate (approach only,
    ramped in over smoothing_depth so force is continuous at first touch),
    and regularized Coulomb friction opposing the contact-point slip.
    """
    if env is None:
        return Wrench.zero()
    tv = np.asarray(tip_velocity, dtype=float)
    if tv.shape != (6,):
        raise ContractError("tip_velocity must be a 6-vector twist")
    p = tip_pose.position
    v, w = tv[:3], tv[3:]
    force = np.zeros(3)
    torque = np.zeros(3)
    for s in env.surfaces:
        rel = p - s.plane_point
        dist = rel @ s.plane_normal
        pen = tip_radius - dist
        if pen <= 0.0:
            continue
        if abs(rel @ s.u_axis) > s.half_u or abs(rel @ s.v_axis) > s.half_v:
            continue
        arm = -tip_radius * s.plane_normal  # sphere center to contact point
        v_cp = v + np.cross(w, arm)
        pen_rate = -(v_cp @ s.plane_normal)
        ramp = min(1.0, pen / s.smoothing_depth) if s.smoothing_depth > 0.0 else 1.0
        fn_mag = s.stiffness_env * pen + s.damping_env * max(0.0, pen_rate) * ramp
        f = fn_mag * s.plane_normal
        if s.friction_mu > 0.0:
            v_t = v_cp + pen_rate * s.plane_normal  # tangential slip of the contact point
            f = f - s.friction_mu * fn_mag * v_t / max(np.linalg.norm(v_t), FRICTION_EPS)
        force += f
        torque += np.cross(arm, f)
    return Wrench(force, torque)


def step_plant(
    state: PlantState,
    cmd: JointCommand,
    servo: ServoModel,
    env: Artefact | None,
    chain: KinematicChain,
    dt: float,
    substeps: int = 4,
    tip_radius: float = PROBE_TIP_RADIUS,
) -> PlantState:
    """Advance the plant one controller period; contact is re-evaluated after motion."""
    if not dt > 0.0:
        raise ContractError("dt must be > 0")
    if cmd.mode is not servo.mode:
        raise ContractError(f"command mode {cmd.mode} does not match servo mode {servo.mode}")
    if not np.isfinite(cmd.values).all():
        raise SimulationFault(
            f"non-finite joint command at t={state.time:.4f}s: {cmd.values!r}", time=state.time
        )
    h = dt / substeps
    q = state.q.copy()
    qd = state.qdot.copy()
    a_lim = servo.acceleration_limit
    v_lim = servo.velocity_limit
    if servo.mode is Mode.VELOCITY:
        for _ in range(substeps):
            qdd = np.clip(servo.velocity_bandwidth * (cmd.values - qd), -a_lim, a_lim)
            qd = np.clip(qd + qdd * h, -v_lim, v_lim)
            q = q + qd * h
    else:
        for _ in range(substeps):
            qdd = np.clip(
                servo.position_stiffness * (cmd.values - q) - servo.position_damping * qd,
                -a_lim,
                a_lim,
            )
            qd = np.clip(qd + qdd * h, -v_lim, v_lim)
            q = q + qd * h
    frames = chain_frames(chain, q)
    pose = frames.tip_pose()
    twist = tip_twist(frames, qd)
    wrench = contact_wrench(pose, twist, env, tip_radius)
    return PlantState(q, qd, pose, wrench, state.time + dt)


# ---------------------------------------------------------------------------
# artefact builders


def flat_face(
    center,
    normal,
    half_u: float = 0.2,
    half_v: float = 0.2,
    label: str = "face",
    **contact_params,
) -> ContactSurface:
    """Single rectangular face with an arbitrary outward normal."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    # pick any in-plane u axis
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(ref, n)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return ContactSurface(label, np.asarray(center, dtype=float), n, u, v, half_u, half_v, **contact_params)


def angled_profile(
    start,
    travel_dir,
    rise_angle_deg: float,
    fall_angle_deg: float,
    height: float,
    flat_length: float,
    width: float = 0.2,
    lead_in: float = 0.0,
    lead_out: float = 0.0,
    **contact_params,
) -> Artefact:
    """Profile of faces along a travel direction: optional flat lead-in, a rising
    face, a flat top, a falling face, and an optional flat lead-out.

    start is the base corner where the rising face begins; travel_dir is the
    horizontal traverse direction.  Angles are measured from the travel
    direction; the falling angle is given as a positive number.
    """
    d = np.asarray(travel_dir, dtype=float)
    d = d / np.linalg.norm(d)
    up = np.array([0.0, 0.0, 1.0])
    if abs(d @ up) > 1e-9:
        raise ContractError("travel_dir must be horizontal")
    side = np.cross(up, d)
    start = np.asarray(start, dtype=float)

    def face(p0, p1, label):
        mid = 0.5 * (p0 + p1)
        tangent = p1 - p0
        length = np.linalg.norm(tangent)
        tangent = tangent / length
        normal = np.cross(tangent, side)
        if normal @ up < 0.0:
            normal = -normal
        return ContactSurface(
            label, mid, normal / np.linalg.norm(normal), tangent, side, length / 2.0, width / 2.0,
            **contact_params,
        )

    rise = np.deg2rad(rise_angle_deg)
    fall = np.deg2rad(fall_angle_deg)
    if rise <= 0.0 or fall <= 0.0 or height <= 0.0:
        # degenerate profile: one flat face spanning the whole traverse
        total = lead_in + flat_length + lead_out
        mid = start + (0.5 * total - lead_in) * d
        return Artefact((face(mid - 0.5 * total * d, mid + 0.5 * total * d, "flat"),))
    run_up = height / np.tan(rise)
    run_down = height / np.tan(fall)

    faces = []
    a = start
    if lead_in > 0.0:
        faces.append(face(start - lead_in * d, start, "lead_in"))
    b = a + run_up * d + height * up
    faces.append(face(a, b, "rise"))
    c = b + flat_length * d
    faces.append(face(b, c, "flat_top"))
    e = c + run_down * d - height * up
    faces.append(face(c, e, "fall"))
    if lead_out > 0.0:
        faces.append(face(e, e + lead_out * d, "lead_out"))
    return Artefact(tuple(faces))
