"""Closed-loop compliance control around the virtual forward-dynamics model.

Per cycle: tip pose of the virtual model -> net wrench (force error plus
spring term, optional Cartesian damping) -> componentwise PD regulation ->
simplified forward dynamics -> semi-implicit integration.  Position sessions
emit the integrated joint positions, velocity sessions the joint velocities;
the internal virtual trajectory is identical either way.

Sign convention for measured wrenches: the force/torque channel carries the
wrench the end-effector applies to the environment (a wrist sensor reading
with the reaction sign flipped).  With that convention the pure force law
f_net = f_desired - f_measured drives the tip toward the commanded contact
force instead of away from it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import VirtualModel, accel_from_frames, integrate_step
from .errors import ContractError, SingularConfigurationError
from .kinematics import Pose, chain_frames, rotation_log, tip_twist

DEFAULT_DERIVATIVE_FILTER_HZ = 50.0


class Mode(enum.Enum):
    """Hardware command interface of a control session."""

    POSITION = "position"
    VELOCITY = "velocity"


@dataclass(frozen=True)
class Wrench:
    """Force (N) and torque (N m) as one 6-dof quantity."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        t = np.asarray(self.torque, dtype=float)
        if f.shape != (3,) or t.shape != (3,):
            raise ContractError("force and torque must be 3-vectors")
        if not (np.isfinite(f).all() and np.isfinite(t).all()):
            raise ContractError("wrench entries must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls()

    @classmethod
    def from_array(cls, a) -> "Wrench":
        a = np.asarray(a, dtype=float)
        if a.shape != (6,):
            raise ContractError("wrench array must have shape (6,)")
        return cls(a[:3], a[3:])

    def as_array(self) -> np.ndarray:
        out = np.empty(6)
        out[:3] = self.force
        out[3:] = self.torque
        return out

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.torque + other.torque)

    def __sub__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force - other.force, self.torque - other.torque)

    def __mul__(self, s: float) -> "Wrench":
        return Wrench(self.force * s, self.torque * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Wrench":
        return Wrench(-self.force, -self.torque)


def _gain_vector(v, size, name):
    a = np.asarray(v, dtype=float)
    if a.shape != (size,):
        raise ContractError(f"{name} must have shape ({size},)")
    if (a < 0.0).any():
        raise ContractError(f"{name} entries must be >= 0")
    return a


@dataclass(frozen=True)
class ComplianceParams:
    """Diagonal stiffness, regulator PD gains, and optional Cartesian damping.

    The regulator derivative gains are a separate field from the Cartesian
    damping: both act on 6-dof quantities but one multiplies the net-wrench
    derivative and the other the twist error.  compliance_frame selects the
    frame the diagonal gains act in ("base" or "tool").
    """

    stiffness_trans: np.ndarray  # N/m
    stiffness_rot: np.ndarray  # N m/rad
    p_gains: np.ndarray
    d_gains: np.ndarray
    cartesian_damping: np.ndarray = field(default_factory=lambda: np.zeros(6))
    derivative_filter_hz: float | None = None
    compliance_frame: str = "base"

    def __post_init__(self):
        object.__setattr__(self, "stiffness_trans", _gain_vector(self.stiffness_trans, 3, "stiffness_trans"))
        object.__setattr__(self, "stiffness_rot", _gain_vector(self.stiffness_rot, 3, "stiffness_rot"))
        object.__setattr__(self, "p_gains", _gain_vector(self.p_gains, 6, "p_gains"))
        object.__setattr__(self, "d_gains", _gain_vector(self.d_gains, 6, "d_gains"))
        object.__setattr__(self, "cartesian_damping", _gain_vector(self.cartesian_damping, 6, "cartesian_damping"))
        if self.compliance_frame not in ("base", "tool"):
            raise ContractError("compliance_frame must be 'base' or 'tool'")
        if self.derivative_filter_hz is not None and self.derivative_filter_hz <= 0.0:
            raise ContractError("derivative_filter_hz must be > 0 when set")

    @property
    def stiffness6(self) -> np.ndarray:
        return np.concatenate([self.stiffness_trans, self.stiffness_rot])


@dataclass(frozen=True)
class ControlTargets:
    """Set-points for one control cycle: pose anchor, twist, desired wrench."""

    pose: Pose
    twist: np.ndarray = field(default_factory=lambda: np.zeros(6))
    wrench: Wrench = field(default_factory=Wrench.zero)

    def __post_init__(self):
        t = np.asarray(self.twist, dtype=float)
        if t.shape != (6,) or not np.isfinite(t).all():
            raise ContractError("target twist must be a finite 6-vector")
        object.__setattr__(self, "twist", t)


@dataclass(frozen=True)
class JointCommand:
    mode: Mode
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class ControllerState:
    """State owned by one control session.

    virtual_q/virtual_qdot are the integrator outputs used for command
    generation; prev_net and filtered_derivative support the regulator's
    backward difference.  The last command is kept for the hold-on-error
    policy.
    """

    virtual_q: np.ndarray
    virtual_qdot: np.ndarray
    prev_net: np.ndarray | None
    filtered_derivative: np.ndarray | None
    cycle_count: int
    last_command: JointCommand

    @classmethod
    def start(cls, measured_q, mode: Mode) -> "ControllerState":
        """Initial state; the virtual configuration starts at the measured one."""
        q = np.asarray(measured_q, dtype=float)
        if mode is Mode.POSITION:
            cmd = JointCommand(mode, q.copy())
        else:
            cmd = JointCommand(mode, np.zeros_like(q))
        return cls(
            virtual_q=q.copy(),
            virtual_qdot=np.zeros_like(q),
            prev_net=None,
            filtered_derivative=None,
            cycle_count=0,
            last_command=cmd,
        )


def pose_error(target: Pose, actual: Pose) -> np.ndarray:
    """6-vector pose error: translation difference and axis-angle rotation error."""
    out = np.empty(6)
    out[:3] = target.position - actual.position
    out[3:] = rotation_log(target.rotation() @ actual.rotation().T)
    return out


def _net_force6(targets: ControlTargets, f_meas6, x: Pose, xdot6, params: ComplianceParams):
    err = pose_error(targets.pose, x)
    dv = targets.twist - xdot6
    df = targets.wrench.as_array() - f_meas6
    if params.compliance_frame == "tool":
        R = x.rotation()
        Rt = R.T
        local = np.empty(6)
        local[:3] = Rt @ df[:3] + params.stiffness_trans * (Rt @ err[:3])
        local[3:] = Rt @ df[3:] + params.stiffness_rot * (Rt @ err[3:])
        damp = params.cartesian_damping
        local[:3] += damp[:3] * (Rt @ dv[:3])
        local[3:] += damp[3:] * (Rt @ dv[3:])
        out = np.empty(6)
        out[:3] = R @ local[:3]
        out[3:] = R @ local[3:]
        return out
    out = df
    out[:3] += params.stiffness_trans * err[:3]
    out[3:] += params.stiffness_rot * err[3:]
    out += params.cartesian_damping * dv
    return out


def net_force(targets: ControlTargets, f_meas: Wrench, x: Pose, xdot, params: ComplianceParams) -> Wrench:
    """Net wrench f_d - f_meas + K * pose_error + D_cart * twist_error."""
    xdot6 = np.asarray(xdot, dtype=float)
    if xdot6.shape != (6,):
        raise ContractError("xdot must be a 6-vector")
    return Wrench.from_array(_net_force6(targets, f_meas.as_array(), x, xdot6, params))


def _regulate6(net6, prev6, deriv_prev, params: ComplianceParams, dt: float):
    """Componentwise PD on the net wrench; returns (command wrench, derivative state)."""
    raw = (net6 - prev6) / dt
    if params.derivative_filter_hz is not None and deriv_prev is not None:
        alpha = dt / (dt + 1.0 / (2.0 * math.pi * params.derivative_filter_hz))
        deriv = alpha * raw + (1.0 - alpha) * deriv_prev
    else:
        deriv = raw
    return params.p_gains * net6 + params.d_gains * deriv, deriv


def pd_regulate(f_n: Wrench, prev_f_n: Wrench, params: ComplianceParams, dt: float) -> Wrench:
    """Regulated command wrench P * f_n + D * (f_n - prev_f_n)/dt (backward difference)."""
    if not dt > 0.0:
        raise ContractError("dt must be > 0")
    out, _ = _regulate6(f_n.as_array(), prev_f_n.as_array(), None, params, dt)
    return Wrench.from_array(out)


def control_cycle(
    state: ControllerState,
    f_meas: Wrench,
    plant_q,
    targets: ControlTargets,
    params: ComplianceParams,
    model: VirtualModel,
    mode: Mode,
    dt: float,
) -> tuple[ControllerState, JointCommand]:
    """One control cycle; returns the updated state and the emitted command.

    On a singular virtual configuration the previous command is held and the
    virtual state is left untouched.
    """
    if not dt > 0.0:
        raise ContractError("dt must be > 0")
    plant_q = np.asarray(plant_q, dtype=float)
    if plant_q.shape != state.virtual_q.shape:
        raise ContractError("plant_q length does not match the control session")

    frames = chain_frames(model.chain, state.virtual_q)
    x = frames.tip_pose()
    xdot6 = tip_twist(frames, state.virtual_qdot)

    net6 = _net_force6(targets, f_meas.as_array(), x, xdot6, params)
    prev6 = net6 if state.prev_net is None else state.prev_net
    cmd6, deriv = _regulate6(net6, prev6, state.filtered_derivative, params, dt)

    try:
        qddot = accel_from_frames(model, frames, cmd6, state.virtual_q)
    except SingularConfigurationError:
        held = replace(state, cycle_count=state.cycle_count + 1)
        return held, state.last_command

    q_next, qdot_next = integrate_step(state.virtual_q, state.virtual_qdot, qddot, dt)
    values = q_next if mode is Mode.POSITION else qdot_next
    command = JointCommand(mode, values.copy())
    next_state = ControllerState(
        virtual_q=q_next,
        virtual_qdot=qdot_next,
        prev_net=net6,
        filtered_derivative=deriv,
        cycle_count=state.cycle_count + 1,
        last_command=command,
    )
    return next_state, command
