"""Force-control metric calculators: pure functions over logged traces.

Conventions (all exposed as keyword arguments):
  * contact onset = first sample with |force| >= onset_threshold (0.5 N),
  * steady-state value = mean over the final steady_window fraction (25 %),
  * settling = force stays within band_fraction (5 %) of the steady value
    for at least dwell seconds,
  * steady-state error = RMSE against the target over the steady window.
"""

from __future__ import annotations

import numpy as np

from .errors import SettlingError, TraceError

ONSET_THRESHOLD = 0.5  # N
SETTLE_BAND = 0.05
SETTLE_DWELL = 1.0  # s
STEADY_WINDOW = 0.25  # final fraction of the trace


def _check_trace(time_s, force):
    t = np.asarray(time_s, dtype=float)
    f = np.asarray(force, dtype=float)
    if t.ndim != 1 or t.shape != f.shape or t.size == 0:
        raise TraceError("time and force must be matching non-empty 1-d arrays")
    return t, f


def contact_onset_index(time_s, force, onset_threshold: float = ONSET_THRESHOLD) -> int:
    """Index of the first sample with |force| exceeding the onset threshold."""
    t, f = _check_trace(time_s, force)
    hits = np.nonzero(np.abs(f) >= onset_threshold)[0]
    if hits.size == 0:
        raise SettlingError(
            f"no contact onset: |force| never reached {onset_threshold} N",
            last_value=float(f[-1]),
        )
    return int(hits[0])


def steady_state_value(time_s, force, steady_window: float = STEADY_WINDOW) -> float:
    """Mean force over the final steady_window fraction of the trace."""
    t, f = _check_trace(time_s, force)
    k = max(1, int(round(len(f) * steady_window)))
    return float(f[-k:].mean())


def compute_overshoot(
    time_s,
    force,
    f_target: float | None = None,
    onset_threshold: float = ONSET_THRESHOLD,
    steady_window: float = STEADY_WINDOW,
) -> float:
    """Peak force between contact onset and the steady window, above the steady
    value; floored at zero.  The steady level is taken from the trace itself
    (f_target is accepted for interface symmetry with compute_sse)."""
    t, f = _check_trace(time_s, force)
    i0 = contact_onset_index(t, f, onset_threshold)
    k = max(1, int(round(len(f) * steady_window)))
    i1 = len(f) - k
    steady = float(f[-k:].mean())
    if i1 <= i0:
        return 0.0
    peak = float(f[i0:i1].max())
    return max(0.0, peak - steady)


def compute_settling_time(
    time_s,
    force,
    f_target: float | None = None,
    band_fraction: float = SETTLE_BAND,
    onset_threshold: float = ONSET_THRESHOLD,
    dwell: float = SETTLE_DWELL,
    steady_window: float = STEADY_WINDOW,
) -> float:
    """Time from contact onset until the force stays within band_fraction of its
    final steady value for at least `dwell` seconds (and through trace end)."""
    t, f = _check_trace(time_s, force)
    i0 = contact_onset_index(t, f, onset_threshold)
    steady = steady_state_value(t, f, steady_window)
    band = band_fraction * abs(steady)
    out = np.abs(f - steady) > band
    out_idx = np.nonzero(out)[0]
    if out_idx.size == 0:
        return 0.0
    i_settle = int(out_idx[-1]) + 1
    if i_settle >= len(f):
        raise SettlingError("force never entered the settling band", last_value=float(f[-1]))
    if t[-1] - t[i_settle] < dwell:
        raise SettlingError(
            f"force entered the band only {t[-1] - t[i_settle]:.3f}s before trace end "
            f"(< dwell {dwell}s)",
            last_value=float(f[-1]),
        )
    return max(0.0, float(t[i_settle] - t[i0]))


def compute_sse(
    time_s,
    force,
    f_target: float,
    band_fraction: float = SETTLE_BAND,
    onset_threshold: float = ONSET_THRESHOLD,
    dwell: float = SETTLE_DWELL,
    steady_window: float = STEADY_WINDOW,
) -> float:
    """RMSE between the target force and the measured force over the steady window."""
    t, f = _check_trace(time_s, force)
    # require that the trace actually settles before reading the window
    compute_settling_time(t, f, f_target, band_fraction, onset_threshold, dwell, steady_window)
    k = max(1, int(round(len(f) * steady_window)))
    return rmse(f[-k:], f_target)


def rmse(values, target) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean((v - target) ** 2)))


def cumulative_work(trace) -> float:
    """Cumulative |work| done by the external force channel over tip displacement.

    Sum of |F_mid . dx| with the force taken trapezoidally (midpoint of
    consecutive samples) and dx the tip displacement increment; uses the true
    external-force channel of the trace.
    """
    F = np.asarray(trace.wrench_true, dtype=float)[:, :3]
    X = np.asarray(trace.tip_position, dtype=float)
    if F.shape[0] != X.shape[0] or F.shape[0] == 0:
        raise TraceError("trace is empty or channels disagree")
    if F.shape[0] == 1:
        return 0.0
    F_mid = 0.5 * (F[1:] + F[:-1])
    dX = X[1:] - X[:-1]
    return float(np.abs(np.einsum("ij,ij->i", F_mid, dX)).sum())


def max_force_rate(time_s, force) -> float:
    """Largest |dF/dt| over the trace; the smoothness figure used in reports."""
    t, f = _check_trace(time_s, force)
    if len(f) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(f) / np.diff(t))))
