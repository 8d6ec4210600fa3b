"""Fit piecewise-constant linear models to sampled trajectory data.

Scalar subintervals use the exact two-endpoint solve (the construction used
to derive the worked benchmark coefficients); multivariate subintervals fall
back to least squares over all interior samples.  Records labeled negative
are excluded from fitting by default.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import LinearPiece, PiecewiseLinearModel, TimePartition, as_vector
from .errors import (
    CoverageError,
    SingularFitError,
    TrajectoryParseError,
)

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class TrajectoryRecord:
    """A labeled time series of states, controls, and optional derivatives."""

    id: str
    label: str
    t: np.ndarray          # (num_samples,)
    x: np.ndarray          # (num_samples, n)
    u: np.ndarray          # (num_samples, r)
    dx: np.ndarray = None  # (num_samples, n) or None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        if x.shape[0] != t.size:
            x = x.T
        if u.shape[0] != t.size:
            u = u.T
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)
        if self.dx is not None:
            dx = np.atleast_2d(np.asarray(self.dx, dtype=float))
            if dx.shape[0] != t.size:
                dx = dx.T
            object.__setattr__(self, "dx", dx)
        if self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"label must be positive/negative, got {self.label!r}")
        if t.size < 2:
            raise ValueError("a record needs at least two samples")
        if not np.all(np.diff(t) > 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def n(self):
        return self.x.shape[1]

    @property
    def r(self):
        return self.u.shape[1]

    @property
    def t_start(self):
        return float(self.t[0])

    @property
    def t_end(self):
        return float(self.t[-1])

    def interp_state(self, t):
        return np.array([np.interp(t, self.t, self.x[:, j]) for j in range(self.n)])

    def interp_derivative(self, t):
        if self.dx is None:
            raise ValueError("record has no derivative column; run estimate_derivatives first")
        return np.array([np.interp(t, self.t, self.dx[:, j]) for j in range(self.n)])

    def interp_control(self, t):
        return np.array([np.interp(t, self.t, self.u[:, j]) for j in range(self.r)])


@dataclass(frozen=True)
class FitConditions:
    """Endpoint interpolation conditions for one scalar subinterval."""

    x_left: float
    x_right: float
    dx_left: float
    dx_right: float
    u_data: float

    def __post_init__(self):
        vals = (self.x_left, self.x_right, self.dx_left, self.dx_right, self.u_data)
        if not np.all(np.isfinite(vals)):
            raise ValueError("fit conditions must be finite")


def estimate_derivatives(record: TrajectoryRecord) -> TrajectoryRecord:
    """Fill the derivative column by second-order finite differences.

    Central differences at interior samples, one-sided three-point stencils at
    the endpoints; both are exact on quadratics.  A record that already has
    derivatives is returned unchanged.
    """
    if record.dx is not None:
        return record
    if record.t.size < 3:
        raise ValueError("derivative estimation needs at least 3 samples")
    t, x = record.t, record.x
    dx = np.empty_like(x)
    for j in range(x.shape[1]):
        dx[:, j] = _diff_nonuniform(t, x[:, j])
    return replace(record, dx=dx)


def _diff_nonuniform(t, y):
    """Second-order differentiation on a possibly non-uniform grid."""
    m = t.size
    dy = np.empty(m)
    for i in range(1, m - 1):
        h1 = t[i] - t[i - 1]
        h2 = t[i + 1] - t[i]
        dy[i] = (
            -h2 / (h1 * (h1 + h2)) * y[i - 1]
            + (h2 - h1) / (h1 * h2) * y[i]
            + h1 / (h2 * (h1 + h2)) * y[i + 1]
        )
    h1 = t[1] - t[0]
    h2 = t[2] - t[1]
    dy[0] = (
        -(2 * h1 + h2) / (h1 * (h1 + h2)) * y[0]
        + (h1 + h2) / (h1 * h2) * y[1]
        - h1 / (h2 * (h1 + h2)) * y[2]
    )
    h1 = t[-2] - t[-3]
    h2 = t[-1] - t[-2]
    dy[-1] = (
        h2 / (h1 * (h1 + h2)) * y[-3]
        - (h1 + h2) / (h1 * h2) * y[-2]
        + (h1 + 2 * h2) / (h2 * (h1 + h2)) * y[-1]
    )
    return dy


def fit_piece(cond: FitConditions):
    """Exact scalar (a, b) from the two endpoint interpolation conditions.

    Solves a*x_left + b*u = dx_left and a*x_right + b*u = dx_right.
    """
    if np.isclose(cond.x_left, cond.x_right):
        raise SingularFitError(
            f"endpoint states coincide (x={cond.x_left}); the 2x2 system is singular"
        )
    if cond.u_data == 0.0:
        raise SingularFitError("u_data = 0 leaves the input coefficient unidentifiable")
    a = (cond.dx_right - cond.dx_left) / (cond.x_right - cond.x_left)
    b = (cond.dx_left - a * cond.x_left) / cond.u_data
    return a, b


def fit_piece_general(xs, us, dxs):
    """Least-squares (A, B) from samples (x_i, u_i, dx_i), any n, r >= 1."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    us = np.atleast_2d(np.asarray(us, dtype=float))
    dxs = np.atleast_2d(np.asarray(dxs, dtype=float))
    if xs.shape[0] != us.shape[0] or xs.shape[0] != dxs.shape[0]:
        raise ValueError("sample counts disagree")
    n = xs.shape[1]
    r = us.shape[1]
    if xs.shape[0] < n + r:
        raise SingularFitError(
            f"{xs.shape[0]} samples cannot identify {n + r} regressor columns"
        )
    regressor = np.hstack([xs, us])  # (m, n+r)
    rank = np.linalg.matrix_rank(regressor, tol=1e-10)
    if rank < n + r:
        _, sing, vt = np.linalg.svd(regressor)
        deficient = vt[rank:]
        raise SingularFitError(
            f"regressor rank {rank} < {n + r}; unidentifiable directions: {deficient}"
        )
    coeffs, *_ = np.linalg.lstsq(regressor, dxs, rcond=None)
    A = coeffs[:n].T
    B = coeffs[n:].T
    return A, B


def fit_model(
    record: TrajectoryRecord,
    partition: TimePartition,
    allow_negative=False,
) -> PiecewiseLinearModel:
    """One LinearPiece per subinterval, anchored at the right-knot data state.

    Endpoint states/derivatives/controls are linearly interpolated from the
    record at the partition knots.  Scalar problems use the exact
    two-endpoint solve; otherwise least squares over samples in the
    subinterval.
    """
    if record.label == NEGATIVE and not allow_negative:
        raise ValueError(
            f"record {record.id!r} is labeled negative; pass allow_negative=True to fit it"
        )
    tol = 1e-9 * max(1.0, abs(partition.t1 - partition.t0))
    uncovered = [
        float(k)
        for k in partition.knots
        if k < record.t_start - tol or k > record.t_end + tol
    ]
    if uncovered:
        raise CoverageError(
            f"record {record.id!r} spans [{record.t_start}, {record.t_end}] and does not "
            f"cover knots {uncovered}",
            uncovered_knots=uncovered,
        )
    rec = estimate_derivatives(record) if record.dx is None else record
    pieces = []
    for k in range(partition.num_pieces):
        t_l, t_r = partition.knots[k], partition.knots[k + 1]
        anchor = rec.interp_state(t_r)
        A, B = _fit_subinterval(rec, t_l, t_r)
        pieces.append(LinearPiece(A=A, B=B, t_start=t_l, t_end=t_r, anchor=anchor))
    return PiecewiseLinearModel(pieces=tuple(pieces), partition=partition)


def _fit_subinterval(rec: TrajectoryRecord, t_l, t_r):
    if rec.n == 1 and rec.r == 1:
        x_l = float(rec.interp_state(t_l)[0])
        x_r = float(rec.interp_state(t_r)[0])
        dx_l = float(rec.interp_derivative(t_l)[0])
        dx_r = float(rec.interp_derivative(t_r)[0])
        u_data = float(rec.interp_control(t_l)[0])
        if not np.isclose(x_l, x_r):
            cond = FitConditions(x_l, x_r, dx_l, dx_r, u_data)
            a, b = fit_piece(cond)
            return np.array([[a]]), np.array([[b]])
        # degenerate endpoints: fall through to least squares on the samples
    mask = (rec.t >= t_l - 1e-12) & (rec.t <= t_r + 1e-12)
    xs, us, dxs = rec.x[mask], rec.u[mask], rec.dx[mask]
    if xs.shape[0] < rec.n + rec.r:
        # too few interior samples; synthesize endpoint rows by interpolation
        extra_t = np.linspace(t_l, t_r, rec.n + rec.r + 1)
        xs = np.vstack([rec.interp_state(tt) for tt in extra_t])
        us = np.vstack([rec.interp_control(tt) for tt in extra_t])
        dxs = np.vstack([rec.interp_derivative(tt) for tt in extra_t])
    return fit_piece_general(xs, us, dxs)


def ingest_trajectories(path):
    """Parse the trajectory CSV format into a list of TrajectoryRecord.

    Header: ``traj_id,label,t,x0..x{n-1},u0..u{r-1}[,dx0..dx{n-1}]``.
    Lines starting with ``#`` are ignored.  Malformed rows raise
    :class:`TrajectoryParseError` with their line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        raw = fh.readlines()
    header = None
    header_line = None
    rows = []
    for lineno, line in enumerate(raw, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = next(csv.reader([line]))
        fields = [f.strip() for f in fields]
        if header is None:
            header = fields
            header_line = lineno
            continue
        rows.append((lineno, fields))
    if header is None:
        raise TrajectoryParseError(f"{path}: no header found", line=None)
    n, r, has_dx = _parse_header(header, header_line, path)
    expected_cols = 3 + n + r + (n if has_dx else 0)
    grouped = {}
    for lineno, fields in rows:
        if len(fields) != expected_cols:
            raise TrajectoryParseError(
                f"{path}:{lineno}: expected {expected_cols} columns, got {len(fields)}",
                line=lineno,
            )
        traj_id, label = fields[0], fields[1]
        if label not in (POSITIVE, NEGATIVE):
            raise TrajectoryParseError(
                f"{path}:{lineno}: label must be positive/negative, got {label!r}",
                line=lineno,
            )
        try:
            nums = [float(v) for v in fields[2:]]
        except ValueError as exc:
            raise TrajectoryParseError(f"{path}:{lineno}: {exc}", line=lineno) from None
        t = nums[0]
        x = nums[1 : 1 + n]
        u = nums[1 + n : 1 + n + r]
        dx = nums[1 + n + r :] if has_dx else None
        grouped.setdefault(traj_id, {"label": label, "rows": []})
        if grouped[traj_id]["label"] != label:
            raise TrajectoryParseError(
                f"{path}:{lineno}: id {traj_id!r} has conflicting labels", line=lineno
            )
        grouped[traj_id]["rows"].append((t, x, u, dx))
    records = []
    for traj_id, info in grouped.items():
        info["rows"].sort(key=lambda row: row[0])
        ts = np.array([row[0] for row in info["rows"]])
        xs = np.array([row[1] for row in info["rows"]])
        us = np.array([row[2] for row in info["rows"]])
        dxs = (
            np.array([row[3] for row in info["rows"]])
            if has_dx
            else None
        )
        records.append(
            TrajectoryRecord(id=traj_id, label=info["label"], t=ts, x=xs, u=us, dx=dxs)
        )
    return records


def _parse_header(header, lineno, path):
    if header[:3] != ["traj_id", "label", "t"]:
        raise TrajectoryParseError(
            f"{path}:{lineno}: header must start with traj_id,label,t", line=lineno
        )
    rest = header[3:]
    x_cols = [c for c in rest if c.startswith("x")]
    u_cols = [c for c in rest if c.startswith("u")]
    dx_cols = [c for c in rest if c.startswith("dx")]
    x_cols = [c for c in x_cols if c not in dx_cols]
    n, r = len(x_cols), len(u_cols)
    if n < 1 or r < 1:
        raise TrajectoryParseError(
            f"{path}:{lineno}: need at least one x and one u column", line=lineno
        )
    if dx_cols and len(dx_cols) != n:
        raise TrajectoryParseError(
            f"{path}:{lineno}: {len(dx_cols)} dx columns for {n} states", line=lineno
        )
    expected = [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(r)]
    if dx_cols:
        expected += [f"dx{i}" for i in range(n)]
    if rest != expected:
        raise TrajectoryParseError(
            f"{path}:{lineno}: columns {rest} do not match expected {expected}",
            line=lineno,
        )
    return n, r, bool(dx_cols)


def write_trajectories(path, records):
    """Inverse of :func:`ingest_trajectories` (always writes the dx columns)."""
    recs = [estimate_derivatives(rec) if rec.dx is None else rec for rec in records]
    n, r = recs[0].n, recs[0].r
    header = (
        ["traj_id", "label", "t"]
        + [f"x{i}" for i in range(n)]
        + [f"u{i}" for i in range(r)]
        + [f"dx{i}" for i in range(n)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in recs:
            for i in range(rec.t.size):
                writer.writerow(
                    [rec.id, rec.label, repr(float(rec.t[i]))]
                    + [repr(float(v)) for v in rec.x[i]]
                    + [repr(float(v)) for v in rec.u[i]]
                    + [repr(float(v)) for v in rec.dx[i]]
                )
