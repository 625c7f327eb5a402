"""Upwind finite-volume scheme on measure data.

The density update is the conservative upwind step

    rho_i^{n+1} = rho_i^n - (dt/dx) * (J_{i+1/2} - J_{i-1/2}),
    J_{i+1/2}   = (a_i)_+ rho_i + (a_{i+1})_- rho_{i+1},

run under the CFL restriction a_inf * dt / dx <= 1, which makes the update
a convex combination of neighboring cells: densities stay nonnegative
exactly and the cumulative mass function is total-variation diminishing.
The update is evaluated in that convex-combination form (not as a flux
difference) so positivity survives floating point.

Cell speeds come in two flavours.  Linear: the direct convolution sum
a_i = sum_{j != i} W'(x_i - x_j) rho_j dx with the diagonal excluded.
Nonlinear: a divided difference of the antiderivative A between interface
values of the cumulative primitive gradient s = d/dx (W * rho), obtained
from the conservation relation per cell

    s_{i+1/2} - s_{i-1/2} = dx * (nu_i - c * rho_i),

where nu_i discretizes (w * rho)(x_i) through a kernel built from exact
cell integrals of w.  The left anchor of the cumulative solve is the
value of W' * rho left of the grid: the -infinity limit
(c/2 - int w / 2) * mass plus an in-grid correction for the w-mass that
the grid-limited nu sum cannot see.  With this anchor the midpoint rule
(a = id) reproduces the direct linear sum to machine precision on any
grid, and for even data the interface gradients are exactly antisymmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .measure import DiscreteMeasure, from_cells
from .potentials import PointyPotential, VelocityLaw, velocity_sup_bound

__all__ = [
    "Grid",
    "FVState",
    "VelocityField",
    "NuKernel",
    "DiagnosticsReport",
    "SchemeError",
    "project_initial",
    "linear_velocity",
    "build_nu_kernel",
    "compute_nu",
    "solve_s_gradient",
    "velocity_from_gradients",
    "nonlinear_velocity",
    "cfl_dt",
    "step",
    "entropy_residual",
    "cumulative_tv",
    "run",
]

# divided-difference branch: below this interface-gradient difference the
# speed is evaluated at the midpoint (equal-gradient branch)
DD_EPS = 1e-12

KERNEL_TRUNC = 1e-14

# run() aborts when this much mass sits within BOUNDARY_CELLS of an edge
BOUNDARY_CELLS = 5
BOUNDARY_MASS_TOL = 1e-8


class SchemeError(RuntimeError):
    """Scheme-level abort: CFL violation, boundary contact, corrupt state."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid of cell centers x_i = x_min + i*dx, cells [x_i - dx/2, x_i + dx/2)."""

    x_min: float
    dx: float
    n_cells: int

    def __post_init__(self):
        if self.dx <= 0.0:
            raise ValueError("dx must be positive")
        if self.n_cells < 2:
            raise ValueError("need at least two cells")

    @classmethod
    def from_domain(cls, lo: float, hi: float, n_cells: int) -> "Grid":
        if hi <= lo:
            raise ValueError("empty domain")
        dx = (hi - lo) / n_cells
        return cls(x_min=lo + 0.5 * dx, dx=dx, n_cells=n_cells)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_cells)

    @property
    def left_edge(self) -> float:
        return self.x_min - 0.5 * self.dx

    @property
    def right_edge(self) -> float:
        return self.x_min + (self.n_cells - 0.5) * self.dx


@dataclass(frozen=True)
class FVState:
    grid: Grid
    rho: np.ndarray
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (self.grid.n_cells,):
            raise ValueError("density length must match the grid")
        if np.any(rho < 0.0):
            raise ValueError("densities must be nonnegative")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def mass(self) -> float:
        return float(np.sum(self.rho) * self.grid.dx)


@dataclass(frozen=True)
class VelocityField:
    """Per-cell speeds, with the nonlinear intermediates cached when available.

    ``s_grad`` holds the n+1 interface gradients s_{i-1/2}, i = 0..n;
    ``nu`` the per-cell w-convolution.  Both are None on the linear path.
    """

    a_cell: np.ndarray
    s_grad: np.ndarray | None = None
    nu: np.ndarray | None = None


@dataclass(frozen=True)
class NuKernel:
    """Discretization kernel g for nu_i = dx * sum_k rho_k g_{i-k}.

    ``values[j + half_width]`` is the weight at cell offset j.  Consecutive
    values satisfy (g_j + g_{j+1})/2 * dx = integral of w over the offset
    cell [j*dx, (j+1)*dx], anchored at the left end by g = w(x_left); the
    kernel is truncated where the per-cell integral of w drops below
    ``KERNEL_TRUNC``.
    """

    values: np.ndarray
    half_width: int
    dx: float

    def left_edge_column(self, n: int) -> np.ndarray:
        """g at offsets -j, j = 0..n-1 (zero beyond the truncated support)."""
        out = np.zeros(n)
        jmax = min(n - 1, self.half_width)
        out[: jmax + 1] = self.values[self.half_width - np.arange(jmax + 1)]
        return out


def project_initial(initial, grid: Grid) -> FVState:
    """Project initial data onto cell averages and renormalize to unit mass.

    Atomic data (a :class:`DiscreteMeasure`) assigns each atom's full mass
    to its containing cell (boundary atoms go right); callable densities
    are integrated per cell with 5-point Gauss-Legendre.  The projected
    mass is renormalized to 1 exactly at t = 0.
    """
    dx = grid.dx
    rho = np.zeros(grid.n_cells)
    if isinstance(initial, DiscreteMeasure):
        if initial.n_atoms == 0:
            raise ValueError("cannot project an empty measure")
        idx = np.floor((initial.positions - grid.left_edge) / dx).astype(int)
        if np.any(idx < 0) or np.any(idx >= grid.n_cells):
            raise ValueError("atom support extends outside the grid")
        np.add.at(rho, idx, initial.masses / dx)
    elif callable(initial):
        nodes, weights = np.polynomial.legendre.leggauss(5)
        centers = grid.centers
        for xi, wi in zip(nodes, weights):
            vals = np.asarray(initial(centers + 0.5 * dx * xi), dtype=float)
            if np.any(vals < -1e-13):
                raise ValueError("initial density must be nonnegative")
            rho += 0.5 * wi * np.maximum(vals, 0.0)
    else:
        raise TypeError("initial data must be a DiscreteMeasure or a callable density")
    total = float(np.sum(rho) * dx)
    if total <= 0.0:
        raise ValueError("projected initial mass is zero")
    if abs(total - 1.0) > 1e-6 and not callable(initial):
        raise ValueError("atomic initial data must carry unit mass")
    rho /= total
    return FVState(grid=grid, rho=rho, time=0.0, step_index=0)


def _wprime_matrix(pot: PointyPotential, grid: Grid) -> np.ndarray:
    x = grid.centers
    wp = np.asarray(pot.wprime_eval(x[:, None] - x[None, :]), dtype=float)
    np.fill_diagonal(wp, 0.0)
    return wp


def linear_velocity(state: FVState, pot: PointyPotential, wprime_matrix: np.ndarray | None = None) -> VelocityField:
    """Direct convolution speeds a_i = sum_{j != i} W'(x_i - x_j) rho_j dx.

    The O(N^2) matrix depends only on the grid; callers stepping in a loop
    pass it precomputed.
    """
    wp = _wprime_matrix(pot, state.grid) if wprime_matrix is None else wprime_matrix
    return VelocityField(a_cell=wp @ (state.rho * state.grid.dx))


def build_nu_kernel(pot: PointyPotential, grid: Grid) -> NuKernel:
    """Kernel of the w-convolution, from exact per-cell integrals of w.

    Solves the two-term averages (g_j + g_{j+1})/2 = (1/dx) * int w over
    the offset cell for g, anchored at the truncated left end by the point
    value of w there.  On a uniform grid the weights depend only on the
    offset i - k, so one kernel serves every cell.
    """
    dec = pot.decomposition
    if dec is None:
        raise ValueError("nu kernel requires a kink decomposition")
    dx = grid.dx
    half = grid.n_cells - 1
    if half == 0 or dec.w0 == 0.0:
        return NuKernel(values=np.zeros(1), half_width=0, dx=dx)
    offs = np.arange(-half, half + 1)
    cell_int = np.asarray(dec.w_left_integral((offs + 1) * dx), dtype=float) - np.asarray(
        dec.w_left_integral(offs * dx), dtype=float
    )  # cell_int[j + half] = int of w over [j dx, (j+1) dx], j = -half..half
    while half > 0 and abs(cell_int[0]) < KERNEL_TRUNC and abs(cell_int[-1]) < KERNEL_TRUNC:
        cell_int = cell_int[1:-1]
        half -= 1
    if half == 0:
        return NuKernel(values=np.array([float(dec.w_eval(0.0))]), half_width=0, dx=dx)
    # alternating recursion g_{k+1} = 2 I_k / dx - g_k, vectorized through
    # h_k = (-1)^k g_k which turns it into a cumulative sum
    g0 = float(dec.w_eval(-half * dx))
    incr = cell_int[: 2 * half] / dx  # I_k at array index k = 0 .. 2*half-1
    alt = (-1.0) ** np.arange(2 * half)
    h = np.empty(2 * half + 1)
    h[0] = g0
    h[1:] = g0 + np.cumsum(-2.0 * incr * alt)
    g = h * ((-1.0) ** np.arange(2 * half + 1))
    return NuKernel(values=g, half_width=half, dx=dx)


def compute_nu(state: FVState, kernel: NuKernel) -> np.ndarray:
    """Discrete w-convolution nu_i = dx * sum_k rho_k g_{i-k}."""
    k = kernel.half_width
    return np.convolve(state.rho, kernel.values)[k : k + state.grid.n_cells] * state.grid.dx


def solve_s_gradient(state: FVState, pot: PointyPotential, nu: np.ndarray, kernel: NuKernel) -> np.ndarray:
    """Interface gradients of the primitive: n+1 values s_{i-1/2}, i = 0..n.

    Cumulative solve of  s_{i+1/2} = s_{i-1/2} + dx*(nu_i - c*rho_i),
    anchored left of the grid at the exact value of W' * rho there: the
    -infinity limit (c/2 - w0/2)*mass plus, per source cell j, the w-mass
    between -infinity and the grid's left column that the in-grid nu sum
    never accumulates.  The correction uses the kernel's own left-edge
    values so that the telescoped interface gradients agree with the direct
    convolution identically.
    """
    dec = pot.decomposition
    if dec is None:
        raise ValueError("s-gradient solve requires a kink decomposition")
    dx = state.grid.dx
    rho = state.rho
    cell_mass = rho * dx
    mtot = float(np.sum(cell_mass))
    c = dec.c
    base = (0.5 * c - float(dec.w_left_integral(0.0))) * mtot
    if dec.w0 != 0.0:
        n = state.grid.n_cells
        tail = np.asarray(dec.w_left_integral(-dx * np.arange(n)), dtype=float)
        tail = tail - 0.5 * dx * kernel.left_edge_column(n)
        u_left = base + float(np.dot(cell_mass, tail))
    else:
        u_left = base
    s = np.empty(state.grid.n_cells + 1)
    s[0] = u_left
    np.cumsum(dx * (nu - c * rho), out=s[1:])
    s[1:] += u_left
    return s


def velocity_from_gradients(law: VelocityLaw, s: np.ndarray) -> np.ndarray:
    """Per-cell speed from interface gradients: divided difference of A.

    a_i = (A(s_{i+1/2}) - A(s_{i-1/2})) / (s_{i+1/2} - s_{i-1/2}), with the
    equal-gradient branch a(midpoint) taken when the difference is below
    ``DD_EPS`` to avoid cancellation.  For the identity law the divided
    difference IS the interface midpoint (A = x^2/2), which is evaluated
    directly: the quotient form would lose absolute accuracy whenever a
    cell holds very little mass.
    """
    s_lo, s_hi = s[:-1], s[1:]
    if law.is_identity:
        a = 0.5 * (s_hi + s_lo)
    else:
        diff = s_hi - s_lo
        small = np.abs(diff) < DD_EPS
        denom = np.where(small, 1.0, diff)
        dd = (np.asarray(law.a_antideriv(s_hi)) - np.asarray(law.a_antideriv(s_lo))) / denom
        a = np.where(small, np.asarray(law.a_eval(0.5 * (s_hi + s_lo))), dd)
    if not np.all(np.isfinite(a)):
        raise SchemeError("non-finite divided difference in the velocity")
    return a


def nonlinear_velocity(
    state: FVState, pot: PointyPotential, law: VelocityLaw, kernel: NuKernel | None = None
) -> VelocityField:
    """Nonlinear cell speeds; nu and the interface gradients ride along."""
    if pot.decomposition is None:
        raise ValueError("nonlinear velocity requires a kink decomposition")
    if kernel is None:
        kernel = build_nu_kernel(pot, state.grid)
    nu = compute_nu(state, kernel)
    s = solve_s_gradient(state, pot, nu, kernel)
    return VelocityField(a_cell=velocity_from_gradients(law, s), s_grad=s, nu=nu)


def cfl_dt(vel_bound: float, dx: float, gamma: float, dt_cap: float | None = None) -> float:
    """Time step gamma * dx / a_inf; with a_inf = 0 the caller-supplied cap applies."""
    if dx <= 0.0 or not (0.0 < gamma <= 1.0):
        raise ValueError("need dx > 0 and gamma in (0, 1]")
    if vel_bound < 0.0:
        raise ValueError("velocity bound must be nonnegative")
    if vel_bound == 0.0:
        if dt_cap is None:
            raise ValueError("zero velocity bound: supply dt_cap")
        return dt_cap
    dt = gamma * dx / vel_bound
    return dt if dt_cap is None else min(dt, dt_cap)


def step(state: FVState, vel: VelocityField, dt: float) -> FVState:
    """One upwind step under CFL, in positivity-preserving form.

    rho_i^{n+1} = rho_i (1 - (dt/dx)|a_i|) + (dt/dx)[(a_{i-1})_+ rho_{i-1}
                  - (a_{i+1})_- rho_{i+1}]; every addend is nonnegative once
    dt*max|a|/dx <= 1, so min rho >= 0 holds exactly in floating point.
    """
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    a = vel.a_cell
    dx = state.grid.dx
    lam = dt / dx
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    if lam * amax > 1.0 + 1e-9:
        raise SchemeError(f"CFL violation: dt*max|a|/dx = {lam * amax:.6g} > 1")
    rho = state.rho
    stay = np.maximum(1.0 - lam * np.abs(a), 0.0)
    new = rho * stay
    inflow_right = lam * np.maximum(a, 0.0) * rho  # leaves cell i rightward
    inflow_left = -lam * np.minimum(a, 0.0) * rho  # leaves cell i leftward
    new[1:] += inflow_right[:-1]
    new[:-1] += inflow_left[1:]
    return replace(state, rho=new, time=state.time + dt, step_index=state.step_index + 1)


def entropy_residual(state: FVState, vel: VelocityField, pot: PointyPotential) -> float:
    """Discrete entropy-condition residual, max_i [(s_{i+1/2}-s_{i-1/2})/dx - nu_i]/c.

    By the cumulative solve this equals max_i(-rho_i) <= 0 for any
    nonnegative state; a positive value flags a corrupted gradient field.
    """
    if vel.s_grad is None or vel.nu is None:
        raise ValueError("entropy residual needs the nonlinear velocity intermediates")
    c = pot.decomposition.c
    s = vel.s_grad
    res = ((s[1:] - s[:-1]) / state.grid.dx - vel.nu) / c
    return float(np.max(res))


def _cumulative_tv(rho: np.ndarray, dx: float) -> float:
    m = np.cumsum(rho * dx)
    return float(abs(m[0]) + np.sum(np.abs(np.diff(m))))


def cumulative_tv(states) -> list[float]:
    """Total variation of the cumulative mass function per time level."""
    states = list(states)
    if not states:
        return []
    g0 = states[0].grid
    for s in states:
        if s.grid != g0:
            raise ValueError("states must share a grid")
    return [_cumulative_tv(s.rho, g0.dx) for s in states]


@dataclass
class DiagnosticsReport:
    """Per-time-level scheme diagnostics, one row per level (including t=0)."""

    step_index: list[int] = field(default_factory=list)
    time: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    min_rho: list[float] = field(default_factory=list)
    max_abs_a: list[float] = field(default_factory=list)
    moment1: list[float] = field(default_factory=list)
    support_lo: list[int] = field(default_factory=list)
    support_hi: list[int] = field(default_factory=list)
    tv_cumulative: list[float] = field(default_factory=list)
    entropy_residual: list[float] = field(default_factory=list)

    def record(self, state: FVState, vel: VelocityField, ent: float) -> None:
        rho = state.rho
        dx = state.grid.dx
        nz = np.nonzero(rho > 0.0)[0]
        self.step_index.append(state.step_index)
        self.time.append(state.time)
        self.mass.append(state.mass)
        self.min_rho.append(float(np.min(rho)))
        self.max_abs_a.append(float(np.max(np.abs(vel.a_cell))))
        self.moment1.append(float(np.sum(np.abs(state.grid.centers) * rho * dx)))
        self.support_lo.append(int(nz[0]) if nz.size else -1)
        self.support_hi.append(int(nz[-1]) if nz.size else -1)
        self.tv_cumulative.append(_cumulative_tv(rho, dx))
        self.entropy_residual.append(ent)

    @property
    def support_cells(self) -> list[int]:
        return [hi - lo + 1 if lo >= 0 else 0 for lo, hi in zip(self.support_lo, self.support_hi)]

    def write_csv(self, path) -> None:
        lines = ["step,time,mass,min_rho,max_abs_a,moment1,support_cells,tv_cumulative,entropy_residual"]
        for i in range(len(self.time)):
            width = self.support_cells[i]
            lines.append(
                f"{self.step_index[i]},{self.time[i]:.17g},{self.mass[i]:.17g},"
                f"{self.min_rho[i]:.17g},{self.max_abs_a[i]:.17g},{self.moment1[i]:.17g},"
                f"{width},{self.tv_cumulative[i]:.17g},{self.entropy_residual[i]:.17g}"
            )
        Path(path).write_text("\n".join(lines) + "\n")


def _boundary_mass(state: FVState) -> float:
    dx = state.grid.dx
    k = min(BOUNDARY_CELLS, state.grid.n_cells)
    return float((np.sum(state.rho[:k]) + np.sum(state.rho[-k:])) * dx)


def snapshot_measure(state: FVState) -> DiscreteMeasure:
    """Atomize the state: mass rho_i*dx at each cell center."""
    return from_cells(state.grid.x_min, state.grid.dx, state.rho)


def run(
    state0: FVState,
    pot: PointyPotential,
    law: VelocityLaw | None,
    mode: str,
    t_end: float,
    gamma: float,
    sample_times=(),
):
    """Advance the scheme to t_end, sampling snapshots at the requested times.

    Speeds are recomputed every step; the step is the CFL step shortened to
    land exactly on sample times and on t_end.  Returns (snapshots,
    diagnostics) with snapshots a list of (time, DiscreteMeasure).  Aborts
    (SchemeError) if more than ``BOUNDARY_MASS_TOL`` of mass approaches a
    boundary: the support bound guarantees a wide-enough grid never does.
    """
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    if mode not in ("linear", "nonlinear"):
        raise ValueError(f"unknown mode {mode!r}")
    a_inf = velocity_sup_bound(pot, law, mode)
    dt_cfl = cfl_dt(a_inf, state0.grid.dx, gamma, dt_cap=max(t_end, 1.0))

    kernel = build_nu_kernel(pot, state0.grid) if mode == "nonlinear" else None
    wp = _wprime_matrix(pot, state0.grid) if mode == "linear" else None

    def velocity(state: FVState) -> VelocityField:
        if mode == "linear":
            return linear_velocity(state, pot, wprime_matrix=wp)
        return nonlinear_velocity(state, pot, law, kernel=kernel)

    targets = sorted({float(t) for t in sample_times if 0.0 <= t <= t_end} | {float(t_end)})
    time_tol = 1e-9 * max(1.0, t_end)

    snapshots: list[tuple[float, DiscreteMeasure]] = []
    diag = DiagnosticsReport()
    state = state0
    max_steps = int(t_end / dt_cfl) * 4 + 10_000
    while True:
        vel = velocity(state)
        ent = entropy_residual(state, vel, pot) if mode == "nonlinear" else float("nan")
        diag.record(state, vel, ent)
        while targets and state.time >= targets[0] - time_tol:
            snapshots.append((targets[0], snapshot_measure(state)))
            targets.pop(0)
        if not targets:
            break
        if state.step_index >= max_steps:
            raise SchemeError("step budget exhausted before t_end")
        if _boundary_mass(state) > BOUNDARY_MASS_TOL:
            raise SchemeError("mass reached the grid boundary; enlarge the domain")
        dt = min(dt_cfl, targets[0] - state.time)
        state = step(state, vel, dt)
        if abs(state.time - targets[0]) < 1e-12:
            state = replace(state, time=targets[0])  # land on the sample time exactly
    return snapshots, diag
