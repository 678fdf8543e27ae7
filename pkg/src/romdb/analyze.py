"""Online computations on (interpolated) reduced-order models.

Frequency and time response, eigen-analysis with damping ratios, critical
parameter detection by bisection with eigenvalue tracking, the logarithmic
output transform, the reduced inverse problem with Tikhonov regularization,
the normalized recovery error, and the adaptive hypercube sampler that
grows a database until a configured error measure passes everywhere.

All queries are pure over immutable database snapshots; sweep evaluations
are independent per point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import consistency, dbstore, matcore
from .errors import (
    InvalidDomainError,
    InvalidInputError,
    NoCrossingError,
    RomDbError,
    SingularMatrixError,
)
from .manifold import interpolate_rom
from .romtypes import Box, ParameterDomain, RomRecord

logger = logging.getLogger(__name__)

DB_FLOOR = 1e-300


def as_frequency_grid(values):
    """Validate a strictly ascending, finite, nonnegative frequency grid."""
    grid = np.asarray(values, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InvalidInputError("frequency grid is empty")
    if not np.all(np.isfinite(grid)):
        raise InvalidInputError("frequency grid has non-finite entries")
    if np.any(np.diff(grid) <= 0):
        raise InvalidInputError("frequency grid must be strictly ascending")
    if grid[0] < 0:
        raise InvalidInputError("frequencies must be nonnegative")
    return grid


@dataclass(frozen=True)
class FrequencyResponse:
    """Outputs per grid point; ``valid`` flags resonant points as unusable."""

    grid: np.ndarray
    outputs: np.ndarray  # (n_grid, n_outputs) complex
    valid: np.ndarray  # (n_grid,) bool


def _shifted_operator(rom, w):
    if rom.order == "first":
        return 1j * w * rom.E - rom.A
    return -(w**2) * rom.M + 1j * w * rom.C + rom.K


def frequency_response(rom, grid, u=None):
    """Frequency sweep of the reduced system.

    ``u`` is a constant input vector or an (n_grid, n_inputs) array;
    defaults to unit inputs. A singular shifted operator flags that grid
    point invalid instead of failing the whole sweep.
    """
    grid = as_frequency_grid(grid)
    if u is None:
        u = np.ones(rom.n_inputs)
    u = np.asarray(u, dtype=complex)
    if u.ndim == 1:
        u = np.broadcast_to(u, (grid.size, rom.n_inputs))
    if u.shape != (grid.size, rom.n_inputs):
        raise InvalidInputError(f"input has shape {u.shape}, expected ({grid.size}, {rom.n_inputs})")
    outputs = np.zeros((grid.size, rom.n_outputs), dtype=complex)
    valid = np.ones(grid.size, dtype=bool)
    for i, w in enumerate(grid):
        shifted = _shifted_operator(rom, w).astype(complex)
        rhs = rom.B.astype(complex) @ u[i]
        try:
            q = matcore.solve(shifted, rhs)
        except SingularMatrixError:
            valid[i] = False
            continue
        outputs[i] = rom.G.astype(complex) @ q + rom.H.astype(complex) @ u[i]
    return FrequencyResponse(grid=grid, outputs=outputs, valid=valid)


def db_transform(y):
    """Logarithmic output scale 10 log10(2 pi |y|^2), modulus floored at 1e-300.

    Evaluated as 20 log10(|y|) + 10 log10(2 pi) so the floored modulus does
    not underflow when squared.
    """
    mod = np.maximum(np.abs(np.asarray(y)), DB_FLOOR)
    return 20.0 * np.log10(mod) + 10.0 * np.log10(2.0 * np.pi)


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues sorted by |Im| ascending (mode frequency), then real part
    descending (least damped first), positive-imaginary conjugate first."""

    eigenvalues: np.ndarray
    damping_ratios: np.ndarray
    frequencies: np.ndarray


def _sort_eigenvalues(vals):
    order = np.lexsort((-vals.imag, -vals.real, np.abs(vals.imag)))
    return vals[order]


def eigen_analysis(rom):
    """Generalized eigenvalues of the ROM pencil with damping ratios.

    First order: pencil (A, E). Second order: companion linearization of
    (M, C, K). The damping ratio is -Re(lambda)/|lambda| (0 for the zero
    eigenvalue).
    """
    if rom.order == "first":
        try:
            mat = matcore.solve(rom.E, rom.A)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"singular pencil: {exc}", cond_estimate=exc.cond_estimate) from exc
        vals = np.linalg.eigvals(mat)
    else:
        k = rom.k
        try:
            minv_k = matcore.solve(rom.M, rom.K)
            minv_c = matcore.solve(rom.M, rom.C)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"singular mass block: {exc}", cond_estimate=exc.cond_estimate) from exc
        comp = np.zeros((2 * k, 2 * k), dtype=complex if rom.scalar_field == "complex" else float)
        comp[:k, k:] = np.eye(k)
        comp[k:, :k] = -minv_k
        comp[k:, k:] = -minv_c
        vals = np.linalg.eigvals(comp)
    vals = _sort_eigenvalues(vals)
    mags = np.abs(vals)
    damping = np.where(mags > 0, -vals.real / np.maximum(mags, np.finfo(float).tiny), 0.0)
    return EigenResult(eigenvalues=vals, damping_ratios=damping, frequencies=mags)


@dataclass(frozen=True)
class CriticalParameter:
    """First eigenvalue crossing of the imaginary axis along a sweep."""

    q_crit: float
    mode_index: int
    tracking_ambiguous: bool
    max_real_at_crit: float


def _match_modes(prev, curr):
    """Assign current eigenvalues to previous ones by complex-plane proximity.

    Returns the permutation ``perm`` with curr[perm[i]] tracking prev[i],
    plus an ambiguity flag when two assignments compete within half the
    smallest pairwise gap.
    """
    cost = np.abs(prev[:, None] - curr[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    perm = np.empty(len(prev), dtype=int)
    perm[rows] = cols
    ambiguous = False
    if len(prev) > 1:
        gaps = np.abs(prev[:, None] - prev[None, :])[np.triu_indices(len(prev), 1)]
        threshold = 0.5 * float(gaps.min())
        for i in range(len(prev)):
            others = np.delete(cost[i], perm[i])
            # a competing match within the swap threshold may indicate a swap
            if others.size and float(others.min() - cost[i, perm[i]]) < threshold:
                ambiguous = True
    return perm, ambiguous


def _max_real(vals):
    return float(vals.real.max())


def critical_parameter(rom_family, q_range, tol=1e-6):
    """Smallest sweep value where an eigenvalue crosses the imaginary axis.

    ``rom_family`` maps a sweep value q to a ROM. The sweep must bracket
    the crossing (stable at the start, unstable at the end). Bisection
    narrows the crossing to ``tol``; the crossing mode is identified by
    tracking eigenvalues with nearest-neighbor matching from the stable end
    and is reported even when tracking flags an ambiguity.
    """
    q_lo, q_hi = float(q_range[0]), float(q_range[1])
    if not q_lo < q_hi:
        raise InvalidInputError("q_range must be increasing")
    evals = {}

    def eigs(q):
        if q not in evals:
            evals[q] = eigen_analysis(rom_family(q)).eigenvalues
        return evals[q]

    f_lo = _max_real(eigs(q_lo))
    f_hi = _max_real(eigs(q_hi))
    if f_lo >= 0 or f_hi <= 0:
        raise NoCrossingError(
            f"no bracketing: max Re at {q_lo} is {f_lo:.3e}, at {q_hi} is {f_hi:.3e}"
        )
    lo, hi = q_lo, q_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _max_real(eigs(mid)) < 0:
            lo = mid
        else:
            hi = mid
    q_crit = 0.5 * (lo + hi)

    # Track mode identity from the stable end through every evaluated sweep
    # value up to the unstable side of the final bracket, densified so
    # matching never has to bridge a large parameter jump.
    for q in np.linspace(q_lo, hi, 16):
        eigs(float(q))
    path = sorted(q for q in evals if q <= hi)
    labels = np.arange(len(eigs(q_lo)))
    ambiguous = False
    prev = eigs(path[0])
    for q in path[1:]:
        curr = eigs(q)
        perm, amb = _match_modes(prev, curr)
        # the eigenvalue tracked at slot i of prev moves to slot perm[i]
        new_labels = np.empty_like(labels)
        new_labels[perm] = labels
        labels = new_labels
        prev = curr
        ambiguous = ambiguous or amb
    unstable = eigs(hi)
    crossing_slot = int(np.argmax(unstable.real))
    mode_index = int(labels[crossing_slot])
    if ambiguous:
        logger.warning("eigenvalue tracking ambiguous near q=%.6g", q_crit)
    return CriticalParameter(
        q_crit=q_crit,
        mode_index=mode_index,
        tracking_ambiguous=ambiguous,
        max_real_at_crit=_max_real(eigs(hi)),
    )


@dataclass(frozen=True)
class TimeResponse:
    times: np.ndarray
    outputs: np.ndarray


def time_response(rom, u, dt, horizon, q0=None, dq0=None):
    """Implicit single-step time integration of the reduced system.

    First order uses the trapezoidal rule, second order Newmark-beta
    (1/4, 1/2); both are second-order accurate. ``u`` is a callable of
    time, an (n_steps+1, n_inputs) array, or None for zero input.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    n_steps = int(round(horizon / dt))
    times = np.arange(n_steps + 1) * dt
    if u is None:
        u_arr = np.zeros((n_steps + 1, rom.n_inputs))
    elif callable(u):
        u_arr = np.stack([np.broadcast_to(np.asarray(u(t), dtype=float), (rom.n_inputs,)) for t in times])
    else:
        u_arr = np.asarray(u, dtype=float)
        if u_arr.shape != (n_steps + 1, rom.n_inputs):
            raise InvalidInputError(f"input has shape {u_arr.shape}, expected ({n_steps + 1}, {rom.n_inputs})")
    k = rom.k
    q = np.zeros(k) if q0 is None else np.asarray(q0, dtype=float).reshape(k)
    outputs = np.zeros((n_steps + 1, rom.n_outputs))

    if rom.order == "first":
        lhs = rom.E - 0.5 * dt * rom.A
        rhs_mat = rom.E + 0.5 * dt * rom.A
        outputs[0] = np.real(rom.G @ q + rom.H @ u_arr[0])
        for n in range(n_steps):
            rhs = rhs_mat @ q + 0.5 * dt * rom.B @ (u_arr[n] + u_arr[n + 1])
            q = matcore.solve(lhs, rhs)
            outputs[n + 1] = np.real(rom.G @ q + rom.H @ u_arr[n + 1])
        return TimeResponse(times=times, outputs=outputs)

    beta, gamma = 0.25, 0.5
    v = np.zeros(k) if dq0 is None else np.asarray(dq0, dtype=float).reshape(k)
    a = matcore.solve(rom.M, rom.B @ u_arr[0] - rom.C @ v - rom.K @ q)
    lhs = rom.M + gamma * dt * rom.C + beta * dt * dt * rom.K
    outputs[0] = np.real(rom.G @ q + rom.H @ u_arr[0])
    for n in range(n_steps):
        d_pred = q + dt * v + 0.5 * dt * dt * (1 - 2 * beta) * a
        v_pred = v + dt * (1 - gamma) * a
        a_new = matcore.solve(lhs, rom.B @ u_arr[n + 1] - rom.C @ v_pred - rom.K @ d_pred)
        q = d_pred + beta * dt * dt * a_new
        v = v_pred + gamma * dt * a_new
        a = a_new
        outputs[n + 1] = np.real(rom.G @ q + rom.H @ u_arr[n + 1])
    return TimeResponse(times=times, outputs=outputs)


# ---------------------------------------------------------------------------
# Inverse problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulatedAnnealingSpec:
    """Geometric-cooling annealer: T <- 0.95 T, Gaussian proposals scaled to
    10% of each axis width, 50 proposals per temperature, fixed seed."""

    seed: int = 0
    cooling: float = 0.95
    proposals_per_temperature: int = 50
    n_temperatures: int = 60
    step_fraction: float = 0.1
    initial_temperature: float | None = None
    polish: bool = True


@dataclass(frozen=True)
class PatternSearchSpec:
    """Compass search with step halving; deterministic."""

    initial_step_fraction: float = 0.25
    shrink: float = 0.5
    min_step_fraction: float = 1e-6
    max_iters: int = 400


@dataclass(frozen=True)
class InverseProblemSpec:
    """Measured log-scale outputs at a few wavenumbers plus solver knobs."""

    measured: np.ndarray  # (n_kappa, n_outputs) dB values
    wavenumbers: tuple
    weights_alpha: tuple
    tikhonov_beta: float
    domain: ParameterDomain
    optimizer: SimulatedAnnealingSpec | PatternSearchSpec = field(
        default_factory=SimulatedAnnealingSpec
    )
    input_u: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "measured", np.asarray(self.measured, dtype=float))
        object.__setattr__(self, "wavenumbers", tuple(float(w) for w in self.wavenumbers))
        object.__setattr__(self, "weights_alpha", tuple(float(a) for a in self.weights_alpha))
        if self.measured.ndim != 2 or self.measured.shape[0] != len(self.wavenumbers):
            raise InvalidInputError("measured must be (n_wavenumbers, n_outputs)")
        if len(self.weights_alpha) != len(self.wavenumbers):
            raise InvalidInputError("one alpha weight per wavenumber required")
        if any(a <= 0 for a in self.weights_alpha):
            raise InvalidInputError("alpha weights must be positive")
        if self.tikhonov_beta < 0:
            raise InvalidInputError("tikhonov beta must be >= 0")


@dataclass(frozen=True)
class InverseResult:
    mu_hat: np.ndarray
    objective: float
    trace: np.ndarray
    n_calls: int
    rejected_probes: int


def _all_full_plan(db):
    if db.plan is None:
        return True
    return all(spec.kind == "full" for spec in db.plan.values())


class _FlatRomEvaluator:
    """Fast per-probe ROM assembly for databases on the flat manifold.

    Stacks every slot across records once per sub-database so a probe costs
    one weight evaluation plus one tensor contraction per slot. Numerically
    identical to the generic interpolation path for all-full plans.
    """

    def __init__(self, db):
        from .romtypes import rom_from_slots

        self.db = db
        self.scheme = db.scheme
        self.order = "first" if db.kind == "first_order" else "second"
        self.rom_from_slots = rom_from_slots
        self.slot_names = db.records[0].rom.slot_names
        self.stacks = []
        self.point_sets = []
        for sub in db.partition:
            records = [db.records[i] for i in sub]
            self.point_sets.append(np.stack([rec.point for rec in records]))
            self.stacks.append(
                {name: np.stack([getattr(rec.rom, name) for rec in records]) for name in self.slot_names}
            )

    def __call__(self, target):
        from .manifold import _locate_box, scheme_weights

        target = np.asarray(target, dtype=float).reshape(-1)
        if not self.db.domain.contains(target):
            from .errors import OutOfDomainError

            raise OutOfDomainError(f"target {np.asarray(target).tolist()} outside the domain box")
        s = _locate_box(self.db.domain, target)
        w = scheme_weights(self.point_sets[s], target, self.scheme)
        slots = {
            name: np.tensordot(w, stack, axes=(0, 0)) for name, stack in self.stacks[s].items()
        }
        return self.rom_from_slots(self.order, slots)


def _inverse_objective(db, spec):
    grid_sorted = as_frequency_grid(np.sort(np.asarray(spec.wavenumbers)))
    order = np.argsort(np.asarray(spec.wavenumbers))
    inverse_order = np.argsort(order)
    if _all_full_plan(db) and db.consistency.mode != "none":
        interp = _FlatRomEvaluator(db)
    else:
        def interp(mu):
            return interpolate_rom(db, mu)

    def objective(mu):
        rom = interp(mu)
        resp = frequency_response(rom, grid_sorted, spec.input_u)
        if not np.all(resp.valid):
            raise RomDbError("resonant wavenumber in inverse objective")
        s = db_transform(resp.outputs)[inverse_order]
        total = 0.0
        for i, alpha in enumerate(spec.weights_alpha):
            diff = s[i] - spec.measured[i]
            total += alpha * float(diff @ diff)
        total += 0.5 * spec.tikhonov_beta * float(mu @ mu)
        return total

    return objective


def _pattern_search(objective, domain, start, opt, trace, rejected):
    width = domain.upper - domain.lower
    step = opt.initial_step_fraction * width
    best_x = start.copy()
    best_f = objective(best_x)
    trace.append(best_f)
    for _ in range(opt.max_iters):
        improved = False
        for ax in range(domain.n_params):
            for sign in (+1.0, -1.0):
                cand = best_x.copy()
                cand[ax] += sign * step[ax]
                cand = domain.clamp(cand)
                try:
                    f = objective(cand)
                except RomDbError:
                    rejected[0] += 1
                    continue
                trace.append(f)
                if f < best_f - 1e-300:
                    best_f, best_x = f, cand
                    improved = True
        if not improved:
            step = step * opt.shrink
            if np.all(step < opt.min_step_fraction * width):
                break
    return best_x, best_f


def solve_inverse(db, spec: InverseProblemSpec):
    """Identify the parameters whose interpolated-ROM outputs match the data.

    The objective sums alpha-weighted squared dB-curve mismatches over the
    measured wavenumbers plus the Tikhonov term (beta/2)||mu||^2, evaluated
    through database interpolation. Probes whose interpolation fails are
    rejected and logged; the search continues.
    """
    objective = _inverse_objective(db, spec)
    domain = spec.domain
    trace = []
    rejected = [0]
    start = domain.center()

    if isinstance(spec.optimizer, PatternSearchSpec):
        best_x, best_f = _pattern_search(objective, domain, start, spec.optimizer, trace, rejected)
        return InverseResult(best_x, best_f, np.asarray(trace), len(trace), rejected[0])

    opt = spec.optimizer
    rng = np.random.default_rng(opt.seed)
    width = domain.upper - domain.lower
    current = start.copy()
    current_f = objective(current)
    trace.append(current_f)
    best_x, best_f = current.copy(), current_f
    temperature = opt.initial_temperature if opt.initial_temperature is not None else max(
        abs(current_f), 1.0
    )
    for _ in range(opt.n_temperatures):
        for _ in range(opt.proposals_per_temperature):
            proposal = domain.clamp(current + rng.normal(0.0, opt.step_fraction * width))
            try:
                f = objective(proposal)
            except RomDbError as exc:
                rejected[0] += 1
                logger.debug("probe rejected at %s: %s", proposal, exc)
                continue
            trace.append(f)
            delta = f - current_f
            if delta <= 0 or rng.random() < np.exp(-delta / max(temperature, 1e-300)):
                current, current_f = proposal, f
                if f < best_f:
                    best_x, best_f = proposal.copy(), f
        temperature *= opt.cooling
    if opt.polish:
        polish = PatternSearchSpec(initial_step_fraction=0.02, min_step_fraction=1e-9, max_iters=200)
        best_x, best_f = _pattern_search(objective, domain, best_x, polish, trace, rejected)
    return InverseResult(best_x, best_f, np.asarray(trace), len(trace), rejected[0])


def recovery_error(found, truth, domain):
    """Domain-normalized infinity norm of the identification error.

    max over components of |found_c - truth_c| / (upper_c - lower_c).
    """
    found = np.asarray(found, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if isinstance(domain, ParameterDomain):
        lower, upper = domain.lower, domain.upper
    else:
        lower = np.asarray(domain[0], dtype=float)
        upper = np.asarray(domain[1], dtype=float)
    if found.shape != truth.shape or found.shape != lower.shape:
        raise InvalidInputError("found, truth and domain bounds must share the dimension")
    width = upper - lower
    if np.any(width <= 0):
        raise InvalidDomainError("zero-width axis in recovery-error normalization")
    return float(np.max(np.abs(found - truth) / width))


# ---------------------------------------------------------------------------
# Adaptive hypercube sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    """Adaptive refinement configuration.

    The error metric at each undivided hypercube center is either the
    output-curve mismatch against the truth oracle or the inverse-problem
    recovery error; cells failing ``error_tolerance`` split into 2^d
    children through their midpoints.
    """

    error_tolerance: float
    max_refinements: int = 3
    initial_lattice: tuple = (2, 2)
    metric: str = "output_error"
    align_mode: str = "none"
    align_init: str = "identity"
    frequency_grid: tuple | None = None
    input_u: tuple | None = None
    inverse_template: InverseProblemSpec | None = None

    def __post_init__(self):
        if not 0 < self.error_tolerance < 1:
            raise InvalidInputError("error_tolerance must lie in (0, 1)")
        if any(n < 2 for n in self.initial_lattice):
            raise InvalidInputError("initial lattice needs >= 2 nodes per axis")
        if self.metric == "inverse_recovery_error":
            object.__setattr__(self, "metric", "inverse_recovery")
        if self.metric not in ("output_error", "inverse_recovery"):
            raise InvalidInputError(f"unknown sampler metric {self.metric!r}")
        if self.metric == "inverse_recovery" and self.inverse_template is None:
            raise InvalidInputError("inverse_recovery metric needs an inverse_template")
        if self.align_mode not in ("none", "fixed_point_g", "fixed_point_pg", "procrustes"):
            raise InvalidInputError(f"unknown align mode {self.align_mode!r}")


@dataclass
class _Cell:
    lower: np.ndarray
    upper: np.ndarray
    passed: bool | None = None
    error: float | None = None

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def corners(self):
        d = self.lower.size
        out = []
        for mask in range(2**d):
            c = self.lower.copy()
            for ax in range(d):
                if mask >> ax & 1:
                    c[ax] = self.upper[ax]
            out.append(c)
        return out

    def refinement_nodes(self):
        """All 3^d nodes of the midpoint split."""
        d = self.lower.size
        mids = 0.5 * (self.lower + self.upper)
        axes = [np.array([self.lower[ax], mids[ax], self.upper[ax]]) for ax in range(d)]
        grids = np.meshgrid(*axes, indexing="ij")
        return [np.array(t) for t in zip(*(g.ravel() for g in grids))]

    def children(self):
        d = self.lower.size
        mids = 0.5 * (self.lower + self.upper)
        out = []
        for mask in range(2**d):
            lo = self.lower.copy()
            hi = mids.copy()
            for ax in range(d):
                if mask >> ax & 1:
                    lo[ax] = mids[ax]
                    hi[ax] = self.upper[ax]
            out.append(_Cell(lo, hi))
        return out


@dataclass(frozen=True)
class RefinementIteration:
    centers: list
    errors: list
    split_cells: int
    new_points: int


@dataclass(frozen=True)
class RefinementLog:
    iterations: list
    converged: bool
    failing_cells: list


def _point_key(p):
    return tuple(np.round(np.asarray(p, dtype=float), 12))


def _assemble(records, domain, cells, scheme, plan, align_mode, ref_key=None, align_init="identity"):
    keys = {_point_key(rec.point): i for i, rec in enumerate(records)}
    boxes = tuple(Box(c.lower, c.upper) for c in cells)
    partition = []
    for cell in cells:
        partition.append(tuple(keys[_point_key(c)] for c in cell.corners()))
    dom = ParameterDomain(domain.lower, domain.upper, boxes)
    db = dbstore.RomDatabase(
        kind="first_order" if records[0].rom.order == "first" else "second_order",
        records=tuple(records),
        domain=dom,
        partition=tuple(partition),
        scheme=scheme,
        plan=plan,
    )
    if align_mode != "none":
        ref_index = keys.get(ref_key, 0) if ref_key is not None else 0
        # records from one family pipeline are already nearly consistent;
        # identity-initialized alignment keeps one smooth transform branch
        # across the lattice instead of hopping to per-record optima
        opts = consistency.FixedPointOptions(init=align_init)
        db, _ = consistency.enforce_database_consistency(
            db, align_mode, ref_index=ref_index, opts=opts
        )
    return db


def _cell_error(db, center, truth, config):
    if config.metric == "output_error":
        grid = as_frequency_grid(config.frequency_grid)
        rom = interpolate_rom(db, center, allow_inconsistent=config.align_mode == "none")
        resp = frequency_response(rom, grid, np.asarray(config.input_u) if config.input_u else None)
        s = db_transform(resp.outputs)
        s_true = np.asarray(truth(center), dtype=float)
        span = max(float(s_true.max() - s_true.min()), 1.0)
        return float(np.max(np.abs(s - s_true))) / span
    template = config.inverse_template
    spec = replace(template, measured=np.asarray(truth(center), dtype=float))
    result = solve_inverse(db, spec)
    return recovery_error(result.mu_hat, center, spec.domain)


def adaptive_sample(builder, truth, config: SamplerConfig, domain: ParameterDomain,
                    scheme=None, plan=None):
    """Grow a database until every hypercube-center error passes tolerance.

    Starts from a tensor lattice, compares database predictions against the
    truth oracle at each undivided cell's center, and splits failing cells
    into 2^d children (building ROMs at every new lattice node of the
    split). Passing cells are never split. Returns the final database and
    the per-iteration refinement log; hitting ``max_refinements`` with
    failures still returns the partial database plus the failing cells.
    """
    d = domain.n_params
    if len(config.initial_lattice) != d:
        raise InvalidInputError("initial lattice needs one node count per axis")
    axes = [np.linspace(domain.lower[ax], domain.upper[ax], config.initial_lattice[ax]) for ax in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = [np.array(t) for t in zip(*(g.ravel() for g in grids))]

    records = []
    index = {}

    def ensure(point):
        key = _point_key(point)
        if key not in index:
            index[key] = len(records)
            records.append(builder(point))
        return index[key]

    for p in nodes:
        ensure(p)
    ref_key = _point_key(min(nodes, key=lambda p: float(np.linalg.norm(p - domain.center()))))

    cells = []
    for combo in np.ndindex(*[len(a) - 1 for a in axes]):
        lo = np.array([axes[ax][combo[ax]] for ax in range(d)])
        hi = np.array([axes[ax][combo[ax] + 1] for ax in range(d)])
        cells.append(_Cell(lo, hi))

    iterations = []
    converged = False
    for _ in range(config.max_refinements + 1):
        db = _assemble(records, domain, cells, scheme, plan, config.align_mode, ref_key,
                       align_init=config.align_init)
        centers, errors = [], []
        for cell in cells:
            if cell.passed is None:
                err = _cell_error(db, cell.center(), truth, config)
                cell.error = err
                cell.passed = err <= config.error_tolerance
            centers.append(cell.center())
            errors.append(cell.error)
        failing = [c for c in cells if not c.passed]
        if not failing:
            iterations.append(RefinementIteration(centers, errors, 0, 0))
            converged = True
            break
        if len(iterations) >= config.max_refinements:
            iterations.append(RefinementIteration(centers, errors, 0, 0))
            break
        new_points = 0
        new_cells = []
        for cell in cells:
            if cell.passed:
                new_cells.append(cell)
                continue
            for p in cell.refinement_nodes():
                if _point_key(p) not in index:
                    ensure(p)
                    new_points += 1
            new_cells.extend(cell.children())
        iterations.append(RefinementIteration(centers, errors, len(failing), new_points))
        cells = new_cells

    db = _assemble(records, domain, cells, scheme, plan, config.align_mode, ref_key,
                   align_init=config.align_init)
    failing_cells = [(c.lower.copy(), c.upper.copy(), c.error) for c in cells if not c.passed]
    log = RefinementLog(iterations=iterations, converged=converged, failing_cells=failing_cells)
    return db, log
