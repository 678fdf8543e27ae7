"""Interpolation of reduced operators on matrix manifolds.

The four-step tangent-space procedure: identify the manifold of a slot, map
all database entries to the tangent space at a reference entry (matrix log),
interpolate there with scheme weights, and map back (matrix exp). SPD slots
can alternatively be interpolated through their lower Cholesky factors,
which needs no reference point. Weight construction (lattice multilinear,
tensor natural cubic splines, per-axis mixes, radial basis functions) is
shared by every manifold.

Queries are read-only over an immutable database snapshot; everything here
is safe to call concurrently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import (
    DegenerateFactorError,
    ExtrapolationError,
    InconsistentDatabaseError,
    InsufficientCoverageError,
    InvalidInputError,
    LogUndefinedError,
    ManifoldViolationError,
    NotSpdError,
    OutOfDomainError,
    SingularMatrixError,
    SlotInterpolationError,
)
from .romtypes import rom_from_slots

logger = logging.getLogger(__name__)

MANIFOLD_KINDS = ("spd", "symmetric", "nonsingular", "full")
MANIFOLD_METHODS = ("tangent_log_exp", "cholesky_factor", "flat")
SCHEME_KINDS = ("lattice_multilinear", "tensor_cubic_spline", "mixed_per_axis", "rbf")
RBF_KERNELS = ("thin_plate", "gaussian")

_SYM_RTOL = 1e-10


@dataclass(frozen=True)
class ManifoldSpec:
    """Manifold assignment and reference policy for one operator slot.

    ``reference_index`` picks the tangent-space base entry; ``None`` means
    the stencil point nearest the query target, re-chosen per query. The
    Cholesky method applies to SPD slots only and needs no reference.
    """

    kind: str
    method: str = "flat"
    reference_index: int | None = None

    def __post_init__(self):
        if self.kind not in MANIFOLD_KINDS:
            raise InvalidInputError(f"unknown manifold kind {self.kind!r}")
        if self.method not in MANIFOLD_METHODS:
            raise InvalidInputError(f"unknown manifold method {self.method!r}")
        if self.method == "cholesky_factor" and self.kind != "spd":
            raise InvalidInputError("cholesky_factor is only valid on the SPD manifold")
        if self.method == "tangent_log_exp" and self.kind in ("symmetric", "full"):
            # tangent space of a flat manifold is the manifold itself
            object.__setattr__(self, "method", "flat")

    def to_dict(self):
        return {"kind": self.kind, "method": self.method, "reference_index": self.reference_index}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("method", "flat"), d.get("reference_index"))


@dataclass(frozen=True)
class SchemeSpec:
    """Interpolation scheme in the tangent space (or flat space).

    Lattice kinds need database points forming a full tensor grid;
    ``mixed_per_axis`` assigns ``"linear"`` or ``"spline"`` per axis; RBF
    needs at least dim+1 points and works on scattered samples.
    """

    kind: str = "lattice_multilinear"
    per_axis: tuple | None = None
    rbf_kernel: str = "thin_plate"
    rbf_width: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise InvalidInputError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "mixed_per_axis":
            if not self.per_axis:
                raise InvalidInputError("mixed_per_axis needs a per-axis assignment")
            bad = set(self.per_axis) - {"linear", "spline"}
            if bad:
                raise InvalidInputError(f"unknown per-axis kinds {sorted(bad)}")
            object.__setattr__(self, "per_axis", tuple(self.per_axis))
        if self.rbf_kernel not in RBF_KERNELS:
            raise InvalidInputError(f"unknown rbf kernel {self.rbf_kernel!r}")
        if self.rbf_width is not None and not self.rbf_width > 0:
            raise InvalidInputError("rbf width must be positive")

    def to_dict(self):
        return {
            "kind": self.kind,
            "per_axis": list(self.per_axis) if self.per_axis else None,
            "rbf_kernel": self.rbf_kernel,
            "rbf_width": self.rbf_width,
        }

    @classmethod
    def from_dict(cls, d):
        per_axis = d.get("per_axis")
        return cls(
            d.get("kind", "lattice_multilinear"),
            tuple(per_axis) if per_axis else None,
            d.get("rbf_kernel", "thin_plate"),
            d.get("rbf_width"),
        )


# ---------------------------------------------------------------------------
# Scheme weights
# ---------------------------------------------------------------------------


def _lattice_axes(points):
    """Per-axis sorted node values and the index tuple of every point.

    Raises when the points do not form a full tensor grid.
    """
    n, d = points.shape
    axes = []
    for ax in range(d):
        axes.append(np.unique(points[:, ax]))
    total = 1
    for a in axes:
        total *= len(a)
    if total != n:
        raise InvalidInputError(
            f"points do not form a full tensor grid ({n} points vs {total} grid nodes)"
        )
    index = np.empty((n, d), dtype=int)
    seen = set()
    for i in range(n):
        for ax in range(d):
            j = int(np.searchsorted(axes[ax], points[i, ax]))
            if j >= len(axes[ax]) or axes[ax][j] != points[i, ax]:
                raise InvalidInputError("points do not form a full tensor grid")
            index[i, ax] = j
        key = tuple(index[i])
        if key in seen:
            raise InvalidInputError("duplicate lattice node")
        seen.add(key)
    return axes, index


def _linear_axis_weights(nodes, x, allow_extrapolation):
    m = len(nodes)
    w = np.zeros(m)
    hit = np.nonzero(nodes == x)[0]
    if hit.size:
        w[hit[0]] = 1.0
        return w
    if m == 1:
        raise ExtrapolationError(f"target {x} off the single grid line {nodes[0]}")
    if (x < nodes[0] or x > nodes[-1]) and not allow_extrapolation:
        raise ExtrapolationError(f"target {x} outside grid range [{nodes[0]}, {nodes[-1]}]")
    j = int(np.clip(np.searchsorted(nodes, x) - 1, 0, m - 2))
    h = nodes[j + 1] - nodes[j]
    w[j] = (nodes[j + 1] - x) / h
    w[j + 1] = (x - nodes[j]) / h
    return w


def _natural_spline_axis_weights(nodes, x, allow_extrapolation):
    """Cardinal weights of the natural cubic spline through the nodes."""
    m = len(nodes)
    if m <= 2:
        return _linear_axis_weights(nodes, x, allow_extrapolation)
    w = np.zeros(m)
    hit = np.nonzero(nodes == x)[0]
    if hit.size:
        w[hit[0]] = 1.0
        return w
    if (x < nodes[0] or x > nodes[-1]) and not allow_extrapolation:
        raise ExtrapolationError(f"target {x} outside grid range [{nodes[0]}, {nodes[-1]}]")
    h = np.diff(nodes)
    # second-derivative system for the interior nodes, natural ends zero
    n_int = m - 2
    t = np.zeros((n_int, n_int))
    r = np.zeros((n_int, m))
    for i in range(1, m - 1):
        row = i - 1
        if row > 0:
            t[row, row - 1] = h[i - 1] / 6.0
        t[row, row] = (h[i - 1] + h[i]) / 3.0
        if row < n_int - 1:
            t[row, row + 1] = h[i] / 6.0
        r[row, i - 1] += 1.0 / h[i - 1]
        r[row, i] -= 1.0 / h[i - 1] + 1.0 / h[i]
        r[row, i + 1] += 1.0 / h[i]
    curv = np.zeros((m, m))  # rows map data values -> second derivatives
    curv[1:-1, :] = np.linalg.solve(t, r)
    j = int(np.clip(np.searchsorted(nodes, x) - 1, 0, m - 2))
    hj = h[j]
    a = (nodes[j + 1] - x) / hj
    b = (x - nodes[j]) / hj
    ca = (a**3 - a) * hj**2 / 6.0
    cb = (b**3 - b) * hj**2 / 6.0
    w[j] += a
    w[j + 1] += b
    w += ca * curv[j] + cb * curv[j + 1]
    return w


def _lattice_weights(points, target, scheme, allow_extrapolation):
    axes, index = _lattice_axes(points)
    d = points.shape[1]
    if scheme.kind == "mixed_per_axis":
        if len(scheme.per_axis) != d:
            raise InvalidInputError(
                f"per-axis assignment has {len(scheme.per_axis)} entries for {d} axes"
            )
        kinds = scheme.per_axis
    elif scheme.kind == "tensor_cubic_spline":
        kinds = ("spline",) * d
    else:
        kinds = ("linear",) * d
    per_axis = []
    for ax in range(d):
        fn = _linear_axis_weights if kinds[ax] == "linear" else _natural_spline_axis_weights
        per_axis.append(fn(axes[ax], target[ax], allow_extrapolation))
    w = np.ones(len(points))
    for i in range(len(points)):
        for ax in range(d):
            w[i] *= per_axis[ax][index[i, ax]]
    return w


def _rbf_kernel_values(r, scheme):
    if scheme.rbf_kernel == "gaussian":
        return np.exp(-((r / scheme.rbf_width) ** 2))
    out = np.zeros_like(r)
    mask = r > 0
    out[mask] = r[mask] ** 2 * np.log(r[mask])
    return out


def _rbf_weights(points, target, scheme, allow_extrapolation):
    n, d = points.shape
    if n < d + 1:
        raise InvalidInputError(f"rbf needs at least {d + 1} points, got {n}")
    lo, hi = points.min(axis=0), points.max(axis=0)
    if (np.any(target < lo) or np.any(target > hi)) and not allow_extrapolation:
        raise ExtrapolationError("target outside the sampled box")
    for i in range(n):
        if np.array_equal(points[i], target):
            w = np.zeros(n)
            w[i] = 1.0
            return w
    if scheme.rbf_width is None and scheme.rbf_kernel == "gaussian":
        diffs = points[:, None, :] - points[None, :, :]
        dists = np.sqrt((diffs**2).sum(axis=2))
        scheme = SchemeSpec("rbf", None, "gaussian", float(np.median(dists[dists > 0])))
    diffs = points[:, None, :] - points[None, :, :]
    kmat = _rbf_kernel_values(np.sqrt((diffs**2).sum(axis=2)), scheme)
    if scheme.rbf_kernel == "thin_plate":
        poly = np.hstack([np.ones((n, 1)), points])  # linear tail
    else:
        poly = np.ones((n, 1))  # constant tail keeps weights summing to 1
    p = poly.shape[1]
    block = np.zeros((n + p, n + p))
    block[:n, :n] = kmat
    block[:n, n:] = poly
    block[n:, :n] = poly.T
    kvec = _rbf_kernel_values(np.linalg.norm(points - target, axis=1), scheme)
    if scheme.rbf_kernel == "thin_plate":
        pvec = np.concatenate([[1.0], target])
    else:
        pvec = np.array([1.0])
    rhs = np.concatenate([kvec, pvec])
    try:
        y = matcore.solve(block, rhs)
    except SingularMatrixError as exc:
        raise InvalidInputError(f"rbf system singular: {exc}") from exc
    return y[:n]


def scheme_weights(points, target, scheme=None, allow_extrapolation=False):
    """Interpolation weight vector over the given points at the target.

    Weights reproduce database points exactly (unit vector at a node) and
    sum to 1 for lattice and spline kinds. Targets outside the stencil
    raise :class:`ExtrapolationError` unless extrapolation is opted in.
    """
    scheme = scheme or SchemeSpec()
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise InvalidInputError("points must be an (n, d) array")
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.size != points.shape[1]:
        raise InvalidInputError(
            f"target has {target.size} coordinates, points have {points.shape[1]}"
        )
    if scheme.kind == "rbf":
        return _rbf_weights(points, target, scheme, allow_extrapolation)
    return _lattice_weights(points, target, scheme, allow_extrapolation)


def min_points_required(scheme, n_axes):
    """Smallest admissible stencil for a scheme (used by partition checks)."""
    if scheme is None:
        return 1
    if scheme.kind == "rbf":
        return n_axes + 1
    return 2**n_axes


def check_scheme_coverage(scheme, points):
    """Raise :class:`InsufficientCoverageError` when a stencil is too small."""
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    if scheme is None:
        return
    if scheme.kind == "rbf":
        if n < d + 1:
            raise InsufficientCoverageError(f"rbf stencil needs {d + 1} points, got {n}")
        return
    for ax in range(d):
        if len(np.unique(points[:, ax])) < 2:
            raise InsufficientCoverageError(
                f"lattice stencil needs >= 2 nodes per axis, axis {ax} has fewer"
            )


# ---------------------------------------------------------------------------
# Slot interpolation on a manifold
# ---------------------------------------------------------------------------


def _check_symmetric(m, idx):
    scale = max(matcore.frobenius(m), np.finfo(float).tiny)
    if matcore.frobenius(m - m.conj().T) > _SYM_RTOL * scale:
        raise ManifoldViolationError(f"entry {idx} is not symmetric", record_index=idx)


def _check_spd(m, idx):
    try:
        matcore.cholesky(m)
    except (NotSpdError, InvalidInputError) as exc:
        raise ManifoldViolationError(f"entry {idx} is not SPD: {exc}", record_index=idx) from exc


def _check_nonsingular(m, idx):
    try:
        matcore.solve(m, np.eye(m.shape[0]))
    except SingularMatrixError as exc:
        raise ManifoldViolationError(f"entry {idx} is singular: {exc}", record_index=idx) from exc


def _unit_weight_index(weights):
    nz = np.nonzero(weights)[0]
    if nz.size == 1 and weights[nz[0]] == 1.0:
        return int(nz[0])
    return None


def _reference_entry_index(weights, points, target, manifold):
    if manifold.reference_index is not None:
        if not 0 <= manifold.reference_index < len(points):
            raise InvalidInputError(
                f"manifold reference index {manifold.reference_index} out of range"
            )
        return manifold.reference_index
    nz = np.nonzero(weights)[0]
    cand = nz if nz.size else np.arange(len(points))
    dists = np.linalg.norm(points[cand] - target, axis=1)
    return int(cand[int(np.argmin(dists))])


def _flat_combination(entries, weights):
    out = np.zeros_like(entries[0], dtype=complex if np.iscomplexobj(entries[0]) else float)
    for wi, ei in zip(weights, entries):
        if wi != 0.0:
            out = out + wi * ei
    return out


def _spd_sqrt_pair(p):
    vals, vecs = matcore.sym_eig(p)
    if vals[-1] <= 0:
        raise NotSpdError("tangent reference not SPD", pivot=None)
    sq = (vecs * np.sqrt(vals)) @ vecs.conj().T
    isq = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return matcore.symmetrize(sq), matcore.symmetrize(isq)


def interpolate_slot(entries, points, target, manifold, scheme=None, allow_extrapolation=False, weights=None):
    """Interpolate one operator slot at the target on its manifold.

    Membership of every entry is verified first (SPD by Cholesky success,
    nonsingular by solve success, symmetric by tolerance); failures name
    the offending record. A principal-log failure on the nonsingular
    manifold falls back to flat interpolation with a logged warning.
    """
    points = np.asarray(points, dtype=float)
    target = np.asarray(target, dtype=float).reshape(-1)
    entries = [matcore.as_matrix(e, f"entry {i}") for i, e in enumerate(entries)]
    if len(entries) != len(points):
        raise InvalidInputError("one entry per point required")
    if weights is None:
        weights = scheme_weights(points, target, scheme, allow_extrapolation)
    unit = _unit_weight_index(weights)

    if manifold.kind == "symmetric":
        for i, e in enumerate(entries):
            _check_symmetric(e, i)
        if unit is not None:
            return entries[unit].copy()
        return matcore.symmetrize(_flat_combination(entries, weights))

    if manifold.kind == "spd":
        for i, e in enumerate(entries):
            _check_spd(e, i)
        if manifold.method == "cholesky_factor":
            return cholesky_interpolate(entries, points, target, scheme, weights=weights)
        if unit is not None:
            return entries[unit].copy()
        if manifold.method == "flat":
            out = matcore.symmetrize(_flat_combination(entries, weights))
            _check_spd(out, "interpolant")
            return out
        ref = _reference_entry_index(weights, points, target, manifold)
        sq, isq = _spd_sqrt_pair(entries[ref])
        gamma = np.zeros_like(entries[ref])
        for wi, ei in zip(weights, entries):
            if wi != 0.0:
                gamma = gamma + wi * matcore.mat_log_spd(isq @ ei @ isq)
        return matcore.symmetrize(sq @ matcore.mat_exp_sym(matcore.symmetrize(gamma)) @ sq)

    if manifold.kind == "nonsingular":
        for i, e in enumerate(entries):
            _check_nonsingular(e, i)
        if unit is not None:
            return entries[unit].copy()
        if manifold.method == "flat":
            return _flat_combination(entries, weights)
        ref = _reference_entry_index(weights, points, target, manifold)
        p = entries[ref]
        try:
            gamma = np.zeros_like(p)
            for wi, ei in zip(weights, entries):
                if wi != 0.0:
                    gamma = gamma + wi * matcore.mat_log_general(matcore.solve(p, ei))
        except LogUndefinedError as exc:
            logger.warning("principal log undefined (%s); falling back to flat interpolation", exc)
            return _flat_combination(entries, weights)
        return p @ matcore.mat_exp_general(gamma)

    # full / flat
    if unit is not None:
        return entries[unit].copy()
    return _flat_combination(entries, weights)


def cholesky_interpolate(entries, points, target, scheme=None, allow_extrapolation=False, weights=None):
    """SPD interpolation through lower Cholesky factors.

    Factor every entry, interpolate the factors entrywise, and multiply the
    interpolated factor back. The result is SPD whenever all diagonal
    entries of the interpolated factor are nonzero; a zero diagonal raises
    :class:`DegenerateFactorError`.
    """
    points = np.asarray(points, dtype=float)
    target = np.asarray(target, dtype=float).reshape(-1)
    if weights is None:
        weights = scheme_weights(points, target, scheme, allow_extrapolation)
    factors = []
    for i, e in enumerate(entries):
        try:
            factors.append(matcore.cholesky(e))
        except (NotSpdError, InvalidInputError) as exc:
            raise ManifoldViolationError(f"entry {i} is not SPD: {exc}", record_index=i) from exc
    unit = _unit_weight_index(weights)
    if unit is not None:
        return np.asarray(entries[unit]).copy()
    star = _flat_combination(factors, weights)
    diag = np.abs(np.diag(star))
    if np.any(diag <= 1e-150):
        bad = int(np.argmin(diag))
        raise DegenerateFactorError(f"interpolated factor diagonal entry {bad} vanishes")
    return star @ star.conj().T


def manifold_choice_heuristic(entries, points, candidates, scheme=None):
    """Pick the interpolation manifold with the smallest nonlinearity indicator.

    The indicator of a candidate is its leave-one-out cross-validation
    error: each entry is interpolated from the others and the relative
    Frobenius errors are averaged. Candidates failing membership score
    +inf; ties go to the flat (full) manifold.
    """
    points = np.asarray(points, dtype=float)
    n = len(entries)
    if n < 3:
        if n >= 1 and len(candidates) == 1:
            return candidates[0], [0.0]
        raise InvalidInputError("heuristic needs at least 3 entries")
    if not candidates:
        raise InvalidInputError("need at least one candidate manifold")
    indicators = []
    for cand in candidates:
        errs = []
        failed = False
        for i in range(n):
            keep = [j for j in range(n) if j != i]
            sub_points = points[keep]
            sub_entries = [entries[j] for j in keep]
            try:
                try:
                    w = scheme_weights(sub_points, points[i], scheme, allow_extrapolation=True)
                except InvalidInputError:
                    # removal broke the lattice; score all candidates through
                    # the same scattered-data weights instead
                    w = scheme_weights(
                        sub_points, points[i], SchemeSpec("rbf"), allow_extrapolation=True
                    )
                approx = interpolate_slot(
                    sub_entries, sub_points, points[i], cand, scheme,
                    allow_extrapolation=True, weights=w,
                )
            except (ManifoldViolationError, NotSpdError, DegenerateFactorError, SingularMatrixError):
                failed = True
                break
            scale = max(matcore.frobenius(entries[i]), np.finfo(float).tiny)
            errs.append(matcore.frobenius(approx - entries[i]) / scale)
        indicators.append(np.inf if failed else float(np.mean(errs)))
    best = min(indicators)
    if not np.isfinite(best):
        raise ManifoldViolationError("every candidate failed membership on some entry")
    tol = 1e-12 * max(1.0, abs(best))
    tied = [i for i, v in enumerate(indicators) if v <= best + tol]
    for i in tied:
        if candidates[i].kind == "full":
            return candidates[i], indicators
    return candidates[int(np.argmin(indicators))], indicators


# ---------------------------------------------------------------------------
# Whole-ROM interpolation
# ---------------------------------------------------------------------------


def plan_slot_keys(kind, scalar_field):
    """Plan keys for a database: one per real slot, two per complex slot."""
    names = ("E", "A", "B", "G", "H") if kind == "first_order" else ("M", "C", "K", "B", "G", "H")
    if scalar_field == "complex":
        return tuple(f"{n}.{part}" for n in names for part in ("re", "im"))
    return names


def default_plan(kind, scalar_field):
    """All-flat plan: every slot on the full matrix manifold."""
    return {key: ManifoldSpec("full") for key in plan_slot_keys(kind, scalar_field)}


def validate_plan(plan, kind, scalar_field):
    expected = set(plan_slot_keys(kind, scalar_field))
    got = set(plan)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise InvalidInputError(f"plan slots mismatch: missing {missing}, unexpected {extra}")
    return plan


def _locate_box(domain, target):
    for s, box in enumerate(domain.subdomains):
        if box.contains(target):
            return s
    raise OutOfDomainError(f"target {np.asarray(target).tolist()} outside every sub-domain")


def interpolate_rom(db, target, plan=None, scheme=None, allow_inconsistent=False, allow_extrapolation=False):
    """Interpolate a full ROM from a database at an unsampled target.

    The covering sub-database is located first and only its records feed
    the stencil. Complex slots are split into real and imaginary planes,
    each interpolated on its own manifold per the plan. Requires the
    database to be consistency-enforced unless ``allow_inconsistent``.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.size != db.domain.n_params:
        raise InvalidInputError(
            f"target has {target.size} coordinates, domain has {db.domain.n_params}"
        )
    if not db.domain.contains(target):
        raise OutOfDomainError(f"target {np.asarray(target).tolist()} outside the domain box")
    if db.consistency.mode == "none" and len(db.records) > 1 and not allow_inconsistent:
        raise InconsistentDatabaseError(
            "database was never consistency-enforced; align it or pass allow_inconsistent"
        )
    plan = validate_plan(plan or db.plan or default_plan(db.kind, db.scalar_field), db.kind, db.scalar_field)
    scheme = scheme or db.scheme or SchemeSpec()

    s = _locate_box(db.domain, target)
    indices = db.partition[s]
    if not indices:
        raise InsufficientCoverageError(f"sub-database {s} holds no records")
    records = [db.records[i] for i in indices]
    points = np.stack([rec.point for rec in records])
    weights = scheme_weights(points, target, scheme, allow_extrapolation)

    order = "first" if db.kind == "first_order" else "second"
    slot_names = records[0].rom.slot_names
    out = {}
    for name in slot_names:
        entries = [getattr(rec.rom, name) for rec in records]
        try:
            if db.scalar_field == "complex":
                re = interpolate_slot(
                    [np.ascontiguousarray(e.real) for e in entries], points, target,
                    plan[f"{name}.re"], scheme, allow_extrapolation, weights=weights,
                )
                im = interpolate_slot(
                    [np.ascontiguousarray(e.imag) for e in entries], points, target,
                    plan[f"{name}.im"], scheme, allow_extrapolation, weights=weights,
                )
                out[name] = re + 1j * im
            else:
                out[name] = interpolate_slot(
                    entries, points, target, plan[name], scheme,
                    allow_extrapolation, weights=weights,
                )
        except Exception as exc:  # noqa: BLE001 - annotate with the slot name
            raise SlotInterpolationError(name, exc) from exc
    return rom_from_slots(order, out)
