"""Coordinate-consistency enforcement for ROM databases.

Two routes to a common set of generalized coordinates:

* common underlying mesh: principal subspace angles between reduced-order
  bases, orthogonal Procrustes alignment, and optional truncation of the
  directions whose angles exceed a threshold;
* arbitrary meshes: fixed-point maximization of a correlation functional
  over orthogonal congruence transforms, in a Galerkin (single transform)
  and a Petrov-Galerkin (independent left/right transforms) variant. The
  fixed points of the iteration are exactly the critical points of the
  functional, which is what the criticality residuals below measure.

Per-record alignments are pure functions and may run concurrently; the
database-level routine applies all transforms in one commit at the end.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import matcore
from .errors import InvalidBasisError, InvalidInputError, MeshMismatchError
from .romtypes import (
    SLOT_KIND,
    DistanceWeights,
    RobPair,
    TransformPair,
    apply_transform,
    normalization_weights,
)


class AmbiguousAlignmentWarning(UserWarning):
    """Procrustes alignment not unique (rank-deficient basis correlation)."""


@dataclass(frozen=True)
class SubspaceAngleResult:
    """Principal angles between two basis column spaces.

    ``angles`` are ascending in [0, pi/2]; ``left_directions`` /
    ``right_directions`` hold the coefficient vectors of the canonical
    pairs, column ``l`` of each corresponding to ``angles[l]``.
    """

    angles: np.ndarray
    left_directions: np.ndarray
    right_directions: np.ndarray
    singular_values: np.ndarray


@dataclass(frozen=True)
class FixedPointOptions:
    """Knobs of the fixed-point alignment iteration.

    ``s_margin`` multiplies the spectral-norm bound s_min (must exceed 1 so
    the shifted map has a unique polar factor). ``init`` is ``"identity"``,
    ``"random"`` or ``"warm"`` (best of identity and 8 seeded random
    orthogonal starts by initial objective).
    """

    s_margin: float = 1.5
    max_iters: int = 10_000
    objective_tol: float = 1e-12
    init: str = "identity"
    seed: int = 0
    stagnation_runs: int = 3
    step_tol: float = 1e-13
    pilot_iters: int = 30

    def __post_init__(self):
        if not self.s_margin > 1.0:
            raise InvalidInputError("s_margin must be > 1")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not self.objective_tol > 0:
            raise InvalidInputError("objective_tol must be > 0")
        if self.init not in ("identity", "random", "warm", "spectral"):
            raise InvalidInputError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class FixedPointReport:
    """Outcome of one fixed-point alignment run."""

    transform: TransformPair
    iterations: int
    objective_trace: np.ndarray
    criticality_residual: float
    converged: bool
    s_used: float = 0.0
    s_min: float = 0.0
    map_sigma_min_trace: np.ndarray = field(default_factory=lambda: np.empty(0))


def _check_basis(v, metric, name):
    v = matcore.as_matrix(v, name)
    gram = v.conj().T @ v if metric is None else v.conj().T @ metric @ v
    err = matcore.frobenius(gram - np.eye(v.shape[1]))
    if err > 1e-6 * max(1.0, np.sqrt(v.shape[1])):
        raise InvalidBasisError(f"{name} violates metric-orthonormality (deviation {err:.3e})")
    return v


def _basis_correlation(vi, vj, metric):
    if metric is None:
        return vi.conj().T @ vj
    return vi.conj().T @ metric @ vj


def subspace_angles(vi, vj, metric=None):
    """Principal angles between the column spaces of two orthonormal bases.

    Three steps: form the correlation R = Vi* M Vj, take its SVD
    R = X diag(sigma) Y^T, and read the angles off as arccos(sigma) with
    sigma clamped to [0, 1]. The canonical vector pairs are
    (Vi x_l, Vj y_l).
    """
    vi = _check_basis(vi, metric, "Vi")
    vj = _check_basis(vj, metric, "Vj")
    if vi.shape != vj.shape:
        raise InvalidInputError("bases must share N and k")
    r = _basis_correlation(vi, vj, metric)
    x, sigma, yh = matcore.svd(r)
    sigma_c = np.clip(sigma, 0.0, 1.0)
    angles = np.arccos(sigma_c)
    return SubspaceAngleResult(
        angles=angles,
        left_directions=x,
        right_directions=yh.conj().T,
        singular_values=sigma,
    )


def procrustes_transform(vi, vref, metric=None):
    """Orthogonal matrix minimizing || Vi Q - Vref || in the metric norm.

    The minimizer is the polar factor X Y^T of the SVD of the basis
    correlation. Complex bases are aligned with a *real* orthogonal factor
    (real and imaginary parts must not mix), computed from the real part of
    the correlation. A rank-deficient correlation makes the minimizer
    non-unique; an :class:`AmbiguousAlignmentWarning` is issued and the SVD
    factors are used anyway.
    """
    vi = _check_basis(vi, metric, "Vi")
    vref = _check_basis(vref, metric, "Vref")
    if vi.shape != vref.shape:
        raise InvalidInputError("bases must share N and k")
    r = _basis_correlation(vi, vref, metric)
    if np.iscomplexobj(r):
        r = np.real(r)
    x, sigma, yh = matcore.svd(r)
    if np.any(sigma < 1e-12):
        warnings.warn(
            "basis correlation rank-deficient; Procrustes alignment not unique",
            AmbiguousAlignmentWarning,
        )
    return x @ yh


DEFAULT_THETA_MAX = np.pi / 4


def truncation_length(angle_results, theta_max=DEFAULT_THETA_MAX):
    """Common truncation index: min over records of #(angles < theta_max).

    Returns 0 when some record shares no consistent direction with the
    reference; that is a valid, reportable outcome.
    """
    if not angle_results:
        raise InvalidInputError("need at least one angle result")
    lengths = [int(np.sum(res.angles < theta_max)) for res in angle_results]
    return min(lengths)


def truncate_rom(rom, alignment: SubspaceAngleResult, length, left_alignment=None):
    """Re-express a ROM in its canonical-direction basis and keep ``length`` directions.

    The right congruence factor is the canonical coefficient matrix of the
    record's basis (columns ordered by ascending angle); ``left_alignment``
    supplies an independent factor for the left basis, defaulting to the
    right one.
    """
    if not 1 <= length <= rom.k:
        raise InvalidInputError(f"truncation length {length} outside [1, {rom.k}]")
    q = alignment.left_directions[:, :length]
    z = (left_alignment or alignment).left_directions[:, :length]
    if np.iscomplexobj(q):
        q = np.real(q)
    if np.iscomplexobj(z):
        z = np.real(z)
    return apply_transform(rom, TransformPair(q, z))


# ---------------------------------------------------------------------------
# Fixed-point alignment for arbitrary meshes
# ---------------------------------------------------------------------------
#
# All functionals are expressed through a "realified" term list: each square
# slot contributes quadratic terms (w, Xi, X0) meaning w <Z^T Xi Q, X0>, and
# the input/output slots collapse into the constant matrices
#   FB = sum w Bi B0^T   (pairs with Z),  FG = sum w Gi^T G0  (pairs with Q).
# Complex slots appear as two real terms (real plane, imaginary plane), so
# transforms stay real orthogonal.


def _realify(m):
    if np.iscomplexobj(m):
        return [np.ascontiguousarray(m.real), np.ascontiguousarray(m.imag)]
    return [m]


def _alignment_terms(other, ref, w: DistanceWeights):
    if not other.same_shape(ref):
        raise InvalidInputError("ROMs must share order, k, inputs and outputs")
    if w.order != other.order:
        raise InvalidInputError("weights order does not match the ROMs")
    k = other.k
    quad = []
    fb = np.zeros((k, k))
    fg = np.zeros((k, k))
    for name, mi in other.slots():
        if name in w.excluded:
            continue
        weight = w[name]
        kind = SLOT_KIND[name]
        m0 = getattr(ref, name)
        for xi, x0 in zip(_realify(mi), _realify(m0)):
            if kind == "two_sided":
                quad.append((weight, xi, x0))
            elif kind == "left":
                fb += weight * xi @ x0.T
            elif kind == "right":
                fg += weight * xi.T @ x0
    return quad, fb, fg


def smin_galerkin(other, ref, w: DistanceWeights):
    """Spectral-norm bound below which the Galerkin shift s is not allowed.

    Equals ``sum_slots 2 w ||Xi||_2 ||X0||_2 + ||F||_2`` with F the combined
    input/output coupling matrix.
    """
    quad, fb, fg = _alignment_terms(other, ref, w)
    total = sum(2.0 * wt * matcore.spectral_norm(xi) * matcore.spectral_norm(x0) for wt, xi, x0 in quad)
    return total + matcore.spectral_norm(fb + fg)


def smin_petrov_galerkin(other, ref, w: DistanceWeights):
    """Petrov-Galerkin shift bound: single-sided slot terms plus max(F_B, F_G)."""
    quad, fb, fg = _alignment_terms(other, ref, w)
    total = sum(wt * matcore.spectral_norm(xi) * matcore.spectral_norm(x0) for wt, xi, x0 in quad)
    return total + max(matcore.spectral_norm(fb), matcore.spectral_norm(fg))


def _objective_galerkin(quad, f, q):
    total = float(np.sum(f * q))
    for wt, xi, x0 in quad:
        total += wt * float(np.sum((q.T @ xi @ q) * x0))
    return total


def _objective_pg(quad, fb, fg, q, z):
    total = float(np.sum(fb * z)) + float(np.sum(fg * q))
    for wt, xi, x0 in quad:
        total += wt * float(np.sum((z.T @ xi @ q) * x0))
    return total


def _map_galerkin(quad, f, q, s):
    m = s * q + f
    for wt, xi, x0 in quad:
        m = m + wt * (xi @ q @ x0.T + xi.T @ q @ x0)
    return m


def _maps_pg(quad, fb, fg, q, z, s):
    mq = s * q + fg
    mz = s * z + fb
    for wt, xi, x0 in quad:
        mq = mq + wt * (xi.T @ z @ x0)
        mz = mz + wt * (xi @ q @ x0.T)
    return mq, mz


def _polar(m):
    u, sigma, vh = matcore.svd(m)
    return u @ vh, float(sigma[-1]) if sigma.size else 0.0


def _asym_residual(q, rhs):
    qr = q.T @ rhs
    asym = 0.5 * (qr - qr.T)
    return matcore.frobenius(asym) / max(1.0, matcore.frobenius(rhs))


def criticality_residual_galerkin(q, other, ref, w: DistanceWeights):
    """Normalized asymmetry of Q^T R(Q); zero exactly at critical points.

    R(Q) is the first-order optimality right-hand side
    ``sum w (Xi Q X0^T + Xi^T Q X0) + F``; a critical point satisfies
    Q S = R(Q) with S symmetric, so the residual measures how far
    Q^T R(Q) is from symmetric.
    """
    quad, fb, fg = _alignment_terms(other, ref, w)
    rhs = _map_galerkin(quad, fb + fg, q, 0.0)
    return _asym_residual(q, rhs)


def criticality_residual_petrov_galerkin(q, z, other, ref, w: DistanceWeights):
    """Worst of the two Petrov-Galerkin criticality residuals."""
    quad, fb, fg = _alignment_terms(other, ref, w)
    rq, rz = _maps_pg(quad, fb, fg, q, z, 0.0)
    return max(_asym_residual(q, rq), _asym_residual(z, rz))


def _sign_vectors(k, objective_of_signs, cap=8):
    """Best joint sign vector: exhaustive for small k, greedy flips otherwise."""
    if k <= cap:
        best_d, best_j = None, -np.inf
        for mask in range(2**k):
            d = np.array([1.0 if not mask >> i & 1 else -1.0 for i in range(k)])
            j = objective_of_signs(d)
            if j > best_j:
                best_d, best_j = d, j
        return best_d
    d = np.ones(k)
    best_j = objective_of_signs(d)
    improved = True
    while improved:
        improved = False
        for i in range(k):
            d[i] = -d[i]
            j = objective_of_signs(d)
            if j > best_j:
                best_j = j
                improved = True
            else:
                d[i] = -d[i]
    return d


def _spectral_candidates(quad, objective, petrov):
    """Initial transforms matching the SVD factors of each square slot.

    For a slot pair (Xi, X0) sharing singular values (true whenever Xi is
    an orthogonal congruence of X0), Q = Vx D V0^T and Z = Ux D U0^T give
    Z^T Xi Q = X0 for every sign matrix D; the full objective selects D.
    """
    candidates = []
    for _, xi, x0 in quad:
        try:
            ux, _, vxh = matcore.svd(xi)
            u0, _, v0h = matcore.svd(x0)
        except InvalidInputError:
            continue
        vx, v0 = vxh.T, v0h.T
        if petrov:

            def build(d, ux=ux, u0=u0, vx=vx, v0=v0):
                return vx @ (d[:, None] * v0.T), ux @ (d[:, None] * u0.T)

            d = _sign_vectors(xi.shape[0], lambda d: objective(*build(d)))
            candidates.append(build(d))
        else:
            for left, right in ((vx, v0), (ux, u0)):

                def build(d, left=left, right=right):
                    q = left @ (d[:, None] * right.T)
                    return q, q

                d = _sign_vectors(xi.shape[0], lambda d: objective(*build(d)))
                candidates.append(build(d))
    return candidates


def _initial_candidates(k, opts, quad, fb, fg, objective, petrov):
    eye = np.eye(k)
    if opts.init == "identity":
        return [(eye, eye)]
    if opts.init == "random":
        rng = np.random.default_rng(opts.seed)
        q0 = matcore.random_orthogonal(k, rng)
        z0 = matcore.random_orthogonal(k, rng) if petrov else q0
        return [(q0, z0)]
    rng = np.random.default_rng(opts.seed)
    candidates = [(eye, eye)]
    for _ in range(8):
        q0 = matcore.random_orthogonal(k, rng)
        z0 = matcore.random_orthogonal(k, rng) if petrov else q0
        candidates.append((q0, z0))
    if opts.init == "warm":
        # best of identity and the random starts by initial objective
        return [max(candidates, key=lambda qz: objective(*qz))]
    # spectral: SVD-matching starts per slot plus polar factors of the
    # input/output couplings, all refined by pilot iterations
    candidates.extend(_spectral_candidates(quad, objective, petrov))
    qf, _ = _polar(fg + np.finfo(float).tiny * np.eye(k))
    zf, _ = _polar(fb + np.finfo(float).tiny * np.eye(k))
    candidates.append((qf, zf) if petrov else (qf, qf))
    if not petrov:
        candidates.append((zf, zf))
    return candidates


def _run_fixed_point(k, opts, s_min, objective, step, q0=None, z0=None,
                     quad=None, fb=None, fg=None):
    """Shared driver: polar iteration with stagnation stopping rules."""
    s = opts.s_margin * s_min
    if q0 is not None:
        q = q0
        z = z0 if z0 is not None else q0
    else:
        candidates = _initial_candidates(k, opts, quad, fb, fg, objective, step.petrov)
        if len(candidates) == 1:
            q, z = candidates[0]
        else:
            scored = []
            for qc, zc in candidates:
                for _ in range(opts.pilot_iters):
                    qc, zc, _sig = step(qc, zc, s)
                scored.append((objective(qc, zc), qc, zc))
            _, q, z = max(scored, key=lambda t: t[0])
    trace = [objective(q, z)]
    sigma_min_trace = []
    converged = False
    iterations = 0
    stagnant = 0
    for j in range(opts.max_iters):
        q_new, z_new, sigma_min = step(q, z, s)
        iterations = j + 1
        sigma_min_trace.append(sigma_min)
        j_new = objective(q_new, z_new)
        trace.append(j_new)
        step_norm = matcore.frobenius(q_new - q) + matcore.frobenius(z_new - z)
        rel_change = abs(j_new - trace[-2]) / max(1.0, abs(j_new))
        q, z = q_new, z_new
        if step_norm <= opts.step_tol:
            converged = True
            break
        stagnant = stagnant + 1 if rel_change <= opts.objective_tol else 0
        if stagnant >= opts.stagnation_runs:
            converged = True
            break
    return q, z, np.asarray(trace), np.asarray(sigma_min_trace), iterations, converged, s


def fixed_point_galerkin(other, ref, w=None, opts=None):
    """Align ``other`` to ``ref`` with a single orthogonal transform (Q = Z).

    Iterates Q <- polar(M_s(Q)) where M_s is the shifted affine map of the
    correlation functional; monotone ascent holds for s above the spectral
    bound. Returns the best iterate when max_iters is hit without
    stagnation (``converged=False``).
    """
    w = w if w is not None else normalization_weights(ref)
    opts = opts or FixedPointOptions()
    quad, fb, fg = _alignment_terms(other, ref, w)
    f = fb + fg
    s_min = smin_galerkin(other, ref, w)

    def objective(q, z):
        return _objective_galerkin(quad, f, q)

    def step(q, z, s):
        m = _map_galerkin(quad, f, q, s)
        q_new, sigma_min = _polar(m)
        return q_new, q_new, sigma_min

    step.petrov = False
    q, z, trace, sig_trace, iters, converged, s = _run_fixed_point(
        other.k, opts, s_min, objective, step, quad=quad, fb=fb, fg=fg
    )
    residual = criticality_residual_galerkin(q, other, ref, w)
    return FixedPointReport(
        transform=TransformPair(q, q),
        iterations=iters,
        objective_trace=trace,
        criticality_residual=residual,
        converged=converged,
        s_used=s,
        s_min=s_min,
        map_sigma_min_trace=sig_trace,
    )


def fixed_point_petrov_galerkin(other, ref, w=None, opts=None, q0=None, z0=None):
    """Align ``other`` to ``ref`` with independent orthogonal (Q, Z).

    Each iterate updates Q and Z from the polar factors of their own shifted
    maps. ``q0``/``z0`` allow warm starts (e.g. from Procrustes factors).
    """
    w = w if w is not None else normalization_weights(ref)
    opts = opts or FixedPointOptions()
    quad, fb, fg = _alignment_terms(other, ref, w)
    s_min = smin_petrov_galerkin(other, ref, w)

    def objective(q, z):
        return _objective_pg(quad, fb, fg, q, z)

    def step(q, z, s):
        mq, mz = _maps_pg(quad, fb, fg, q, z, s)
        q_new, sq = _polar(mq)
        z_new, sz = _polar(mz)
        return q_new, z_new, min(sq, sz)

    step.petrov = True
    q, z, trace, sig_trace, iters, converged, s = _run_fixed_point(
        other.k, opts, s_min, objective, step, q0=q0, z0=z0, quad=quad, fb=fb, fg=fg
    )
    residual = criticality_residual_petrov_galerkin(q, z, other, ref, w)
    return FixedPointReport(
        transform=TransformPair(q, z),
        iterations=iters,
        objective_trace=trace,
        criticality_residual=residual,
        converged=converged,
        s_used=s,
        s_min=s_min,
        map_sigma_min_trace=sig_trace,
    )


# ---------------------------------------------------------------------------
# Database-wide application
# ---------------------------------------------------------------------------

CONSISTENCY_MODES = ("procrustes", "fixed_point_g", "fixed_point_pg")


@dataclass(frozen=True)
class ProcrustesReport:
    """Audit record of one common-mesh alignment."""

    transform: TransformPair
    angles: np.ndarray | None = None
    truncated_to: int | None = None


def default_reference_index(db):
    """Database point closest to the domain centroid."""
    center = db.domain.center()
    dists = [float(np.linalg.norm(rec.point - center)) for rec in db.records]
    return int(np.argmin(dists))


def _procrustes_record_transform(rec, ref_rec, theta_angles_out):
    rob = rec.rob
    ref = ref_rec.rob
    q = procrustes_transform(rob.V, ref.V, rob.metric)
    same_basis = np.array_equal(rob.V, rob.W)
    z = q if same_basis else procrustes_transform(rob.W, ref.W, rob.metric)
    angles = subspace_angles(rob.V, ref.V, rob.metric)
    theta_angles_out.append(angles)
    return q, z, angles


def enforce_database_consistency(db, mode, ref_index=None, opts=None, theta_max=None):
    """Transform every record of ``db`` into the reference's coordinates.

    ``mode`` is one of ``procrustes`` (requires stored bases on a common
    state dimension), ``fixed_point_g`` or ``fixed_point_pg`` (reduced
    operators only). The reference record is left untouched. Returns the
    transformed database and a per-record report mapping.

    In procrustes mode, ``theta_max`` additionally truncates all ROMs to
    the common count of directions with subspace angle below the threshold
    before the final alignment.
    """
    from . import dbstore  # local import to keep module layering acyclic

    if mode not in CONSISTENCY_MODES:
        raise InvalidInputError(f"unknown consistency mode {mode!r}")
    if ref_index is None:
        ref_index = default_reference_index(db)
    if not 0 <= ref_index < len(db.records):
        raise InvalidInputError(f"reference index {ref_index} out of range")
    if len(db.records) == 1:
        tag = dbstore.ConsistencyTag(mode=mode, reference_index=ref_index)
        rec = db.records[0].with_rom(
            db.records[0].rom, TransformPair.identity(db.records[0].rom.k)
        )
        return replace(db, records=(rec,), consistency=tag), {0: None}

    records = list(db.records)
    ref_rec = records[ref_index]
    reports = {}
    new_records = [None] * len(records)

    if mode == "procrustes":
        if any(rec.rob is None for rec in records):
            raise MeshMismatchError(
                "procrustes mode needs stored bases on every record; "
                "use a fixed-point mode for reduced operators only"
            )
        dims = {rec.rob.n for rec in records}
        if len(dims) != 1:
            raise MeshMismatchError(
                f"records have different state dimensions {sorted(dims)}; "
                "use a fixed-point mode"
            )
        work = records
        length = None
        if theta_max is not None:
            angle_results = [
                subspace_angles(rec.rob.V, ref_rec.rob.V, rec.rob.metric) for rec in records
            ]
            length = truncation_length(angle_results, theta_max)
            if length == 0:
                raise InvalidInputError(
                    "no direction consistent below theta_max; refine the database"
                )
            truncated = []
            for rec, res in zip(records, angle_results):
                x = np.real(res.left_directions[:, :length])
                rom_t = truncate_rom(rec.rom, res, length)
                rob_t = RobPair(rec.rob.V @ x, rec.rob.W @ x, rec.rob.metric)
                truncated.append(replace(rec, rom=rom_t, rob=rob_t))
            work = truncated
            ref_rec = work[ref_index]
        for i, rec in enumerate(work):
            if i == ref_index:
                t = TransformPair.identity(rec.rom.k)
                new_records[i] = replace(rec, transform_applied=t)
                reports[i] = ProcrustesReport(transform=t, truncated_to=length)
                continue
            angle_sink = []
            q, z, angles = _procrustes_record_transform(rec, ref_rec, angle_sink)
            t = TransformPair(q, z)
            rom_new = apply_transform(rec.rom, t)
            rob_new = RobPair(rec.rob.V @ q, rec.rob.W @ z, rec.rob.metric)
            new_records[i] = replace(rec, rom=rom_new, rob=rob_new, transform_applied=t)
            reports[i] = ProcrustesReport(transform=t, angles=angles.angles, truncated_to=length)
    else:
        w = normalization_weights(ref_rec.rom)
        align = fixed_point_galerkin if mode == "fixed_point_g" else fixed_point_petrov_galerkin
        if opts is None:
            # spectral multi-start: database alignment must not stall in a
            # local optimum just because records are far from the reference
            opts = FixedPointOptions(init="spectral")
        for i, rec in enumerate(records):
            if i == ref_index:
                t = TransformPair.identity(rec.rom.k)
                new_records[i] = replace(rec, transform_applied=t)
                reports[i] = None
                continue
            report = align(rec.rom, ref_rec.rom, w, opts)
            t = report.transform
            rom_new = apply_transform(rec.rom, t)
            rob_new = None
            if rec.rob is not None:
                rob_new = RobPair(rec.rob.V @ t.Q, rec.rob.W @ t.Z, rec.rob.metric)
            new_records[i] = replace(rec, rom=rom_new, rob=rob_new, transform_applied=t)
            reports[i] = report

    tag = dbstore.ConsistencyTag(mode=mode, reference_index=ref_index)
    new_db = replace(db, records=tuple(new_records), consistency=tag)
    return new_db, reports
