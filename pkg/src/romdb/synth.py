"""Desk-scale synthetic high-dimensional systems and ROM construction.

Parameterized mass-spring-damper chains (with parameter-dependent dof
counts, mimicking remeshing), a damped Helmholtz-style second-order
frequency-domain family, a stable first-order family with a controllable
destabilizing coupling, plus the basis builders (modal, POD, derivative
moment matching) and Galerkin/Petrov-Galerkin projection. Every pipeline
stage of the package is verifiable on these systems without any FEM/CFD
machinery.

Family specs are plain dataclasses mirrored one-to-one by the declarative
JSON config schema consumed by the CLI ``build`` command.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import dbstore, matcore
from .errors import (
    InvalidInputError,
    InvalidSpecError,
    PointBuildError,
    RankDeficiencyError,
    ResonanceError,
)
from .romtypes import (
    FirstOrderROM,
    ParameterDomain,
    RobPair,
    RomRecord,
    SecondOrderROM,
    as_parameter_point,
)


@dataclass(frozen=True)
class HdmSystem:
    """A full-order LTI system before reduction."""

    order: str  # "first" | "second"
    operators: dict
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", as_parameter_point(self.point))
        names = ("E", "A", "B", "G", "H") if self.order == "first" else ("M", "C", "K", "B", "G", "H")
        ops = {k: matcore.as_matrix(v, k) for k, v in self.operators.items()}
        if set(ops) != set(names):
            raise InvalidInputError(f"operators must be exactly {names}")
        n = ops[names[0]].shape[0]
        for name in names[: 2 if self.order == "first" else 3]:
            if ops[name].shape != (n, n):
                raise InvalidInputError(f"{name} must be {n}x{n}")
        if ops["B"].shape[0] != n or ops["G"].shape[1] != n:
            raise InvalidInputError("B/G dimensions inconsistent with state size")
        if ops["H"].shape != (ops["G"].shape[0], ops["B"].shape[1]):
            raise InvalidInputError("H dimensions inconsistent with B and G")
        object.__setattr__(self, "operators", ops)

    @property
    def n(self):
        key = "E" if self.order == "first" else "M"
        return self.operators[key].shape[0]

    @property
    def n_inputs(self):
        return self.operators["B"].shape[1]

    @property
    def n_outputs(self):
        return self.operators["G"].shape[0]

    def op(self, name):
        return self.operators[name]


def _dof_count(base, slope, p):
    n = int(round(base * (1.0 + slope * p[0])))
    if n < 4:
        raise InvalidSpecError(f"dof law gives N={n} < 4 at p={list(p)}")
    return n


def _sensitivity_scale(coeffs, p):
    s = 1.0
    for c, pc in zip(coeffs, p):
        s += c * pc
    if s <= 0:
        raise InvalidSpecError("parameter sensitivity drove a scale non-positive")
    return s


def _fraction_dofs(fractions, n):
    return [min(n - 1, max(0, int(round(f * (n - 1))))) for f in fractions]


def _chain_matrices(n, mass_scale, stiff_scale, mass_taper, stiff_taper):
    ramp = np.arange(n) / max(n - 1, 1)
    masses = mass_scale * (1.0 + mass_taper * ramp)
    springs = stiff_scale * (1.0 + stiff_taper * ramp)
    m = np.diag(masses)
    k = np.zeros((n, n))
    k[0, 0] += springs[0]  # ground spring at the clamped end
    for j in range(1, n):
        k[j - 1, j - 1] += springs[j]
        k[j, j] += springs[j]
        k[j - 1, j] -= springs[j]
        k[j, j - 1] -= springs[j]
    return m, k


def _selection_matrices(n, forced, observed):
    fd = _fraction_dofs(forced, n)
    od = _fraction_dofs(observed, n)
    b = np.zeros((n, len(fd)))
    for i, d in enumerate(fd):
        b[d, i] = 1.0
    g = np.zeros((len(od), n))
    for i, d in enumerate(od):
        g[i, d] = 1.0
    h = np.zeros((len(od), len(fd)))
    return b, g, h


@dataclass(frozen=True)
class MsdChainSpec:
    """Mass-spring-damper chain with smooth parameter laws.

    ``dof_slope`` makes the dof count N(p) = round(base_dofs (1 + slope p0))
    vary across the domain, the desk-scale analog of remeshing per
    parameter value. Damping is the Rayleigh combination a M + b K. Input
    and output dofs are addressed by fractional position so they survive
    dof-count changes.
    """

    base_dofs: int = 40
    dof_slope: float = 0.0
    mass_scale: float = 1.0
    stiffness_scale: float = 1.0
    mass_coeffs: tuple = ()
    stiff_coeffs: tuple = ()
    mass_taper: float = 0.0
    stiff_taper: float = 0.0
    rayleigh: tuple = (0.01, 0.01)
    forced: tuple = (1.0,)
    observed: tuple = (1.0,)


def make_msd_chain(p, spec: MsdChainSpec):
    """Second-order chain HDM at one parameter point (M SPD, K sym PSD)."""
    p = as_parameter_point(p)
    n = _dof_count(spec.base_dofs, spec.dof_slope, p)
    m, k = _chain_matrices(
        n,
        spec.mass_scale * _sensitivity_scale(spec.mass_coeffs, p),
        spec.stiffness_scale * _sensitivity_scale(spec.stiff_coeffs, p),
        spec.mass_taper,
        spec.stiff_taper,
    )
    a, b_coef = spec.rayleigh
    c = a * m + b_coef * k
    b, g, h = _selection_matrices(n, spec.forced, spec.observed)
    return HdmSystem("second", {"M": m, "C": c, "K": k, "B": b, "G": g, "H": h}, p)


@dataclass(frozen=True)
class HelmholtzChainSpec:
    """Damped Helmholtz-style chain in the frequency domain.

    Structural loss makes K complex symmetric (Im K = loss_factor K plus a
    far-end absorber), and ``im_mass_factor`` > 0 makes M complex with an
    SPD imaginary plane, mirroring absorbing-layer discretizations where
    both operators go complex and non-Hermitian.
    """

    base_dofs: int = 400
    dof_slope: float = 0.0
    mass_scale: float = 1.0
    stiffness_scale: float = 1.0
    mass_coeffs: tuple = ()
    stiff_coeffs: tuple = ()
    mass_taper: float = 0.0
    stiff_taper: float = 0.0
    loss_factor: float = 0.02
    absorber: float = 0.5
    im_mass_factor: float = 0.0
    forced: tuple = (0.0,)
    observed: tuple = (1.0,)


def make_helmholtz_chain(p, spec: HelmholtzChainSpec):
    """Second-order frequency-domain HDM (K - kappa^2 M) w = f, complex-valued."""
    p = as_parameter_point(p)
    n = _dof_count(spec.base_dofs, spec.dof_slope, p)
    m, k = _chain_matrices(
        n,
        spec.mass_scale * _sensitivity_scale(spec.mass_coeffs, p),
        spec.stiffness_scale * _sensitivity_scale(spec.stiff_coeffs, p),
        spec.mass_taper,
        spec.stiff_taper,
    )
    k_im = spec.loss_factor * k
    k_im[-1, -1] += spec.absorber
    k_c = k + 1j * k_im
    m_c = m + 1j * (spec.im_mass_factor * m) if spec.im_mass_factor > 0 else m
    b, g, h = _selection_matrices(n, spec.forced, spec.observed)
    c = np.zeros((n, n))
    return HdmSystem(
        "second",
        {"M": m_c, "C": c, "K": k_c, "B": b.astype(complex), "G": g.astype(complex), "H": h.astype(complex)},
        p,
    )


@dataclass(frozen=True)
class FirstOrderFamilySpec:
    """Stable first-order family with a destabilizing coupling knob.

    A(p, q) = A0(p) + q * coupling_strength * A1 where A0 = -(SPD) + skew
    keeps every pencil eigenvalue in the left half plane at q = 0 and A1 is
    a fixed positive diagonal profile that drives modes across the
    imaginary axis as q grows. ``q_axis`` names the parameter axis acting
    as q (None pins q at 0).
    """

    dofs: int = 60
    dof_slope: float = 0.0
    stiff_coeffs: tuple = ()
    stiff_taper: float = 0.2
    skew_strength: float = 0.5
    q_axis: int | None = None
    coupling_strength: float = 1.0
    e_coeffs: tuple = ()
    e_coupling: float = 0.125


def make_first_order(p, spec: FirstOrderFamilySpec):
    """First-order HDM with E SPD and A stable by construction at q = 0."""
    p = as_parameter_point(p)
    n = _dof_count(spec.dofs, spec.dof_slope, p)
    _, s = _chain_matrices(n, 1.0, _sensitivity_scale(spec.stiff_coeffs, p), 0.0, spec.stiff_taper)
    e = np.eye(n) * _sensitivity_scale(spec.e_coeffs, p)
    e += spec.e_coupling * (np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    skew = np.zeros((n, n))
    skew += np.diag(np.full(n - 1, spec.skew_strength), 1)
    skew -= np.diag(np.full(n - 1, spec.skew_strength), -1)
    a = -s + skew
    if spec.q_axis is not None:
        q = p[spec.q_axis]
        profile = np.linspace(1.5, 0.5, n)
        a = a + q * spec.coupling_strength * np.diag(profile)
    b, g, h = _selection_matrices(n, (1.0,), (1.0,))
    return HdmSystem("first", {"E": e, "A": a, "B": b, "G": g, "H": h}, p)


# ---------------------------------------------------------------------------
# Reduced-order bases
# ---------------------------------------------------------------------------


def _orientation_reference(n):
    # fixed, smooth, non-symmetric weighting of the dof positions; sign
    # conventions projected onto it stay continuous under small parameter
    # changes (an argmax convention flips whenever two peaks nearly tie)
    x = np.arange(n) / max(n - 1, 1)
    return 1.0 + 0.618 * x + 0.382 * x * x


def _orient_columns(v):
    ref = _orientation_reference(v.shape[0])
    out = v.copy()
    for j in range(v.shape[1]):
        proj = np.vdot(ref, out[:, j])
        if np.abs(proj) > 1e-12 * np.linalg.norm(out[:, j]):
            out[:, j] *= np.conj(proj) / np.abs(proj)
        else:
            lead = np.argmax(np.abs(out[:, j]))
            pivot = out[lead, j]
            if np.abs(pivot) > 0:
                out[:, j] *= np.conj(pivot) / np.abs(pivot)
    if not np.iscomplexobj(v):
        out = np.real(out)
    return out


def modal_rob(h: HdmSystem, k):
    """First k mass-orthonormalized natural modes (V = W).

    Complex systems use the real parts of (K, M); each eigenvector's
    orientation is fixed by projection onto a fixed reference profile so
    nearby meshes give reproducible bases up to genuine subspace rotation.
    """
    if h.order != "second":
        raise InvalidInputError("modal basis needs a second-order system")
    if not 1 <= k <= h.n:
        raise InvalidInputError(f"k={k} outside [1, {h.n}]")
    m = np.real(h.op("M"))
    kk = np.real(h.op("K"))
    vals, vecs = scipy.linalg.eigh(matcore.symmetrize(kk), matcore.symmetrize(m))
    v = _orient_columns(vecs[:, :k])
    return RobPair(v, v, metric=m)


def pod_rob(h: HdmSystem, snapshots, k, metric=None):
    """Leading k left singular directions of the metric-weighted snapshots."""
    snapshots = matcore.as_matrix(snapshots, "snapshots")
    if snapshots.shape[1] < k:
        raise InvalidInputError(f"need at least {k} snapshots, got {snapshots.shape[1]}")
    if metric is None:
        weighted = snapshots
        l_factor = None
    else:
        l_factor = matcore.cholesky(metric)
        weighted = l_factor.conj().T @ snapshots
    u, s, _ = matcore.svd(weighted)
    rank = int(np.sum(s > 1e-12 * s[0])) if s.size else 0
    if rank < k:
        raise RankDeficiencyError(
            f"snapshots have numerical rank {rank} < k={k}", achievable=rank
        )
    u_k = _orient_columns(u[:, :k])
    if l_factor is not None:
        u_k = scipy.linalg.solve_triangular(l_factor.conj().T, u_k, lower=False)
    return RobPair(u_k, u_k, metric=metric)


@dataclass(frozen=True)
class DgpOptions:
    """Derivative moment-matching configuration.

    ``derivatives_per_point`` counts the 0-th derivative, so the basis
    dimension is len(wavenumbers) * derivatives_per_point.
    """

    wavenumbers: tuple
    derivatives_per_point: int = 8
    orthogonalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "wavenumbers", tuple(float(w) for w in self.wavenumbers))
        if not self.wavenumbers:
            raise InvalidInputError("need at least one interpolation wavenumber")
        if self.derivatives_per_point < 1:
            raise InvalidInputError("derivatives_per_point must be >= 1")

    @property
    def k(self):
        return len(self.wavenumbers) * self.derivatives_per_point


def dgp_rob(h: HdmSystem, opts: DgpOptions):
    """Basis spanning wavenumber derivatives of the frequency-domain solution.

    Solves (K - kappa^2 M) w = f and its differentiated forms; the j-th
    right-hand side is 2 kappa j M w^(j-1) + j (j-1) M w^(j-2) since the
    source carries no kappa dependence here. Columns are jointly
    orthonormalized.
    """
    if h.order != "second":
        raise InvalidInputError("derivative basis needs a second-order frequency-domain system")
    if opts.k > h.n:
        raise InvalidInputError(f"basis dimension {opts.k} exceeds state dimension {h.n}")
    kmat = h.op("K")
    mmat = h.op("M")
    f = h.op("B")[:, 0]
    columns = []
    for kappa in opts.wavenumbers:
        shifted = kmat - kappa**2 * mmat
        try:
            lu, piv = scipy.linalg.lu_factor(shifted)
        except scipy.linalg.LinAlgError as exc:
            raise ResonanceError(f"shifted operator singular at kappa={kappa}", location=kappa) from exc
        anorm = np.linalg.norm(shifted, 1)
        gecon = scipy.linalg.lapack.zgecon if np.iscomplexobj(shifted) else scipy.linalg.lapack.dgecon
        rcond, _ = gecon(lu, anorm)
        if not np.isfinite(rcond) or rcond < 1e-14:
            raise ResonanceError(f"shifted operator singular at kappa={kappa}", location=kappa)
        derivs = []
        for j in range(opts.derivatives_per_point):
            if j == 0:
                rhs = f.astype(complex) if np.iscomplexobj(shifted) else f.copy()
            else:
                rhs = 2.0 * kappa * j * (mmat @ derivs[j - 1])
                if j >= 2:
                    rhs = rhs + j * (j - 1) * (mmat @ derivs[j - 2])
            derivs.append(scipy.linalg.lu_solve((lu, piv), rhs))
        columns.extend(derivs)
    basis = np.stack(columns, axis=1)
    q, r = np.linalg.qr(basis)
    # positive real R diagonal: the unique continuous QR factor, so bases of
    # nearby parameter points never differ by spurious column sign/phase flips
    d = np.diag(r)
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    q = q * phase[None, :]
    return RobPair(q, q, metric=None)


def project(h: HdmSystem, basis: RobPair):
    """Galerkin/Petrov-Galerkin projection of the HDM onto the bases.

    Square operators become W* X V, inputs W* B, outputs G V; H is copied.
    Complex bases use the Hermitian inner product.
    """
    v, w = basis.V, basis.W
    if v.shape[0] != h.n:
        raise InvalidInputError(f"basis rows {v.shape[0]} do not match state dimension {h.n}")
    wh = w.conj().T
    ops = {}
    square = ("E", "A") if h.order == "first" else ("M", "C", "K")
    for name in square:
        ops[name] = wh @ h.op(name) @ v
    ops["B"] = wh @ h.op("B")
    ops["G"] = h.op("G") @ v
    ops["H"] = h.op("H").copy()
    cls = FirstOrderROM if h.order == "first" else SecondOrderROM
    return cls(**ops)


def hdm_frequency_response(h: HdmSystem, grid, u=None):
    """Direct full-order frequency sweep, the truth oracle for every ROM test.

    Returns (grid, outputs) with outputs of shape (n_grid, n_outputs).
    """
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if u is None:
        u = np.ones(h.n_inputs)
    u = np.asarray(u, dtype=complex).reshape(-1)
    outputs = np.zeros((grid.size, h.n_outputs), dtype=complex)
    b = h.op("B").astype(complex)
    g = h.op("G").astype(complex)
    hmat = h.op("H").astype(complex)
    for i, w in enumerate(grid):
        if h.order == "first":
            shifted = 1j * w * h.op("E") - h.op("A")
        else:
            shifted = -(w**2) * h.op("M") + 1j * w * h.op("C") + h.op("K")
        sol = scipy.linalg.lu_solve(scipy.linalg.lu_factor(shifted.astype(complex)), b @ u)
        outputs[i] = g @ sol + hmat @ u
    return grid, outputs


# ---------------------------------------------------------------------------
# Database construction
# ---------------------------------------------------------------------------

DEFAULT_POD_FREQUENCIES = tuple(np.linspace(0.3, 1.5, 8))


def _pod_snapshots(h, freqs):
    """Frequency-response solves on a fixed grid; real and imaginary parts
    become separate snapshot columns."""
    cols = []
    f = h.op("B")
    for w in freqs:
        if h.order == "first":
            shifted = 1j * w * h.op("E") - h.op("A")
        else:
            shifted = -(w**2) * h.op("M") + 1j * w * h.op("C") + h.op("K")
        sol = matcore.solve(shifted.astype(complex), f.astype(complex))
        cols.append(sol.real)
        cols.append(sol.imag)
    return np.hstack(cols)


def build_rob(h, method, k, dgp_opts=None, pod_freqs=None, metric="mass"):
    if method == "modal":
        return modal_rob(h, k)
    if method == "pod":
        freqs = pod_freqs if pod_freqs is not None else np.linspace(0.3, 1.5, max(2 * k, 8) // 2)
        snaps = _pod_snapshots(h, freqs)
        use_metric = None
        if metric == "mass" and h.order == "second" and not np.iscomplexobj(h.op("M")):
            use_metric = h.op("M")
        return pod_rob(h, snaps, k, metric=use_metric)
    if method == "dgp":
        opts = dgp_opts or DgpOptions(wavenumbers=(10.0, 20.0), derivatives_per_point=max(1, k // 2))
        return dgp_rob(h, opts)
    raise InvalidSpecError(f"unknown basis method {method!r}")


def build_database(builder, points, rob_method="modal", k=4, domain=None,
                   dgp_opts=None, pod_freqs=None, keep_robs=True, metric="mass"):
    """One consistent-shape ROM record per parameter point.

    ``builder`` maps a parameter point to an :class:`HdmSystem`. The dof
    count of each underlying HDM is recorded; the result's consistency tag
    is ``none`` until an alignment pass runs.
    """
    records = []
    for p in points:
        p = as_parameter_point(p)
        try:
            h = builder(p)
            rob = build_rob(h, rob_method, k, dgp_opts=dgp_opts, pod_freqs=pod_freqs, metric=metric)
            rom = project(h, rob)
        except Exception as exc:  # noqa: BLE001 - identify the failing point
            raise PointBuildError(p, exc) from exc
        records.append(
            RomRecord(point=p, rom=rom, hdm_dof_count=h.n, rob=rob if keep_robs else None)
        )
    return dbstore.make_database(records, domain=domain)


# ---------------------------------------------------------------------------
# Declarative config (CLI `build`)
# ---------------------------------------------------------------------------

_FAMILY_SPECS = {
    "msd_chain": (MsdChainSpec, make_msd_chain),
    "helmholtz_chain": (HelmholtzChainSpec, make_helmholtz_chain),
    "first_order": (FirstOrderFamilySpec, make_first_order),
}

_TUPLE_FIELDS = {
    "mass_coeffs", "stiff_coeffs", "rayleigh", "forced", "observed", "e_coeffs", "wavenumbers",
}


def family_from_dict(cfg):
    """Builder callable from a config mapping {"kind": ..., params...}."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind not in _FAMILY_SPECS:
        raise InvalidSpecError(f"unknown family kind {kind!r}")
    spec_cls, fn = _FAMILY_SPECS[kind]
    for key in list(cfg):
        if key in _TUPLE_FIELDS and isinstance(cfg[key], list):
            cfg[key] = tuple(cfg[key])
    try:
        spec = spec_cls(**cfg)
    except TypeError as exc:
        raise InvalidSpecError(f"bad {kind} parameters: {exc}") from exc
    return lambda p: fn(p, spec)


def points_from_dict(cfg):
    """Parameter points from a config mapping.

    Either {"explicit": [[...], ...]} or a lattice
    {"lattice": {"axes": [[vals...], ...]}} or
    {"lattice": {"lower": [...], "upper": [...], "counts": [...]}}.
    """
    if "explicit" in cfg:
        return [np.asarray(p, dtype=float) for p in cfg["explicit"]]
    if "lattice" in cfg:
        lat = cfg["lattice"]
        if "axes" in lat:
            axes = [np.asarray(a, dtype=float) for a in lat["axes"]]
        else:
            axes = [
                np.linspace(lo, hi, int(n))
                for lo, hi, n in zip(lat["lower"], lat["upper"], lat["counts"])
            ]
        grids = np.meshgrid(*axes, indexing="ij")
        return [np.array(t) for t in zip(*(g.ravel() for g in grids))]
    raise InvalidSpecError("points config needs 'explicit' or 'lattice'")


def domain_from_dict(cfg):
    if cfg is None:
        return None
    return ParameterDomain(
        np.asarray(cfg["lower"], dtype=float), np.asarray(cfg["upper"], dtype=float)
    )
