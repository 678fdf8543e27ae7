"""Domain types for parametric LTI reduced-order models.

A reduced-order model (ROM) is a tuple of small dense operators: first order
``(E, A, B, G, H)`` or second order ``(M, C, K, B, G, H)``. Square slots are
expressed in reduced coordinates on both sides, ``B`` on the left only, ``G``
on the right only, and the feedthrough ``H`` carries no reduced coordinates
at all. The weighted squared-Frobenius distance between two ROMs and the
orthogonal congruence transforms acting on them are defined here; everything
about *finding* good transforms lives in :mod:`romdb.consistency`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import matcore
from .errors import InvalidInputError

FIRST_ORDER_SLOTS = ("E", "A", "B", "G", "H")
SECOND_ORDER_SLOTS = ("M", "C", "K", "B", "G", "H")

#: How each slot transforms under a congruence pair (Q, Z):
#: two_sided -> Z^T X Q, left -> Z^T X, right -> X Q, fixed -> X.
SLOT_KIND = {
    "E": "two_sided",
    "A": "two_sided",
    "M": "two_sided",
    "C": "two_sided",
    "K": "two_sided",
    "B": "left",
    "G": "right",
    "H": "fixed",
}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in parameter space."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise InvalidInputError("box bounds must be 1-D vectors of equal length")
        if np.any(self.lower > self.upper):
            raise InvalidInputError("box lower bound exceeds upper bound")

    def contains(self, point, atol=0.0):
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower - atol) and np.all(p <= self.upper + atol))

    def center(self):
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class ParameterDomain:
    """Box domain of the parameter vector, optionally split into sub-domains.

    Sub-domain boxes must have pairwise disjoint interiors and cover the
    domain box. When none are given the domain is a single sub-domain.
    """

    lower: np.ndarray
    upper: np.ndarray
    subdomains: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise InvalidInputError("domain bounds must be 1-D vectors of equal length")
        if self.lower.size < 1:
            raise InvalidInputError("domain needs at least one parameter axis")
        if not np.all(np.isfinite(self.lower)) or not np.all(np.isfinite(self.upper)):
            raise InvalidInputError("domain bounds must be finite")
        if np.any(self.lower >= self.upper):
            raise InvalidInputError("domain requires lower < upper componentwise")
        if not self.subdomains:
            object.__setattr__(self, "subdomains", (Box(self.lower, self.upper),))
        else:
            object.__setattr__(self, "subdomains", tuple(self.subdomains))

    @property
    def n_params(self):
        return self.lower.size

    def contains(self, point, atol=0.0):
        return Box(self.lower, self.upper).contains(point, atol=atol)

    def clamp(self, point):
        return np.minimum(np.maximum(np.asarray(point, dtype=float), self.lower), self.upper)

    def center(self):
        return 0.5 * (self.lower + self.upper)


def as_parameter_point(coords):
    """Validate a parameter point: finite 1-D float vector, length >= 1."""
    p = np.asarray(coords, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise InvalidInputError("parameter point must be a 1-D vector with at least one entry")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("parameter point contains non-finite coordinates")
    return p


class _RomBase:
    """Shared behavior of first- and second-order ROM tuples."""

    def __post_init__(self):
        for name in self.slot_names:
            object.__setattr__(self, name, matcore.as_matrix(getattr(self, name), name))
        k = getattr(self, self.slot_names[0]).shape[0]
        if k < 1:
            raise InvalidInputError("reduced dimension must be >= 1")
        n_in = self.B.shape[1]
        n_out = self.G.shape[0]
        expected = self._expected_shapes(k, n_in, n_out)
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise InvalidInputError(f"slot {name} has shape {got}, expected {shape}")
        any_complex = any(np.iscomplexobj(getattr(self, n)) for n in self.slot_names)
        if any_complex:
            for name in self.slot_names:
                object.__setattr__(
                    self, name, getattr(self, name).astype(np.complex128, copy=False)
                )

    @property
    def k(self):
        return getattr(self, self.slot_names[0]).shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.G.shape[0]

    @property
    def scalar_field(self):
        return "complex" if np.iscomplexobj(getattr(self, self.slot_names[0])) else "real"

    def slots(self):
        """Ordered (name, matrix) pairs."""
        return [(name, getattr(self, name)) for name in self.slot_names]

    def square_slot_names(self):
        return tuple(n for n in self.slot_names if SLOT_KIND[n] == "two_sided")

    def same_shape(self, other):
        return (
            self.order == getattr(other, "order", None)
            and self.k == other.k
            and self.n_inputs == other.n_inputs
            and self.n_outputs == other.n_outputs
        )


@dataclass(frozen=True)
class FirstOrderROM(_RomBase):
    """Reduced first-order system (E dq/dt = A q + B u, y = G q + H u)."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    H: np.ndarray

    order = "first"
    slot_names = FIRST_ORDER_SLOTS

    def _expected_shapes(self, k, n_in, n_out):
        return {
            "E": (k, k),
            "A": (k, k),
            "B": (k, n_in),
            "G": (n_out, k),
            "H": (n_out, n_in),
        }


@dataclass(frozen=True)
class SecondOrderROM(_RomBase):
    """Reduced second-order system (M q'' + C q' + K q = B u, y = G q + H u)."""

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    B: np.ndarray
    G: np.ndarray
    H: np.ndarray

    order = "second"
    slot_names = SECOND_ORDER_SLOTS

    def _expected_shapes(self, k, n_in, n_out):
        return {
            "M": (k, k),
            "C": (k, k),
            "K": (k, k),
            "B": (k, n_in),
            "G": (n_out, k),
            "H": (n_out, n_in),
        }


def rom_from_slots(order, slots):
    """Build a ROM of the given order from a name -> matrix mapping."""
    if order == "first":
        return FirstOrderROM(**{n: slots[n] for n in FIRST_ORDER_SLOTS})
    if order == "second":
        return SecondOrderROM(**{n: slots[n] for n in SECOND_ORDER_SLOTS})
    raise InvalidInputError(f"unknown ROM order {order!r}")


ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class TransformPair:
    """Congruence pair (Q, Z) with orthonormal columns.

    Square pairs are orthogonal; rectangular k-by-L pairs (L <= k) arise
    from truncation and still satisfy Q^T Q = I_L.
    """

    Q: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q", matcore.as_matrix(self.Q, "Q"))
        object.__setattr__(self, "Z", matcore.as_matrix(self.Z, "Z"))
        for name, m in (("Q", self.Q), ("Z", self.Z)):
            gram = m.conj().T @ m
            err = matcore.frobenius(gram - np.eye(m.shape[1]))
            if err > ORTHOGONALITY_TOL * max(1.0, np.sqrt(m.shape[1])):
                raise InvalidInputError(
                    f"{name} columns not orthonormal (deviation {err:.3e})"
                )

    @classmethod
    def identity(cls, k):
        eye = np.eye(k)
        return cls(eye, eye)

    def inverse(self):
        """Inverse pair (transposes); exact for square orthogonal pairs."""
        return TransformPair(self.Q.conj().T, self.Z.conj().T)


ROB_ORTHONORMALITY_TOL = 1e-8


@dataclass(frozen=True)
class RobPair:
    """Right/left reduced-order bases, orthonormal w.r.t. an SPD metric.

    ``metric`` is the N-by-N SPD weighting matrix; ``None`` means identity.
    Complex bases use the Hermitian inner product.
    """

    V: np.ndarray
    W: np.ndarray
    metric: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "V", matcore.as_matrix(self.V, "V"))
        object.__setattr__(self, "W", matcore.as_matrix(self.W, "W"))
        if self.metric is not None:
            object.__setattr__(self, "metric", matcore.as_matrix(self.metric, "metric"))
        if self.V.shape != self.W.shape:
            raise InvalidInputError("V and W must have the same shape")
        for name, m in (("V", self.V), ("W", self.W)):
            gram = self.weighted_gram(m, m)
            err = matcore.frobenius(gram - np.eye(m.shape[1]))
            if err > ROB_ORTHONORMALITY_TOL * max(1.0, np.sqrt(m.shape[1])):
                raise InvalidInputError(
                    f"{name} not metric-orthonormal (deviation {err:.3e})"
                )

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def k(self):
        return self.V.shape[1]

    def weighted_gram(self, a, b):
        if self.metric is None:
            return a.conj().T @ b
        return a.conj().T @ self.metric @ b


@dataclass(frozen=True)
class DistanceWeights:
    """Per-slot positive weights of the normalized ROM distance.

    ``excluded`` lists slots whose reference operator had zero Frobenius
    norm; their weight is 0 and the term is dropped from every functional.
    """

    order: str
    values: dict
    excluded: frozenset = frozenset()

    def __post_init__(self):
        names = FIRST_ORDER_SLOTS if self.order == "first" else SECOND_ORDER_SLOTS
        missing = set(names) - set(self.values)
        if missing:
            raise InvalidInputError(f"missing weights for slots {sorted(missing)}")
        for name, w in self.values.items():
            if name in self.excluded:
                if w != 0.0:
                    raise InvalidInputError(f"excluded slot {name} must carry weight 0")
            elif not (np.isfinite(w) and w > 0):
                raise InvalidInputError(f"weight for {name} must be positive and finite")

    def __getitem__(self, name):
        return self.values[name]

    @classmethod
    def uniform(cls, order, value=1.0):
        names = FIRST_ORDER_SLOTS if order == "first" else SECOND_ORDER_SLOTS
        return cls(order, {n: value for n in names})


def normalization_weights(ref):
    """Weights 1 / ||X0||_F^2 per slot of the reference ROM.

    A slot with zero Frobenius norm gets weight 0 and is flagged in
    ``excluded`` so distance terms can skip it.
    """
    values = {}
    excluded = set()
    for name, m in ref.slots():
        norm2 = matcore.frobenius(m) ** 2
        if norm2 == 0.0:
            values[name] = 0.0
            excluded.add(name)
        else:
            values[name] = 1.0 / norm2
    return DistanceWeights(ref.order, values, frozenset(excluded))


@dataclass(frozen=True)
class RomRecord:
    """One database entry: a parameter point and its ROM.

    ``rob`` is kept only in memory (persistence stores reduced operators);
    ``transform_applied`` records the congruence used during consistency
    enforcement.
    """

    point: np.ndarray
    rom: FirstOrderROM | SecondOrderROM
    hdm_dof_count: int | None = None
    transform_applied: TransformPair | None = None
    rob: RobPair | None = None

    def __post_init__(self):
        object.__setattr__(self, "point", as_parameter_point(self.point))

    def with_rom(self, rom, transform=None):
        return replace(self, rom=rom, transform_applied=transform)


def apply_transform(rom, t: TransformPair):
    """Congruence-transform a ROM: square slots Z^T X Q, B -> Z^T B, G -> G Q.

    The feedthrough H carries no reduced coordinates and is never touched.
    Rectangular pairs (k-by-L) produce a truncated ROM of dimension L.
    """
    if t.Q.shape[0] != rom.k or t.Z.shape[0] != rom.k:
        raise InvalidInputError(
            f"transform rows {t.Q.shape[0]} do not match reduced dimension {rom.k}"
        )
    if t.Q.shape[1] != t.Z.shape[1]:
        raise InvalidInputError("Q and Z must map to the same reduced dimension")
    out = {}
    for name, m in rom.slots():
        kind = SLOT_KIND[name]
        if kind == "two_sided":
            out[name] = t.Z.conj().T @ m @ t.Q
        elif kind == "left":
            out[name] = t.Z.conj().T @ m
        elif kind == "right":
            out[name] = m @ t.Q
        else:
            out[name] = m
    return rom_from_slots(rom.order, out)


def _slot_sq_norm(diff):
    # Complex entries contribute |re|^2 + |im|^2, i.e. the complex
    # squared Frobenius norm; real and imaginary parts are never mixed.
    return float(np.sum(np.abs(diff) ** 2))


def rom_distance(a, b, w: DistanceWeights):
    """Weighted squared-Frobenius distance between two same-shape ROMs."""
    if not a.same_shape(b):
        raise InvalidInputError("ROMs must share order, k, inputs and outputs")
    if w.order != a.order:
        raise InvalidInputError("weights order does not match the ROMs")
    total = 0.0
    for name, m in a.slots():
        if name in w.excluded:
            continue
        total += w[name] * _slot_sq_norm(m - getattr(b, name))
    return total


def equivalence_class_distance(ref, other, t: TransformPair, w: DistanceWeights):
    """Distance from ``ref`` to the representative ``t`` picks in C(other)."""
    return rom_distance(apply_transform(other, t), ref, w)
