"""Persistence, partitioning and lookup of ROM databases.

Container format (documented with a worked example in the README): a single
file holding one line of human-readable JSON followed by a raw binary
payload.

* Header line: UTF-8 JSON object terminated by ``\\n`` with the format
  version, system kind, dimensions, scalar field, domain and sub-domain
  boxes, partition lists, interpolation plan/scheme, consistency
  provenance, per-record parameter coordinates and dof counts, plus the
  payload byte length and its CRC-32.
* Payload: little-endian IEEE-754 float64 scalars, records in order. Each
  record stores its parameter coordinates first, then its operator slots in
  the fixed slot order of the kind, row-major within a slot. Complex
  databases store every block twice: real plane then imaginary plane
  (coordinates carry a zero imaginary plane so the stored scalar count
  matches the entry-count formula exactly).

Databases are immutable after load/build; concurrent readers need no
locking and builders produce new snapshots.
"""

from __future__ import annotations

import itertools
import json
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientCoverageError,
    InvalidInputError,
    LoadError,
    OutOfDomainError,
)
from .manifold import ManifoldSpec, SchemeSpec, check_scheme_coverage, validate_plan
from .romtypes import (
    Box,
    FirstOrderROM,
    ParameterDomain,
    RomRecord,
    SecondOrderROM,
    rom_from_slots,
)

FORMAT_VERSION = 1

_KIND_TO_ORDER = {"first_order": "first", "second_order": "second"}


@dataclass(frozen=True)
class ConsistencyTag:
    """Provenance of the coordinate alignment applied to a database."""

    mode: str = "none"
    reference_index: int | None = None

    def to_dict(self):
        return {"mode": self.mode, "reference_index": self.reference_index}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("mode", "none"), d.get("reference_index"))


@dataclass(frozen=True)
class RomDatabase:
    """Ordered set of (parameter point, ROM) records plus query metadata."""

    kind: str
    records: tuple
    domain: ParameterDomain
    partition: tuple = ()
    plan: dict | None = None
    scheme: SchemeSpec | None = None
    consistency: ConsistencyTag = field(default_factory=ConsistencyTag)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.kind not in _KIND_TO_ORDER:
            raise InvalidInputError(f"unknown database kind {self.kind!r}")
        if not self.records:
            raise InvalidInputError("database needs at least one record")
        object.__setattr__(self, "records", tuple(self.records))
        order = _KIND_TO_ORDER[self.kind]
        first = self.records[0].rom
        for i, rec in enumerate(self.records):
            rom = rec.rom
            if rom.order != order:
                raise InvalidInputError(f"records[{i}] order {rom.order!r} does not match kind")
            if not rom.same_shape(first):
                raise InvalidInputError(f"records[{i}] shape differs from records[0]")
            if rom.scalar_field != first.scalar_field:
                raise InvalidInputError(f"records[{i}] scalar field differs from records[0]")
            if rec.point.size != self.domain.n_params:
                raise InvalidInputError(f"records[{i}] point dimension differs from domain")
            if not self.domain.contains(rec.point, atol=1e-12):
                raise InvalidInputError(f"records[{i}] point lies outside the domain box")
        if not self.partition:
            part = compute_partition(self.domain, [rec.point for rec in self.records])
            object.__setattr__(self, "partition", part)
        else:
            object.__setattr__(
                self, "partition", tuple(tuple(int(i) for i in sub) for sub in self.partition)
            )
        if len(self.partition) != len(self.domain.subdomains):
            raise InvalidInputError("partition length does not match sub-domain count")
        seen = set()
        for sub in self.partition:
            for i in sub:
                if not 0 <= i < len(self.records):
                    raise InvalidInputError(f"partition index {i} out of range")
                seen.add(i)
        if seen != set(range(len(self.records))):
            raise InvalidInputError("every record must belong to at least one sub-database")
        if self.plan is not None:
            validate_plan(self.plan, self.kind, self.scalar_field)

    @property
    def k(self):
        return self.records[0].rom.k

    @property
    def n_inputs(self):
        return self.records[0].rom.n_inputs

    @property
    def n_outputs(self):
        return self.records[0].rom.n_outputs

    @property
    def scalar_field(self):
        return self.records[0].rom.scalar_field

    @property
    def n_records(self):
        return len(self.records)

    def points(self):
        return np.stack([rec.point for rec in self.records])


def compute_partition(domain, points):
    """Assign each point to every sub-domain box containing it (closed boxes).

    Records on shared internal boundaries are duplicated into all adjacent
    sub-databases so each stencil is self-contained.
    """
    part = []
    for box in domain.subdomains:
        part.append(tuple(i for i, p in enumerate(points) if box.contains(p, atol=1e-12)))
    assigned = set(itertools.chain.from_iterable(part))
    missing = sorted(set(range(len(points))) - assigned)
    if missing:
        raise InvalidInputError(f"records {missing} fall outside every sub-domain")
    return tuple(part)


def make_database(records, domain=None, plan=None, scheme=None, consistency=None):
    """Assemble a database, deriving the domain box from the points if absent.

    Degenerate axes (all records sharing one coordinate) are widened by
    0.5 on each side so the box stays a valid domain.
    """
    records = tuple(records)
    if not records:
        raise InvalidInputError("need at least one record")
    order = records[0].rom.order
    kind = "first_order" if order == "first" else "second_order"
    if domain is None:
        pts = np.stack([rec.point for rec in records])
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        flat = hi - lo <= 0
        lo = np.where(flat, lo - 0.5, lo)
        hi = np.where(flat, hi + 0.5, hi)
        domain = ParameterDomain(lo, hi)
    return RomDatabase(
        kind=kind,
        records=records,
        domain=domain,
        plan=plan,
        scheme=scheme,
        consistency=consistency or ConsistencyTag(),
    )


# ---------------------------------------------------------------------------
# Entry counting
# ---------------------------------------------------------------------------


def expected_scalar_count(db):
    """Stored scalar count: N_DB (N_mu + c k^2 + k (N_i + N_o) + N_i N_o).

    ``c`` is 2 for first-order and 3 for second-order systems; the whole
    expression doubles for complex databases (two planes per block).
    """
    k = db.k
    n_i, n_o = db.n_inputs, db.n_outputs
    c = 2 if db.kind == "first_order" else 3
    per_record = db.domain.n_params + c * k * k + k * (n_i + n_o) + n_i * n_o
    factor = 2 if db.scalar_field == "complex" else 1
    return db.n_records * per_record * factor


# ---------------------------------------------------------------------------
# Save / load
# ---------------------------------------------------------------------------


def _blocks_of(record, n_params, complex_field):
    """Float blocks of one record in payload order."""
    coords = record.point.astype(np.float64)
    if complex_field:
        yield coords
        yield np.zeros_like(coords)
    else:
        yield coords
    for _, m in record.rom.slots():
        if complex_field:
            yield np.ascontiguousarray(m.real, dtype=np.float64).ravel()
            yield np.ascontiguousarray(m.imag, dtype=np.float64).ravel()
        else:
            yield np.ascontiguousarray(m, dtype=np.float64).ravel()


def _payload_bytes(db):
    complex_field = db.scalar_field == "complex"
    parts = []
    for rec in db.records:
        for block in _blocks_of(rec, db.domain.n_params, complex_field):
            parts.append(block.astype("<f8").tobytes())
    return b"".join(parts)


def _header_dict(db, payload):
    return {
        "format_version": db.format_version,
        "kind": db.kind,
        "k": db.k,
        "n_inputs": db.n_inputs,
        "n_outputs": db.n_outputs,
        "scalar_field": db.scalar_field,
        "n_params": db.domain.n_params,
        "n_records": db.n_records,
        "domain": {
            "lower": db.domain.lower.tolist(),
            "upper": db.domain.upper.tolist(),
            "subdomains": [
                {"lower": b.lower.tolist(), "upper": b.upper.tolist()}
                for b in db.domain.subdomains
            ],
        },
        "partition": [list(sub) for sub in db.partition],
        "plan": {key: spec.to_dict() for key, spec in db.plan.items()} if db.plan else None,
        "scheme": db.scheme.to_dict() if db.scheme else None,
        "consistency": db.consistency.to_dict(),
        "points": [rec.point.tolist() for rec in db.records],
        "hdm_dof_counts": [rec.hdm_dof_count for rec in db.records],
        "payload_length": len(payload),
        "payload_crc32": zlib.crc32(payload),
    }


def save(db, destination):
    """Write the database container; load(save(db)) is bit-exact."""
    payload = _payload_bytes(db)
    expected = expected_scalar_count(db)
    if len(payload) != expected * 8:
        raise InvalidInputError(
            f"entry-count invariant violated: payload holds {len(payload) // 8} scalars, "
            f"formula expects {expected}"
        )
    header = json.dumps(_header_dict(db, payload), sort_keys=True)
    data = header.encode("utf-8") + b"\n" + payload
    Path(destination).write_bytes(data)


def _slot_shapes(kind, k, n_in, n_out):
    if kind == "first_order":
        return [("E", (k, k)), ("A", (k, k)), ("B", (k, n_in)), ("G", (n_out, k)), ("H", (n_out, n_in))]
    return [
        ("M", (k, k)), ("C", (k, k)), ("K", (k, k)),
        ("B", (k, n_in)), ("G", (n_out, k)), ("H", (n_out, n_in)),
    ]


def load(source):
    """Read a database container, verifying version, checksum and shapes."""
    data = Path(source).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise LoadError("missing header terminator", field="header")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoadError(f"header is not valid JSON: {exc}", field="header") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise LoadError(f"unsupported format version {version}", field="format_version")
    payload = data[nl + 1 :]
    if len(payload) != header.get("payload_length"):
        raise LoadError(
            f"payload length {len(payload)} != declared {header.get('payload_length')}",
            field="payload_length",
        )
    if zlib.crc32(payload) != header.get("payload_crc32"):
        raise LoadError("payload checksum mismatch", field="payload_crc32")

    kind = header["kind"]
    if kind not in _KIND_TO_ORDER:
        raise LoadError(f"unknown kind {kind!r}", field="kind")
    k = int(header["k"])
    n_in = int(header["n_inputs"])
    n_out = int(header["n_outputs"])
    n_params = int(header["n_params"])
    n_records = int(header["n_records"])
    complex_field = header["scalar_field"] == "complex"

    scalars = np.frombuffer(payload, dtype="<f8")
    shapes = _slot_shapes(kind, k, n_in, n_out)
    per_record = n_params + sum(r * c for _, (r, c) in shapes)
    if complex_field:
        per_record *= 2
    if scalars.size != per_record * n_records:
        raise LoadError(
            f"payload holds {scalars.size} scalars, dimensions require {per_record * n_records}",
            field="payload",
        )

    records = []
    pos = 0

    def take(count):
        nonlocal pos
        block = scalars[pos : pos + count]
        pos += count
        return block

    for i in range(n_records):
        coords = take(n_params).copy()
        if complex_field:
            take(n_params)  # zero imaginary plane of the coordinates
        declared = np.asarray(header["points"][i], dtype=float)
        if declared.shape != coords.shape or not np.array_equal(declared, coords):
            raise LoadError(f"header/payload coordinate mismatch", field=f"points[{i}]")
        slots = {}
        for name, shape in shapes:
            count = shape[0] * shape[1]
            if complex_field:
                re = take(count).reshape(shape)
                im = take(count).reshape(shape)
                slots[name] = re + 1j * im
            else:
                slots[name] = take(count).reshape(shape).copy()
        try:
            rom = rom_from_slots(_KIND_TO_ORDER[kind], slots)
        except InvalidInputError as exc:
            raise LoadError(str(exc), field=f"records[{i}]") from exc
        dof = header["hdm_dof_counts"][i]
        records.append(RomRecord(point=coords, rom=rom, hdm_dof_count=dof))

    dom = header["domain"]
    try:
        domain = ParameterDomain(
            np.asarray(dom["lower"], dtype=float),
            np.asarray(dom["upper"], dtype=float),
            tuple(
                Box(np.asarray(b["lower"], dtype=float), np.asarray(b["upper"], dtype=float))
                for b in dom["subdomains"]
            ),
        )
    except InvalidInputError as exc:
        raise LoadError(str(exc), field="domain") from exc

    plan = None
    if header.get("plan"):
        plan = {key: ManifoldSpec.from_dict(d) for key, d in header["plan"].items()}
    scheme = SchemeSpec.from_dict(header["scheme"]) if header.get("scheme") else None

    try:
        db = RomDatabase(
            kind=kind,
            records=tuple(records),
            domain=domain,
            partition=tuple(tuple(sub) for sub in header["partition"]),
            plan=plan,
            scheme=scheme,
            consistency=ConsistencyTag.from_dict(header.get("consistency", {})),
            format_version=version,
        )
    except InvalidInputError as exc:
        raise LoadError(str(exc), field="database") from exc
    return db


def databases_equal(a, b):
    """Bit-exact equality of payload matrices and field-exact metadata."""
    if (
        a.kind != b.kind
        or a.n_records != b.n_records
        or a.scalar_field != b.scalar_field
        or a.consistency != b.consistency
        or a.scheme != b.scheme
        or a.plan != b.plan
        or len(a.partition) != len(b.partition)
        or a.partition != b.partition
    ):
        return False
    if not np.array_equal(a.domain.lower, b.domain.lower):
        return False
    if not np.array_equal(a.domain.upper, b.domain.upper):
        return False
    for ba, bb in zip(a.domain.subdomains, b.domain.subdomains):
        if not np.array_equal(ba.lower, bb.lower) or not np.array_equal(ba.upper, bb.upper):
            return False
    for ra, rb in zip(a.records, b.records):
        if not np.array_equal(ra.point, rb.point) or ra.hdm_dof_count != rb.hdm_dof_count:
            return False
        for (na, ma), (nb, mb) in zip(ra.rom.slots(), rb.rom.slots()):
            if na != nb or not np.array_equal(ma, mb):
                return False
    return True


# ---------------------------------------------------------------------------
# Partitioning and lookup
# ---------------------------------------------------------------------------


def locate_subdatabase(db, target):
    """Index of the sub-domain covering the target.

    Points on shared internal boundaries resolve to the lowest sub-domain
    index; targets outside the domain box raise :class:`OutOfDomainError`.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.size != db.domain.n_params:
        raise InvalidInputError(
            f"target has {target.size} coordinates, domain has {db.domain.n_params}"
        )
    if not db.domain.contains(target):
        raise OutOfDomainError(f"target {np.asarray(target).tolist()} outside the domain box")
    for s, box in enumerate(db.domain.subdomains):
        if box.contains(target):
            return s
    raise OutOfDomainError(f"target {np.asarray(target).tolist()} not covered by any sub-domain")


def partition(db, boundaries):
    """Split the domain into sub-domains at the given internal boundaries.

    ``boundaries`` maps axis index to a list of cut values strictly inside
    the domain box on that axis. Sub-domains are ordered with axis 0
    varying slowest. Records on internal boundaries are duplicated into
    every adjacent sub-database; a sub-database too small for the database
    scheme raises :class:`InsufficientCoverageError`.
    """
    if isinstance(boundaries, dict):
        per_axis = [list(boundaries.get(ax, [])) for ax in range(db.domain.n_params)]
    else:
        per_axis = [list(vals) for vals in boundaries]
        if len(per_axis) != db.domain.n_params:
            raise InvalidInputError("need one boundary list per axis")
    edges = []
    for ax, cuts in enumerate(per_axis):
        lo, hi = db.domain.lower[ax], db.domain.upper[ax]
        for c in cuts:
            if not lo < c < hi:
                raise InvalidInputError(
                    f"boundary {c} on axis {ax} not strictly inside ({lo}, {hi})"
                )
        edges.append(np.concatenate([[lo], np.sort(np.asarray(cuts, dtype=float)), [hi]]))
    cells_per_axis = [
        [(e[i], e[i + 1]) for i in range(len(e) - 1)] for e in edges
    ]
    boxes = []
    for combo in itertools.product(*cells_per_axis):
        lo = np.array([c[0] for c in combo])
        hi = np.array([c[1] for c in combo])
        boxes.append(Box(lo, hi))
    domain = ParameterDomain(db.domain.lower, db.domain.upper, tuple(boxes))
    points = [rec.point for rec in db.records]
    part = compute_partition(domain, points)
    effective_scheme = db.scheme or SchemeSpec()
    for s, sub in enumerate(part):
        if not sub:
            raise InsufficientCoverageError(f"sub-domain {s} holds no records")
        check_scheme_coverage(effective_scheme, np.stack([points[i] for i in sub]))
    return replace(db, domain=domain, partition=part)


def verify_database(db):
    """Invariant checks reported by the CLI ``inspect`` command."""
    payload = _payload_bytes(db)
    checks = {}
    checks["entry_count"] = len(payload) == expected_scalar_count(db) * 8
    in_box = all(
        db.domain.subdomains[s].contains(db.records[i].point, atol=1e-12)
        for s, sub in enumerate(db.partition)
        for i in sub
    )
    checks["partition_containment"] = in_box
    try:
        checks["locate_matches_assignment"] = all(
            i in db.partition[locate_subdatabase(db, rec.point)]
            for i, rec in enumerate(db.records)
        )
    except OutOfDomainError:
        checks["locate_matches_assignment"] = False
    return checks
