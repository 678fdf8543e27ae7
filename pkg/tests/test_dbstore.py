import json

import numpy as np
import pytest

from romdb import dbstore
from romdb.dbstore import (
    ConsistencyTag,
    RomDatabase,
    databases_equal,
    expected_scalar_count,
    load,
    locate_subdatabase,
    make_database,
    partition,
    save,
    verify_database,
)
from romdb.errors import (
    InsufficientCoverageError,
    InvalidInputError,
    LoadError,
    OutOfDomainError,
)
from romdb.manifold import ManifoldSpec, SchemeSpec
from romdb.romtypes import (
    FirstOrderROM,
    ParameterDomain,
    RomRecord,
    SecondOrderROM,
)


def first_order_rom(rng, k=2, n_in=1, n_out=1, complex_field=False):
    def mat(*shape):
        m = rng.standard_normal(shape)
        if complex_field:
            m = m + 1j * rng.standard_normal(shape)
        return m

    return FirstOrderROM(mat(k, k), mat(k, k), mat(k, n_in), mat(n_out, k), mat(n_out, n_in))


def second_order_rom(rng, k=2, n_in=1, n_out=1, complex_field=False):
    def mat(*shape):
        m = rng.standard_normal(shape)
        if complex_field:
            m = m + 1j * rng.standard_normal(shape)
        return m

    return SecondOrderROM(mat(k, k), mat(k, k), mat(k, k), mat(k, n_in), mat(n_out, k), mat(n_out, n_in))


def small_db(rng, n_records=1, complex_field=False, order="first", k=2):
    maker = first_order_rom if order == "first" else second_order_rom
    records = [
        RomRecord(
            point=np.array([0.1 + 0.3 * i, 0.2 + 0.15 * (i % 2)]),
            rom=maker(rng, k=k, complex_field=complex_field),
        )
        for i in range(n_records)
    ]
    return make_database(records, domain=ParameterDomain([0.0, 0.0], [1.0, 1.0]))


class TestRoundTrip:
    def test_real_first_order(self, tmp_path):
        rng = np.random.default_rng(0)
        db = small_db(rng)
        assert expected_scalar_count(db) == 15  # 2 + 2*4 + 2*2 + 1
        path = tmp_path / "a.romdb"
        save(db, path)
        assert path.stat().st_size > 15 * 8
        back = load(path)
        assert databases_equal(db, back)

    def test_complex_second_order(self, tmp_path):
        rng = np.random.default_rng(1)
        db = small_db(rng, n_records=3, complex_field=True, order="second")
        per = 2 + 3 * 4 + 2 * 2 + 1
        assert expected_scalar_count(db) == 3 * per * 2
        path = tmp_path / "b.romdb"
        save(db, path)
        back = load(path)
        assert databases_equal(db, back)
        assert back.scalar_field == "complex"
        assert np.array_equal(back.records[1].rom.K.imag, db.records[1].rom.K.imag)

    def test_metadata_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        db = small_db(rng, n_records=4)
        db = partition(db, {0: [0.5]})
        plan = {name: ManifoldSpec("full") for name in ("E", "A", "B", "G", "H")}
        plan["E"] = ManifoldSpec("nonsingular", "tangent_log_exp", reference_index=1)
        from dataclasses import replace

        db = replace(
            db,
            plan=plan,
            scheme=SchemeSpec("mixed_per_axis", per_axis=("linear", "spline")),
            consistency=ConsistencyTag("fixed_point_pg", 2),
        )
        path = tmp_path / "c.romdb"
        save(db, path)
        back = load(path)
        assert databases_equal(db, back)
        assert back.plan["E"].reference_index == 1
        assert back.scheme.per_axis == ("linear", "spline")
        assert back.consistency == ConsistencyTag("fixed_point_pg", 2)

    def test_payload_length_matches_formula(self, tmp_path):
        rng = np.random.default_rng(3)
        db = small_db(rng, n_records=2, order="second")
        path = tmp_path / "d.romdb"
        save(db, path)
        raw = path.read_bytes()
        header = json.loads(raw[: raw.find(b"\n")])
        assert header["payload_length"] == expected_scalar_count(db) * 8

    def test_corrupt_payload_byte(self, tmp_path):
        rng = np.random.default_rng(4)
        db = small_db(rng)
        path = tmp_path / "e.romdb"
        save(db, path)
        raw = bytearray(path.read_bytes())
        raw[-3] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(LoadError) as err:
            load(path)
        assert err.value.field == "payload_crc32"

    def test_version_mismatch(self, tmp_path):
        rng = np.random.default_rng(5)
        db = small_db(rng)
        path = tmp_path / "f.romdb"
        save(db, path)
        raw = path.read_bytes()
        nl = raw.find(b"\n")
        header = json.loads(raw[:nl])
        header["format_version"] = 99
        path.write_bytes(json.dumps(header, sort_keys=True).encode() + raw[nl:])
        with pytest.raises(LoadError) as err:
            load(path)
        assert err.value.field == "format_version"

    def test_header_coordinate_mismatch(self, tmp_path):
        rng = np.random.default_rng(6)
        db = small_db(rng)
        path = tmp_path / "g.romdb"
        save(db, path)
        raw = path.read_bytes()
        nl = raw.find(b"\n")
        header = json.loads(raw[:nl])
        header["points"][0][0] += 1.0
        text = json.dumps(header, sort_keys=True).encode()
        body = raw[nl:]
        path.write_bytes(text + body)
        with pytest.raises(LoadError) as err:
            load(path)
        assert "points[0]" in str(err.value.field)


class TestValidation:
    def test_mixed_order_rejected(self):
        rng = np.random.default_rng(7)
        records = [
            RomRecord(point=np.array([0.1, 0.1]), rom=first_order_rom(rng)),
            RomRecord(point=np.array([0.2, 0.1]), rom=second_order_rom(rng)),
        ]
        with pytest.raises(InvalidInputError):
            RomDatabase(
                kind="first_order",
                records=records,
                domain=ParameterDomain([0, 0], [1, 1]),
            )

    def test_point_outside_domain_rejected(self):
        rng = np.random.default_rng(8)
        rec = RomRecord(point=np.array([2.0, 0.1]), rom=first_order_rom(rng))
        with pytest.raises(InvalidInputError):
            RomDatabase(kind="first_order", records=[rec], domain=ParameterDomain([0, 0], [1, 1]))

    def test_degenerate_axis_widened(self):
        rng = np.random.default_rng(9)
        records = [
            RomRecord(point=np.array([0.0, 0.5]), rom=first_order_rom(rng)),
            RomRecord(point=np.array([1.0, 0.5]), rom=first_order_rom(rng)),
        ]
        db = make_database(records)
        assert db.domain.lower[1] < 0.5 < db.domain.upper[1]


def flutter_style_db(rng):
    xs = [0.6, 0.75, 0.9, 0.95, 1.0, 1.05, 1.1]
    ys = [0.0, 50.0, 100.0]
    records = [
        RomRecord(point=np.array([x, y]), rom=first_order_rom(rng)) for x in xs for y in ys
    ]
    return make_database(records, domain=ParameterDomain([0.6, 0.0], [1.1, 100.0]))


class TestPartitionAndLocate:
    def test_single_subdomain(self):
        rng = np.random.default_rng(10)
        db = small_db(rng, n_records=3)
        assert len(db.partition) == 1
        assert db.partition[0] == (0, 1, 2)
        assert locate_subdatabase(db, [0.5, 0.5]) == 0

    def test_flutter_split_sizes(self):
        rng = np.random.default_rng(11)
        db = flutter_style_db(rng)
        assert db.n_records == 21
        out = partition(db, {0: [0.9, 1.0]})
        assert len(out.domain.subdomains) == 3
        assert [len(sub) for sub in out.partition] == [9, 9, 9]

    def test_locate_flutter_regimes(self):
        rng = np.random.default_rng(12)
        db = partition(flutter_style_db(rng), {0: [0.9, 1.0]})
        assert locate_subdatabase(db, [0.95, 10.0]) == 1
        assert locate_subdatabase(db, [0.9, 10.0]) == 0  # boundary tie -> lowest index
        assert locate_subdatabase(db, [1.05, 99.0]) == 2
        with pytest.raises(OutOfDomainError):
            locate_subdatabase(db, [1.2, 10.0])

    def test_boundary_must_be_inside(self):
        rng = np.random.default_rng(13)
        db = flutter_style_db(rng)
        with pytest.raises(InvalidInputError):
            partition(db, {0: [0.6]})
        with pytest.raises(InvalidInputError):
            partition(db, {0: [1.2]})

    def test_insufficient_coverage(self):
        rng = np.random.default_rng(14)
        db = flutter_style_db(rng)
        # a cut at 0.7 leaves the first sub-domain with a single x-column
        with pytest.raises(InsufficientCoverageError):
            partition(db, {0: [0.7]})

    def test_two_axis_partition_order(self):
        rng = np.random.default_rng(15)
        db = flutter_style_db(rng)
        out = partition(db, {0: [0.9], 1: [50.0]})
        # axis 0 varies slowest: boxes (x<0.9, y<50), (x<0.9, y>50), ...
        assert len(out.domain.subdomains) == 4
        assert out.domain.subdomains[0].upper[0] == 0.9
        assert out.domain.subdomains[0].upper[1] == 50.0
        assert out.domain.subdomains[1].upper[0] == 0.9
        assert out.domain.subdomains[1].lower[1] == 50.0

    def test_verify_checks(self, tmp_path):
        rng = np.random.default_rng(16)
        db = partition(flutter_style_db(rng), {0: [0.9, 1.0]})
        checks = verify_database(db)
        assert all(checks.values())

    def test_locate_matches_partition_for_stored_points(self):
        rng = np.random.default_rng(17)
        db = partition(flutter_style_db(rng), {0: [0.9, 1.0]})
        for i, rec in enumerate(db.records):
            s = locate_subdatabase(db, rec.point)
            assert i in db.partition[s]
