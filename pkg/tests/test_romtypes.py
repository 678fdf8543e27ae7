import numpy as np
import pytest

from romdb import matcore, romtypes
from romdb.errors import InvalidInputError
from romdb.romtypes import (
    DistanceWeights,
    FirstOrderROM,
    ParameterDomain,
    SecondOrderROM,
    TransformPair,
    apply_transform,
    equivalence_class_distance,
    normalization_weights,
    rom_distance,
)


def random_first_order(rng, k=4, n_in=2, n_out=3, complex_field=False):
    def mat(*shape):
        m = rng.standard_normal(shape)
        if complex_field:
            m = m + 1j * rng.standard_normal(shape)
        return m

    return FirstOrderROM(mat(k, k), mat(k, k), mat(k, n_in), mat(n_out, k), mat(n_out, n_in))


def random_second_order(rng, k=4, n_in=2, n_out=3):
    m = rng.standard_normal
    return SecondOrderROM(m((k, k)), m((k, k)), m((k, k)), m((k, n_in)), m((n_out, k)), m((n_out, n_in)))


class TestParameterDomain:
    def test_basic(self):
        dom = ParameterDomain([0.0, 0.0], [1.0, 2.0])
        assert dom.n_params == 2
        assert dom.contains([0.5, 1.0])
        assert not dom.contains([1.5, 1.0])
        assert np.allclose(dom.clamp([2.0, -1.0]), [1.0, 0.0])

    def test_degenerate_rejected(self):
        with pytest.raises(InvalidInputError):
            ParameterDomain([0.0, 1.0], [1.0, 1.0])


class TestApplyTransform:
    def test_identity(self):
        rng = np.random.default_rng(0)
        rom = random_first_order(rng)
        out = apply_transform(rom, TransformPair.identity(rom.k))
        for (_, a), (_, b) in zip(out.slots(), rom.slots()):
            assert np.array_equal(a, b)

    def test_inverse_pair_recovers(self):
        rng = np.random.default_rng(1)
        rom = random_first_order(rng)
        q = matcore.random_orthogonal(4, rng)
        z = matcore.random_orthogonal(4, rng)
        t = TransformPair(q, z)
        back = apply_transform(apply_transform(rom, t), t.inverse())
        for (_, a), (_, b) in zip(back.slots(), rom.slots()):
            assert np.linalg.norm(a - b) <= 1e-12 * max(np.linalg.norm(b), 1.0)

    def test_norm_preservation(self):
        # orthogonal congruence preserves Frobenius norms of square slots
        rng = np.random.default_rng(2)
        rom = random_first_order(rng, k=4)
        t = TransformPair(matcore.random_orthogonal(4, rng), matcore.random_orthogonal(4, rng))
        out = apply_transform(rom, t)
        for name in ("E", "A"):
            assert np.isclose(
                np.linalg.norm(getattr(out, name)), np.linalg.norm(getattr(rom, name)),
                rtol=1e-12,
            )

    def test_norm_preservation_second_order(self):
        rng = np.random.default_rng(3)
        rom = random_second_order(rng, k=5)
        t = TransformPair(matcore.random_orthogonal(5, rng), matcore.random_orthogonal(5, rng))
        out = apply_transform(rom, t)
        for name in ("M", "C", "K"):
            assert np.isclose(
                np.linalg.norm(getattr(out, name)), np.linalg.norm(getattr(rom, name)),
                rtol=1e-12,
            )

    def test_composition(self):
        rng = np.random.default_rng(4)
        rom = random_first_order(rng)
        t1 = TransformPair(matcore.random_orthogonal(4, rng), matcore.random_orthogonal(4, rng))
        t2 = TransformPair(matcore.random_orthogonal(4, rng), matcore.random_orthogonal(4, rng))
        chained = apply_transform(apply_transform(rom, t1), t2)
        combined = apply_transform(rom, TransformPair(t1.Q @ t2.Q, t1.Z @ t2.Z))
        for (_, a), (_, b) in zip(chained.slots(), combined.slots()):
            assert np.linalg.norm(a - b) <= 1e-12 * max(np.linalg.norm(b), 1.0)

    def test_h_untouched(self):
        rng = np.random.default_rng(5)
        rom = random_first_order(rng)
        t = TransformPair(matcore.random_orthogonal(4, rng), matcore.random_orthogonal(4, rng))
        assert np.array_equal(apply_transform(rom, t).H, rom.H)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(6)
        rom = random_first_order(rng, k=4)
        with pytest.raises(InvalidInputError):
            apply_transform(rom, TransformPair.identity(3))

    def test_orthogonality_enforced(self):
        with pytest.raises(InvalidInputError):
            TransformPair(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))


class TestNormalizationWeights:
    def test_scaled_identity(self):
        rng = np.random.default_rng(7)
        rom = random_first_order(rng, k=2)
        rom = FirstOrderROM(2.0 * np.eye(2), rom.A, rom.B, rom.G, rom.H)
        w = normalization_weights(rom)
        assert np.isclose(w["E"], 1.0 / 8.0)

    def test_unit_frobenius(self):
        e = np.eye(2) / np.sqrt(2.0)
        rom = FirstOrderROM(e, e, np.array([[1.0], [0.0]]), np.array([[0.0, 1.0]]), np.array([[1.0]]))
        w = normalization_weights(rom)
        assert all(np.isclose(w[name], 1.0) for name, _ in rom.slots())

    def test_zero_slot_excluded(self):
        rng = np.random.default_rng(8)
        rom = random_first_order(rng)
        rom = FirstOrderROM(rom.E, rom.A, rom.B, rom.G, np.zeros_like(rom.H))
        w = normalization_weights(rom)
        assert w["H"] == 0.0
        assert "H" in w.excluded


class TestRomDistance:
    def test_self_zero(self):
        rng = np.random.default_rng(9)
        rom = random_first_order(rng)
        w = DistanceWeights.uniform("first")
        assert rom_distance(rom, rom, w) == 0.0

    def test_single_term(self):
        rng = np.random.default_rng(10)
        a = random_first_order(rng)
        delta = rng.standard_normal((4, 4))
        delta *= 3.0 / np.linalg.norm(delta)
        b = FirstOrderROM(a.E + delta, a.A, a.B, a.G, a.H)
        w = DistanceWeights.uniform("first")
        assert np.isclose(rom_distance(a, b, w), 9.0)

    def test_resummation_oracle(self):
        rng = np.random.default_rng(11)
        a = random_first_order(rng)
        b = random_first_order(rng)
        w = normalization_weights(a)
        expected = sum(
            w[name] * np.sum(np.abs(getattr(a, name) - getattr(b, name)) ** 2)
            for name, _ in a.slots()
        )
        assert np.isclose(rom_distance(a, b, w), expected, rtol=1e-13)

    def test_symmetry(self):
        rng = np.random.default_rng(12)
        a, b = random_first_order(rng), random_first_order(rng)
        w = DistanceWeights.uniform("first")
        assert np.isclose(rom_distance(a, b, w), rom_distance(b, a, w), rtol=1e-14)

    def test_complex_distance_sums_planes(self):
        rng = np.random.default_rng(13)
        a = random_first_order(rng, complex_field=True)
        b = random_first_order(rng, complex_field=True)
        w = DistanceWeights.uniform("first")
        expected = sum(
            np.sum((getattr(a, n).real - getattr(b, n).real) ** 2)
            + np.sum((getattr(a, n).imag - getattr(b, n).imag) ** 2)
            for n, _ in a.slots()
        )
        assert np.isclose(rom_distance(a, b, w), expected, rtol=1e-13)

    def test_triangle_inequality_on_sqrt(self):
        rng = np.random.default_rng(14)
        w = DistanceWeights.uniform("first")
        for _ in range(1000):
            a, b, c = (random_first_order(rng, k=3, n_in=1, n_out=1) for _ in range(3))
            dab = np.sqrt(rom_distance(a, b, w))
            dbc = np.sqrt(rom_distance(b, c, w))
            dac = np.sqrt(rom_distance(a, c, w))
            assert dac <= dab + dbc + 1e-10

    def test_shape_mismatch(self):
        rng = np.random.default_rng(15)
        with pytest.raises(InvalidInputError):
            rom_distance(
                random_first_order(rng, k=3), random_first_order(rng, k=4),
                DistanceWeights.uniform("first"),
            )


class TestEquivalenceClassDistance:
    def test_identity_zero(self):
        rng = np.random.default_rng(16)
        rom = random_first_order(rng)
        w = normalization_weights(rom)
        assert equivalence_class_distance(rom, rom, TransformPair.identity(4), w) == 0.0

    def test_exact_inverse(self):
        rng = np.random.default_rng(17)
        ref = random_first_order(rng)
        q0 = matcore.random_orthogonal(4, rng)
        z0 = matcore.random_orthogonal(4, rng)
        other = apply_transform(ref, TransformPair(q0, z0))
        w = normalization_weights(ref)
        d = equivalence_class_distance(ref, other, TransformPair(q0.T, z0.T), w)
        assert d <= 1e-20

    def test_compositional_oracle(self):
        rng = np.random.default_rng(18)
        ref = random_first_order(rng)
        other = random_first_order(rng)
        t = TransformPair(matcore.random_orthogonal(4, rng), matcore.random_orthogonal(4, rng))
        w = normalization_weights(ref)
        expected = rom_distance(apply_transform(other, t), ref, w)
        assert np.isclose(equivalence_class_distance(ref, other, t, w), expected, rtol=1e-14)
