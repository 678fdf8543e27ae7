"""Shared fixture builders for the service, CLI and acceptance suites."""

import numpy as np

from romdb import consistency, dbstore, matcore
from romdb.manifold import SchemeSpec
from romdb.romtypes import (
    FirstOrderROM,
    ParameterDomain,
    RomRecord,
    SecondOrderROM,
    TransformPair,
    apply_transform,
)


def stability_rom(mu, q):
    """Closed-form two-rotor ROM family: mode crossing order depends on mu.

    Rotor 1 (frequency 1) destabilizes at q = 1/(1 + mu); rotor 2
    (frequency 2) at q = 1/(2 - mu). The orders swap at mu = 0.5.
    """
    a1 = -1.0 + q * (1.0 + mu)
    a2 = -1.0 + q * (2.0 - mu)
    a = np.zeros((4, 4))
    a[0, 0] = a[1, 1] = a1
    a[0, 1], a[1, 0] = -1.0, 1.0
    a[2, 2] = a[3, 3] = a2
    a[2, 3], a[3, 2] = -2.0, 2.0
    e = np.eye(4)
    b = np.array([[1.0], [0.0], [0.5 + mu], [0.0]])
    g = np.array([[1.0, 0.0, 1.0 - 0.3 * mu, 0.0]])
    h = np.zeros((1, 1))
    return FirstOrderROM(e, a, b, g, h)


def stability_database(mu_nodes=(0.0, 0.25, 0.5, 0.75, 1.0), q_nodes=(0.0, 0.75, 1.5), align=True):
    """Smooth 2-axis database with an eigenvalue crossing along axis 1."""
    records = [
        RomRecord(point=np.array([mu, q]), rom=stability_rom(mu, q))
        for mu in mu_nodes
        for q in q_nodes
    ]
    domain = ParameterDomain([min(mu_nodes), min(q_nodes)], [max(mu_nodes), max(q_nodes)])
    db = dbstore.make_database(records, domain=domain, scheme=SchemeSpec("lattice_multilinear"))
    if align:
        db, _ = consistency.enforce_database_consistency(db, "fixed_point_g", ref_index=0)
    return db


def scrambled_database(seed=0, order="first", k=4, complex_field=False, n_records=4):
    """Databases built by scrambling one reference ROM with random transforms."""
    rng = np.random.default_rng(seed)

    def mat(*shape):
        m = rng.standard_normal(shape)
        if complex_field:
            m = m + 1j * rng.standard_normal(shape)
        return m

    if order == "first":
        ref = FirstOrderROM(mat(k, k), mat(k, k), mat(k, 2), mat(3, k), mat(3, 2))
    else:
        ref = SecondOrderROM(mat(k, k), mat(k, k), mat(k, k), mat(k, 2), mat(3, k), mat(3, 2))
    records = []
    for i in range(n_records):
        point = np.array([0.1 + 0.2 * i, 0.3 + 0.1 * (i % 2)])
        if i == 0:
            rom = ref
        else:
            t = TransformPair(matcore.random_orthogonal(k, rng), matcore.random_orthogonal(k, rng))
            rom = apply_transform(ref, t)
        records.append(RomRecord(point=point, rom=rom))
    return dbstore.make_database(records), ref
