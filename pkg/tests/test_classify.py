import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lie3atlas.catalog import GroupSpec, parse_spec
from lie3atlas.classify import (REPRESENTATIVES, ClassLabel, Level, classification_matrix, classify,
                                class_metadata, isomorphic, jordan_scaling_equivalent,
                                reduce_semidirect, sol_identification, strongest_relation)
from lie3atlas.errors import NotApplicable

# Rows of the quasi-isometry table, written out independently of the module.
TABLE = {
    1: ["T^1", "T^2", "T^3", "SU2", "SO3"],
    2: ["R^1", "RxT1", "RxT2"],
    3: ["R^2", "R2xT1", "N3*", "SE2:k=1", "SE2:k=2", "SE2:k=3", "SE2:k=7"],
    4: ["R^3", "SE2~"],
    5: ["N3"],
    6: ["SL2~", "AffRxR"],
    8: ["AffR", "AffRxT1", "PSL2:k=1", "PSL2:k=2", "PSL2:k=3"],
    9: ["J"],
    10: ["D:lambda=1", "C:lambda=0.5", "C:lambda=1", "C:lambda=2", "C:lambda=17"],
}


def rel(a, b):
    return strongest_relation(parse_spec(a), parse_spec(b))


@pytest.mark.parametrize("cls,name", [(c, n) for c, names in TABLE.items() for n in names])
def test_table_rows(cls, name):
    assert classify(parse_spec(name)) == ClassLabel(cls)


@pytest.mark.parametrize("lam", [-1.0, -0.75, -0.5, -0.1])
def test_class_seven(lam):
    assert classify(GroupSpec("Dlambda", lam=lam)) == ClassLabel(7, lam)


@pytest.mark.parametrize("lam", [0.1, 0.25, 0.5, 0.99])
def test_class_eleven(lam):
    assert classify(GroupSpec("Dlambda", lam=lam)) == ClassLabel(11, lam)


def test_label_validation():
    with pytest.raises(ValueError):
        ClassLabel(12)
    with pytest.raises(ValueError):
        ClassLabel(7)
    with pytest.raises(ValueError):
        ClassLabel(11, 1.0)
    assert str(ClassLabel(7, -0.5)) == "(7_-0.5)"
    assert ClassLabel(5).to_dict() == {"class": 5}


@pytest.mark.parametrize("A,name", [
    ([[0, 0], [0, 0]], "R^3"), ([[0, 0], [1, 0]], "N3"), ([[0, 3], [0, 0]], "N3"),
    ([[0, -2], [2, 0]], "SE2~"), ([[1, 0], [0, 0]], "AffRxR"), ([[0, 0], [0, -3]], "AffRxR"),
    ([[2, 1], [0, 2]], "J"), ([[3, 0], [0, 3]], "D:lambda=1"), ([[2, 0], [0, 1]], "D:lambda=0.5"),
    ([[-2, 0], [0, 1]], "D:lambda=-0.5"), ([[1, 0], [0, -1]], "D:lambda=-1"),
    ([[1, 2], [-2, 1]], "C:lambda=0.5"), ([[-4, 2], [-2, -4]], "C:lambda=2"),
])
def test_reduce_semidirect(A, name):
    assert isomorphic(reduce_semidirect(np.array(A, dtype=float)), parse_spec(name))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0.2, 5),
       st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_reduction_invariant_under_scaling_and_conjugation(entries, s, P):
    A = np.array(entries).reshape(2, 2)
    P = np.array(P).reshape(2, 2)
    if abs(P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]) < 0.3 or np.linalg.cond(P) > 50:
        return
    a = reduce_semidirect(A)
    B = s * P @ A @ np.linalg.inv(P)
    b = reduce_semidirect(B)
    # only compare away from the family boundaries
    ev = np.linalg.eigvals(A)
    gap = min(abs(ev[0] - ev[1]), min(abs(ev.real)), min(abs(ev.imag)) + 1)
    if gap > 1e-3 and np.abs(A).max() > 1e-3:
        assert a.family == b.family
        if a.lam is not None:
            assert b.lam == pytest.approx(a.lam, rel=1e-6, abs=1e-6)


def test_metadata():
    assert class_metadata(ClassLabel(5)) == {"growth": "polynomial(4)", "hyperbolic": False, "boundary": "n/a"}
    assert class_metadata(ClassLabel(8))["boundary"] == "S1"
    assert class_metadata(ClassLabel(7, -1.0))["hyperbolic"] is False
    for c in (9, 10):
        assert class_metadata(ClassLabel(c))["boundary"] == "S2"


# -- relation facts -------------------------------------------------------------------

MADE_ISOMETRIC = [
    ("R^3", "SE2~", "Prop 2.2(1)"),
    ("R2xT1", "SE2:k=2", "Prop 2.2(2)"),
    ("SE2:k=1", "SE2:k=3", "Prop 2.2(3)"),
    ("SL2~", "AffRxR", "Prop 2.2(4)"),
    ("AffRxT1", "PSL2:k=2", "Prop 2.2(5)"),
    ("D:lambda=1", "C:lambda=2", "Prop 2.2(6)"),
    ("C:lambda=0.5", "C:lambda=3", "Prop 2.2(7)"),
]
BILIPSCHITZ = [("PSL2:k=1", "PSL2:k=2", "Prop 2.7"), ("PSL2:k=3", "PSL2:k=5", "Prop 2.7")]
QI_HOMEO = [("R2xT1", "N3*", "Prop 2.9(1)"), ("SE2:k=4", "N3*", "Prop 2.9(2)")]
QI = [
    ("T^1", "SU2", "Prop 2.10(1)"), ("T^3", "SO3", "Prop 2.10(1)"), ("SU2", "SO3", "Prop 2.10(1)"),
    ("R^1", "RxT2", "Prop 2.10(2)"), ("RxT1", "RxT2", "Prop 2.10(2)"),
    ("R^2", "R2xT1", "Prop 2.10(3)"), ("AffR", "AffRxT1", "Prop 2.10(4)"),
    ("R^2", "N3*", "Prop 2.10(5)"), ("R^2", "SE2:k=2", "Prop 2.10(6)"), ("AffR", "PSL2:k=4", "Prop 2.10(7)"),
]


@pytest.mark.parametrize("a,b,cite", MADE_ISOMETRIC)
def test_made_isometric_facts(a, b, cite):
    for x, y in ((a, b), (b, a)):
        v = rel(x, y)
        assert (v.level, v.citation) == (Level.MadeIsometric, cite)


@pytest.mark.parametrize("level,facts", [(Level.BiLipschitz, BILIPSCHITZ),
                                         (Level.QIHomeomorphic, QI_HOMEO), (Level.QI, QI)])
def test_weaker_facts(level, facts):
    for a, b, cite in facts:
        v = rel(a, b)
        assert (v.level, v.citation) == (level, cite)


def test_non_transitivity_triple():
    assert rel("PSL2:k=1", "AffRxT1").level == Level.MadeIsometric
    assert rel("PSL2:k=2", "AffRxT1").level == Level.MadeIsometric
    v = rel("PSL2:k=1", "PSL2:k=2")
    assert v.level == Level.BiLipschitz and v.citation == "Prop 2.7"


def test_isomorphic_and_not_qi():
    assert rel("N3", "N3").level == Level.Isomorphic
    assert rel("J", "A:[[2,1],[0,2]]").level == Level.Isomorphic
    v = rel("R^2", "R^3")
    assert v.level == Level.NotQI and v.citation == "Theorem 1.2: (3) vs (4)"
    assert rel("D:lambda=-0.5", "D:lambda=-0.25").level == Level.NotQI
    assert rel("D:lambda=0.5", "D:lambda=0.25").level == Level.NotQI


def test_chains_between_facts():
    # no single fact joins these, but chains of facts do
    assert rel("SE2:k=1", "R^2").level == Level.QI
    assert rel("PSL2:k=1", "AffR").level == Level.QI
    assert rel("SL2~", "AffRxR").level == Level.MadeIsometric
    v = rel("AffRxT1", "AffR")
    assert v.level == Level.QI and v.citation == "Prop 2.10(4)"


def test_relation_json():
    out = json.loads(rel("D:lambda=1", "C:lambda=2").to_json())
    assert out == {"level": "MadeIsometric", "citation": "Prop 2.2(6)"}


# -- Jordan criterion ------------------------------------------------------------------


def test_jordan_d_lambda_grid():
    grid = np.linspace(0.05, 1.0, 20)
    for a in grid:
        for b in grid:
            assert jordan_scaling_equivalent(np.diag([1, a]), np.diag([1, b])) == (a == b)


def test_jordan_j_and_c():
    J = np.array([[1.0, 1], [0, 1]])
    for lam in np.linspace(0.05, 1.0, 20):
        assert not jordan_scaling_equivalent(J, np.diag([1, lam]))
    Cs = [np.array([[lam, 1], [-1, lam]]) for lam in (0.1, 0.5, 1, 2, 10)]
    for A in Cs:
        assert jordan_scaling_equivalent(A, np.eye(2))
        for B in Cs:
            assert jordan_scaling_equivalent(A, B)


def test_jordan_requires_positive_real_parts():
    with pytest.raises(NotApplicable):
        jordan_scaling_equivalent(np.diag([1, -1]), np.eye(2))
    with pytest.raises(NotApplicable):
        jordan_scaling_equivalent(np.array([[0.0, -1], [1, 0]]), np.eye(2))


def test_sol_identification():
    assert sol_identification(1, 1) == GroupSpec("Dlambda", lam=-1.0)
    assert sol_identification(2, 1) == GroupSpec("Dlambda", lam=-0.5)
    with pytest.raises(NotApplicable):
        sol_identification(1, 2)


# -- full matrix --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def matrix():
    return classification_matrix()


def test_matrix_shape_and_symmetry(matrix):
    n = len(REPRESENTATIVES)
    assert n >= 25 and [parse_spec(t) for t in matrix.names] == [parse_spec(t) for t in REPRESENTATIVES]
    for i in range(n):
        assert matrix.verdicts[i][i].level == Level.Isomorphic
        for j in range(n):
            assert matrix.verdicts[i][j] == matrix.verdicts[j][i]


def test_matrix_class_one_block(matrix):
    idx = [matrix.names.index(n) for n in TABLE[1]]
    for i in idx:
        for j in idx:
            if i != j:
                assert matrix.verdicts[i][j].level == Level.QI


def test_matrix_level_consistent_with_classes(matrix):
    for i, a in enumerate(matrix.labels):
        for j, b in enumerate(matrix.labels):
            qi = matrix.verdicts[i][j].level >= Level.QI
            assert qi == a.same_class(b)


def test_matrix_exports(matrix):
    rows = list(csv.reader(io.StringIO(matrix.to_csv())))
    assert rows[0][5:] == matrix.names
    assert len(rows) == len(REPRESENTATIVES) + 1
    data = json.loads(matrix.to_json())
    assert len(data["groups"]) == len(REPRESENTATIVES)
    assert data["groups"][REPRESENTATIVES.index("N3")]["class"] == 5
