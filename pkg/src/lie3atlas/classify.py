"""Quasi-isometry classes, the relation lattice between catalog groups, and the Jordan criterion.

Relation facts are stored as an explicit edge list with citation strings.
``MadeIsometric`` edges are never composed: that relation is not
transitive.  The weaker levels (bi-Lipschitz, QI-homeomorphic, QI) are
equivalence relations and are closed by connected components.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import catalog
from .catalog import DISC_THRESHOLD, GroupSpec, format_spec, parse_spec
from .errors import NotApplicable, Unclassifiable

LAMBDA_RTOL = 1e-9


# -- class labels -------------------------------------------------------------


@dataclass(frozen=True)
class ClassLabel:
    """Row of the quasi-isometry classification table; ``param`` only for 7 and 11."""

    id: int
    param: float | None = None

    def __post_init__(self):
        if self.id not in range(1, 12):
            raise ValueError(f"class id must be in 1..11, got {self.id}")
        if self.id == 7:
            if self.param is None or not -1.0 <= self.param < 0.0:
                raise ValueError("class 7 needs lambda in [-1, 0)")
        elif self.id == 11:
            if self.param is None or not 0.0 < self.param < 1.0:
                raise ValueError("class 11 needs lambda in (0, 1)")
        elif self.param is not None:
            raise ValueError(f"class {self.id} takes no parameter")

    def same_class(self, other: "ClassLabel") -> bool:
        if self.id != other.id:
            return False
        if self.param is None:
            return True
        return _lam_equal(self.param, other.param)

    def __str__(self) -> str:
        return f"({self.id})" if self.param is None else f"({self.id}_{_fmt(self.param)})"

    def to_dict(self) -> dict:
        out = {"class": self.id}
        if self.param is not None:
            out["lambda"] = self.param
        return out


def _fmt(v: float) -> str:
    return catalog._fmt_float(v)


def _lam_equal(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=LAMBDA_RTOL, abs_tol=0.0)


# -- reduction of R^2 x|_A R ----------------------------------------------------


def _spectrum(A: np.ndarray):
    """``(tr, det, disc)`` of ``A`` scaled to unit spectral norm, and the scale."""
    A = np.asarray(A, dtype=float)
    scale = float(np.linalg.norm(A, 2))
    if scale == 0.0:
        return A, 0.0, 0.0, 0.0, 0.0
    a = A / scale
    tr = float(np.trace(a))
    det = float(np.linalg.det(a))
    return a, tr, det, tr * tr - 4.0 * det, scale


def reduce_semidirect(A) -> GroupSpec:
    """Named catalog family isomorphic to ``R^2 x|_A R``.

    Uses that ``A`` may be conjugated and multiplied by any nonzero real
    (reparametrize ``z``).  Thresholds on the normalized matrix follow the
    exponential: ``|disc| < 1e-9`` is a repeated eigenvalue and
    ``|Re| < 1e-9`` purely imaginary.
    """
    a, tr, det, disc, scale = _spectrum(A)
    if scale == 0.0 or np.max(np.abs(a)) < DISC_THRESHOLD:
        return GroupSpec("R3")
    if abs(disc) < DISC_THRESHOLD:
        mu = 0.5 * tr
        if abs(mu) < DISC_THRESHOLD:
            return GroupSpec("N3")
        if np.max(np.abs(a - mu * np.eye(2))) < DISC_THRESHOLD:
            return GroupSpec("Dlambda", lam=1.0)
        return GroupSpec("J")
    if disc < 0.0:
        re = 0.5 * tr
        im = 0.5 * math.sqrt(-disc)
        if abs(re) < DISC_THRESHOLD:
            return GroupSpec("SE2tilde")
        return GroupSpec("Clambda", lam=abs(re) / im)
    r = math.sqrt(disc)
    e1, e2 = 0.5 * (tr + r), 0.5 * (tr - r)
    big, small = (e1, e2) if abs(e1) >= abs(e2) else (e2, e1)
    if abs(small) < DISC_THRESHOLD:
        return GroupSpec("AffRxR")
    lam = small / big
    if abs(lam + 1.0) < DISC_THRESHOLD:
        lam = -1.0
    return GroupSpec("Dlambda", lam=lam)


def canonical(spec: GroupSpec) -> GroupSpec:
    """Isomorphism representative: ``SemidirectA`` is reduced to a named family."""
    if spec.family == "SemidirectA":
        return reduce_semidirect(spec.matrix)
    return spec


def isomorphic(a: GroupSpec, b: GroupSpec) -> bool:
    a, b = canonical(a), canonical(b)
    if a.family != b.family or a.k != b.k:
        return False
    if a.lam is None or b.lam is None:
        return a.lam is b.lam
    return _lam_equal(a.lam, b.lam)


_CLASS = {
    "T1": 1, "T2": 1, "T3": 1, "SU2": 1, "SO3": 1,
    "R1": 2, "RxT1": 2, "RxT2": 2,
    "R2": 3, "R2xT1": 3, "N3star": 3, "SE2k": 3,
    "R3": 4, "SE2tilde": 4,
    "N3": 5,
    "SL2tilde": 6, "AffRxR": 6,
    "AffR": 8, "AffRxT1": 8, "PSL2k": 8,
    "J": 9,
    "Clambda": 10,
}


def classify(spec: GroupSpec) -> ClassLabel:
    """Class of ``spec`` in the quasi-isometry table.

    Raises
    ------
    Unclassifiable
        if the family is not covered by the table.
    """
    spec = canonical(spec)
    fam = spec.family
    if fam == "Dlambda":
        lam = spec.lam
        if lam < 0.0:
            return ClassLabel(7, lam)
        if _lam_equal(lam, 1.0):
            return ClassLabel(10)
        return ClassLabel(11, lam)
    if fam in _CLASS:
        return ClassLabel(_CLASS[fam])
    raise Unclassifiable(f"no table row for {spec}")


_CLASS_META = {
    1: ("polynomial(0)", True, "n/a"),
    2: ("polynomial(1)", True, "n/a"),
    3: ("polynomial(2)", False, "n/a"),
    4: ("polynomial(3)", False, "n/a"),
    5: ("polynomial(4)", False, "n/a"),
    6: ("exponential", False, "n/a"),
    7: ("exponential", False, "n/a"),
    8: ("exponential", True, "S1"),
    9: ("exponential", True, "S2"),
    10: ("exponential", True, "S2"),
    11: ("exponential", True, "S2"),
}


def class_metadata(label: ClassLabel) -> dict:
    """Growth, hyperbolicity and visual boundary of a class.

    Classes (1) and (2) are bounded or quasi-isometric to a line, hence
    hyperbolic; their boundaries (empty, two points) are reported as n/a.
    """
    growth, hyp, bd = _CLASS_META[label.id]
    return {"growth": growth, "hyperbolic": hyp, "boundary": bd}


# -- relation lattice ---------------------------------------------------------


class Level(enum.IntEnum):
    NotQI = 0
    QI = 1
    QIHomeomorphic = 2
    BiLipschitz = 3
    MadeIsometric = 4
    Isomorphic = 5


@dataclass(frozen=True)
class RelationVerdict:
    level: Level
    citation: str

    def to_dict(self) -> dict:
        return {"level": self.level.name, "citation": self.citation}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# Predicates on canonical specs; each fact is (level, citation, pred_a, pred_b).
def _fam(*names):
    return lambda s: s.family in names


def _is_C(s):
    return s.family == "Clambda"


def _is_D1(s):
    return s.family == "Dlambda" and _lam_equal(s.lam, 1.0)


_FACTS = [
    # may be made isometric (stored verbatim, never composed)
    (Level.MadeIsometric, "Prop 2.2(1)", _fam("R3"), _fam("SE2tilde")),
    (Level.MadeIsometric, "Prop 2.2(2)", _fam("R2xT1"), _fam("SE2k")),
    (Level.MadeIsometric, "Prop 2.2(3)", _fam("SE2k"), _fam("SE2k")),
    (Level.MadeIsometric, "Prop 2.2(4)", _fam("SL2tilde"), _fam("AffRxR")),
    (Level.MadeIsometric, "Prop 2.2(5)", _fam("AffRxT1"), _fam("PSL2k")),
    (Level.MadeIsometric, "Prop 2.2(6)", _is_D1, _is_C),
    (Level.MadeIsometric, "Prop 2.2(7)", _is_C, _is_C),
    # bi-Lipschitz, not made isometric
    (Level.BiLipschitz, "Prop 2.7", _fam("PSL2k"), _fam("PSL2k")),
    # quasi-isometrically homeomorphic, not bi-Lipschitz
    (Level.QIHomeomorphic, "Prop 2.9(1)", _fam("R2xT1"), _fam("N3star")),
    (Level.QIHomeomorphic, "Prop 2.9(2)", _fam("SE2k"), _fam("N3star")),
    # quasi-isometric, not via a homeomorphism
    (Level.QI, "Prop 2.10(1)", _fam("T1", "T2", "T3", "SU2", "SO3"), _fam("T1", "T2", "T3", "SU2", "SO3")),
    (Level.QI, "Prop 2.10(2)", _fam("R1", "RxT1", "RxT2"), _fam("R1", "RxT1", "RxT2")),
    (Level.QI, "Prop 2.10(3)", _fam("R2"), _fam("R2xT1")),
    (Level.QI, "Prop 2.10(4)", _fam("AffR"), _fam("AffRxT1")),
    (Level.QI, "Prop 2.10(5)", _fam("R2"), _fam("N3star")),
    (Level.QI, "Prop 2.10(6)", _fam("R2"), _fam("SE2k")),
    (Level.QI, "Prop 2.10(7)", _fam("AffR"), _fam("PSL2k")),
]


def _direct_fact(a: GroupSpec, b: GroupSpec):
    """Strongest explicit fact between two non-isomorphic canonical specs."""
    best = None
    for level, cite, pa, pb in _FACTS:
        if (pa(a) and pb(b)) or (pa(b) and pb(a)):
            if best is None or level > best[0]:
                best = (level, cite)
    return best


def _representatives_for_closure(a: GroupSpec, b: GroupSpec) -> list:
    """Node set for the transitive closure: the representatives plus ``a`` and ``b``."""
    nodes = list(REPRESENTATIVE_SPECS)
    for s in (a, b):
        if not any(isomorphic(s, t) for t in nodes):
            nodes.append(s)
    return nodes


def _closure_path(a: GroupSpec, b: GroupSpec, level: Level):
    """Chain of facts at level >= ``level`` joining ``a`` and ``b`` (BFS), or ``None``."""
    nodes = _representatives_for_closure(a, b)
    ia = next(i for i, s in enumerate(nodes) if isomorphic(s, a))
    ib = next(i for i, s in enumerate(nodes) if isomorphic(s, b))
    prev = {ia: None}
    frontier = [ia]
    while frontier:
        nxt = []
        for i in frontier:
            for j, s in enumerate(nodes):
                if j in prev or isomorphic(nodes[i], s):
                    continue
                f = _direct_fact(nodes[i], s)
                if f is not None and f[0] >= level:
                    prev[j] = (i, f[1])
                    nxt.append(j)
        frontier = nxt
    if ib not in prev:
        return None
    cites = []
    j = ib
    while prev[j] is not None:
        i, c = prev[j]
        cites.append(c)
        j = i
    return list(reversed(cites))


def strongest_relation(a: GroupSpec, b: GroupSpec) -> RelationVerdict:
    """Strongest encoded relation between two catalog groups.

    Order: Isomorphic > MadeIsometric > BiLipschitz > QIHomeomorphic > QI >
    NotQI.  ``MadeIsometric`` only from an explicit fact; each weaker level
    also from a chain of facts of at least that level (made isometric implies
    bi-Lipschitz).  Same class with no chain gives QI by the table; distinct
    classes give NotQI.
    """
    ca, cb = canonical(a), canonical(b)
    if isomorphic(ca, cb):
        return RelationVerdict(Level.Isomorphic, "isomorphic")
    direct = _direct_fact(ca, cb)
    if direct is not None and direct[0] == Level.MadeIsometric:
        return RelationVerdict(*direct)
    for level in (Level.BiLipschitz, Level.QIHomeomorphic, Level.QI):
        if direct is not None and direct[0] >= level:
            return RelationVerdict(level, direct[1])
        chain = _closure_path(ca, cb, level)
        if chain is not None:
            return RelationVerdict(level, " + ".join(dict.fromkeys(chain)))
    la, lb = classify(ca), classify(cb)
    if la.same_class(lb):
        return RelationVerdict(Level.QI, "Theorem 1.2")
    return RelationVerdict(Level.NotQI, f"Theorem 1.2: {la} vs {lb}")


# -- Jordan scaling criterion ---------------------------------------------------


def _real_part_jordan_key(A):
    a, tr, det, disc, scale = _spectrum(A)
    ev = np.linalg.eigvals(np.asarray(A, dtype=float))
    if scale == 0.0 or not np.all(ev.real > 0.0):
        raise NotApplicable("Jordan criterion needs eigenvalues with positive real parts")
    if abs(disc) < DISC_THRESHOLD:
        mu = 0.5 * tr
        if np.max(np.abs(a - mu * np.eye(2))) < DISC_THRESHOLD:
            return ("diag", 1.0)
        return ("jordan", 1.0)
    if disc < 0.0:
        # a +- ib: the real part of the real Jordan block is a * I
        return ("diag", 1.0)
    r = math.sqrt(disc)
    e1, e2 = 0.5 * (tr + r), 0.5 * (tr - r)
    return ("diag", min(e1, e2) / max(e1, e2))


def jordan_scaling_equivalent(A, B) -> bool:
    """Whether ``A`` and ``s B`` have the same real-part Jordan form for some ``s > 0``.

    Compares scale-free invariants: eigenvalue ratio for a diagonal real
    part, or a nontrivial Jordan block.  Complex pairs ``a +- ib`` have real
    part ``a I``, so the rotation rate does not matter.

    Raises
    ------
    NotApplicable
        unless every eigenvalue of both matrices has positive real part.
    """
    ka = _real_part_jordan_key(A)
    kb = _real_part_jordan_key(B)
    return ka[0] == kb[0] and _lam_equal(ka[1], kb[1])


def rotation_ratio(A) -> float:
    """``|Im| / Re`` of the eigenvalues of ``A`` (0 for real spectra); diagnostic only."""
    ev = np.linalg.eigvals(np.asarray(A, dtype=float))
    i = int(np.argmax(np.abs(ev.imag)))
    return float(abs(ev[i].imag) / ev[i].real) if ev[i].real != 0 else math.inf


def sol_identification(m: float, n: float) -> GroupSpec:
    """``Sol(m, n)`` (``z`` acts by ``(e^{mz} x, e^{-nz} y)``) as ``D_{-n/m}``.

    Requires ``m >= n > 0``; ``m = n`` is ``D_{-1}``.
    """
    if not (m > 0 and n > 0 and m >= n):
        raise NotApplicable("need m >= n > 0")
    return GroupSpec("Dlambda", lam=-float(n) / float(m))


# -- full matrix --------------------------------------------------------------


REPRESENTATIVES = (
    "T^1", "T^2", "T^3", "SU2", "SO3",
    "R^1", "RxT1", "RxT2",
    "R^2", "R2xT1", "N3*", "SE2:k=1", "SE2:k=2", "SE2:k=3",
    "R^3", "SE2~",
    "N3",
    "SL2~", "AffRxR",
    "D:lambda=-1", "D:lambda=-0.5",
    "AffR", "AffRxT1", "PSL2:k=1", "PSL2:k=2", "PSL2:k=3",
    "J",
    "D:lambda=1", "C:lambda=0.5", "C:lambda=1", "C:lambda=2",
    "D:lambda=0.5", "D:lambda=0.25",
)
REPRESENTATIVE_SPECS = tuple(parse_spec(s) for s in REPRESENTATIVES)


@dataclass
class ClassificationMatrix:
    names: list
    labels: list
    verdicts: list  # verdicts[i][j]
    metadata: list

    def to_json(self) -> str:
        return json.dumps({
            "groups": [
                {"name": n, "label": str(l), **l.to_dict(), **m}
                for n, l, m in zip(self.names, self.labels, self.metadata)
            ],
            "relations": [[v.to_dict() for v in row] for row in self.verdicts],
        })

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "class", "growth", "hyperbolic", "boundary"] + self.names)
        for n, l, m, row in zip(self.names, self.labels, self.metadata, self.verdicts):
            w.writerow([n, str(l), m["growth"], m["hyperbolic"], m["boundary"]]
                       + [f"{v.level.name} [{v.citation}]" for v in row])
        return buf.getvalue()


def classification_matrix(names=REPRESENTATIVES) -> ClassificationMatrix:
    """Verdicts for every ordered pair of representatives, with per-class metadata."""
    specs = [parse_spec(n) for n in names]
    labels = [classify(s) for s in specs]
    n = len(specs)
    verdicts = [[None] * n for _ in range(n)]
    for i, j in itertools.combinations_with_replacement(range(n), 2):
        v = strongest_relation(specs[i], specs[j])
        verdicts[i][j] = verdicts[j][i] = v
    return ClassificationMatrix([format_spec(s) for s in specs], labels, verdicts,
                                [class_metadata(l) for l in labels])
