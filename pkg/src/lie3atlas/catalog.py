"""Group catalog: charts, group laws and Lie algebra data.

Every connected Lie group of dimension at most three is identified by a
:class:`GroupSpec`.  Chartable groups carry a global coordinate chart in
which the group law, inverse and identity are available in closed form.
All group-law functions are vectorized over leading axes, so ``p`` may be
a single point of shape ``(d,)`` or a stack of shape ``(..., d)``.

Chart conventions
-----------------
* ``R^n``, tori and their products: additive coordinates, torus
  coordinates have period 1.
* ``N3``/``N3*``: ``(x,y,z)(x',y',z') = (x+x', y+y', z+z'+2yx'-2xy')``;
  ``N3*`` is the quotient by ``Z=(0,0,1)`` (z has period 1).
* ``SE2~``/``SE2:k``: ``(x,y,theta)`` with rotation by ``theta``; theta has
  period ``2*pi*k`` on ``SE2:k``.
* semidirect products ``R^2 x|_A R`` (``J``, ``D``, ``C``, ``AffRxR``,
  ``AffRxT1``, ``A:[[..]]``): ``((x,y), z)`` acted on by ``exp(zA)``.
* ``AffR``: ``(x, z)`` with ``(x,z)(x',z') = (x + e^z x', z + z')``.
* ``SU2``/``SO3``: unit quaternions ``(w, x, y, z)``; ``SO3`` identifies
  ``q`` with ``-q`` (stored with a non-negative leading component).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import BadElement, BadSpec, NotACovering, UnsupportedChart

FAMILIES = (
    "R1", "R2", "R3", "T1", "T2", "T3", "RxT1", "RxT2", "R2xT1",
    "N3", "N3star", "SE2tilde", "SE2k", "AffR", "AffRxR", "AffRxT1",
    "J", "Dlambda", "Clambda", "SU2", "SO3", "SL2tilde", "PSL2k",
    "SemidirectA",
)

NON_CHARTABLE = frozenset({"SL2tilde", "PSL2k"})

# law kinds
_ABELIAN = "abelian"
_HEIS = "heis"
_SE2 = "se2"
_SEMI = "semidirect"
_AFFR = "affr"
_QUAT = "quat"

_KIND = {
    "R1": _ABELIAN, "R2": _ABELIAN, "R3": _ABELIAN,
    "T1": _ABELIAN, "T2": _ABELIAN, "T3": _ABELIAN,
    "RxT1": _ABELIAN, "RxT2": _ABELIAN, "R2xT1": _ABELIAN,
    "N3": _HEIS, "N3star": _HEIS,
    "SE2tilde": _SE2, "SE2k": _SE2,
    "AffR": _AFFR,
    "AffRxR": _SEMI, "AffRxT1": _SEMI, "J": _SEMI, "Dlambda": _SEMI,
    "Clambda": _SEMI, "SemidirectA": _SEMI,
    "SU2": _QUAT, "SO3": _QUAT,
}

_TWO_PI = 2.0 * math.pi

# Threshold on |tr(M)^2 - 4 det(M)| below which the repeated-eigenvalue
# branch of the 2x2 exponential is used.
DISC_THRESHOLD = 1e-9


@dataclass(frozen=True)
class Chart:
    """Coordinate chart of a group: dimension and per-coordinate periods."""

    dim: int
    periods: tuple = ()

    def __post_init__(self):
        if not self.periods:
            object.__setattr__(self, "periods", (None,) * self.dim)

    @property
    def periodic_axes(self):
        return tuple(i for i, p in enumerate(self.periods) if p is not None)


def _matrix_tuple(A):
    a = np.asarray(A, dtype=float)
    if a.shape != (2, 2):
        raise BadSpec(f"A must be 2x2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise BadSpec("A must have finite entries")
    return ((float(a[0, 0]), float(a[0, 1])), (float(a[1, 0]), float(a[1, 1])))


@dataclass(frozen=True)
class GroupSpec:
    """A catalog group: family tag plus its parameters.

    ``lam`` is required for ``Dlambda`` (in [-1,0) or (0,1]) and ``Clambda``
    (positive); ``k`` for ``SE2k`` and ``PSL2k`` (k >= 1); ``A`` for
    ``SemidirectA``.
    """

    family: str
    lam: float | None = None
    k: int | None = None
    A: tuple | None = field(default=None)

    def __post_init__(self):
        fam = self.family
        if fam not in FAMILIES:
            raise BadSpec(f"unknown family {fam!r}")
        if fam == "Dlambda":
            if self.lam is None:
                raise BadSpec("Dlambda requires lambda")
            lam = float(self.lam)
            if not (-1.0 <= lam < 0.0 or 0.0 < lam <= 1.0):
                raise BadSpec(f"Dlambda requires lambda in [-1,0) or (0,1], got {lam}")
            object.__setattr__(self, "lam", lam)
        elif fam == "Clambda":
            if self.lam is None or not float(self.lam) > 0.0:
                raise BadSpec("Clambda requires lambda > 0")
            object.__setattr__(self, "lam", float(self.lam))
        elif self.lam is not None:
            raise BadSpec(f"{fam} takes no lambda")
        if fam in ("SE2k", "PSL2k"):
            if self.k is None or int(self.k) != self.k or int(self.k) < 1:
                raise BadSpec(f"{fam} requires integer k >= 1")
            object.__setattr__(self, "k", int(self.k))
        elif self.k is not None:
            raise BadSpec(f"{fam} takes no k")
        if fam == "SemidirectA":
            if self.A is None:
                raise BadSpec("SemidirectA requires a 2x2 matrix A")
            object.__setattr__(self, "A", _matrix_tuple(self.A))
        elif self.A is not None:
            raise BadSpec(f"{fam} takes no matrix")

    # -- basic properties -------------------------------------------------
    @property
    def chartable(self) -> bool:
        return self.family not in NON_CHARTABLE

    @property
    def kind(self) -> str:
        if not self.chartable:
            raise UnsupportedChart(f"{self} has no coordinate chart")
        return _KIND[self.family]

    @property
    def dim(self) -> int:
        """Dimension of the group as a manifold."""
        fam = self.family
        if fam in ("R1", "T1"):
            return 1
        if fam in ("R2", "T2", "RxT1", "AffR"):
            return 2
        return 3

    @property
    def chart(self) -> Chart:
        fam = self.family
        if not self.chartable:
            raise UnsupportedChart(f"{self} has no coordinate chart")
        if fam in ("SU2", "SO3"):
            return Chart(4)
        periods = {
            "T1": (1.0,), "T2": (1.0, 1.0), "T3": (1.0, 1.0, 1.0),
            "RxT1": (None, 1.0), "RxT2": (None, 1.0, 1.0),
            "R2xT1": (None, None, 1.0), "N3star": (None, None, 1.0),
            "AffRxT1": (None, 1.0, None),
        }.get(fam)
        if fam == "SE2k":
            periods = (None, None, _TWO_PI * self.k)
        return Chart(self.dim, periods or ())

    @property
    def matrix(self) -> np.ndarray:
        """The 2x2 matrix A of a semidirect family ``R^2 x|_A R``."""
        fam = self.family
        if fam == "SemidirectA":
            return np.array(self.A, dtype=float)
        if fam in ("AffRxR", "AffRxT1"):
            return np.diag([1.0, 0.0])
        if fam == "J":
            return np.array([[1.0, 1.0], [0.0, 1.0]])
        if fam == "Dlambda":
            return np.diag([1.0, self.lam])
        if fam == "Clambda":
            return np.array([[self.lam, 1.0], [-1.0, self.lam]])
        if fam in ("SE2tilde", "SE2k"):
            return np.array([[0.0, -1.0], [1.0, 0.0]])
        if fam == "R3":
            return np.zeros((2, 2))
        raise BadSpec(f"{self} is not a semidirect product R^2 x|_A R in its chart")

    def __str__(self) -> str:
        return format_spec(self)


# -- spec grammar -------------------------------------------------------------

_SIMPLE = {
    "R^1": "R1", "R^2": "R2", "R^3": "R3", "T^1": "T1", "T^2": "T2",
    "T^3": "T3", "RxT1": "RxT1", "RxT2": "RxT2", "R2xT1": "R2xT1",
    "N3": "N3", "N3*": "N3star", "SE2~": "SE2tilde", "AffR": "AffR",
    "AffRxR": "AffRxR", "AffRxT1": "AffRxT1", "J": "J", "SU2": "SU2",
    "SO3": "SO3", "SL2~": "SL2tilde",
}
_SIMPLE_INV = {v: k for k, v in _SIMPLE.items()}
_PARAM_RE = re.compile(r"^(SE2|PSL2):k=([+-]?\d+)$|^(D|C):lambda=(\S+)$")


def parse_spec(text: str) -> GroupSpec:
    """Parse a group spec string such as ``"D:lambda=-0.5"`` or ``"N3*"``."""
    s = text.strip()
    if s in _SIMPLE:
        return GroupSpec(_SIMPLE[s])
    if s.startswith("A:"):
        try:
            A = json.loads(s[2:])
        except json.JSONDecodeError as exc:
            raise BadSpec(f"bad matrix in {text!r}") from exc
        return GroupSpec("SemidirectA", A=A)
    m = _PARAM_RE.match(s)
    if not m:
        raise BadSpec(f"unrecognized group spec {text!r}")
    if m.group(1):
        fam = "SE2k" if m.group(1) == "SE2" else "PSL2k"
        return GroupSpec(fam, k=int(m.group(2)))
    try:
        lam = float(m.group(4))
    except ValueError as exc:
        raise BadSpec(f"bad lambda in {text!r}") from exc
    return GroupSpec("Dlambda" if m.group(3) == "D" else "Clambda", lam=lam)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def format_spec(spec: GroupSpec) -> str:
    fam = spec.family
    if fam in _SIMPLE_INV:
        return _SIMPLE_INV[fam]
    if fam == "SE2k":
        return f"SE2:k={spec.k}"
    if fam == "PSL2k":
        return f"PSL2:k={spec.k}"
    if fam == "Dlambda":
        return f"D:lambda={_fmt_float(spec.lam)}"
    if fam == "Clambda":
        return f"C:lambda={_fmt_float(spec.lam)}"
    (a, b), (c, d) = spec.A
    return "A:[[{},{}],[{},{}]]".format(*map(_fmt_float, (a, b, c, d)))


def normalize_spec(spec: GroupSpec) -> GroupSpec:
    """Map a ``SemidirectA`` spec whose matrix has a named form to that family.

    Only exact forms are renamed (the chart is unchanged), so the map is
    idempotent.  Isomorphism reduction lives in :mod:`lie3atlas.classify`.
    """
    if spec.family != "SemidirectA":
        return spec
    (a, b), (c, d) = spec.A
    if a == b == c == d == 0.0:
        return GroupSpec("R3")
    if (a, b, c, d) == (1.0, 1.0, 0.0, 1.0):
        return GroupSpec("J")
    if (a, b, c, d) == (0.0, -1.0, 1.0, 0.0):
        return GroupSpec("SE2tilde")
    if a == 1.0 and b == 0.0 and c == 0.0:
        if d == 0.0:
            return GroupSpec("AffRxR")
        if -1.0 <= d <= 1.0:
            return GroupSpec("Dlambda", lam=d)
    if a == d and a > 0.0 and b == 1.0 and c == -1.0:
        return GroupSpec("Clambda", lam=a)
    return spec


# -- elements -----------------------------------------------------------------

def as_element(spec: GroupSpec, p) -> np.ndarray:
    """Validate coordinates against the chart of ``spec``; return a float array."""
    chart = spec.chart
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != chart.dim:
        raise BadElement(f"{spec}: expected {chart.dim} coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise BadElement(f"{spec}: non-finite coordinates")
    return arr


def _wrap(values, period):
    out = np.mod(values, period)
    return np.where(out >= period, 0.0, out)


def normalize_coords(spec: GroupSpec, p) -> np.ndarray:
    """Reduce periodic coordinates into ``[0, period)``; fix the quaternion sign."""
    arr = as_element(spec, p).copy()
    if spec.kind == _QUAT:
        n = np.linalg.norm(arr, axis=-1, keepdims=True)
        # leave unit quaternions untouched so normalization is idempotent
        arr = np.where(np.abs(n - 1.0) > 4e-16, arr / n, arr)
        if spec.family == "SO3":
            arr = _canonical_sign(arr)
        return arr
    for i, per in enumerate(spec.chart.periods):
        if per is not None:
            arr[..., i] = _wrap(arr[..., i], per)
    return arr


def _canonical_sign(q):
    # first component with |q_i| > tiny is made positive
    q = np.array(q, dtype=float)
    first = np.argmax(np.abs(q) > 1e-15, axis=-1)
    lead = np.take_along_axis(q, first[..., None], axis=-1)
    return np.where(lead < 0, -q, q)


def identity(spec: GroupSpec) -> np.ndarray:
    if spec.kind == _QUAT:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return np.zeros(spec.chart.dim)


def mat_exp_2x2(A, z=1.0, threshold: float = DISC_THRESHOLD) -> np.ndarray:
    """Closed-form ``exp(z A)`` for a real 2x2 matrix.

    ``z`` may be an array; the result then has shape ``z.shape + (2, 2)``.
    Writing ``M = zA = tau I + B`` with ``tau = tr(M)/2``, ``B^2 = delta I``
    where ``delta = tau^2 - det M``.  The three eigenvalue regimes (real
    distinct, complex, repeated) are handled by cosh/cos/Taylor branches;
    the Taylor branch is used when ``|tr^2 - 4 det| < threshold`` and is
    continuous with the other two.
    """
    A = np.asarray(A, dtype=float)
    z = np.asarray(z, dtype=float)
    if A[0, 1] == 0.0 and A[1, 0] == 0.0:
        out = np.zeros(z.shape + (2, 2))
        out[..., 0, 0] = np.exp(z * A[0, 0])
        out[..., 1, 1] = np.exp(z * A[1, 1])
        return out
    M = z[..., None, None] * A
    tau = 0.5 * (M[..., 0, 0] + M[..., 1, 1])
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    delta = tau * tau - det
    small = np.abs(4.0 * delta) < threshold
    d_pos = np.where(delta > 0, delta, 0.0)
    d_neg = np.where(delta < 0, -delta, 0.0)
    s_pos = np.sqrt(d_pos)
    s_neg = np.sqrt(d_neg)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(delta > 0, np.cosh(s_pos), np.cos(s_neg))
        sh = np.where(delta > 0, np.sinh(s_pos) / np.where(s_pos > 0, s_pos, 1.0),
                      np.sin(s_neg) / np.where(s_neg > 0, s_neg, 1.0))
    c = np.where(small, 1.0 + delta / 2.0 + delta * delta / 24.0, c)
    sh = np.where(small, 1.0 + delta / 6.0 + delta * delta / 120.0, sh)
    B = M - tau[..., None, None] * np.eye(2)
    scale = np.exp(tau)
    out = c[..., None, None] * np.eye(2) + sh[..., None, None] * B
    return scale[..., None, None] * out


def _quat_mul(p, q):
    w1, x1, y1, z1 = np.moveaxis(p, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q, -1, 0)
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


def multiply(spec: GroupSpec, p, q) -> np.ndarray:
    """Group product ``p * q`` in the chart of ``spec``."""
    p = as_element(spec, p)
    q = as_element(spec, q)
    kind = spec.kind
    if kind == _ABELIAN:
        out = p + q
    elif kind == _HEIS:
        x, y, z = np.moveaxis(p, -1, 0)
        a, b, c = np.moveaxis(q, -1, 0)
        out = np.stack([x + a, y + b, z + c + 2.0 * y * a - 2.0 * x * b], axis=-1)
    elif kind == _SE2:
        x, y, t = np.moveaxis(p, -1, 0)
        a, b, s = np.moveaxis(q, -1, 0)
        ct, st = np.cos(t), np.sin(t)
        out = np.stack([x + a * ct - b * st, y + a * st + b * ct, t + s], axis=-1)
    elif kind == _SEMI:
        E = mat_exp_2x2(spec.matrix, p[..., 2])
        moved = np.einsum("...ij,...j->...i", E, q[..., :2])
        out = np.concatenate([p[..., :2] + moved, (p[..., 2] + q[..., 2])[..., None]], axis=-1)
    elif kind == _AFFR:
        out = np.stack([p[..., 0] + np.exp(p[..., 1]) * q[..., 0], p[..., 1] + q[..., 1]], axis=-1)
    else:
        out = _quat_mul(p, q)
    return normalize_coords(spec, out)


def inverse(spec: GroupSpec, p) -> np.ndarray:
    p = as_element(spec, p)
    kind = spec.kind
    if kind in (_ABELIAN, _HEIS):
        out = -p
    elif kind == _SE2:
        x, y, t = np.moveaxis(p, -1, 0)
        ct, st = np.cos(t), np.sin(t)
        out = np.stack([-(x * ct + y * st), -(-x * st + y * ct), -t], axis=-1)
    elif kind == _SEMI:
        E = mat_exp_2x2(spec.matrix, -p[..., 2])
        moved = np.einsum("...ij,...j->...i", E, p[..., :2])
        out = np.concatenate([-moved, -p[..., 2:3]], axis=-1)
    elif kind == _AFFR:
        out = np.stack([-np.exp(-p[..., 1]) * p[..., 0], -p[..., 1]], axis=-1)
    else:
        out = p * np.array([1.0, -1.0, -1.0, -1.0])
    return normalize_coords(spec, out)


def coord_difference(spec: GroupSpec, p, q) -> np.ndarray:
    """``q - p`` with periodic coordinates reduced to ``[-period/2, period/2)``."""
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    if spec.kind == _QUAT:
        return d
    for i, per in enumerate(spec.chart.periods):
        if per is not None:
            d[..., i] = d[..., i] - per * np.round(d[..., i] / per)
    return d


# -- Lie algebra --------------------------------------------------------------

@dataclass(frozen=True)
class LieAlgebraData:
    """Structure constants ``c[k, i, j]`` with ``[E_i, E_j] = sum_k c[k,i,j] E_k``.

    Indices are 0-based: ``c[0, 0, 2]`` is the constant written c^1_13.
    """

    c: np.ndarray

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def bracket(self, u, v) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.c, np.asarray(u, float), np.asarray(v, float))

    def jacobi_defect(self) -> float:
        """Max abs entry of the Jacobi sum over all basis triples."""
        c = self.c
        # J[m,i,j,l] = sum_k c[k,i,j] c[m,k,l] + cyclic(i,j,l)
        t = np.einsum("kij,mkl->mijl", c, c)
        total = t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))
        return float(np.max(np.abs(total))) if total.size else 0.0


def structure_constants(spec: GroupSpec) -> LieAlgebraData:
    """Structure constants of the left-invariant frame used by :mod:`lie3atlas.metric`.

    Defined for every catalog family, including the chartless ones (given
    by the standard sl(2) basis ``[E1,E2]=-E3, [E2,E3]=E1, [E3,E1]=E2``
    up to sign; only the Lie algebra is meaningful there).
    """
    n = spec.dim
    c = np.zeros((n, n, n))
    fam = spec.family

    def put(k, i, j, val):
        c[k, i, j] = val
        c[k, j, i] = -val

    if fam in NON_CHARTABLE:
        # sl(2,R): [H, X] = 2X, [H, Y] = -2Y, [X, Y] = H  in basis (H, X, Y)
        put(1, 0, 1, 2.0)
        put(2, 0, 2, -2.0)
        put(0, 1, 2, 1.0)
        return LieAlgebraData(c)
    kind = _KIND[fam]
    if kind == _HEIS:
        put(2, 0, 1, -4.0)
    elif kind == _SE2:
        put(1, 0, 2, -1.0)
        put(0, 1, 2, 1.0)
    elif kind == _SEMI:
        A = spec.matrix
        for i in range(2):
            for k in range(2):
                if A[k, i] != 0.0:
                    put(k, i, 2, A[k, i])
    elif kind == _AFFR:
        put(0, 0, 1, 1.0)
    elif kind == _QUAT:
        put(2, 0, 1, 2.0)
        put(0, 1, 2, 2.0)
        put(1, 2, 0, 2.0)
    return LieAlgebraData(c)


# -- coverings ----------------------------------------------------------------

def _is_covering(total: GroupSpec, base: GroupSpec) -> bool:
    t, b = total.family, base.family
    if (t, b) in {("SE2tilde", "SE2k"), ("N3", "N3star"), ("SU2", "SO3"),
                  ("AffRxR", "AffRxT1")}:
        return True
    if t == "SE2k" and b == "SE2k":
        return total.k % base.k == 0
    abelian_base = {"T1": "R1", "T2": "R2", "T3": "R3", "RxT1": "R2",
                    "RxT2": "R3", "R2xT1": "R3"}
    return abelian_base.get(b) == t


def covering_projection(total: GroupSpec, base: GroupSpec, p) -> np.ndarray:
    """Image of ``p`` under the covering homomorphism ``total -> base``.

    Supported pairs: ``SE2~ -> SE2:k``, ``SE2:k -> SE2:j`` (``j | k``),
    ``N3 -> N3*``, ``R^n -> `` torus products of the same dimension,
    ``AffRxR -> AffRxT1`` and ``SU2 -> SO3``.
    """
    if not (total.chartable and base.chartable) or not _is_covering(total, base):
        raise NotACovering(f"{total} -> {base} is not a supported covering")
    p = as_element(total, p)
    return normalize_coords(base, p)
