"""Dense exterior algebra on R^n for small n, and the defining forms of G2 and Spin(7).

Coefficients of a k-form are stored densely over all strictly increasing
index tuples of length k (``itertools.combinations`` order).  Indices are
0-based internally; the human-facing ``from_terms`` helper takes 1-based
monomials like ``(1, 2, 3)`` for ``w1 ^ w2 ^ w3``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_TOL = 1e-10


class FormError(ValueError):
    """Raised on dimension/degree mismatches and degenerate inputs."""


@lru_cache(maxsize=None)
def index_sets(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def _position(n: int, k: int) -> dict:
    return {idx: i for i, idx in enumerate(index_sets(n, k))}


def perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq``; 0 if it has repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class AlternatingForm:
    """A k-form on R^n with dense coefficient vector."""

    ambient_dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        n, k = self.ambient_dim, self.degree
        if not 0 <= k <= n:
            raise FormError(f"degree {k} outside [0, {n}]")
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != len(index_sets(n, k)):
            raise FormError("coefficient vector has wrong length")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, n: int, k: int) -> "AlternatingForm":
        return cls(n, k, np.zeros(len(index_sets(n, k))))

    @classmethod
    def from_dict(cls, n: int, k: int, terms: dict) -> "AlternatingForm":
        """Build from ``{index tuple (0-based, any order): value}``."""
        c = np.zeros(len(index_sets(n, k)))
        pos = _position(n, k)
        for idx, val in terms.items():
            idx = tuple(idx)
            if len(idx) != k or any(not 0 <= i < n for i in idx):
                raise FormError(f"bad index tuple {idx}")
            s = perm_sign(idx)
            if s:
                c[pos[tuple(sorted(idx))]] += s * val
        return cls(n, k, c)

    @classmethod
    def from_terms(cls, n: int, terms) -> "AlternatingForm":
        """Build from ``[(value, (i, j, ...)), ...]`` with 1-based indices."""
        terms = list(terms)
        k = len(terms[0][1])
        return cls.from_dict(n, k, {tuple(i - 1 for i in idx): v for v, idx in terms})

    @classmethod
    def basis(cls, n: int, idx) -> "AlternatingForm":
        """The monomial w_{i1} ^ ... ^ w_{ik} (0-based indices)."""
        return cls.from_dict(n, len(idx), {tuple(idx): 1.0})

    # access -------------------------------------------------------------
    def __getitem__(self, idx) -> float:
        idx = tuple(idx)
        s = perm_sign(idx)
        if s == 0:
            return 0.0
        return s * float(self.coeffs[_position(self.ambient_dim, self.degree)[tuple(sorted(idx))]])

    def terms(self, tol: float = 0.0) -> dict:
        return {
            idx: float(v)
            for idx, v in zip(index_sets(self.ambient_dim, self.degree), self.coeffs)
            if abs(v) > tol
        }

    def _check_same_space(self, other: "AlternatingForm"):
        if self.ambient_dim != other.ambient_dim:
            raise FormError("ambient dimension mismatch")

    def __add__(self, other):
        self._check_same_space(other)
        if self.degree != other.degree:
            raise FormError("degree mismatch")
        return AlternatingForm(self.ambient_dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        return AlternatingForm(self.ambient_dim, self.degree, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def allclose(self, other, tol: float = DEFAULT_TOL) -> bool:
        return (
            self.ambient_dim == other.ambient_dim
            and self.degree == other.degree
            and bool(np.max(np.abs(self.coeffs - other.coeffs), initial=0.0) <= tol)
        )

    def __repr__(self):
        body = " + ".join(
            f"{v:+g}*w{''.join(str(i + 1) for i in idx)}" for idx, v in self.terms(1e-15).items()
        )
        return f"AlternatingForm(n={self.ambient_dim}, k={self.degree}: {body or '0'})"

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "dim": self.ambient_dim,
            "degree": self.degree,
            "coeffs": [[list(idx), v] for idx, v in self.terms().items()],
        }

    @classmethod
    def from_json(cls, data) -> "AlternatingForm":
        if isinstance(data, str):
            data = json.loads(data)
        return cls.from_dict(
            int(data["dim"]), int(data["degree"]), {tuple(i): float(v) for i, v in data["coeffs"]}
        )


# ---------------------------------------------------------------------------
# algebra


def wedge(a: AlternatingForm, b: AlternatingForm) -> AlternatingForm:
    a._check_same_space(b)
    n, p, q = a.ambient_dim, a.degree, b.degree
    if p + q > n:
        raise FormError(f"degree overflow: {p} + {q} > {n}")
    out = np.zeros(len(index_sets(n, p + q)))
    pos = _position(n, p + q)
    ia = [(I, v) for I, v in zip(index_sets(n, p), a.coeffs) if v != 0.0]
    ib = [(J, v) for J, v in zip(index_sets(n, q), b.coeffs) if v != 0.0]
    for I, va in ia:
        sI = set(I)
        for J, vb in ib:
            if sI.intersection(J):
                continue
            K = I + J
            out[pos[tuple(sorted(K))]] += perm_sign(K) * va * vb
    return AlternatingForm(n, p + q, out)


def interior(x, a: AlternatingForm) -> AlternatingForm:
    """Contraction i_x a, inserting x into the first slot."""
    if a.degree < 1:
        raise FormError("cannot contract a 0-form")
    x = np.asarray(x, dtype=float)
    n, k = a.ambient_dim, a.degree
    if x.shape != (n,):
        raise FormError("vector has wrong dimension")
    out = np.zeros(len(index_sets(n, k - 1)))
    pos = _position(n, k - 1)
    for I, v in zip(index_sets(n, k), a.coeffs):
        if v == 0.0:
            continue
        for slot, i in enumerate(I):
            if x[i] == 0.0:
                continue
            rest = I[:slot] + I[slot + 1 :]
            out[pos[rest]] += (-1) ** slot * x[i] * v
    return AlternatingForm(n, k - 1, out)


def _minors(mat: np.ndarray, k: int) -> np.ndarray:
    """All k x k row-minors of a (..., n, k) stack, ordered like ``index_sets(n, k)``."""
    n = mat.shape[-2]
    if k == 0:
        return np.ones(mat.shape[:-2] + (1,))
    rows = np.array(index_sets(n, k))
    sub = mat[..., rows, :]  # (..., C, k, k)
    return np.linalg.det(sub)


def evaluate(a: AlternatingForm, vectors) -> float | np.ndarray:
    """a(v1, ..., vk).

    ``vectors`` is a sequence of k vectors, or an ndarray of shape (..., n, k)
    whose columns are the arguments (batched evaluation).
    """
    n, k = a.ambient_dim, a.degree
    if isinstance(vectors, np.ndarray):
        mat = vectors.astype(float, copy=False)
    else:
        vecs = [np.asarray(v, dtype=float) for v in vectors]
        if len(vecs) != k or any(v.shape != (n,) for v in vecs):
            raise FormError(f"expected {k} vectors of dimension {n}")
        mat = np.stack(vecs, axis=-1) if k else np.zeros((n, 0))
    if mat.ndim < 2 or mat.shape[-2:] != (n, k):
        raise FormError(f"expected argument columns of shape ({n}, {k}), got {mat.shape}")
    val = _minors(mat, k) @ a.coeffs
    return float(val) if np.ndim(val) == 0 else val


def compound(g: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix of an m x n matrix: entry (I, J) = det g[I, J]."""
    m, n = g.shape[-2:]
    if k == 0:
        return np.ones(g.shape[:-2] + (1, 1))
    rows = np.array(index_sets(m, k))
    cols = np.array(index_sets(n, k))
    sub = g[..., rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub)


def pullback(a: AlternatingForm, g: np.ndarray) -> AlternatingForm:
    """g^* a, i.e. (g^* a)(v1..vk) = a(g v1, ..., g vk)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (a.ambient_dim, a.ambient_dim):
        raise FormError("matrix has wrong shape")
    return AlternatingForm(a.ambient_dim, a.degree, compound(g, a.degree).T @ a.coeffs)


def _det2(g, r, c):
    """2x2 minors g[r, c] for index arrays r (R, 2), c (C, 2); result (..., R, C)."""
    a = g[..., r[:, None, 0], c[None, :, 0]] * g[..., r[:, None, 1], c[None, :, 1]]
    return a - g[..., r[:, None, 0], c[None, :, 1]] * g[..., r[:, None, 1], c[None, :, 0]]


def minors(g: np.ndarray, rows, cols) -> np.ndarray:
    """det g[I, J] for every I in ``rows`` and J in ``cols`` (index arrays (R, k), (C, k)).

    Batched over leading axes of g.  Sizes up to 4 use Laplace expansion
    into 1x1 and 2x2 minors, which is much cheaper than LU on tiny blocks.
    """
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    k = rows.shape[1]
    if k == 0:
        return np.ones(g.shape[:-2] + (len(rows), len(cols)))
    if k == 1:
        return g[..., rows[:, None, 0], cols[None, :, 0]]
    if k == 2:
        return _det2(g, rows, cols)
    if k == 3:
        out = 0.0
        for s in range(3):
            rest = [t for t in range(3) if t != s]
            out = out + (-1) ** s * g[..., rows[:, None, 0], cols[None, :, s]] * _det2(g, rows[:, 1:], cols[:, rest])
        return out
    if k == 4:
        out = 0.0
        for s1, s2 in itertools.combinations(range(4), 2):
            rest = [t for t in range(4) if t not in (s1, s2)]
            sign = (-1) ** (1 + s1 + s2)
            out = out + sign * _det2(g, rows[:, :2], cols[:, [s1, s2]]) * _det2(g, rows[:, 2:], cols[:, rest])
        return out
    return np.linalg.det(g[..., rows[:, None, :, None], cols[None, :, None, :]])


@lru_cache(maxsize=None)
def _split_plan(n: int, k: int):
    k1 = k // 2
    s1 = np.array(index_sets(n, k1), dtype=int).reshape(-1, k1)
    s2 = np.array(index_sets(n, k - k1), dtype=int).reshape(-1, k - k1)
    return s1, s2


def split_matrix(a: AlternatingForm) -> np.ndarray:
    """A[I, J] = a(e_I, e_J) with |I| = k // 2, |J| = k - |I|."""
    n, k = a.ambient_dim, a.degree
    s1, s2 = _split_plan(n, k)
    A = np.zeros((len(s1), len(s2)))
    for x, I in enumerate(map(tuple, s1)):
        for y, J in enumerate(map(tuple, s2)):
            if not set(I) & set(J):
                A[x, y] = a[I + J]
    return A


def pullback_split(a: AlternatingForm, gs: np.ndarray, A: np.ndarray | None = None) -> np.ndarray:
    """split_matrix(g^* a) for a stack of matrices: C1^T A C2 with compound matrices.

    Every coefficient of g^* a appears as an entry, so the max-entry residual
    against ``split_matrix(a)`` equals the max coefficient residual.
    """
    s1, s2 = _split_plan(a.ambient_dim, a.degree)
    A = split_matrix(a) if A is None else A
    C1 = minors(gs, s1, s1)
    C2 = C1 if len(s1[0]) == len(s2[0]) else minors(gs, s2, s2)
    # one large GEMM for C1^T A, then a contiguous batched product
    lead = C1.shape[:-2]
    T = np.ascontiguousarray(np.swapaxes(C1, -1, -2)).reshape(-1, A.shape[0]) @ A
    return T.reshape(lead + (C1.shape[-1], A.shape[1])) @ np.ascontiguousarray(C2)


def full_tensor(a: AlternatingForm) -> np.ndarray:
    """The form as a dense antisymmetric array of shape (n,) * k."""
    n, k = a.ambient_dim, a.degree
    T = np.zeros((n,) * k)
    for I, v in zip(index_sets(n, k), a.coeffs):
        if v == 0.0:
            continue
        for perm in itertools.permutations(range(k)):
            T[tuple(I[p] for p in perm)] = perm_sign(perm) * v
    return T


def inner(a: AlternatingForm, b: AlternatingForm) -> float:
    """Euclidean inner product of forms (orthonormal basis w_I)."""
    a._check_same_space(b)
    if a.degree != b.degree:
        raise FormError("degree mismatch")
    return float(a.coeffs @ b.coeffs)


# ---------------------------------------------------------------------------
# metrics and Hodge star


@dataclass(frozen=True)
class VolumeScale:
    """Value assigned to the coordinate top form w1 ^ ... ^ wn."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise FormError("tau must be positive")


@dataclass(frozen=True, eq=False)
class GramForm:
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise FormError("Gram matrix must be square")
        if not np.allclose(e, e.T, atol=1e-12, rtol=0):
            raise FormError("Gram matrix must be symmetric")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def euclidean(cls, n: int) -> "GramForm":
        return cls(np.eye(n))

    def is_positive_definite(self) -> bool:
        return bool(np.linalg.eigvalsh(self.entries).min() > 0)


def _complement(n: int, I) -> tuple:
    return tuple(i for i in range(n) if i not in I)


def hodge_star(a: AlternatingForm, g: GramForm | None = None, orientation: int = 1) -> AlternatingForm:
    """Hodge star for the metric ``g`` and orientation sign (+1: coordinate order).

    Convention: ``alpha ^ *beta = <alpha, beta> vol``.
    """
    n, k = a.ambient_dim, a.degree
    G = np.eye(n) if g is None else g.entries
    if G.shape != (n, n):
        raise FormError("Gram matrix has wrong shape")
    if np.linalg.eigvalsh(G).min() <= 0:
        raise FormError("Gram matrix is not positive definite")
    if orientation not in (1, -1):
        raise FormError("orientation must be +1 or -1")
    # columns of E: a positively oriented g-orthonormal basis
    E = np.linalg.inv(np.linalg.cholesky(G)).T
    if np.linalg.det(E) < 0:
        E[:, -1] *= -1
    local = pullback(a, E)
    out = np.zeros(len(index_sets(n, n - k)))
    pos = _position(n, n - k)
    for I, v in zip(index_sets(n, k), local.coeffs):
        if v == 0.0:
            continue
        Ic = _complement(n, I)
        out[pos[Ic]] += perm_sign(I + Ic) * v
    starred = AlternatingForm(n, n - k, orientation * out)
    return pullback(starred, np.linalg.inv(E))


# ---------------------------------------------------------------------------
# the defining forms

_PHI_TERMS = [
    (+1.0, (1, 2, 3)),
    (+1.0, (1, 4, 5)),
    (+1.0, (1, 6, 7)),
    (+1.0, (2, 4, 6)),
    (-1.0, (2, 5, 7)),
    (-1.0, (3, 4, 7)),
    (-1.0, (3, 5, 6)),
]


def standard_phi() -> AlternatingForm:
    """The positive 3-form on R^7 whose stabilizer is G2."""
    return AlternatingForm.from_terms(7, _PHI_TERMS)


def kaehler_form(m: int = 4) -> AlternatingForm:
    """Omega = sum dx_j ^ dy_j on C^m = R^(2m), coordinates (x1, y1, x2, y2, ...)."""
    return AlternatingForm.from_dict(2 * m, 2, {(2 * j, 2 * j + 1): 1.0 for j in range(m)})


def complex_structure(m: int = 4) -> np.ndarray:
    """Matrix of J on R^(2m): J x_j = y_j, J y_j = -x_j."""
    J = np.zeros((2 * m, 2 * m))
    for j in range(m):
        J[2 * j + 1, 2 * j] = 1.0
        J[2 * j, 2 * j + 1] = -1.0
    return J


def holomorphic_volume(m: int = 4) -> tuple[AlternatingForm, AlternatingForm]:
    """Real and imaginary parts of dz_1 ^ ... ^ dz_m on R^(2m)."""
    re, im = {}, {}
    for choice in itertools.product((0, 1), repeat=m):
        # dz_j = dx_j + i dy_j; pick dy_j when choice[j] == 1
        idx = tuple(2 * j + c for j, c in enumerate(choice))
        phase = 1j ** sum(choice)
        if phase.real:
            re[idx] = phase.real
        if phase.imag:
            im[idx] = phase.imag
    return (
        AlternatingForm.from_dict(2 * m, m, re),
        AlternatingForm.from_dict(2 * m, m, im),
    )


def standard_Phi() -> AlternatingForm:
    """Cayley form 1/2 Omega^Omega + Re(dz1 dz2 dz3 dz4) on R^8 = C^4."""
    omega = kaehler_form(4)
    beta, _ = holomorphic_volume(4)
    return 0.5 * wedge(omega, omega) + beta


def top_form_value(a: AlternatingForm) -> float:
    if a.degree != a.ambient_dim:
        raise FormError("not a top-degree form")
    return float(a.coeffs[0])


def bilinear_from_phi(phi: AlternatingForm, tau: VolumeScale | float = 1.0) -> GramForm:
    """Gram matrix of tau(1/6 i_x phi ^ i_y phi ^ phi)."""
    if phi.degree != 3 or phi.ambient_dim != 7:
        raise FormError("expected a 3-form on R^7")
    t = tau.tau if isinstance(tau, VolumeScale) else float(tau)
    n = 7
    contractions = [interior(np.eye(n)[i], phi) for i in range(n)]
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            val = t * top_form_value(wedge(wedge(contractions[i], contractions[j]), phi)) / 6.0
            G[i, j] = G[j, i] = val
    return GramForm(G)


def normalize_metric(phi: AlternatingForm) -> tuple[GramForm, VolumeScale]:
    """The unique tau with tau' = tau, and the resulting scalar product.

    Scaling tau by s scales the Gram by s and its determinant by s^7, while
    tau' (the value of the coordinate top form on an orthonormal basis)
    equals det(G)^(-1/2).  Solving s * tau0 = det(s G0)^(-1/2) gives
    s = (tau0^2 det G0)^(-1/9).
    """
    G0 = bilinear_from_phi(phi, 1.0).entries
    eig = np.linalg.eigvalsh(G0)
    if np.all(eig < 0):
        G0 = -G0  # opposite orientation of R^7; b is negative definite for tau0 = 1
        eig = -eig[::-1]
    if eig.min() <= DEFAULT_TOL * max(1.0, abs(eig).max()):
        raise FormError("phi is not positive: b is not definite")
    s = np.linalg.det(G0) ** (-1.0 / 9.0)
    return GramForm(s * G0), VolumeScale(s)


def tau_prime(g: GramForm) -> float:
    """Value of the coordinate top form on a positively oriented orthonormal basis."""
    return float(np.linalg.det(g.entries) ** -0.5)


# ---------------------------------------------------------------------------
# infinitesimal stabilizers


def skew_basis(n: int) -> list[np.ndarray]:
    """Frobenius-orthonormal basis (E_ij - E_ji)/sqrt 2 of so(n)."""
    out = []
    for i, j in itertools.combinations(range(n), 2):
        X = np.zeros((n, n))
        X[i, j], X[j, i] = -1.0, 1.0
        out.append(X / np.sqrt(2.0))
    return out


def derivation(X: np.ndarray, a: AlternatingForm) -> AlternatingForm:
    """(L_X a)(v1..vk) = -sum_i a(v1, .., X vi, .., vk).

    With this sign, L_X a = 0 iff a is invariant under exp(tX) for all t,
    and d/dt exp(tX)^* a |_{t=0} = -L_X a.
    """
    n, k = a.ambient_dim, a.degree
    out = np.zeros(len(index_sets(n, k)))
    pos = _position(n, k)
    # direct formulation: coefficient at J is -sum_slot sum_r X[r, J_slot] a[J with J_slot -> r]
    for J in index_sets(n, k):
        acc = 0.0
        for slot, j in enumerate(J):
            col = X[:, j]
            for r in np.nonzero(col)[0]:
                idx = J[:slot] + (int(r),) + J[slot + 1 :]
                acc += col[r] * a[idx]
        out[pos[J]] = -acc
    return AlternatingForm(n, k, out)


def annihilator_algebra(forms, g: GramForm | None = None, tol: float = 1e-8, return_singular_values: bool = False):
    """Orthonormal basis of {X in so(n, g) : L_X a = 0 for every a in ``forms``}.

    ``forms`` may be a single form or a list (simultaneous annihilator).
    Skew-symmetry is taken with respect to the Gram ``g`` (Euclidean by default).
    """
    if isinstance(forms, AlternatingForm):
        forms = [forms]
    n = forms[0].ambient_dim
    if g is not None and not np.allclose(g.entries, np.eye(n), atol=1e-12):
        # so(n, g) = L so(n) L^-1 with g = L^-T L^-1 ... work in an orthonormal frame
        E = np.linalg.inv(np.linalg.cholesky(g.entries)).T
        local = [pullback(f, E) for f in forms]
        basis, sv = annihilator_algebra(local, None, tol, True)
        Einv = np.linalg.inv(E)
        basis = [E @ X @ Einv for X in basis]
        return (basis, sv) if return_singular_values else basis
    skews = skew_basis(n)
    cols = []
    for X in skews:
        cols.append(np.concatenate([derivation(X, f).coeffs for f in forms]))
    A = np.array(cols).T  # (sum C(n,k), n(n-1)/2)
    _, s, vt = np.linalg.svd(A)
    s_full = np.zeros(len(skews))
    s_full[: len(s)] = s
    null = s_full <= tol * max(1.0, s_full.max())
    coeffs = vt[null]
    basis = [sum(c * X for c, X in zip(row, skews)) for row in coeffs]
    return (basis, s_full) if return_singular_values else basis
