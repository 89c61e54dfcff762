"""Subspaces and their invariants under G2, Spin(7) and SU(n).

Most functions come in two flavours: one taking a :class:`Subspace`, and a
batched ``*_frames`` variant taking an array of orthonormal frames of shape
(..., n, k).  The batched variants are what the identity checks use.

Complex coordinates on R^(2m) are ordered (x1, y1, ..., xm, ym) with
J x_j = y_j, matching :mod:`holonomy_valuations.forms`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import forms

FRAME_TOL = 1e-12
SUBSPACE_EQ_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Subspace:
    """k-dimensional subspace of R^n, stored as an n x k orthonormal frame."""

    frame: np.ndarray

    def __post_init__(self):
        F = np.array(self.frame, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        if F.ndim != 2:
            raise ValueError("frame must be an n x k array")
        if F.shape[1] and np.abs(F.T @ F - np.eye(F.shape[1])).max() > FRAME_TOL:
            raise ValueError("frame columns are not orthonormal")
        F.setflags(write=False)
        object.__setattr__(self, "frame", F)

    @classmethod
    def span(cls, vectors, n: int | None = None) -> "Subspace":
        """Orthonormalized span of the given vectors (columns of the result)."""
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[None, :]
        V = V.T  # columns
        if V.size == 0:
            return cls(np.zeros((n or 0, 0)))
        q, r = np.linalg.qr(V)
        rank = int(np.sum(np.abs(np.diag(r)) > 1e-12 * max(1.0, np.abs(r).max())))
        if rank != V.shape[1]:
            raise ValueError("vectors are linearly dependent")
        return cls(q)

    @classmethod
    def coordinate(cls, n: int, indices) -> "Subspace":
        """Span of standard basis vectors (0-based indices)."""
        return cls(np.eye(n)[:, list(indices)])

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    def same_as(self, other: "Subspace", tol: float = SUBSPACE_EQ_TOL) -> bool:
        return self.dim == other.dim and np.abs(self.projector() - other.projector()).max() < tol

    def reframed(self, q: np.ndarray) -> "Subspace":
        return Subspace(self.frame @ q)

    def to_json(self) -> dict:
        return {"n": self.ambient_dim, "k": self.dim, "frame": self.frame.reshape(-1).tolist()}

    @classmethod
    def from_json(cls, data) -> "Subspace":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(np.asarray(data["frame"], dtype=float).reshape(int(data["n"]), int(data["k"])))


@dataclass(frozen=True)
class KaehlerAngles:
    thetas: tuple

    def __post_init__(self):
        t = tuple(float(x) for x in self.thetas)
        if any(not (-1e-12 <= x <= np.pi / 2 + 1e-12) for x in t):
            raise ValueError("Kaehler angles must lie in [0, pi/2]")
        if any(a > b + 1e-12 for a, b in zip(t, t[1:])):
            raise ValueError("Kaehler angles must be nondecreasing")
        object.__setattr__(self, "thetas", t)

    @property
    def cosines(self) -> np.ndarray:
        return np.cos(np.array(self.thetas))


@dataclass(frozen=True)
class ThetaInvariant:
    value: complex
    sign_determined: bool

    def __post_init__(self):
        if abs(self.value) > 1 + 1e-12:
            raise ValueError("|Theta| exceeds 1")

    @property
    def squared(self) -> complex:
        return self.value**2


# ---------------------------------------------------------------------------
# sampling and complements


def random_frames(n: int, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` Haar-random orthonormal n x k frames (Gaussian + QR)."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if k == 0:
        return np.zeros((size, n, 0))
    A = rng.standard_normal((size, n, k))
    q, r = np.linalg.qr(A)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return q * d[..., None, :]


def random_subspace(n: int, k: int, seed=None) -> Subspace:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Subspace(random_frames(n, k, 1, rng)[0])


def perp_frames(frames: np.ndarray) -> np.ndarray:
    """Orthonormal frames of the orthogonal complements, shape (..., n, n-k).

    The complement is oriented so that [frame, complement] is positively
    oriented in R^n.
    """
    frames = np.asarray(frames, dtype=float)
    n, k = frames.shape[-2:]
    if k == 0:
        return np.broadcast_to(np.eye(n), frames.shape[:-2] + (n, n)).copy()
    q, _ = np.linalg.qr(frames, mode="complete")
    comp = q[..., :, k:].copy()
    if n - k > 0:
        full = np.concatenate([frames, comp], axis=-1)
        flip = np.linalg.det(full) < 0
        comp[flip, :, -1] *= -1
    return comp


def perp(W: Subspace) -> Subspace:
    return Subspace(perp_frames(W.frame))


# ---------------------------------------------------------------------------
# G2 and Spin(7) calibration values


def form_value_frames(form: forms.AlternatingForm, frames: np.ndarray) -> np.ndarray:
    return np.asarray(forms.evaluate(form, np.asarray(frames, dtype=float)))


def phi_sq_frames(frames: np.ndarray, phi: forms.AlternatingForm | None = None) -> np.ndarray:
    phi = forms.standard_phi() if phi is None else phi
    return form_value_frames(phi, frames) ** 2


def Phi_sq_frames(frames: np.ndarray, Phi: forms.AlternatingForm | None = None) -> np.ndarray:
    Phi = forms.standard_Phi() if Phi is None else Phi
    return form_value_frames(Phi, frames) ** 2


def _check(W: Subspace, n: int, k: int):
    if W.ambient_dim != n or W.dim != k:
        raise ValueError(f"expected a {k}-dimensional subspace of R^{n}, got {W.dim} in R^{W.ambient_dim}")


def phi_sq(W: Subspace, phi: forms.AlternatingForm | None = None) -> float:
    """phi(W)^2 for a 3-plane in R^7."""
    _check(W, 7, 3)
    return float(phi_sq_frames(W.frame, phi))


def Phi_sq(W: Subspace, Phi: forms.AlternatingForm | None = None) -> float:
    """Phi(W)^2 for a 4-plane in R^8."""
    _check(W, 8, 4)
    return float(Phi_sq_frames(W.frame, Phi))


# ---------------------------------------------------------------------------
# hermitian invariants


def omega_gram(frames: np.ndarray, J: np.ndarray | None = None) -> np.ndarray:
    """Skew matrix A_ij = Omega(w_i, w_j) of the Kaehler form restricted to a frame.

    Omega(v, w) = <J v, w>, so A = W^T (-J) W.  The default J is the
    standard structure of ``forms.complex_structure``.
    """
    frames = np.asarray(frames, dtype=float)
    n = frames.shape[-2]
    if J is None:
        J = forms.complex_structure(n // 2)
    return np.swapaxes(frames, -1, -2) @ (-J) @ frames


def _pfaffian4(A: np.ndarray) -> np.ndarray:
    return A[..., 0, 1] * A[..., 2, 3] - A[..., 0, 2] * A[..., 1, 3] + A[..., 0, 3] * A[..., 1, 2]


def pfaffian(A: np.ndarray) -> np.ndarray:
    """Pfaffian of a stack of even-size skew matrices (sizes 0, 2, 4, 6)."""
    k = A.shape[-1]
    if k == 0:
        return np.ones(A.shape[:-2])
    if k == 2:
        return A[..., 0, 1]
    if k == 4:
        return _pfaffian4(A)
    if k == 6:
        total = np.zeros(A.shape[:-2])
        for j in range(1, 6):
            rest = [i for i in range(1, 6) if i != j]
            sub = A[..., rest, :][..., :, rest]
            total = total + (-1) ** (j + 1) * A[..., 0, j] * _pfaffian4(sub)
        return total
    raise ValueError("pfaffian implemented for k <= 6")


def kaehler_cosines_frames(frames: np.ndarray, J: np.ndarray | None = None) -> np.ndarray:
    """cos(theta_1) >= ... >= cos(theta_p), read off the singular values of Omega|_W."""
    A = omega_gram(frames, J)
    k = A.shape[-1]
    p = k // 2
    s = np.linalg.svd(A, compute_uv=False)
    return np.clip(s[..., 0 : 2 * p : 2], 0.0, 1.0)


def kaehler_angles(W: Subspace, J: np.ndarray | None = None) -> KaehlerAngles:
    if W.ambient_dim % 2:
        raise ValueError("ambient dimension must be even (or pass the complex structure of a subspace)")
    c = kaehler_cosines_frames(W.frame, J)
    return KaehlerAngles(tuple(np.arccos(c)))


def complex_coordinates(frames: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
    """Complex m x k coordinate matrices of real frames.

    ``basis`` is an optional real matrix whose columns (u1, Ju1, u2, Ju2, ...)
    form a unitary frame of the complex space; default is the standard one.
    """
    frames = np.asarray(frames, dtype=float)
    coords = frames if basis is None else np.swapaxes(basis, -1, -2) @ frames
    return coords[..., 0::2, :] + 1j * coords[..., 1::2, :]


def theta_frames(frames: np.ndarray, J: np.ndarray | None = None, basis: np.ndarray | None = None, tol: float = 1e-12):
    """Theta(W) for middle-dimensional W, batched.

    Returns ``(values, sign_determined)``.  When Omega|_W is nondegenerate
    the frame is oriented so that Omega^p / p! is positive on it.
    """
    frames = np.asarray(frames, dtype=float)
    k = frames.shape[-1]
    Z = complex_coordinates(frames, basis)
    if Z.shape[-2] != k:
        raise ValueError("Theta needs a subspace of real dimension equal to the complex dimension")
    val = np.linalg.det(Z)
    if k % 2:
        return val, np.zeros(val.shape, dtype=bool)
    pf = pfaffian(omega_gram(frames, J))
    determined = np.abs(pf) > tol
    val = np.where(pf < 0, -val, val)
    return val, determined


def theta(W: Subspace, J: np.ndarray | None = None, basis: np.ndarray | None = None) -> ThetaInvariant:
    n = W.ambient_dim
    if n % 2 or W.dim != n // 2:
        raise ValueError("Theta is defined on real n-planes of C^n")
    v, det = theta_frames(W.frame, J, basis)
    return ThetaInvariant(complex(v), bool(det))


def elementary_symmetric(x: np.ndarray, q: int) -> np.ndarray:
    """sigma_q over the last axis."""
    x = np.asarray(x, dtype=float)
    coeffs = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,))
    coeffs[..., 0] = 1.0
    for i in range(x.shape[-1]):
        coeffs[..., 1:] = coeffs[..., 1:] + x[..., i : i + 1] * coeffs[..., :-1]
    if q > x.shape[-1]:
        return np.zeros(x.shape[:-1])
    return coeffs[..., q]


def klain_eta_frames(frames: np.ndarray) -> np.ndarray:
    """1/2 s0 - 1/2 s1 + 3/2 s2 + Re(Theta^2 / 2 + 2 cos t1 cos t2 Theta) on Gr_4(C^4)."""
    c = kaehler_cosines_frames(frames)
    c2 = c**2
    th, _ = theta_frames(frames)
    s1 = elementary_symmetric(c2, 1)
    s2 = elementary_symmetric(c2, 2)
    return 0.5 - 0.5 * s1 + 1.5 * s2 + np.real(0.5 * th**2 + 2.0 * c[..., 0] * c[..., 1] * th)


def klain_eta(W: Subspace) -> float:
    _check(W, 8, 4)
    return float(klain_eta_frames(W.frame))


# ---------------------------------------------------------------------------
# the SU(3)-structure on a hyperplane of R^7


def complex_structure_from_phi(x, phi: forms.AlternatingForm | None = None) -> np.ndarray:
    """J on x^perp (as a 7x7 matrix vanishing on x) with <v, w> = (i_x phi)(J v, w)."""
    phi = forms.standard_phi() if phi is None else phi
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("x must be a unit vector")
    B = perp_frames(x[:, None])  # 7 x 6
    ix = forms.interior(x, phi)
    om = np.array([[forms.evaluate(ix, [B[:, i], B[:, j]]) for j in range(6)] for i in range(6)])
    if abs(np.linalg.det(om)) < 1e-12:
        raise ArithmeticError("i_x phi is degenerate on the complement of x")
    # v^T w = (J v)^T om w for all v, w  =>  J^T om = I
    Jl = np.linalg.inv(om).T
    return B @ Jl @ B.T


@dataclass(frozen=True, eq=False)
class HyperplaneStructure:
    """SU(3)-structure that phi induces on x^perp.

    ``basis`` has columns (u1, Ju1, u2, Ju2, u3, Ju3), a unitary frame of
    (x^perp, J) in which phi restricted to x^perp equals Re(dz1 dz2 dz3), and
    ``kaehler`` is the matrix of i_x phi on R^7.
    """

    x: np.ndarray
    J: np.ndarray
    basis: np.ndarray
    kaehler: np.ndarray

    def cosines(self, frames: np.ndarray) -> np.ndarray:
        A = np.swapaxes(frames, -1, -2) @ self.kaehler @ frames
        k = A.shape[-1]
        s = np.linalg.svd(A, compute_uv=False)
        return np.clip(s[..., 0 : 2 * (k // 2) : 2], 0.0, 1.0)

    def theta(self, frames: np.ndarray) -> np.ndarray:
        Z = complex_coordinates(frames, self.basis)
        return np.linalg.det(Z)

    def random_frames(self, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
        local = random_frames(6, k, size, rng)
        return self.basis @ local


def hyperplane_structure(x=None, phi: forms.AlternatingForm | None = None) -> HyperplaneStructure:
    phi = forms.standard_phi() if phi is None else phi
    x = np.eye(7)[0] if x is None else np.asarray(x, dtype=float)
    J = complex_structure_from_phi(x, phi)
    ix = forms.interior(x, phi)
    K = np.array([[ix[(i, j)] for j in range(7)] for i in range(7)])
    B = perp_frames(x[:, None])
    cols = []
    for _ in range(3):
        # next vector: orthogonal to x and everything chosen so far (a J-invariant set)
        cand = B.T
        if cols:
            Q = np.array(cols).T
            cand = cand - (cand @ Q) @ Q.T
        u = cand[np.argmax(np.linalg.norm(cand, axis=1))]
        u = u / np.linalg.norm(u)
        cols += [u, J @ u]
    basis = np.array(cols).T
    # rotate u1 by a phase so that phi(u1, u2, u3) = 1 and phi(Ju1, u2, u3) = 0
    u1, Ju1, u2, _, u3, _ = basis.T
    c = forms.evaluate(phi, [u1, u2, u3]) - 1j * forms.evaluate(phi, [Ju1, u2, u3])
    if abs(abs(c) - 1.0) > 1e-9:
        raise ArithmeticError("phi restricted to x^perp is not a unit (3,0)+(0,3) form")
    a = -np.angle(c)
    new_u1 = np.cos(a) * u1 + np.sin(a) * Ju1
    basis[:, 0], basis[:, 1] = new_u1, J @ new_u1
    return HyperplaneStructure(x=x, J=J, basis=basis, kaehler=K)
