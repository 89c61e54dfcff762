"""Seeded Haar samplers for SO(n), SU(n), G2 and Spin(7), with membership certification.

G2 and Spin(7) are sampled by a product-of-exponentials random walk on the
Lie algebra returned by :func:`forms.annihilator_algebra`.  Several walkers
run side by side (vectorized); each emitted sample advances every walker by
``stride`` steps.  Left-invariance of the step distribution makes Haar
measure the stationary law.

Stream splitting: worker ``i`` of a run seeded with ``seed`` uses
``np.random.SeedSequence(seed, spawn_key=(i,))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import forms
from .grassmann import hyperplane_structure, perp_frames

log = logging.getLogger(__name__)

GROUP_TAGS = ("SO7", "SO8", "SU3", "SU4", "G2", "SPIN7")
GROUP_DIM = {"SO7": 7, "SO8": 8, "SU3": 6, "SU4": 8, "G2": 7, "SPIN7": 8}
CERT_TOL = 1e-9
MIN_WALK_STEPS = 200


class CertificationError(RuntimeError):
    """A sampled matrix failed to preserve its defining structure."""


def child_seed(seed: int, worker: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(worker,))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# matrix exponential


def exp_skew(X: np.ndarray, degree: int = 14) -> np.ndarray:
    """exp of a real skew matrix (or a stack of them).

    Scaling and squaring with a truncated Taylor series: the argument is
    scaled to max-row-sum norm <= 1/4, where the degree-14 remainder is far
    below double precision.
    """
    X = np.asarray(X, dtype=float)
    if np.abs(X + np.swapaxes(X, -1, -2)).max(initial=0.0) > 1e-12:
        raise ValueError("matrix is not skew-symmetric")
    norm = np.abs(X).sum(axis=-1).max(initial=0.0)
    squarings = int(np.ceil(np.log2(norm / 0.25))) if norm > 0.25 else 0
    Y = X / 2.0**squarings
    eye = np.broadcast_to(np.eye(X.shape[-1]), X.shape)
    E = eye.copy()
    term = eye.copy()
    for k in range(1, degree + 1):
        term = term @ Y / k
        E = E + term
    for _ in range(squarings):
        E = E @ E
    return E


# ---------------------------------------------------------------------------
# group elements


@lru_cache(maxsize=None)
def defining_forms(tag: str) -> tuple:
    if tag == "G2":
        return (forms.standard_phi(),)
    if tag == "SPIN7":
        return (forms.standard_Phi(),)
    if tag in ("SU3", "SU4"):
        m = GROUP_DIM[tag] // 2
        re, im = forms.holomorphic_volume(m)
        return (forms.kaehler_form(m), re, im)
    return ()


@lru_cache(maxsize=None)
def lie_algebra(tag: str) -> np.ndarray:
    """Frobenius-orthonormal basis of the Lie algebra, shape (d, n, n)."""
    n = GROUP_DIM[tag]
    if tag.startswith("SO"):
        return np.array(forms.skew_basis(n))
    return np.array(forms.annihilator_algebra(list(defining_forms(tag))))


@lru_cache(maxsize=None)
def _split_forms(tag: str) -> tuple:
    return tuple((a, forms.split_matrix(a)) for a in defining_forms(tag))


def defects(tag: str, gs: np.ndarray) -> np.ndarray:
    """Per-sample max residual of the group's defining relations, for a stack (B, n, n)."""
    gs = np.asarray(gs, dtype=float)
    n = GROUP_DIM[tag]
    if gs.shape[-2:] != (n, n):
        raise CertificationError(f"{tag}: expected {n}x{n} matrices")
    res = np.abs(np.swapaxes(gs, 1, 2) @ gs - np.eye(n)).max(axis=(1, 2))
    res = np.maximum(res, np.abs(np.linalg.det(gs) - 1.0))
    for a, A in _split_forms(tag):
        res = np.maximum(res, np.abs(forms.pullback_split(a, gs, A) - A).max(axis=(1, 2)))
    if tag in ("SU3", "SU4"):
        J = forms.complex_structure(n // 2)
        res = np.maximum(res, np.abs(gs @ J - J @ gs).max(axis=(1, 2)))
    return res


def certify(tag: str, g: np.ndarray) -> float:
    """Largest defect of g as an element of the group ``tag``; raises above CERT_TOL."""
    g = np.asarray(g, dtype=float)
    res = float(defects(tag, g[None])[0])
    if not res < CERT_TOL:
        raise CertificationError(f"{tag}: defining-structure residual {res:.3e} exceeds {CERT_TOL:g}")
    return res


@dataclass(frozen=True, eq=False)
class GroupElement:
    matrix: np.ndarray
    group_tag: str

    def __post_init__(self):
        if self.group_tag not in GROUP_TAGS:
            raise ValueError(f"unknown group {self.group_tag}")
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def certify(self) -> float:
        return certify(self.group_tag, self.matrix)

    def to_json(self) -> dict:
        return {"group": self.group_tag, "n": self.matrix.shape[0], "matrix": self.matrix.reshape(-1).tolist()}

    @classmethod
    def from_json(cls, data) -> "GroupElement":
        n = int(data["n"])
        return cls(np.asarray(data["matrix"], dtype=float).reshape(n, n), data["group"])


# ---------------------------------------------------------------------------
# direct samplers


def sample_so_batch(n: int, size: int, rng) -> np.ndarray:
    """Haar-random SO(n) matrices: QR of a Gaussian matrix, signs fixed by diag(R)."""
    rng = make_rng(rng)
    A = rng.standard_normal((size, n, n))
    q, r = np.linalg.qr(A)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    q = q * d[:, None, :]
    neg = np.linalg.det(q) < 0
    q[neg, :, 0] *= -1
    return q


def sample_so(n: int, state) -> GroupElement:
    if n not in (7, 8):
        raise ValueError("SO(n) sampling is provided for n = 7, 8")
    g = GroupElement(sample_so_batch(n, 1, state)[0], f"SO{n}")
    g.certify()
    return g


def complex_to_real(U: np.ndarray) -> np.ndarray:
    """Real 2m x 2m matrix of a complex m x m matrix in (x1, y1, ...) coordinates."""
    U = np.asarray(U)
    m = U.shape[-1]
    R = np.zeros(U.shape[:-2] + (2 * m, 2 * m))
    R[..., 0::2, 0::2] = U.real
    R[..., 0::2, 1::2] = -U.imag
    R[..., 1::2, 0::2] = U.imag
    R[..., 1::2, 1::2] = U.real
    return R


def sample_su_complex(m: int, size: int, rng) -> np.ndarray:
    rng = make_rng(rng)
    Z = (rng.standard_normal((size, m, m)) + 1j * rng.standard_normal((size, m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(Z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[:, None, :]
    det = np.linalg.det(q)
    q[:, :, 0] *= np.conj(det)[:, None]
    return q


def sample_su_batch(m: int, size: int, rng) -> np.ndarray:
    return complex_to_real(sample_su_complex(m, size, rng))


def sample_su(m: int, state) -> GroupElement:
    if m not in (3, 4):
        raise ValueError("SU(n) sampling is provided for n = 3, 4")
    g = GroupElement(sample_su_batch(m, 1, state)[0], f"SU{m}")
    g.certify()
    return g


# ---------------------------------------------------------------------------
# random walk for the exceptional groups


@dataclass(eq=False)
class HaarSampler:
    """Seeded sampler for one of GROUP_TAGS.

    For G2/SPIN7 it keeps ``n_chains`` walkers; ``walk_steps`` is the burn-in
    and ``stride`` the number of steps between emitted samples.  Emitted
    samples are certified against the defining relations of the group:
    every one by default, or every ``certify_every``-th (plus the last of
    each batch) if that is raised.
    """

    group_tag: str
    seed: int = 0
    walk_steps: int = 200
    step_scale: float = 0.5
    stride: int = 20
    n_chains: int = 64
    certify_every: int = 1
    _rng: np.random.Generator = field(init=False, repr=False)
    _state: np.ndarray | None = field(init=False, repr=False, default=None)
    _emitted: int = field(init=False, repr=False, default=0)

    def __post_init__(self):
        if self.group_tag not in GROUP_TAGS:
            raise ValueError(f"unknown group {self.group_tag}")
        if self.exceptional and self.walk_steps < MIN_WALK_STEPS:
            raise ValueError(f"walk_steps must be at least {MIN_WALK_STEPS} for exceptional groups")
        if self.stride < 1 or self.n_chains < 1:
            raise ValueError("stride and n_chains must be positive")
        self._rng = make_rng(self.seed)

    @property
    def exceptional(self) -> bool:
        return self.group_tag in ("G2", "SPIN7")

    @property
    def dim(self) -> int:
        return GROUP_DIM[self.group_tag]

    def _steps(self, g: np.ndarray, count: int) -> np.ndarray:
        basis = lie_algebra(self.group_tag)
        for _ in range(count):
            z = self._rng.standard_normal((g.shape[0], basis.shape[0])) * self.step_scale
            X = np.tensordot(z, basis, axes=1)
            g = exp_skew(X) @ g
        return g

    def _walk_block(self) -> np.ndarray:
        if self._state is None:
            start = np.broadcast_to(np.eye(self.dim), (self.n_chains, self.dim, self.dim)).copy()
            self._state = self._steps(start, self.walk_steps)
        self._state = self._steps(self._state, self.stride)
        return self._state.copy()

    def sample_batch(self, size: int) -> np.ndarray:
        """``size`` samples as an array (size, n, n).

        For the walk, samples are taken chain-major within each block, so
        sample i comes from chain ``i % n_chains``.
        """
        if self.group_tag.startswith("SO"):
            out = sample_so_batch(self.dim, size, self._rng)
        elif self.group_tag.startswith("SU"):
            out = sample_su_batch(self.dim // 2, size, self._rng)
        else:
            blocks = []
            have = 0
            while have < size:
                b = self._walk_block()
                blocks.append(b)
                have += len(b)
            out = np.concatenate(blocks)[:size]
        self._certify_batch(out)
        return out

    def _certify_batch(self, out: np.ndarray):
        step = max(1, int(self.certify_every))
        idx = np.arange(0, len(out), step)
        if len(out) and idx[-1] != len(out) - 1:
            idx = np.append(idx, len(out) - 1)
        for lo in range(0, len(idx), 4096):
            chunk = idx[lo : lo + 4096]
            res = defects(self.group_tag, out[chunk])
            bad = np.nonzero(~(res < CERT_TOL))[0]
            if len(bad):
                i = int(chunk[bad[0]])
                raise CertificationError(
                    f"{self.group_tag}: sample {self._emitted + i} has defining-structure residual "
                    f"{res[bad[0]]:.3e} > {CERT_TOL:g}"
                )
        self._emitted += len(out)

    def sample(self) -> GroupElement:
        return GroupElement(self.sample_batch(1)[0], self.group_tag)

    def fork(self, worker: int) -> "HaarSampler":
        """Independent sampler for a worker, seeded by the stream-split rule."""
        seq = child_seed(int(self.seed), worker)
        s = HaarSampler(
            self.group_tag,
            seed=0,
            walk_steps=self.walk_steps,
            step_scale=self.step_scale,
            stride=self.stride,
            n_chains=self.n_chains,
            certify_every=self.certify_every,
        )
        s._rng = np.random.default_rng(seq)
        return s


def sample_exceptional(tag: str, state: HaarSampler | int | None = None) -> GroupElement:
    if tag not in ("G2", "SPIN7"):
        raise ValueError("tag must be G2 or SPIN7")
    sampler = state if isinstance(state, HaarSampler) else HaarSampler(tag, seed=state or 0, n_chains=1)
    return sampler.sample()


# ---------------------------------------------------------------------------
# subgroup embeddings


def su3_in_g2(U: np.ndarray) -> np.ndarray:
    """Embed real 6x6 SU(3) matrices as the stabilizer of e1 in R^7."""
    basis = hyperplane_structure().basis  # 7 x 6, columns (u1, Ju1, ...)
    U = np.asarray(U, dtype=float)
    e1 = np.eye(7)[:, :1]
    return e1 @ e1.T + basis @ U @ basis.T


def g2_frame(phi: forms.AlternatingForm, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis f1..f7 of R^7 in which ``phi`` has the standard coefficients.

    Uses the cross product <x * y, z> = phi(x, y, z) and the standard-basis
    relations e3 = e1*e2, e5 = e1*e4, e6 = e2*e4, e7 = -(e3*e4).
    ``phi`` must be positive with the Euclidean metric as its own metric.
    """
    n = 7

    def cross(a, b):
        return np.array([forms.evaluate(phi, [a, b, np.eye(n)[i]]) for i in range(n)])

    e = np.eye(n)
    f1 = e[0]
    f2 = next(v - (v @ f1) * f1 for v in e[1:] if np.linalg.norm(v - (v @ f1) * f1) > 0.5)
    f2 /= np.linalg.norm(f2)
    f3 = cross(f1, f2)
    Q = np.array([f1, f2, f3]).T
    f4 = max((v - Q @ (Q.T @ v) for v in e), key=np.linalg.norm)
    f4 /= np.linalg.norm(f4)
    F = np.array([f1, f2, f3, f4, cross(f1, f4), cross(f2, f4), -cross(f3, f4)]).T
    std = forms.standard_phi()
    if not forms.pullback(phi, F).allclose(std, tol) or np.abs(F.T @ F - np.eye(n)).max() > tol:
        raise ArithmeticError("could not build a G2 frame; phi is not a normalized positive form")
    return F


def spin7_hyperplane_phi(v) -> tuple[np.ndarray, forms.AlternatingForm]:
    """(B, phi_B): an orthonormal basis B (8x7) of v^perp and *_W(Phi|_W) in B-coordinates."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    B = perp_frames(v[:, None])
    Phi = forms.standard_Phi()
    restricted = forms.AlternatingForm(7, 4, forms.compound(B, 4).T @ Phi.coeffs)
    return B, forms.hodge_star(restricted)


def g2_in_spin7(h: np.ndarray, v=None) -> np.ndarray:
    """Embed G2 (acting on R^7 with the standard phi) into the stabilizer of v in Spin(7)."""
    v = np.eye(8)[0] if v is None else np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    B, phi_B = spin7_hyperplane_phi(v)
    F = B @ g2_frame(phi_B)
    h = np.asarray(h, dtype=float)
    return np.outer(v, v) + F @ h @ F.T
