"""Invariant valuations on polytopes through Klain-weight face sums.

Every valuation here is even and of pure degree k, so on a polytope

    mu(P) = sum over k-faces F of gamma(F) vol(F) Kl_mu(W_F)

and the per-valuation code is only the Klain weight.  Contexts:
G2 (R^7 with phi), SPIN7 (R^8 with Phi), SU (C^m with the standard
structure), SO (any R^n, intrinsic volumes only).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import forms
from . import grassmann as gm
from .polytope import MC_ANGLE_SAMPLES, Polytope, face_angles

CONTEXT_DIM = {"G2": 7, "SPIN7": 8}

MU, NU3, NU4, ETA = "MU", "NU3", "NU4", "ETA"
TASAKI, PHI_N2, PHI_N1 = "TASAKI", "PHI_N2", "PHI_N1"
NU3_PRIME, NU4_PRIME, ETA_PRIME = "NU3_PRIME", "NU4_PRIME", "ETA_PRIME"
KINDS = (MU, NU3, NU4, ETA, TASAKI, PHI_N2, PHI_N1, NU3_PRIME, NU4_PRIME, ETA_PRIME)
_BASE = {NU3_PRIME: NU3, NU4_PRIME: NU4, ETA_PRIME: ETA}
_FIXED = {NU3: (3, "G2"), NU4: (4, "G2"), ETA: (4, "SPIN7")}

# normalization of the disk-bundle current: 1 / vol(B^4)
DISK_BUNDLE_CONSTANT = 2.0 / math.pi**2


class ValuationError(ValueError):
    pass


@dataclass(frozen=True)
class ValuationId:
    kind: str
    k: int | None = None
    q: int | None = None
    context: str = "SO"

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "context", self.context.upper())
        if kind not in KINDS:
            raise ValuationError(f"unknown valuation kind {self.kind}")
        base = _BASE.get(kind, kind)
        if base in _FIXED:
            deg, ctx = _FIXED[base]
            if self.k not in (None, deg):
                raise ValuationError(f"{kind} has degree {deg}")
            object.__setattr__(self, "k", deg)
            object.__setattr__(self, "context", ctx)
        elif self.k is None or self.k < 0:
            raise ValuationError(f"{kind} needs a nonnegative degree parameter")
        if kind == TASAKI:
            if self.q is None or not 0 <= self.q <= self.k // 2:
                raise ValuationError("TASAKI(k, q) requires 0 <= q <= k // 2")
        if kind in (TASAKI, PHI_N1, PHI_N2):
            object.__setattr__(self, "context", "SU")

    @property
    def degree(self) -> int:
        return self.k

    @property
    def complex_valued(self) -> bool:
        return self.kind in (PHI_N1, PHI_N2)

    @property
    def ambient_dim(self) -> int | None:
        if self.context in CONTEXT_DIM:
            return CONTEXT_DIM[self.context]
        if self.kind in (PHI_N1, PHI_N2):
            return 2 * self.k
        return None

    def __str__(self) -> str:
        if self.kind == TASAKI:
            return f"TASAKI({self.k},{self.q})"
        if self.kind in (MU, PHI_N1, PHI_N2):
            return f"{self.kind}({self.k})"
        return self.kind

    @classmethod
    def parse(cls, text: str, context: str = "SO") -> "ValuationId":
        """'MU(3)', 'NU3', 'ETA_PRIME', 'TASAKI(4,1)', 'PHI_N2(4)' (case-insensitive)."""
        m = re.fullmatch(r"\s*([A-Za-z0-9_]+)\s*(?:\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\))?\s*", text)
        if not m:
            raise ValuationError(f"cannot parse valuation {text!r}")
        kind, a, b = m.groups()
        return cls(kind, None if a is None else int(a), None if b is None else int(b), context)


def mu(k: int, context: str = "SO") -> ValuationId:
    return ValuationId(MU, k, context=context)


@dataclass(frozen=True)
class ValuationValue:
    value: complex
    std_error: float = 0.0
    valuation: str = ""

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def to_json(self) -> dict:
        v = complex(self.value)
        out = {"valuation": self.valuation, "value": v.real, "std_error": self.std_error}
        if v.imag != 0.0:
            out["value_imag"] = v.imag
        return out


# ---------------------------------------------------------------------------
# Klain weights


def _cosines(frames):
    return gm.kaehler_cosines_frames(frames, forms.complex_structure(frames.shape[-2] // 2))


def klain_weight_frames(vid: ValuationId, frames) -> np.ndarray:
    """Klain weights on a stack of orthonormal frames (..., n, degree)."""
    frames = np.asarray(frames, dtype=float)
    n, k = frames.shape[-2:]
    if k != vid.degree:
        raise ValuationError(f"{vid} has degree {vid.degree}, subspace has dimension {k}")
    if vid.ambient_dim is not None and n != vid.ambient_dim:
        raise ValuationError(f"{vid} lives in dimension {vid.ambient_dim}, got {n}")
    if vid.context == "SU" and n % 2:
        raise ValuationError("SU valuations need an even ambient dimension")
    kind = vid.kind
    shape = frames.shape[:-2]
    if kind in _BASE:
        return 5.0 * klain_weight_frames(ValuationId(_BASE[kind]), frames) - 1.0
    if kind == MU:
        return np.ones(shape)
    if kind == NU3:
        return gm.phi_sq_frames(frames)
    if kind == NU4:
        return gm.phi_sq_frames(gm.perp_frames(frames))
    if kind == ETA:
        return gm.Phi_sq_frames(frames)
    if kind == TASAKI:
        return gm.elementary_symmetric(_cosines(frames) ** 2, vid.q)
    th, _ = gm.theta_frames(frames, forms.complex_structure(n // 2))
    if kind == PHI_N2:
        return th**2
    return th * np.prod(_cosines(frames), axis=-1)


def klain_weight(vid: ValuationId, W: gm.Subspace) -> complex | float:
    w = klain_weight_frames(vid, W.frame)
    return complex(w) if vid.complex_valued else float(w)


# ---------------------------------------------------------------------------
# face sums


def evaluate(vid: ValuationId, P: Polytope, samples: int = MC_ANGLE_SAMPLES, seed: int = 0) -> ValuationValue:
    """Face sum of gamma(F) vol(F) Kl(W_F) over the faces of the valuation's degree."""
    if vid.ambient_dim is not None and P.ambient_dim != vid.ambient_dim:
        raise ValuationError(f"{vid} needs ambient dimension {vid.ambient_dim}, polytope has {P.ambient_dim}")
    k = vid.degree
    if k > P.dim:
        return ValuationValue(0.0, 0.0, str(vid))
    fs = P.faces(k)
    angles = face_angles(P, k, samples, seed)
    frames = np.stack([F.tangent.frame for F in fs])
    w = klain_weight_frames(vid, frames)
    vol = np.array([F.volume for F in fs])
    g = np.array([a.value for a in angles])
    se = np.array([a.std_error for a in angles])
    terms = g * vol * w
    if vid.complex_valued:
        value = complex(math.fsum(terms.real), math.fsum(terms.imag))
    else:
        value = math.fsum(np.real(terms))
    err = math.sqrt(math.fsum((se * vol * np.abs(w)) ** 2))
    return ValuationValue(value, err, str(vid))


# eta as a combination of SU(4) valuations
ETA_DECOMPOSITION = (
    (0.5, ValuationId(TASAKI, 4, 0)),
    (-0.5, ValuationId(TASAKI, 4, 1)),
    (1.5, ValuationId(TASAKI, 4, 2)),
    (0.5, ValuationId(PHI_N2, 4)),
    (2.0, ValuationId(PHI_N1, 4)),
)


def eta_combination(P: Polytope, samples: int = MC_ANGLE_SAMPLES, seed: int = 0) -> ValuationValue:
    total, var = [], 0.0
    for c, vid in ETA_DECOMPOSITION:
        v = evaluate(vid, P, samples, seed)
        total.append(c * np.real(v.value))
        var += (c * v.std_error) ** 2
    return ValuationValue(math.fsum(total), math.sqrt(var), "ETA_COMBINATION")


def eta_decomposition_residual(P: Polytope, samples: int = MC_ANGLE_SAMPLES, seed: int = 0) -> float:
    if P.ambient_dim != 8:
        raise ValuationError("eta lives on R^8 = C^4")
    return abs(evaluate(ValuationId(ETA), P, samples, seed).real - eta_combination(P, samples, seed).real)


# ---------------------------------------------------------------------------
# disk-bundle representation of nu3


@dataclass
class _Star:
    phi: forms.AlternatingForm = field(default_factory=forms.standard_phi)

    def __post_init__(self):
        self.star = forms.hodge_star(self.phi)


_STAR = None


def _star_phi():
    global _STAR
    if _STAR is None:
        _STAR = _Star()
    return _STAR


def nu3_disk_bundle(P: Polytope, mc_samples: int = 20_000, seed: int = 0) -> ValuationValue:
    """nu3 from the disk bundle: c * N_1(P)(p1^*phi ^ p2^* *phi).

    Only the pieces F x (N(F) cap B) over 3-faces see the 3 + 4 split of the
    integrand; on such a piece the integral is
        phi(W_F) vol(F) * (*phi)(W_F^perp) * vol_4(N(F) cap B),
    with W_F^perp oriented so that (W_F, W_F^perp) is positive.  The solid
    cone patch is integrated by Monte Carlo over the unit 4-ball of W_F^perp.
    """
    if P.ambient_dim != 7:
        raise ValuationError("nu3 lives on R^7")
    if P.dim < 3:
        return ValuationValue(0.0, 0.0, "NU3_DISK_BUNDLE")
    st = _star_phi()
    rng = np.random.default_rng(seed)
    ball = math.pi**2 / 2
    terms, var = [], 0.0
    for F in P.faces(3):
        W = F.tangent.frame
        U = gm.perp_frames(W)
        flux = float(forms.evaluate(st.phi, W)) * float(forms.evaluate(st.star, U))
        A = F.normal_cone.constraints @ U  # cone constraints in W_F^perp coordinates
        if len(A) == 0:
            frac, se = 1.0, 0.0
        else:
            x = rng.standard_normal((mc_samples, 4))
            x *= (rng.random(mc_samples) ** 0.25 / np.linalg.norm(x, axis=1))[:, None]
            hit = np.all(x @ A.T <= 0.0, axis=1)
            frac = float(hit.mean())
            se = math.sqrt(max(frac * (1 - frac), 0.0) / mc_samples)
        c = DISK_BUNDLE_CONSTANT * flux * F.volume * ball
        terms.append(c * frac)
        var += (c * se) ** 2
    return ValuationValue(math.fsum(terms), math.sqrt(var), "NU3_DISK_BUNDLE")


# ---------------------------------------------------------------------------
# Klain-function checks


def _ambient(ida: ValuationId, idb: ValuationId, n: int | None) -> int:
    for v in (ida, idb):
        if v.ambient_dim is not None:
            return v.ambient_dim
    if n is None:
        raise ValuationError("ambient dimension needed for context-free valuations")
    return n


def fourier_residual(ida: ValuationId, idb: ValuationId, samples: int = 10_000, seed: int = 0,
                     n: int | None = None) -> float:
    """max over random W of |Kl_a(W) - Kl_b(W^perp)|."""
    n = _ambient(ida, idb, n)
    if ida.degree + idb.degree != n:
        raise ValuationError("Fourier pairs need complementary degrees")
    rng = np.random.default_rng(seed)
    W = gm.random_frames(n, ida.degree, samples, rng)
    a = klain_weight_frames(ida, W)
    b = klain_weight_frames(idb, gm.perp_frames(W))
    return float(np.abs(a - b).max())


@dataclass(frozen=True)
class RankReport:
    context: str
    ranks: tuple
    singular_values: tuple
    gaps: tuple

    @property
    def rank(self) -> int:
        return int(sum(self.ranks))

    def to_json(self) -> dict:
        return {
            "context": self.context,
            "rank": self.rank,
            "ranks": list(self.ranks),
            "singular_values": [list(map(float, s)) for s in self.singular_values],
            "gaps": [float(g) for g in self.gaps],
        }


def _fourier_dual(vid: ValuationId, n: int):
    """Weight function W -> Kl_vid(W^perp) for a valuation of degree n - k."""
    return lambda frames: klain_weight_frames(vid, gm.perp_frames(frames))


def rank_candidates(context: str, k: int):
    """Candidate Klain functions of degree k, over-complete on purpose.

    Each degree gets mu_k and the Fourier dual of mu_{n-k}; degrees carrying an
    exceptional valuation add it, its primed version and the dual of its
    partner, so each block has dependent columns and a visible rank gap.
    """
    context = context.upper()
    n = CONTEXT_DIM.get(context, 7)
    ctx = context if context in CONTEXT_DIM else "SO"
    cols = [
        lambda W, k=k: klain_weight_frames(mu(k, ctx), W),
        _fourier_dual(mu(n - k, ctx), n),
    ]
    if context == "G2" and k == 3:
        cols += [
            lambda W: klain_weight_frames(ValuationId(NU3), W),
            lambda W: klain_weight_frames(ValuationId(NU3_PRIME), W),
            _fourier_dual(ValuationId(NU4), n),
        ]
    if context == "G2" and k == 4:
        cols += [
            lambda W: klain_weight_frames(ValuationId(NU4), W),
            lambda W: klain_weight_frames(ValuationId(NU4_PRIME), W),
            _fourier_dual(ValuationId(NU3), n),
        ]
    if context == "SPIN7" and k == 4:
        cols += [
            lambda W: klain_weight_frames(ValuationId(ETA), W),
            lambda W: klain_weight_frames(ValuationId(ETA_PRIME), W),
            _fourier_dual(ValuationId(ETA), n),
        ]
    return cols


def hadwiger_rank_details(context: str, samples: int = 100, seed: int = 0, gap_ratio: float = 1e3,
                          n: int | None = None) -> RankReport:
    """Numerical rank of Klain-sample matrices, degree by degree.

    The rank of each block is read off the largest ratio between consecutive
    singular values; a block whose values all agree within ``gap_ratio`` is
    full rank.
    """
    context = context.upper()
    if context not in CONTEXT_DIM and context != "SO":
        raise ValuationError(f"unknown context {context}")
    n = CONTEXT_DIM.get(context, n or 7)
    rng = np.random.default_rng(seed)
    ranks, svals, gaps = [], [], []
    for k in range(n + 1):
        W = gm.random_frames(n, k, samples, rng)
        M = np.stack([np.real(c(W)) for c in rank_candidates(context, k)], axis=1)
        s = np.linalg.svd(M, compute_uv=False)
        ratios = s[:-1] / np.maximum(s[1:], np.finfo(float).tiny)
        j = int(np.argmax(ratios))
        if ratios[j] > gap_ratio:
            r, gap = j + 1, float(ratios[j])
        else:
            r, gap = len(s), float("inf")
        ranks.append(r)
        svals.append(tuple(s))
        gaps.append(gap)
    return RankReport(context, tuple(ranks), tuple(svals), tuple(gaps))


def hadwiger_rank_check(context: str, samples: int = 100, seed: int = 0) -> int:
    return hadwiger_rank_details(context, samples, seed).rank
