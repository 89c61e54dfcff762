"""Monte Carlo principal kinematic integrals and their analytic right-hand sides.

The left-hand side is

    int_G int_V chi(K cap (g L + x)) dx dg = E_g vol(K - g L)

with Haar probability on G and Lebesgue measure on V.  It is estimated by
stratified sampling: an outer loop over group elements and, for each, uniform
translations in a box that certainly contains K - gL.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import valuations as val
from .groups import GROUP_DIM, HaarSampler
from .polytope import (
    BOX,
    INTERSECT_TOL,
    Polytope,
    bounding_radius,
    box_pair_hits,
    difference_zonotope,
    intersects,
    intrinsic_volumes,
)

log = logging.getLogger(__name__)

G2_CONSTANT = 1.0 / 2**9
SPIN7_CONSTANT = 3.0 / math.factorial(7)
HULL, BALL = "hull", "ball"
CHUNK = 256  # group elements per stratum block; fixes the translation seed layout


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


@dataclass(frozen=True, eq=False)
class KinematicExperiment:
    """One kinematic integral: group, bodies and sampling plan.

    ``translation_domain`` is ``"ball"`` for the fixed cube of side
    2(r_K + r_L) + box_margin around c_K - g c_L, or ``"hull"`` for the
    bounding box of K - gL (grown by box_margin / 2 on every side), which is
    recomputed for every g.  Both contain the support of the integrand.
    """

    group_tag: str
    K: Polytope
    L: Polytope
    n_group: int = 2000
    n_translation: int = 2000
    master_seed: int = 0
    box_margin: float = 0.0
    translation_domain: str = HULL
    stride: int = 20
    n_chains: int = 64
    workers: int = 1

    def __post_init__(self):
        if self.group_tag not in GROUP_DIM:
            raise ValueError(f"unknown group {self.group_tag}")
        n = GROUP_DIM[self.group_tag]
        if self.K.ambient_dim != n or self.L.ambient_dim != n:
            raise ValueError(f"bodies must live in R^{n} for {self.group_tag}")
        if self.box_margin < 0:
            raise ValueError("box_margin must be nonnegative")
        if self.n_group < 2 or self.n_translation < 1:
            raise ValueError("need n_group >= 2 and n_translation >= 1")
        if self.translation_domain not in (HULL, BALL):
            raise ValueError("translation_domain must be 'hull' or 'ball'")

    @property
    def ambient_dim(self) -> int:
        return GROUP_DIM[self.group_tag]

    @property
    def box_side(self) -> float:
        return 2 * (bounding_radius(self.K) + bounding_radius(self.L)) + self.box_margin


@dataclass
class KinematicReport:
    group_tag: str
    lhs_estimate: float
    lhs_std_error: float
    rhs_terms: dict
    rhs_total: float
    rhs_std_error: float
    z_score: float
    classical_total: float
    exceptional_total: float
    exceptional_estimate: float
    exceptional_relative_error: float | None
    between_variance: float
    within_variance: float
    n_group: int
    n_translation: int
    master_seed: int
    strata: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "strata"}
        d["rhs_terms"] = {k: float(v) for k, v in self.rhs_terms.items()}
        return d


# ---------------------------------------------------------------------------
# group samples and translation domains


def group_samples(exp: KinematicExperiment) -> np.ndarray:
    sampler = HaarSampler(exp.group_tag, seed=exp.master_seed, stride=exp.stride, n_chains=exp.n_chains).fork(0)
    return sampler.sample_batch(exp.n_group)


def _chain_labels(exp: KinematicExperiment, size: int) -> np.ndarray:
    if exp.group_tag in ("G2", "SPIN7"):
        return np.arange(size) % exp.n_chains
    return np.arange(size)


def _domains(exp: KinematicExperiment, gs: np.ndarray):
    """Lower corners and side lengths (B, n) of the translation boxes."""
    VK, VL = exp.K.vertices, exp.L.vertices
    gVL = np.einsum("bij,vj->bvi", gs, VL)
    if exp.translation_domain == BALL:
        c = exp.K.centroid() - np.einsum("bij,j->bi", gs, exp.L.centroid())
        side = np.full_like(c, exp.box_side)
        return c - side / 2, side
    lo = VK.min(axis=0) - gVL.max(axis=1) - exp.box_margin / 2
    hi = VK.max(axis=0) - gVL.min(axis=1) + exp.box_margin / 2
    return lo, hi - lo


def _box_generators(P: Polytope):
    p = P.params
    return p["center"], p["frame"] * p["half_lengths"]


def _square_maps(exp, gs, lo, side, tol=INTERSECT_TOL):
    """Affine maps U -> coefficients of lo + side * U in the parallelotope K - gL.

    For complementary-dimensional boxes K - gL = c + G [-1, 1]^n with G
    square, so x is a hit iff |G^{-1}(x - c)| <= 1 componentwise.
    """
    cK, GK = _box_generators(exp.K)
    cL, GL = _box_generators(exp.L)
    G = np.concatenate([np.broadcast_to(GK, (len(gs),) + GK.shape), gs @ GL], axis=2)
    Ginv = np.linalg.inv(G)
    c = cK - gs @ cL
    offset = np.einsum("bij,bj->bi", Ginv, lo - c)
    M = np.swapaxes(Ginv * side[:, None, :], 1, 2)  # row-vector form: u = U @ M + offset
    bound = 1.0 + tol * np.linalg.norm(Ginv, axis=2)
    return M, offset, bound


def _hits_generic(exp, gs, X, tol=INTERSECT_TOL):
    n = exp.ambient_dim
    if exp.K.family == BOX and exp.L.family == BOX and exp.K.dim == n and exp.L.dim == n:
        return box_pair_hits(exp.K, exp.L, gs, X, tol)
    out = np.zeros(X.shape[:2], dtype=bool)
    both_boxes = exp.K.family == BOX and exp.L.family == BOX
    for b, g in enumerate(gs):
        gL = exp.L.transformed(g)
        if both_boxes:
            out[b] = difference_zonotope(exp.K, gL).contains(X[b], tol)
        else:
            out[b] = [intersects(exp.K, gL.translated(x), tol) for x in X[b]]
    return out


def _integrand_kind(exp) -> str:
    K, L = exp.K, exp.L
    if K.family == BOX and L.family == BOX and K.dim + L.dim == exp.ambient_dim:
        return "square"
    return "generic"


def _stratum(exp: KinematicExperiment, gs: np.ndarray, block: int):
    """Per-g hit fractions and domain volumes for one block of group samples."""
    rng = np.random.default_rng(np.random.SeedSequence(exp.master_seed, spawn_key=(1, block)))
    lo, side = _domains(exp, gs)
    T = exp.n_translation
    vol = np.prod(side, axis=1)
    hits = np.zeros(len(gs))
    square = _integrand_kind(exp) == "square"
    if square:
        M, offset, bound = _square_maps(exp, gs, lo, side)
    # inner translations in slabs to bound memory
    slab = max(1, min(T, 2**21 // max(1, len(gs) * exp.ambient_dim)))
    done = 0
    while done < T:
        t = min(slab, T - done)
        U = rng.random((len(gs), t, exp.ambient_dim))
        if square:
            u = U @ M
            u += offset[:, None, :]
            h = np.all(np.abs(u) <= bound[:, None, :], axis=2)
        else:
            h = _hits_generic(exp, gs, lo[:, None, :] + side[:, None, :] * U)
        hits += h.sum(axis=1)
        done += t
    return hits / T, vol


def pkf_lhs(exp: KinematicExperiment, return_details: bool = False):
    """(estimate, std_error) of the kinematic integral.

    Each g contributes f = vol(domain) * (hit fraction).  The standard error
    comes from the spread of the per-chain means of f (batch means; for the
    directly sampled groups every sample is its own chain), which includes
    both the group and the translation variance.
    """
    gs = group_samples(exp)
    blocks = [(i, gs[s : s + CHUNK]) for i, s in enumerate(range(0, len(gs), CHUNK))]
    if exp.workers > 1:
        with ThreadPoolExecutor(exp.workers) as ex:
            parts = list(ex.map(lambda a: _stratum(exp, a[1], a[0]), blocks))
    else:
        parts = [_stratum(exp, g, i) for i, g in blocks]
    p = np.concatenate([a for a, _ in parts])
    vol = np.concatenate([b for _, b in parts])
    f = p * vol
    estimate = math.fsum(f) / len(f)
    labels = _chain_labels(exp, len(f))
    counts = np.bincount(labels)
    means = np.bincount(labels, weights=f) / counts
    m = len(means)
    if m == len(f):
        se = float(np.std(f, ddof=1) / math.sqrt(len(f)))
    else:
        se = float(np.std(means, ddof=1) / math.sqrt(m))
    within = float(np.mean(vol**2 * p * (1 - p)) / max(exp.n_translation - 1, 1)) / len(f)
    between = max(se**2 - within, 0.0)
    if not return_details:
        return estimate, se
    # per-stratum errors treat the stratum's group samples as independent
    strata = [
        {"stratum": i, "n": len(a), "mean": math.fsum(a * b) / len(a),
         "std_error": float(np.std(a * b, ddof=1) / math.sqrt(len(a))) if len(a) > 1 else math.inf}
        for i, (a, b) in enumerate(parts)
    ]
    return estimate, se, {"between_variance": between, "within_variance": within, "strata": strata, "f": f}


def minkowski_lhs(exp: KinematicExperiment):
    """Secondary estimator E_g vol(K - gL) with the volume computed exactly per g.

    For two boxes K - gL is a zonotope whose volume is 2^n times the sum of
    |det| over n-subsets of generators.  Uses the same group samples as
    :func:`pkf_lhs`, so the two estimates differ only by the translation noise.
    """
    if not (exp.K.family == BOX and exp.L.family == BOX):
        raise ValueError("exact Minkowski volumes are implemented for boxes")
    gs = group_samples(exp)
    v = np.array([difference_zonotope(exp.K, exp.L.transformed(g)).volume() for g in gs])
    labels = _chain_labels(exp, len(v))
    means = np.bincount(labels, weights=v) / np.bincount(labels)
    se = np.std(means, ddof=1) / math.sqrt(len(means))
    return math.fsum(v) / len(v), float(se)


# ---------------------------------------------------------------------------
# right-hand sides


def classical_coefficient(n: int, k: int) -> float:
    return unit_ball_volume(k) * unit_ball_volume(n - k) / (math.comb(n, k) * unit_ball_volume(n))


def pkf_rhs_classical(n: int, K: Polytope, L: Polytope, samples: int = 10**6, seed: int = 0) -> dict:
    muK, seK = intrinsic_volumes(K, samples, seed, with_errors=True)
    muL, seL = intrinsic_volumes(L, samples, seed, with_errors=True)
    terms = {}
    for k in range(n + 1):
        c = classical_coefficient(n, k)
        terms[f"classical_{k}"] = c * muK[k] * muL[n - k]
        terms[f"classical_{k}_se"] = c * math.hypot(seK[k] * muL[n - k], muK[k] * seL[n - k])
    return terms


def _v(vid, P, samples, seed):
    return val.evaluate(vid, P, samples, seed)


def pkf_rhs_g2(K: Polytope, L: Polytope, samples: int = 10**6, seed: int = 0) -> dict:
    terms = pkf_rhs_classical(7, K, L, samples, seed)
    a3, a4 = val.ValuationId(val.NU3_PRIME), val.ValuationId(val.NU4_PRIME)
    n3K, n4K, n3L, n4L = (_v(a, P, samples, seed) for a, P in ((a3, K), (a4, K), (a3, L), (a4, L)))
    t1 = G2_CONSTANT * n3K.real * n4L.real
    t2 = G2_CONSTANT * n4K.real * n3L.real
    terms["exceptional_nu3K_nu4L"] = t1
    terms["exceptional_nu3K_nu4L_se"] = G2_CONSTANT * math.hypot(n3K.std_error * n4L.real, n3K.real * n4L.std_error)
    terms["exceptional_nu4K_nu3L"] = t2
    terms["exceptional_nu4K_nu3L_se"] = G2_CONSTANT * math.hypot(n4K.std_error * n3L.real, n4K.real * n3L.std_error)
    return terms


def pkf_rhs_spin7(K: Polytope, L: Polytope, samples: int = 10**6, seed: int = 0) -> dict:
    terms = pkf_rhs_classical(8, K, L, samples, seed)
    e = val.ValuationId(val.ETA_PRIME)
    eK, eL = _v(e, K, samples, seed), _v(e, L, samples, seed)
    terms["exceptional_etaK_etaL"] = SPIN7_CONSTANT * eK.real * eL.real
    terms["exceptional_etaK_etaL_se"] = SPIN7_CONSTANT * math.hypot(eK.std_error * eL.real, eK.real * eL.std_error)
    return terms


def rhs_terms(group_tag: str, K: Polytope, L: Polytope, samples: int = 10**6, seed: int = 0) -> dict:
    if group_tag == "G2":
        return pkf_rhs_g2(K, L, samples, seed)
    if group_tag == "SPIN7":
        return pkf_rhs_spin7(K, L, samples, seed)
    if group_tag in ("SO7", "SO8"):
        return pkf_rhs_classical(GROUP_DIM[group_tag], K, L, samples, seed)
    raise ValueError(f"no kinematic formula for {group_tag}")


def _split(terms: dict):
    values = {k: v for k, v in terms.items() if not k.endswith("_se")}
    errors = [v for k, v in terms.items() if k.endswith("_se")]
    classical = math.fsum(v for k, v in values.items() if k.startswith("classical"))
    exceptional = math.fsum(v for k, v in values.items() if k.startswith("exceptional"))
    return values, classical, exceptional, math.sqrt(math.fsum(e * e for e in errors))


def run_experiment(exp: KinematicExperiment, angle_samples: int = 10**6) -> KinematicReport:
    lhs, se, det = pkf_lhs(exp, return_details=True)
    values, classical, exceptional, rhs_se = _split(rhs_terms(exp.group_tag, exp.K, exp.L, angle_samples))
    total = classical + exceptional
    excess = lhs - classical
    rel = abs(excess - exceptional) / abs(exceptional) if exceptional else None
    report = KinematicReport(
        group_tag=exp.group_tag,
        lhs_estimate=lhs,
        lhs_std_error=se,
        rhs_terms=values,
        rhs_total=total,
        rhs_std_error=rhs_se,
        z_score=(lhs - total) / math.hypot(se, rhs_se),
        classical_total=classical,
        exceptional_total=exceptional,
        exceptional_estimate=excess,
        exceptional_relative_error=rel,
        between_variance=det["between_variance"],
        within_variance=det["within_variance"],
        n_group=exp.n_group,
        n_translation=exp.n_translation,
        master_seed=exp.master_seed,
        strata=det["strata"],
    )
    log.info("%s: lhs %.6g +- %.2g, rhs %.6g, z %.2f", exp.group_tag, lhs, se, total, report.z_score)
    return report


# ---------------------------------------------------------------------------
# presets


def _unit_box(n, axes):
    """Unit box on the given coordinate axes, centered at the origin."""
    F = np.eye(n)[:, list(axes)]
    return Polytope.box(np.zeros(n), F, np.full(len(axes), 0.5))


# name -> (group, K axes, L axes); axes are 0-based coordinates
PRESETS = {
    # K associative (phi(e1,e2,e3)^2 = 1), L coassociative (its complement is e1,e2,e3)
    "associative-coassociative": ("G2", (7, (0, 1, 2)), (7, (3, 4, 5, 6))),
    # L = span(e3, e5, e6, e7): complement span(e1, e2, e4) has phi^2 = 0
    "associative-negative": ("G2", (7, (0, 1, 2)), (7, (2, 4, 5, 6))),
    "associative-coassociative-so7": ("SO7", (7, (0, 1, 2)), (7, (3, 4, 5, 6))),
    # real 4-plane x1..x4 of C^4 (Phi^2 = 1)
    "real4-real4": ("SPIN7", (8, (0, 2, 4, 6)), (8, (0, 2, 4, 6))),
    # complex 2-plane span(x1, y1, x2, y2) against the real 4-plane
    "complex2-real4": ("SPIN7", (8, (0, 1, 2, 3)), (8, (0, 2, 4, 6))),
    "cubes-so7": ("SO7", (7, range(7)), (7, range(7))),
    "cubes-so8": ("SO8", (8, range(8)), (8, range(8))),
}


def preset(name: str, **kwargs) -> KinematicExperiment:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name}; choose from {sorted(PRESETS)}")
    group, (nk, ak), (nl, al) = PRESETS[name]
    group = kwargs.pop("group_tag", group)
    return KinematicExperiment(group, _unit_box(nk, ak), _unit_box(nl, al), **kwargs)
