"""Convex polytopes from closed-form families (boxes, simplices, products).

Faces carry their tangent space, volume and a description of the normal
cone inside the orthogonal complement of the tangent space.  The outer
angle gamma(F) is the standard Gaussian measure of that cone, so that
sum_F gamma(F) vol(F) over k-faces is the k-th intrinsic volume.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .grassmann import Subspace, perp_frames

INTERSECT_TOL = 1e-9
MC_ANGLE_SAMPLES = 10**6

BOX, SIMPLEX, PRODUCT = "BOX", "SIMPLEX", "PRODUCT"
ANALYTIC, GAUSSIAN_MC = "ANALYTIC", "GAUSSIAN_MC"


class PolytopeError(ValueError):
    pass


@dataclass(frozen=True)
class OuterAngle:
    value: float
    method: str = ANALYTIC
    std_error: float = 0.0

    def __post_init__(self):
        if not -1e-12 <= self.value <= 1 + 1e-12:
            raise PolytopeError(f"outer angle {self.value} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class NormalCone:
    """{u in W_F^perp : <u, a_i> <= 0 for the rows a_i of ``constraints``}.

    ``constraints`` are already projected onto W_F^perp (ambient coordinates).
    ``orthant`` marks cones that are products of half-lines and a subspace
    (mutually orthogonal constraints), as for every face of a box.
    """

    constraints: np.ndarray
    orthant: bool = False


@dataclass(frozen=True, eq=False)
class Face:
    dim: int
    vertices: tuple
    tangent: Subspace
    volume: float
    normal_cone: NormalCone
    angle: OuterAngle | None = None


def _orthant_probability(a: np.ndarray) -> float | None:
    """Exact P(<u, a_i> <= 0 for all i), u standard Gaussian, for up to 3 constraints."""
    m = len(a)
    if m == 0:
        return 1.0
    unit = a / np.linalg.norm(a, axis=1, keepdims=True)
    rho = np.clip(unit @ unit.T, -1.0, 1.0)
    if m == 1:
        return 0.5
    if m == 2:
        return 0.25 + math.asin(rho[0, 1]) / (2 * math.pi)
    if m == 3:
        return 0.125 + (math.asin(rho[0, 1]) + math.asin(rho[0, 2]) + math.asin(rho[1, 2])) / (4 * math.pi)
    return None


def _gaussian_cone_mc(a: np.ndarray, samples: int, seed: int, workers: int = 1) -> tuple[float, float]:
    """Gaussian measure of {u : A u <= 0} by Monte Carlo; only span(a) matters."""
    q, _ = np.linalg.qr(a.T)
    local = a @ q  # constraints in an orthonormal basis of their span
    d = local.shape[1]
    workers = max(1, int(workers))
    sizes = [samples // workers + (i < samples % workers) for i in range(workers)]
    seeds = np.random.SeedSequence(seed).spawn(workers)

    def run(i):
        rng = np.random.default_rng(seeds[i])
        hits = 0
        left = sizes[i]
        while left:
            c = min(left, 200_000)
            u = rng.standard_normal((c, d))
            hits += int(np.all(u @ local.T <= 0.0, axis=1).sum())
            left -= c
        return hits

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            hits = sum(ex.map(run, range(workers)))
    else:
        hits = run(0)
    p = hits / samples
    return p, math.sqrt(max(p * (1 - p), 0.0) / samples)


def cone_angle(cone: NormalCone, samples: int = MC_ANGLE_SAMPLES, seed: int = 0, workers: int = 1) -> OuterAngle:
    a = cone.constraints
    if cone.orthant:
        return OuterAngle(0.5 ** len(a), ANALYTIC, 0.0)
    exact = _orthant_probability(a)
    if exact is not None:
        return OuterAngle(float(exact), ANALYTIC, 0.0)
    p, se = _gaussian_cone_mc(a, samples, seed, workers)
    return OuterAngle(p, GAUSSIAN_MC, se)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Polytope:
    """A convex polytope of one of the families BOX, SIMPLEX, PRODUCT.

    BOX:      center (n,), frame (n, k) orthonormal, half_lengths (k,) > 0
    SIMPLEX:  points (k+1, n), affinely independent
    PRODUCT:  factors (P1 in R^n1, P2 in R^n2), rotation Q (n, n) whose first
              n1 columns carry P1, and offset (n,)
    """

    family: str
    params: dict
    _cache: dict = field(default_factory=dict, repr=False)

    # constructors ------------------------------------------------------
    @classmethod
    def box(cls, center, frame, half_lengths) -> "Polytope":
        c = np.asarray(center, dtype=float).reshape(-1)
        F = np.asarray(frame, dtype=float).reshape(len(c), -1)
        h = np.asarray(half_lengths, dtype=float).reshape(-1)
        if F.shape[1] != len(h):
            raise PolytopeError("frame and half_lengths disagree")
        if F.shape[1] and np.abs(F.T @ F - np.eye(F.shape[1])).max() > 1e-12:
            raise PolytopeError("box frame is not orthonormal")
        if np.any(h <= 0):
            raise PolytopeError("half-lengths must be positive")
        return cls(BOX, {"center": c, "frame": F, "half_lengths": h})

    @classmethod
    def axis_box(cls, n: int, axes, lengths=1.0, corner=None) -> "Polytope":
        """Box spanned by coordinate axes (0-based) with given side lengths."""
        axes = list(axes)
        L = np.broadcast_to(np.asarray(lengths, dtype=float), (len(axes),))
        lo = np.zeros(n) if corner is None else np.asarray(corner, dtype=float)
        F = np.eye(n)[:, axes]
        return cls.box(lo + F @ (L / 2), F, L / 2)

    @classmethod
    def cube(cls, n: int, side: float = 1.0, centered: bool = True) -> "Polytope":
        c = np.zeros(n) if centered else np.full(n, side / 2)
        return cls.box(c, np.eye(n), np.full(n, side / 2))

    @classmethod
    def point(cls, x) -> "Polytope":
        x = np.asarray(x, dtype=float)
        return cls.box(x, np.zeros((len(x), 0)), np.zeros(0))

    @classmethod
    def simplex(cls, points) -> "Polytope":
        V = np.atleast_2d(np.asarray(points, dtype=float))
        E = V[1:] - V[0]
        if len(E) and np.linalg.matrix_rank(E, tol=1e-12 * max(1.0, np.abs(E).max())) != len(E):
            raise PolytopeError("simplex vertices are affinely dependent")
        return cls(SIMPLEX, {"points": V})

    @classmethod
    def product(cls, first: "Polytope", second: "Polytope", rotation=None, offset=None) -> "Polytope":
        n = first.ambient_dim + second.ambient_dim
        Q = np.eye(n) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        if np.abs(Q.T @ Q - np.eye(n)).max() > 1e-12:
            raise PolytopeError("product rotation must be orthogonal")
        return cls(PRODUCT, {"factors": (first, second), "rotation": Q, "offset": t})

    # basic data ------------------------------------------------------------
    @property
    def ambient_dim(self) -> int:
        p = self.params
        if self.family == BOX:
            return len(p["center"])
        if self.family == SIMPLEX:
            return p["points"].shape[1]
        return p["rotation"].shape[0]

    @property
    def dim(self) -> int:
        p = self.params
        if self.family == BOX:
            return len(p["half_lengths"])
        if self.family == SIMPLEX:
            return len(p["points"]) - 1
        a, b = p["factors"]
        return a.dim + b.dim

    @property
    def vertices(self) -> np.ndarray:
        if "vertices" not in self._cache:
            self._cache["vertices"] = self._vertices()
        return self._cache["vertices"]

    def _vertices(self) -> np.ndarray:
        p = self.params
        if self.family == BOX:
            k = self.dim
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=k))).reshape(-1, k)
            return p["center"] + (signs * p["half_lengths"]) @ p["frame"].T
        if self.family == SIMPLEX:
            return p["points"].copy()
        a, b = p["factors"]
        Q, t = p["rotation"], p["offset"]
        n1 = a.ambient_dim
        va = a.vertices @ Q[:, :n1].T
        vb = b.vertices @ Q[:, n1:].T
        return t + (va[:, None, :] + vb[None, :, :]).reshape(-1, self.ambient_dim)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def support(self, d) -> np.ndarray:
        """A vertex maximizing <d, x>."""
        V = self.vertices
        return V[int(np.argmax(V @ np.asarray(d, dtype=float)))]

    def volume(self) -> float:
        """dim-dimensional volume."""
        (top,) = self.faces(self.dim)
        return top.volume

    # faces --------------------------------------------------------------------
    def faces(self, k: int) -> list[Face]:
        if not 0 <= k <= self.dim:
            if 0 <= k <= self.ambient_dim:
                return []
            raise PolytopeError(f"face dimension {k} out of range")
        key = ("faces", k)
        if key not in self._cache:
            if self.family == BOX:
                self._cache[key] = self._box_faces(k)
            elif self.family == SIMPLEX:
                self._cache[key] = self._simplex_faces(k)
            elif self.family == PRODUCT:
                self._cache[key] = self._product_faces(k)
            else:
                raise PolytopeError(f"unsupported family {self.family}")
        return self._cache[key]

    def _box_faces(self, d: int) -> list[Face]:
        p = self.params
        F, h = p["frame"], p["half_lengths"]
        k = self.dim
        out = []
        for free in itertools.combinations(range(k), d):
            fixed = [i for i in range(k) if i not in free]
            tangent = Subspace(F[:, list(free)])
            vol = float(np.prod(2 * h[list(free)]))
            for signs in itertools.product((-1.0, 1.0), repeat=len(fixed)):
                # vertex index = binary number of the sign pattern (itertools.product order)
                verts = []
                for fs in itertools.product((-1.0, 1.0), repeat=d):
                    s = np.empty(k)
                    s[list(fixed)] = signs
                    s[list(free)] = fs
                    verts.append(int(sum((1 << (k - 1 - i)) for i in range(k) if s[i] > 0)))
                # outward normals of the facets through the face; the cone is -(those)... i.e. <u, a> <= 0
                cons = np.array([-sg * F[:, i] for i, sg in zip(fixed, signs)]).reshape(-1, F.shape[0])
                out.append(Face(d, tuple(sorted(verts)), tangent, vol, NormalCone(cons, orthant=True),
                                OuterAngle(0.5 ** len(fixed))))
        return out

    def _simplex_faces(self, d: int) -> list[Face]:
        V = self.params["points"]
        k = self.dim
        out = []
        for S in itertools.combinations(range(k + 1), d + 1):
            base = V[S[0]]
            E = V[list(S[1:])] - base
            if d:
                tangent = Subspace.span(E)
                vol = math.sqrt(max(np.linalg.det(E @ E.T), 0.0)) / math.factorial(d)
            else:
                tangent = Subspace(np.zeros((self.ambient_dim, 0)))
                vol = 1.0
            others = [j for j in range(k + 1) if j not in S]
            A = V[others] - base
            if len(A):
                A = A - (A @ tangent.frame) @ tangent.frame.T
            cone = NormalCone(A.reshape(-1, self.ambient_dim), orthant=False)
            out.append(Face(d, S, tangent, vol, cone))
        return out

    def _product_faces(self, d: int) -> list[Face]:
        a, b = self.params["factors"]
        Q = self.params["rotation"]
        n1 = a.ambient_dim
        nb = len(b.vertices)
        out = []
        for d1 in range(max(0, d - b.dim), min(a.dim, d) + 1):
            for fa in a.faces(d1):
                for fb in b.faces(d - d1):
                    T = np.concatenate([Q[:, :n1] @ fa.tangent.frame, Q[:, n1:] @ fb.tangent.frame], axis=1)
                    cons = np.concatenate(
                        [fa.normal_cone.constraints @ Q[:, :n1].T, fb.normal_cone.constraints @ Q[:, n1:].T]
                    )
                    verts = tuple(sorted(i * nb + j for i in fa.vertices for j in fb.vertices))
                    cone = NormalCone(cons, orthant=fa.normal_cone.orthant and fb.normal_cone.orthant)
                    ga, gb = outer_angle(fa), outer_angle(fb)
                    angle = OuterAngle(
                        ga.value * gb.value,
                        GAUSSIAN_MC if GAUSSIAN_MC in (ga.method, gb.method) else ANALYTIC,
                        math.hypot(ga.std_error * gb.value, gb.std_error * ga.value),
                    )
                    out.append(Face(d, verts, Subspace(T), fa.volume * fb.volume, cone, angle))
        return out

    # motions -------------------------------------------------------------------
    def transformed(self, g, t=None) -> "Polytope":
        g = np.asarray(g.matrix if hasattr(g, "matrix") else g, dtype=float)
        n = self.ambient_dim
        t = np.zeros(n) if t is None else np.asarray(t, dtype=float)
        if g.shape != (n, n) or t.shape != (n,):
            raise PolytopeError("motion has wrong dimensions")
        p = self.params
        if self.family == BOX:
            return Polytope.box(g @ p["center"] + t, g @ p["frame"], p["half_lengths"])
        if self.family == SIMPLEX:
            return Polytope.simplex(p["points"] @ g.T + t)
        a, b = p["factors"]
        return Polytope.product(a, b, g @ p["rotation"], g @ p["offset"] + t)

    def scaled(self, s: float) -> "Polytope":
        """s * P (s may be negative: s = -1 gives the reflection -P)."""
        p = self.params
        if self.family == BOX:
            if s == 0:
                return Polytope.point(np.zeros(self.ambient_dim))
            return Polytope.box(s * p["center"], p["frame"], abs(s) * p["half_lengths"])
        if self.family == SIMPLEX:
            return Polytope.simplex(s * p["points"])
        a, b = p["factors"]
        return Polytope.product(a.scaled(s), b.scaled(s), p["rotation"], s * p["offset"])

    def translated(self, t) -> "Polytope":
        return self.transformed(np.eye(self.ambient_dim), t)

    # serialization ----------------------------------------------------------------
    def to_json(self) -> dict:
        p = self.params
        if self.family == BOX:
            return {
                "family": BOX,
                "center": p["center"].tolist(),
                "frame": p["frame"].T.tolist(),
                "half_lengths": p["half_lengths"].tolist(),
            }
        if self.family == SIMPLEX:
            return {"family": SIMPLEX, "points": p["points"].tolist()}
        a, b = p["factors"]
        return {
            "family": PRODUCT,
            "factors": [a.to_json(), b.to_json()],
            "rotation": p["rotation"].tolist(),
            "offset": p["offset"].tolist(),
        }

    @classmethod
    def from_json(cls, data) -> "Polytope":
        """Inverse of :meth:`to_json`; box ``frame`` is a list of basis vectors."""
        if isinstance(data, str):
            data = json.loads(data)
        fam = data["family"].upper()
        if fam == BOX:
            c = np.asarray(data["center"], dtype=float)
            frame = np.asarray(data["frame"], dtype=float).reshape(-1, len(c)).T
            return cls.box(c, frame, data["half_lengths"])
        if fam == SIMPLEX:
            return cls.simplex(data["points"])
        if fam == PRODUCT:
            a, b = (cls.from_json(f) for f in data["factors"])
            return cls.product(a, b, data.get("rotation"), data.get("offset"))
        raise PolytopeError(f"unsupported family {fam}")


# ---------------------------------------------------------------------------
# module-level operations


def faces(P: Polytope, k: int) -> list[Face]:
    return P.faces(k)


def outer_angle(F: Face, P: Polytope | None = None, samples: int = MC_ANGLE_SAMPLES, seed: int = 0,
                workers: int = 1) -> OuterAngle:
    """Gaussian measure of the normal cone of F inside W_F^perp."""
    if P is not None and F.dim > P.dim:
        raise PolytopeError("not a face of this polytope")
    if F.angle is not None:
        return F.angle
    return cone_angle(F.normal_cone, samples, seed, workers)


def face_angles(P: Polytope, k: int, samples: int = MC_ANGLE_SAMPLES, seed: int = 0) -> list[OuterAngle]:
    key = ("angles", k, samples, seed)
    if key not in P._cache:
        P._cache[key] = [outer_angle(F, P, samples, seed + i) for i, F in enumerate(P.faces(k))]
    return P._cache[key]


def intrinsic_volumes(P: Polytope, samples: int = MC_ANGLE_SAMPLES, seed: int = 0, with_errors: bool = False):
    """mu_0, ..., mu_n as an array (and standard errors if requested)."""
    n = P.ambient_dim
    mu = np.zeros(n + 1)
    se = np.zeros(n + 1)
    for k in range(P.dim + 1):
        fs = P.faces(k)
        angles = face_angles(P, k, samples, seed)
        mu[k] = math.fsum(a.value * f.volume for a, f in zip(angles, fs))
        se[k] = math.sqrt(math.fsum((a.std_error * f.volume) ** 2 for a, f in zip(angles, fs)))
    return (mu, se) if with_errors else mu


def transform(P: Polytope, g, t=None) -> Polytope:
    return P.transformed(g, t)


def bounding_radius(P: Polytope) -> float:
    V = P.vertices
    return float(np.linalg.norm(V - V.mean(axis=0), axis=1).max())


# ---------------------------------------------------------------------------
# intersection


def _affine_min_norm(S: np.ndarray) -> np.ndarray:
    """Barycentric weights of the min-norm point of aff(S) (rows of S)."""
    m = len(S)
    if m == 1:
        return np.ones(1)
    M = np.zeros((m + 1, m + 1))
    M[:m, :m] = S @ S.T
    M[:m, m] = 1.0
    M[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return sol[:m]


def min_norm_point(support, x0, tol: float = INTERSECT_TOL, max_iter: int = 500):
    """Wolfe's min-norm-point method for a convex set given by a support oracle.

    ``support(d)`` must return a point z of the set minimizing <d, z>.
    Returns (x, converged, certificate) where certificate is 'touch' if
    |x| <= tol, 'separated' if a direction with min <x, z> > 0 was found.
    """
    S = np.array([x0], dtype=float)
    lam = np.ones(1)
    x = S[0].copy()
    for _ in range(max_iter):
        xx = float(x @ x)
        if math.sqrt(xx) <= tol:
            return x, True, "touch"
        q = support(x)
        gap = xx - float(x @ q)
        if float(x @ q) > tol * math.sqrt(xx):
            return x, True, "separated"
        if gap <= 1e-14 * max(xx, 1.0):
            return x, True, "optimal"
        if any(np.allclose(q, s, atol=1e-15, rtol=0) for s in S):
            return x, True, "optimal"
        S = np.vstack([S, q])
        lam = np.append(lam, 0.0)
        for _minor in range(len(S) + 5):
            alpha = _affine_min_norm(S)
            if np.all(alpha > 1e-14):
                lam = alpha
                break
            neg = alpha <= 1e-14
            denom = lam[neg] - alpha[neg]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0, lam[neg] / denom, np.inf)
            theta = float(min(1.0, ratios.min()))
            lam = theta * alpha + (1 - theta) * lam
            keep = lam > 1e-14
            if keep.all():
                keep[np.argmin(lam)] = False
            S, lam = S[keep], lam[keep]
            lam = lam / lam.sum()
        x = lam @ S
    return x, False, "stalled"


def _lp_intersects(K: Polytope, L: Polytope, tol: float = INTERSECT_TOL) -> bool:
    """Feasibility of sum a_i k_i = sum b_j l_j with a, b in simplices."""
    VK, VL = K.vertices, L.vertices
    n = K.ambient_dim
    nk, nl = len(VK), len(VL)
    # minimize s subject to |VK^T a - VL^T b| <= s componentwise
    c = np.zeros(nk + nl + 1)
    c[-1] = 1.0
    D = np.concatenate([VK.T, -VL.T, -np.ones((n, 1))], axis=1)
    D2 = np.concatenate([-VK.T, VL.T, -np.ones((n, 1))], axis=1)
    A_ub = np.vstack([D, D2])
    b_ub = np.zeros(2 * n)
    A_eq = np.zeros((2, nk + nl + 1))
    A_eq[0, :nk] = 1.0
    A_eq[1, nk : nk + nl] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0, 1.0], bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"LP feasibility solve failed: {res.message}")
    return bool(res.fun <= tol)


def intersects(K: Polytope, L: Polytope, tol: float = INTERSECT_TOL, max_iter: int = 500) -> bool:
    """True iff K and L meet (points within ``tol`` of touching count as meeting)."""
    if K.ambient_dim != L.ambient_dim:
        raise PolytopeError("ambient dimension mismatch")

    def support(d):
        # min over z in K - L of <d, z>
        return K.support(-d) - L.support(d)

    x0 = K.vertices[0] - L.vertices[0]
    x, ok, how = min_norm_point(support, x0, tol, max_iter)
    if not ok:
        return _lp_intersects(K, L, tol)
    if how == "touch":
        return True
    if how == "separated":
        return False
    return bool(np.linalg.norm(x) <= tol)


# ---------------------------------------------------------------------------
# batched membership in K - gL (integrand of the kinematic integral)


def box_generators(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """(center, generators as columns) of a box viewed as a zonotope."""
    if P.family != BOX:
        raise PolytopeError("not a box")
    p = P.params
    return p["center"], p["frame"] * p["half_lengths"]


def _combos(n: int, a: int) -> np.ndarray:
    c = list(itertools.combinations(range(n), a))
    return np.array(c, dtype=int).reshape(len(c), a)


@functools.lru_cache(maxsize=None)
def _pair_plan(n: int):
    full = np.arange(n)
    plan = []
    for a in range(n):
        A, B = _combos(n, a), _combos(n, n - 1 - a)
        Ac = np.array([np.setdiff1d(full, x) for x in A], dtype=int).reshape(len(A), n - a)
        Bc = np.array([np.setdiff1d(full, x) for x in B], dtype=int).reshape(len(B), a + 1)
        plan.append((a, A, B, Ac, Bc))
    return plan


def _small_det(M: np.ndarray) -> np.ndarray:
    m = M.shape[-1]
    if m == 1:
        return M[..., 0, 0]
    if m == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    if m == 3:
        return (
            M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
            - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
            + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0])
        )
    return np.linalg.det(M)


def _null_vectors(M: np.ndarray) -> np.ndarray:
    """Cofactor null vectors of a stack of m x (m+1) matrices."""
    m = M.shape[-2]
    if m == 0:
        return np.ones(M.shape[:-2] + (1,))
    cols = np.arange(m + 1)
    return np.stack([(-1) ** j * _small_det(M[..., cols[cols != j]]) for j in range(m + 1)], axis=-1)


def box_pair_facets(R: np.ndarray, hK: np.ndarray, hL: np.ndarray):
    """Facets of [-hK, hK] + R [-hL, hL] for an orthogonal R, in the first box's coordinates.

    A facet is spanned by axes A of the first box and columns B of R with
    |A| + |B| = n - 1.  Its normal lies in span(e_i, i not in A) and in
    span(R_j, j not in B); whichever of the two reduced null-space problems is
    smaller (size <= n/2) is solved with cofactors.  The norm of the raw
    cofactor vector is the unit-generator facet area, used for ordering.
    R may carry leading batch axes.  Returns (unit normals, support values, areas).
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[-1]
    lead = R.shape[:-2]
    normals, areas = [], []
    logK, logL = np.log(hK), np.log(hL)
    for a, A, B, Ac, Bc in _pair_plan(n):
        b = n - 1 - a
        if a <= b:
            w = _null_vectors(R[..., A[:, None, :, None], Bc[None, :, None, :]])
            u = np.einsum("...kmj,...imj->...imk", R[..., :, Bc], w)
        else:
            w = _null_vectors(np.swapaxes(R[..., Ac[:, None, :, None], B[None, :, None, :]], -1, -2))
            u = np.zeros(lead + (len(A), len(B), n))
            u[..., np.arange(len(A))[:, None, None], np.arange(len(B))[None, :, None], Ac[:, None, :]] = w
        scale = np.exp(logK[A].sum(axis=1)[:, None] + logL[B].sum(axis=1)[None, :])
        u = u.reshape(lead + (-1, n))
        normals.append(u)
        areas.append(np.linalg.norm(u, axis=-1) * scale.reshape(-1))
    N = np.concatenate(normals, axis=-2)
    area = np.concatenate(areas, axis=-1)
    N = N / np.maximum(np.linalg.norm(N, axis=-1, keepdims=True), 1e-300)
    h = np.abs(N) @ hK + np.abs(N @ R) @ hL
    return N, h, area


@dataclass(frozen=True, eq=False)
class Zonotope:
    """center + G [-1, 1]^m with generator columns G (n x m)."""

    center: np.ndarray
    generators: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def ambient_dim(self) -> int:
        return len(self.center)

    def full_dimensional(self) -> bool:
        if "full" not in self._cache:
            G = self.generators
            self._cache["full"] = G.shape[1] >= G.shape[0] and np.linalg.matrix_rank(G) == G.shape[0]
        return self._cache["full"]

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.abs(self.generators).sum(axis=1)
        return self.center - r, self.center + r

    def volume(self) -> float:
        """Sum of |det| over n-subsets of the generators (times 2^n)."""
        G = self.generators
        n, m = G.shape
        if m < n:
            return 0.0
        idx = _combos(m, n)
        return float(2**n * np.abs(np.linalg.det(np.moveaxis(G[:, idx], 1, 0))).sum())

    def facet_normals(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit facet normals (one per opposite pair), largest facets first, and support values."""
        if "facets" not in self._cache:
            G = self.generators
            n, m = G.shape
            sub = np.moveaxis(G[:, _combos(m, n - 1)], 1, 0)  # (C, n, n-1)
            q, r = np.linalg.qr(sub, mode="complete")
            area = np.abs(np.diagonal(r, axis1=1, axis2=2)).prod(axis=1)
            self._set_facets(q[:, :, -1], area)
        return self._cache["facets"]

    def _set_facets(self, N, area):
        G = self.generators
        keep = area > 1e-12 * max(1.0, float(area.max(initial=0.0)))
        order = np.argsort(-area[keep], kind="stable")
        N = N[keep][order]
        self._cache["facets"] = (N, np.abs(N @ G).sum(axis=1))

    def contains(self, points, tol: float = INTERSECT_TOL) -> np.ndarray:
        """Membership of the rows of ``points`` (within ``tol``)."""
        X = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        G = self.generators
        n, m = G.shape
        if not self.full_dimensional():
            return np.zeros(len(X), dtype=bool)
        if m == n:
            Ginv = np.linalg.inv(G)
            u = X @ Ginv.T
            # slack in coefficient space corresponding to distance tol
            slack = tol * np.linalg.norm(Ginv, axis=1)
            return np.all(np.abs(u) <= 1.0 + slack, axis=1)
        r = np.abs(G).sum(axis=1)
        idx = np.nonzero(np.all(np.abs(X) <= r + tol, axis=1))[0]
        N, h = self.facet_normals()
        idx = idx[_facet_filter(X[idx], N, h, tol)]
        out = np.zeros(len(X), dtype=bool)
        out[idx] = True
        return out


def difference_zonotope(K: Polytope, L: Polytope) -> Zonotope:
    """K - L for two boxes, as a zonotope (x is in it iff K meets L + x)."""
    cK, GK = box_generators(K)
    cL, GL = box_generators(L)
    Z = Zonotope(cK - cL, np.concatenate([GK, GL], axis=1))
    n = K.ambient_dim
    if K.dim == n and L.dim == n and n > 1:
        FK = K.params["frame"]
        N, _, area = box_pair_facets(FK.T @ L.params["frame"], K.params["half_lengths"], L.params["half_lengths"])
        Z._set_facets(N @ FK.T, area)
    return Z


def _facet_filter(X: np.ndarray, N: np.ndarray, h: np.ndarray, tol: float) -> np.ndarray:
    """Indices of rows of X with |<x, N_j>| <= h_j + tol for all j (largest facets first)."""
    idx = np.arange(len(X))
    start, chunk = 0, 16
    while start < len(N) and len(idx):
        sl = slice(start, start + chunk)
        idx = idx[np.all(np.abs(X[idx] @ N[sl].T) <= h[sl] + tol, axis=1)]
        start += chunk
        chunk *= 4
    return idx


def box_pair_hits(K: Polytope, L: Polytope, gs: np.ndarray, X: np.ndarray, tol: float = INTERSECT_TOL,
                  block: int = 16) -> np.ndarray:
    """Batched hits of K against g L + x for full-dimensional boxes K, L.

    gs: (B, n, n) rotations, X: (B, T, n) translations.  Returns (B, T) booleans.
    """
    n = K.ambient_dim
    if K.family != BOX or L.family != BOX or K.dim != n or L.dim != n:
        raise PolytopeError("box_pair_hits needs two full-dimensional boxes")
    FK, hK, cK = K.params["frame"], K.params["half_lengths"], K.params["center"]
    FL, hL, cL = L.params["frame"], L.params["half_lengths"], L.params["center"]
    out = np.zeros(X.shape[:2], dtype=bool)
    for s in range(0, len(gs), block):
        g = gs[s : s + block]
        R = FK.T @ g @ FL
        N, h, area = box_pair_facets(R, hK, hL)
        order = np.argsort(-area, axis=1, kind="stable")
        centers = cK - g @ cL
        for b in range(len(g)):
            Y = (X[s + b] - centers[b]) @ FK  # K coordinates, relative to the difference center
            keep = np.all(np.abs(Y) <= hK + np.abs(R[b]) @ hL + tol, axis=1)
            o = order[b]
            idx = np.nonzero(keep)[0]
            hit = idx[_facet_filter(Y[idx], N[b][o], h[b][o], tol)]
            out[s + b, hit] = True
    return out


def translations_hit(K: Polytope, L: Polytope, translations, tol: float = INTERSECT_TOL) -> np.ndarray:
    """Batched ``intersects(K, L + x)`` for the rows x of ``translations``."""
    X = np.atleast_2d(np.asarray(translations, dtype=float))
    if K.family == BOX and L.family == BOX:
        return difference_zonotope(K, L).contains(X, tol)
    return np.array([intersects(K, L.translated(x), tol) for x in X], dtype=bool)


def steiner_box_volumes(lengths) -> np.ndarray:
    """Intrinsic volumes of a box with the given side lengths: elementary symmetric polynomials."""
    poly = np.array([1.0])
    for s in lengths:
        poly = np.convolve(poly, [1.0, s])
    return poly


def complement_frame(W: Subspace) -> np.ndarray:
    return perp_frames(W.frame)
