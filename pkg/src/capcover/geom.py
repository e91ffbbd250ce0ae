"""Instances on S^m and their smallest including cap (SIC).

The SIC of rows a_1..a_n is the cap of least radius rho containing every
row; t = cos(rho) is positive exactly when the system Ax < 0 is strictly
solvable, and the GCC condition number is 1/|t|.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from .sampling import stream, uniform_sphere

TAU = 1e-9  # ill-posed band on t
ROW_TOL = 1e-9  # rows must satisfy <a_i, p> >= t - ROW_TOL
CERT_TOL = 1e-8
UNIT_TOL = 1e-12
LOAD_TOL = 1e-6
ENUM_CAPACITY = 25
GRAM_DET_MIN = 1e-12

STRICTLY_FEASIBLE = "strictly-feasible"
ILL_POSED = "ill-posed"
INFEASIBLE = "infeasible"


class InstanceError(ValueError):
    pass


class CapacityError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class Instance:
    m: int
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.m < 1:
            raise InstanceError(f"m must be >= 1, got {self.m}")
        if self.rows.shape[0] < 1:
            raise InstanceError("an instance needs at least one row")
        if self.rows.shape[1] != self.m + 1:
            raise InstanceError(f"rows must have {self.m + 1} columns, got {self.rows.shape[1]}")
        dev = np.abs(np.linalg.norm(self.rows, axis=1) - 1.0)
        if np.any(dev > UNIT_TOL):
            i = int(np.argmax(dev > UNIT_TOL))
            raise InstanceError(f"row {i} is not a unit vector (|norm - 1| = {dev[i]:.3g})")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def from_rows(cls, rows, m: int | None = None) -> "Instance":
        """Build an instance from loaded rows, renormalising near-unit rows."""
        arr = np.atleast_2d(np.asarray(rows, dtype=float))
        if arr.size == 0:
            raise InstanceError("no rows")
        if m is None:
            m = arr.shape[1] - 1
        norms = np.linalg.norm(arr, axis=1)
        for i, nv in enumerate(norms):
            if not abs(nv - 1.0) <= LOAD_TOL:
                raise InstanceError(f"row {i} has norm {nv:.9g}; expected 1 within {LOAD_TOL:g}")
        # leave rows that are already unit vectors bit-for-bit intact
        fix = np.abs(norms - 1.0) > UNIT_TOL
        arr = arr.copy()
        arr[fix] /= norms[fix, None]
        return cls(m, arr)

    @classmethod
    def from_csv(cls, text: str) -> "Instance":
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise InstanceError(f"row {len(rows)}: {exc}") from None
        if not rows:
            raise InstanceError("no rows")
        if len({len(r) for r in rows}) != 1:
            raise InstanceError("rows have differing lengths")
        return cls.from_rows(rows)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        obj = json.loads(text)
        inst = cls.from_rows(obj["rows"], int(obj["m"]))
        if "n" in obj and int(obj["n"]) != inst.n:
            raise InstanceError(f"n = {obj['n']} but {inst.n} rows given")
        return inst

    @classmethod
    def load(cls, path) -> "Instance":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json":
            return cls.from_json(text)
        return cls.from_csv(text)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for r in self.rows:
            w.writerow([repr(float(x)) for x in r])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "n": self.n, "rows": self.rows.tolist()})


def sample_uniform_sphere(m: int, count: int, seed: int) -> Instance:
    """``count`` i.i.d. uniform rows on S^m (normalised Gaussian vectors)."""
    if m < 1 or count < 1:
        raise ValueError("need m >= 1 and count >= 1")
    return Instance(m, uniform_sphere(stream(seed, 0), (count,), m))


@dataclass
class SicResult:
    center: np.ndarray
    t: float
    blocking_set: tuple[int, ...]
    skipped: int = 0  # rank-deficient supports skipped during enumeration
    method: str = ""

    @property
    def rho(self) -> float:
        return math.acos(min(1.0, max(-1.0, self.t)))

    @property
    def feasibility(self) -> str:
        return classify(self.t)

    @property
    def condition(self) -> float:
        return math.inf if abs(self.t) <= TAU else 1.0 / abs(self.t)

    def to_dict(self) -> dict:
        return {
            "center": [float(x) for x in self.center],
            "t": self.t,
            "rho": self.rho,
            "blocking_set": list(self.blocking_set),
            "feasibility": self.feasibility,
            "condition": self.condition,
        }


def classify(t: float) -> str:
    if t > TAU:
        return STRICTLY_FEASIBLE
    if t < -TAU:
        return INFEASIBLE
    return ILL_POSED


def _blocking(rows, p, t):
    return tuple(int(i) for i in np.flatnonzero(np.abs(rows @ p - t) <= ROW_TOL))


# ---- min-norm point (Wolfe) -------------------------------------------------

def _affine_minimizer(Q):
    """Weights v (summing to 1) of the min-norm point of the affine hull of Q's rows."""
    s = Q.shape[0]
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = Q @ Q.T
    kkt[:s, s] = 1.0
    kkt[s, :s] = 1.0
    rhs = np.zeros(s + 1)
    rhs[s] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:s]


def _frank_wolfe(P, x, tol, max_steps):
    scale = float((P * P).sum(axis=1).max())
    for _ in range(max_steps):
        dots = P @ x
        j = int(np.argmin(dots))
        gap = x @ x - dots[j]
        if gap <= tol * scale:
            return x, True
        d = P[j] - x
        dd = d @ d
        if dd == 0.0:
            return x, True
        step = min(1.0, max(0.0, -(x @ d) / dd))
        x = x + step * d
    return x, False


def min_norm_point(P: np.ndarray, tol: float = 1e-12, max_iter: int = 1000,
                   fallback_steps: int = 100_000):
    """Point of least norm in conv(rows of P), by Wolfe's active-set method.

    Returns (x, support, weights). Falls back to Frank-Wolfe (Gilbert's
    iteration) if the active-set loop does not terminate.
    """
    P = np.asarray(P, dtype=float)
    scale = float((P * P).sum(axis=1).max())
    j = int(np.argmin((P * P).sum(axis=1)))
    S = [j]
    lam = np.array([1.0])
    x = P[j].copy()
    for _ in range(max_iter):
        dots = P @ x
        j = int(np.argmin(dots))
        if x @ x - dots[j] <= tol * scale or j in S:
            return x, S, lam
        S.append(j)
        lam = np.append(lam, 0.0)
        for _minor in range(len(P) + 2):
            v = _affine_minimizer(P[S])
            if np.all(v > 1e-15):
                lam = v
                break
            neg = v <= 1e-15
            ratios = np.where(neg, lam / np.where(neg, lam - v, 1.0), np.inf)
            i_min = int(np.argmin(ratios))
            theta = ratios[i_min]
            lam = theta * v + (1.0 - theta) * lam
            lam[i_min] = 0.0
            keep = lam > 1e-15
            S = [s for s, k in zip(S, keep) if k]
            lam = lam[keep] / lam[keep].sum()
        x = lam @ P[S]
    x, ok = _frank_wolfe(P, x, tol, fallback_steps)
    if not ok:
        raise SolverError("min-norm point did not converge", best=x)
    dots = P @ x
    S = [int(i) for i in np.flatnonzero(np.abs(dots - x @ x) <= 1e-9)]
    return x, S, np.full(len(S), 1.0 / max(len(S), 1))


def _gram_candidate(rows_I):
    """Solve G c = e on the support; return (t, p, c) with t > 0, or None."""
    G = rows_I @ rows_I.T
    if abs(np.linalg.det(G)) <= GRAM_DET_MIN:
        return None
    c = np.linalg.solve(G, np.ones(len(rows_I)))
    q = c.sum()
    if not q > 0:
        return None
    t = 1.0 / math.sqrt(q)
    return t, t * (c @ rows_I), c


def sic_feasible(inst: Instance) -> SicResult | None:
    """SIC of a strictly feasible instance, or None if it is not strictly feasible."""
    A = inst.rows
    x, S, _ = min_norm_point(A)
    norm = float(np.linalg.norm(x))
    if norm <= TAU:
        return None
    t, p = norm, x / norm
    cand = _gram_candidate(A[S])
    if cand is not None:
        t2, p2, c = cand
        if np.all(c >= 0) and np.all(A @ p2 >= t2 - ROW_TOL) and abs(t2 - t) <= 1e-6:
            t, p = t2, p2
    return SicResult(p, t, _blocking(A, p, t), method="min-norm")


def sic_general(inst: Instance, capacity: int = ENUM_CAPACITY) -> SicResult:
    """SIC of any instance by enumerating candidate blocking sets.

    For each support I of at most m+1 rows, <a_i, p> = t on I with p in
    span(a_I) gives c = G^{-1} e, t = +-1/sqrt(e.c), p = t A_I^T c. A
    candidate is kept when every row lies in its cap and t p is a convex
    combination of a_I (c >= 0); the SIC is the kept candidate of largest t.
    """
    if inst.n > capacity:
        raise CapacityError(f"n = {inst.n} exceeds the enumeration capacity {capacity}")
    res = sic_feasible(inst)
    if res is not None:
        return res
    A = inst.rows
    best_t = -math.inf
    found: list[tuple[float, tuple[int, ...], np.ndarray]] = []
    skipped = 0
    for size in range(1, min(inst.m + 1, inst.n) + 1):
        for I in itertools.combinations(range(inst.n), size):
            cand = _gram_candidate(A[list(I)])
            if cand is None:
                skipped += 1
                continue
            t, p, c = cand
            if np.any(c < -1e-12):
                continue
            for sign in (1.0, -1.0):
                ts, ps = sign * t, sign * p
                if ts < best_t - 1e-12:
                    continue
                if np.all(A @ ps >= ts - ROW_TOL):
                    best_t = max(best_t, ts)
                    found.append((ts, _blocking(A, ps, ts), ps))
    if not found:
        raise SolverError("no valid including cap found")
    ties = [f for f in found if f[0] >= best_t - 1e-12]
    t, blocking, p = min(ties, key=lambda f: f[1])
    return SicResult(p, t, blocking, skipped=skipped, method="enumeration")


def sic_hull(inst: Instance) -> SicResult:
    """SIC through the convex hull of the rows.

    When the origin is inside the hull, -t is the distance from the origin
    to the nearest facet and p points away from that facet. Otherwise the
    instance is feasible and the min-norm point applies. Used as a second
    route for instances too large to enumerate.
    """
    A = inst.rows
    if inst.n > inst.m + 1:
        try:
            hull = ConvexHull(A)
        except QhullError:
            hull = None
        if hull is not None:
            eq = hull.equations
            f = int(np.argmax(eq[:, -1]))
            t = float(eq[f, -1])
            if t < -TAU:
                p = -eq[f, :-1]
                return SicResult(p, t, _blocking(A, p, t), method="hull")
    res = sic_feasible(inst)
    if res is not None:
        return res
    # origin on the boundary of the hull: ill-posed up to rounding
    if inst.n <= ENUM_CAPACITY:
        return sic_general(inst)
    raise SolverError("degenerate instance: origin on the hull boundary")


def covers_sphere(inst: Instance, alpha: float, sic: SicResult | None = None) -> bool:
    """True iff the caps of radius alpha centred at the rows cover S^m."""
    if not 0.0 <= alpha <= math.pi:
        raise ValueError(f"alpha must lie in [0, pi], got {alpha}")
    if sic is None:
        sic = sic_general(inst) if inst.n <= ENUM_CAPACITY else sic_hull(inst)
    return sic.rho > math.pi - alpha


@dataclass
class CertificateReport:
    ok: bool
    problems: list[str] = field(default_factory=list)


def check_certificate(inst: Instance, res: SicResult, tol: float = CERT_TOL) -> CertificateReport:
    """Re-verify a SicResult from scratch.

    Checks that p is a unit vector, every row lies in the cap, blocking rows
    sit on its boundary, the feasibility label matches t, and t p is a
    convex combination of the blocking rows (via nonnegative least squares).
    """
    A = inst.rows
    p = np.asarray(res.center, dtype=float)
    t = res.t
    probs = []
    if abs(np.linalg.norm(p) - 1.0) > 1e-9:
        probs.append(f"center norm {np.linalg.norm(p)!r}")
    dots = A @ p
    if np.any(dots < t - ROW_TOL):
        probs.append(f"row {int(np.argmin(dots))} outside the cap")
    B = list(res.blocking_set)
    if not B:
        probs.append("empty blocking set")
    elif np.any(np.abs(dots[B] - t) > ROW_TOL):
        probs.append("blocking row off the boundary")
    if res.feasibility != classify(t):
        probs.append("feasibility label inconsistent with t")
    if B:
        # weight the sum-to-one row so it is enforced as tightly as the rest
        M = np.vstack([A[B].T, np.ones(len(B))])
        rhs = np.concatenate([t * p, [1.0]])
        _, resid = nnls(M, rhs)
        if resid > tol:
            probs.append(f"t p is not in conv(blocking rows): residual {resid:.3g}")
    return CertificateReport(not probs, probs)


# ---- batch SIC value for Monte Carlo ---------------------------------------

def _supports(n, m):
    for size in range(1, min(m + 1, n) + 1):
        yield from itertools.combinations(range(n), size)


BATCH_ENUM_LIMIT = 12
BATCH_MIN_STACK = 64  # below this the per-support numpy overhead dominates


def sic_t_batch(A: np.ndarray) -> np.ndarray:
    """t(A) for a stack of instances A of shape (N, n, m+1).

    S^1 uses the largest angular gap; small n uses vectorised support
    enumeration; larger n goes instance by instance through the hull.
    """
    A = np.asarray(A, dtype=float)
    N, n, d = A.shape
    m = d - 1
    if m == 1:
        return _sic_t_circle(A)
    if n > BATCH_ENUM_LIMIT or N < BATCH_MIN_STACK:
        return np.array([sic_hull(Instance(m, a)).t for a in A])
    return _sic_t_enumerate(A)


def _sic_t_enumerate(A):
    N, n, d = A.shape
    m = d - 1
    best = np.full(N, -np.inf)
    for I in _supports(n, m):
        AI = A[:, I, :]
        G = AI @ np.swapaxes(AI, 1, 2)
        ok = np.abs(np.linalg.det(G)) > GRAM_DET_MIN
        G[~ok] = np.eye(len(I))
        c = np.linalg.solve(G, np.ones((N, len(I), 1)))[..., 0]
        q = c.sum(axis=1)
        ok &= (q > 0) & np.all(c >= -1e-12, axis=1)
        t = 1.0 / np.sqrt(np.where(ok, q, 1.0))
        p = t[:, None] * np.einsum("ni,nij->nj", c, AI)
        dots = np.einsum("nij,nj->ni", A, p)
        pos = ok & (dots.min(axis=1) >= t - ROW_TOL)
        neg = ok & (dots.max(axis=1) <= t + ROW_TOL)
        best = np.where(pos, np.maximum(best, t), best)
        best = np.where(neg, np.maximum(best, -t), best)
    return best


def _sic_t_circle(A):
    """On S^1 the SIC is half the shortest arc holding all points: rho = pi - gap/2."""
    ang = np.sort(np.arctan2(A[..., 1], A[..., 0]), axis=1)
    gaps = np.diff(ang, axis=1)
    wrap = 2 * np.pi - (ang[:, -1] - ang[:, 0])
    gap = np.maximum(gaps.max(axis=1, initial=0.0), wrap)
    return np.cos(np.pi - 0.5 * gap)


def sic_t(rows: np.ndarray) -> float:
    """t(A) of one instance."""
    rows = np.asarray(rows, dtype=float)
    return float(sic_t_batch(rows[None])[0])


# ---- grid oracle -------------------------------------------------------------

def fibonacci_sphere(count: int) -> np.ndarray:
    """Near-uniform points on S^2 on a Fibonacci spiral."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + 5 ** 0.5) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def grid_oracle_t(rows: np.ndarray, points: int | None = None, refine: bool = True,
                  seeds: int = 8) -> float:
    """max over p of min_i <a_i, p> by dense search on S^1 or S^2.

    The best grid points are polished by a shrinking local grid in the tangent
    plane and then by a trust-region LP on the linearised constraints. Neither
    step uses the cap structure.
    """
    rows = np.asarray(rows, dtype=float)
    d = rows.shape[1]
    if d == 2:
        count = points or 10_000
        th = 2 * np.pi * np.arange(count) / count
        grid = np.column_stack([np.cos(th), np.sin(th)])
    elif d == 3:
        grid = fibonacci_sphere(points or 100_000)
    else:
        raise ValueError("grid oracle supports S^1 and S^2 only")
    vals = (grid @ rows.T).min(axis=1)
    if not refine:
        return float(vals.max())
    spacing = math.sqrt(2 * (d - 1) * math.pi / len(grid)) * 2
    best_f, best_p = -math.inf, None
    for idx in np.argsort(vals)[-seeds:]:
        f, p = _refine(rows, grid[idx], spacing)
        if f > best_f:
            best_f, best_p = f, p
    return max(float(vals.max()), _polish_lp(rows, best_p, spacing))


def _tangent_basis(p):
    if len(p) == 2:
        return np.array([[-p[1], p[0]]])
    u = np.cross(p, [1.0, 0.0, 0.0])
    if np.linalg.norm(u) < 0.5:
        u = np.cross(p, [0.0, 1.0, 0.0])
    u /= np.linalg.norm(u)
    return np.array([u, np.cross(p, u)])


def _polish_lp(rows, p, h, iters=60):
    """Trust-region sequential LP on max_u min_i <a_i, p + B u> / |p + B u|."""
    f = float((rows @ p).min())
    for _ in range(iters):
        B = _tangent_basis(p)
        k = B.shape[0]
        # variables (u, s): maximise s subject to s <= <a_i, p> + <a_i, B u>
        c = np.zeros(k + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-(rows @ B.T), np.ones((len(rows), 1))])
        b_ub = rows @ p
        bounds = [(-h, h)] * k + [(None, None)]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if res.status != 0:
            break
        q = p + res.x[:k] @ B
        q /= np.linalg.norm(q)
        fq = float((rows @ q).min())
        if fq > f:
            p, f = q, fq
        else:
            h /= 4.0
        if h < 1e-14:
            break
    return f


def _refine(rows, p, h, rounds=60, k=6):
    """Shrinking local grid search around p; returns (value, point)."""
    d = len(p)
    f = float((rows @ p).min())
    offs = np.linspace(-1.0, 1.0, 2 * k + 1)
    mesh = np.array(list(itertools.product(offs, repeat=d - 1)))
    for _ in range(rounds):
        cand = p + h * mesh @ _tangent_basis(p)
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        v = (cand @ rows.T).min(axis=1)
        j = int(np.argmax(v))
        if v[j] > f:
            p, f = cand[j], float(v[j])
        else:
            h /= 2.0
        if h < 1e-9:
            break
    return f, p
