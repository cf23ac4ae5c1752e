"""Dense bounded-variable linear programming.

Two-phase revised simplex with an explicit basis inverse, Dantzig pricing,
and a Bland's-rule fallback that engages after a run of degenerate steps.
Ties in the ratio test break toward the lowest variable index, so repeated
solves of the same problem are bitwise reproducible.

The iteration loop lives in module-level kernel functions that are compiled
with numba unless ``MUSEL_DISABLE_NUMBA=1`` (see :mod:`musel._accel`); the
pure-numpy fallback runs the identical source interpreted.
"""

import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._accel import maybe_njit

DEFAULT_FEAS_TOL = 1e-9
DEFAULT_OPT_TOL = 1e-9

_PIV_TOL = 1e-9
_DEGEN_EPS = 1e-11
_REFRESH_EVERY = 150

# kernel exit codes
_KERN_OPTIMAL = 0
_KERN_UNBOUNDED = 1
_KERN_ITER_LIMIT = 2

# variable states
_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_FREE = 3


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LinearProgram:
    """min c@x  s.t.  A_ub@x <= b_ub,  A_eq@x == b_eq,  lower <= x <= upper.

    Bounds may be +-inf.  All other data must be finite; NaN anywhere is
    rejected at construction.
    """

    c: np.ndarray
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.shape[0]
        if n == 0:
            raise ValueError("linear program needs at least one variable")

        def rows(A, b, name):
            if A is None:
                return np.zeros((0, n)), np.zeros(0)
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if A.shape[1] != n or A.shape[0] != b.shape[0]:
                raise ValueError(f"{name}: shape mismatch "
                                 f"(A {A.shape}, b {b.shape}, n={n})")
            if np.isnan(A).any() or np.isnan(b).any() or np.isinf(A).any() or np.isinf(b).any():
                raise ValueError(f"{name}: non-finite coefficients rejected")
            return A, b

        A_ub, b_ub = rows(self.A_ub, self.b_ub, "A_ub")
        A_eq, b_eq = rows(self.A_eq, self.b_eq, "A_eq")
        lower = (np.full(n, -np.inf) if self.lower is None
                 else np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy())
        upper = (np.full(n, np.inf) if self.upper is None
                 else np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy())
        if np.isnan(c).any() or np.isinf(c).any():
            raise ValueError("objective: non-finite coefficients rejected")
        if np.isnan(lower).any() or np.isnan(upper).any():
            raise ValueError("bounds: NaN rejected")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("bounds: lower=+inf / upper=-inf rejected")
        if np.any(lower > upper):
            j = int(np.argmax(lower > upper))
            raise ValueError(f"variable {j}: lower bound exceeds upper bound")
        for name, val in (("c", c), ("A_ub", A_ub), ("b_ub", b_ub),
                          ("A_eq", A_eq), ("b_eq", b_eq),
                          ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, val)

    @property
    def n_vars(self):
        return self.c.shape[0]

    @property
    def n_constraints(self):
        return self.A_ub.shape[0] + self.A_eq.shape[0]


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective_value: float
    iterations: int
    farkas_y: np.ndarray = None
    ray: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL


def _kernel_refactor(AT, b, art_sign, cc, lo, up, basis, vstat, xB, Binv):
    """Rebuild the basis inverse from scratch and recompute basic values."""
    n_struct = AT.shape[0]
    m = AT.shape[1]
    n_total = cc.shape[0]
    B = np.zeros((m, m))
    for i in range(m):
        j = basis[i]
        if j < n_struct:
            B[:, i] = AT[j]
        elif j < n_struct + m:
            B[j - n_struct, i] = 1.0
        else:
            B[j - n_struct - m, i] = art_sign[j - n_struct - m]
    Binv[:, :] = np.linalg.inv(B)

    xfull = np.zeros(n_total)
    for j in range(n_total):
        st = vstat[j]
        if st == _AT_LOWER:
            xfull[j] = lo[j]
        elif st == _AT_UPPER:
            xfull[j] = up[j]
    v = b - np.dot(xfull[:n_struct], AT)
    v -= xfull[n_struct:n_struct + m]
    v -= art_sign * xfull[n_struct + m:]
    xB[:] = np.dot(Binv, v)


def _kernel_simplex(AT, b, art_sign, cc, lo, up, basis, vstat, xB, Binv,
                    opt_tol, max_iters, ray_buf):
    """Run simplex pivots until optimal/unbounded/iteration limit.

    Mutates basis, vstat, xB and Binv in place.  Returns (exit_code, iters).
    Before reporting optimal or unbounded the basis inverse is refreshed and
    the conclusion re-verified, so returned states are freshly factorized.
    """
    n_struct = AT.shape[0]
    m = AT.shape[1]
    n_total = cc.shape[0]

    can_enter = np.empty(n_total, dtype=np.bool_)
    for j in range(n_total):
        can_enter[j] = up[j] > lo[j]

    iters = 0
    since_refactor = 0
    degen_run = 0
    bland = False
    verified = False
    bland_trigger = 50 + 2 * m

    while True:
        if since_refactor >= _REFRESH_EVERY:
            _kernel_refactor(AT, b, art_sign, cc, lo, up, basis, vstat, xB, Binv)
            since_refactor = 0

        # duals and reduced costs
        cB = cc[basis]
        y = np.dot(cB, Binv)
        d = np.empty(n_total)
        d[:n_struct] = cc[:n_struct] - np.dot(AT, y)
        d[n_struct:n_struct + m] = cc[n_struct:n_struct + m] - y
        d[n_struct + m:] = cc[n_struct + m:] - art_sign * y

        viol = np.where(vstat == _AT_LOWER, -d,
                        np.where(vstat == _AT_UPPER, d,
                                 np.where(vstat == _FREE, np.abs(d), -np.inf)))
        viol = np.where(can_enter, viol, -np.inf)

        if bland:
            q = -1
            for j in range(n_total):
                if viol[j] > opt_tol:
                    q = j
                    break
        else:
            q = int(np.argmax(viol))
            if viol[q] <= opt_tol:
                q = -1

        if q < 0:
            if verified or since_refactor == 0:
                return _KERN_OPTIMAL, iters
            _kernel_refactor(AT, b, art_sign, cc, lo, up, basis, vstat, xB, Binv)
            since_refactor = 0
            verified = True
            continue

        if vstat[q] == _AT_LOWER:
            direction = 1.0
        elif vstat[q] == _AT_UPPER:
            direction = -1.0
        else:
            direction = 1.0 if d[q] < 0.0 else -1.0

        if q < n_struct:
            w = np.dot(Binv, AT[q])
        elif q < n_struct + m:
            w = Binv[:, q - n_struct].copy()
        else:
            w = art_sign[q - n_struct - m] * Binv[:, q - n_struct - m]

        wd = direction * w
        lob = lo[basis]
        upb = up[basis]
        dec = wd > _PIV_TOL
        inc = wd < -_PIV_TOL
        t_arr = np.where(dec, (xB - lob) / wd,
                         np.where(inc, (xB - upb) / wd, np.inf))
        t_arr = np.maximum(t_arr, 0.0)
        t_rows = np.min(t_arr) if m > 0 else np.inf
        t_self = up[q] - lo[q]

        if t_rows == np.inf and t_self == np.inf:
            if verified or since_refactor == 0:
                ray_buf[:] = 0.0
                ray_buf[q] = direction
                for i in range(m):
                    ray_buf[basis[i]] = -direction * w[i]
                return _KERN_UNBOUNDED, iters
            _kernel_refactor(AT, b, art_sign, cc, lo, up, basis, vstat, xB, Binv)
            since_refactor = 0
            verified = True
            continue
        verified = False

        if t_self <= t_rows:
            # entering variable travels to its opposite bound; basis unchanged
            t = t_self
            xB -= t * wd
            vstat[q] = _AT_UPPER if vstat[q] == _AT_LOWER else _AT_LOWER
        else:
            t = t_rows
            cands = np.nonzero(t_arr == t_rows)[0]
            r = int(cands[np.argmin(basis[cands])])
            leave = basis[r]
            xB -= t * wd
            vstat[leave] = _AT_LOWER if wd[r] > 0.0 else _AT_UPPER
            if vstat[q] == _AT_LOWER:
                start = lo[q]
            elif vstat[q] == _AT_UPPER:
                start = up[q]
            else:
                start = 0.0
            basis[r] = q
            vstat[q] = _BASIC
            xB[r] = start + direction * t
            piv = w[r]
            Binv[r, :] *= 1.0 / piv
            f = np.copy(w)
            f[r] = 0.0
            Binv -= f.reshape(m, 1) * Binv[r:r + 1, :]
            since_refactor += 1

        iters += 1
        if t <= _DEGEN_EPS:
            degen_run += 1
            if degen_run > bland_trigger:
                bland = True
        else:
            degen_run = 0
            bland = False
        if iters >= max_iters:
            return _KERN_ITER_LIMIT, iters


_kernel_refactor = maybe_njit(_kernel_refactor)
_kernel_simplex = maybe_njit(_kernel_simplex)


def _nonbasic_values(lo, up, vstat):
    vals = np.where(vstat == _AT_LOWER, lo, np.where(vstat == _AT_UPPER, up, 0.0))
    return np.where(np.isfinite(vals), vals, 0.0)


def _extract_x(lo, up, vstat, basis, xB, n_total):
    x = _nonbasic_values(lo, up, vstat)
    x[basis] = xB
    return x


def _dump_lp(lp, path):
    with open(path, "a") as fh:
        fh.write(f"# LP vars={lp.n_vars} ub_rows={lp.A_ub.shape[0]} "
                 f"eq_rows={lp.A_eq.shape[0]}\n")
        fh.write("c " + " ".join(f"{v:.17g}" for v in lp.c) + "\n")
        for A, b, tag in ((lp.A_ub, lp.b_ub, "<="), (lp.A_eq, lp.b_eq, "==")):
            for row, rhs in zip(A, b):
                fh.write(" ".join(f"{v:.17g}" for v in row) + f" {tag} {rhs:.17g}\n")
        fh.write("lo " + " ".join(f"{v:.17g}" for v in lp.lower) + "\n")
        fh.write("up " + " ".join(f"{v:.17g}" for v in lp.upper) + "\n")


def _solve_box_only(lp):
    """No constraints: minimize over the box alone."""
    n = lp.n_vars
    x = np.zeros(n)
    for j in range(n):
        cj, l, u = lp.c[j], lp.lower[j], lp.upper[j]
        if cj > 0:
            if not np.isfinite(l):
                return LpSolution(LpStatus.UNBOUNDED, x, -np.inf, 0)
            x[j] = l
        elif cj < 0:
            if not np.isfinite(u):
                return LpSolution(LpStatus.UNBOUNDED, x, -np.inf, 0)
            x[j] = u
        else:
            if np.isfinite(l) and np.isfinite(u):
                x[j] = l if abs(l) <= abs(u) else u
            elif np.isfinite(l):
                x[j] = l
            elif np.isfinite(u):
                x[j] = u
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.c @ x), 0)


def solve_lp(lp, feas_tol=DEFAULT_FEAS_TOL, opt_tol=DEFAULT_OPT_TOL,
             max_iters=None):
    """Solve a :class:`LinearProgram`.

    Deterministic: identical input yields a bitwise-identical solution.
    ``max_iters`` defaults to ``50 * (n_vars + n_constraints)``.
    """
    if not isinstance(lp, LinearProgram):
        raise TypeError("solve_lp expects a LinearProgram")
    debug_path = os.environ.get("MUSEL_LP_DEBUG", "")
    if debug_path:
        _dump_lp(lp, debug_path)

    m1 = lp.A_ub.shape[0]
    m2 = lp.A_eq.shape[0]
    m = m1 + m2
    if m == 0:
        return _solve_box_only(lp)
    n = lp.n_vars
    if max_iters is None:
        max_iters = 50 * (n + m)

    # standard form: every row gets a slack ([0,inf) for <=, [0,0] for ==),
    # plus one artificial column per row for the phase-1 crash basis.
    A = np.vstack([lp.A_ub, lp.A_eq])
    b = np.concatenate([lp.b_ub, lp.b_eq])
    AT = np.ascontiguousarray(A.T)
    n_total = n + 2 * m

    lo = np.full(n_total, 0.0)
    up = np.full(n_total, np.inf)
    lo[:n] = lp.lower
    up[:n] = lp.upper
    up[n + m1:n + m] = 0.0          # equality slacks pinned at zero

    vstat = np.empty(n_total, dtype=np.int64)
    for j in range(n):
        lj, uj = lo[j], up[j]
        if np.isfinite(lj) and np.isfinite(uj):
            vstat[j] = _AT_LOWER if abs(lj) <= abs(uj) else _AT_UPPER
        elif np.isfinite(lj):
            vstat[j] = _AT_LOWER
        elif np.isfinite(uj):
            vstat[j] = _AT_UPPER
        else:
            vstat[j] = _FREE
    vstat[n:] = _AT_LOWER

    x0 = _nonbasic_values(lo, up, vstat)
    resid = b - A @ x0[:n]

    basis = np.empty(m, dtype=np.int64)
    xB = np.empty(m)
    art_sign = np.ones(m)
    binv_diag = np.ones(m)
    any_artificial = False
    for i in range(m):
        is_ineq = i < m1
        if is_ineq and resid[i] >= 0.0:
            basis[i] = n + i            # slack absorbs the residual
            xB[i] = resid[i]
            vstat[n + i] = _BASIC
        else:
            s = 1.0 if resid[i] >= 0.0 else -1.0
            art_sign[i] = s
            binv_diag[i] = s
            basis[i] = n + m + i
            xB[i] = abs(resid[i])
            vstat[n + m + i] = _BASIC
            any_artificial = True
    Binv = np.diag(binv_diag)
    ray_buf = np.zeros(n_total)

    total_iters = 0
    b_scale = 1.0 + np.max(np.abs(b)) if m else 1.0

    with np.errstate(all="ignore"):
        if any_artificial:
            c1 = np.zeros(n_total)
            c1[n + m:] = 1.0
            code, it = _kernel_simplex(AT, b, art_sign, c1, lo, up, basis, vstat,
                                       xB, Binv, opt_tol, max_iters, ray_buf)
            total_iters += it
            if code == _KERN_ITER_LIMIT:
                x = _extract_x(lo, up, vstat, basis, xB, n_total)[:n]
                return LpSolution(LpStatus.ITERATION_LIMIT, x, float(lp.c @ x),
                                  total_iters)
            infeas = float(np.sum(np.where(basis >= n + m, xB, 0.0)))
            if infeas > feas_tol * b_scale * 10.0:
                y1 = c1[basis] @ Binv
                x = _extract_x(lo, up, vstat, basis, xB, n_total)[:n]
                return LpSolution(LpStatus.INFEASIBLE, x, np.nan, total_iters,
                                  farkas_y=y1,
                                  diagnostics={"phase1_infeasibility": infeas})
            if total_iters >= max_iters:
                x = _extract_x(lo, up, vstat, basis, xB, n_total)[:n]
                return LpSolution(LpStatus.ITERATION_LIMIT, x, float(lp.c @ x),
                                  total_iters)

        up[n + m:] = 0.0                # artificials pinned for phase 2

        c2 = np.zeros(n_total)
        c2[:n] = lp.c
        for attempt in range(4):
            code, it = _kernel_simplex(AT, b, art_sign, c2, lo, up, basis, vstat,
                                       xB, Binv, opt_tol, max_iters - total_iters,
                                       ray_buf)
            total_iters += it
            if code != _KERN_OPTIMAL:
                break
            x = _extract_x(lo, up, vstat, basis, xB, n_total)[:n]
            if _feasible(lp, x, feas_tol * b_scale):
                return LpSolution(LpStatus.OPTIMAL, x, float(lp.c @ x),
                                  total_iters)
            # numerical drift: refresh the factorization and resume
            _kernel_refactor(AT, b, art_sign, c2, lo, up, basis, vstat, xB, Binv)
            if total_iters >= max_iters:
                code = _KERN_ITER_LIMIT
                break

    x = _extract_x(lo, up, vstat, basis, xB, n_total)[:n]
    if code == _KERN_UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, x, -np.inf, total_iters,
                          ray=ray_buf[:n].copy())
    return LpSolution(LpStatus.ITERATION_LIMIT, x, float(lp.c @ x), total_iters)


def _feasible(lp, x, tol):
    if np.any(x < lp.lower - tol) or np.any(x > lp.upper + tol):
        return False
    if lp.A_ub.shape[0] and np.max(lp.A_ub @ x - lp.b_ub) > tol:
        return False
    if lp.A_eq.shape[0] and np.max(np.abs(lp.A_eq @ x - lp.b_eq)) > tol:
        return False
    return True


def check_solution(lp, sol, feas_tol=DEFAULT_FEAS_TOL):
    """Max constraint/bound violation of an LpSolution against its program."""
    x = sol.x
    viol = 0.0
    if lp.A_ub.shape[0]:
        viol = max(viol, float(np.max(lp.A_ub @ x - lp.b_ub)))
    if lp.A_eq.shape[0]:
        viol = max(viol, float(np.max(np.abs(lp.A_eq @ x - lp.b_eq))))
    lo_v = lp.lower - x
    up_v = x - lp.upper
    viol = max(viol, float(np.max(np.where(np.isfinite(lo_v), lo_v, -np.inf))))
    viol = max(viol, float(np.max(np.where(np.isfinite(up_v), up_v, -np.inf))))
    return viol
