"""Dense small-grid reference: Kronecker assembly and direct solves.

Everything here is deliberately independent of the matrix-free path in
:mod:`mbpcn.grid` / :mod:`mbpcn.linsolve`.  Matrices are assembled from the
1D Neumann matrix ``G_h`` as ``D_h = I (x) G_h + G_h (x) I`` and systems are
solved with an in-repo LU factorization, so the two routes share no code.
Dimensions are capped at 64 cells per side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mobility import (
    Mobility,
    check_stabilized_bound,
    constant_mobility,
    degenerate_mobility,
    s1_lower_bound,
    s2_lower_bound,
    tau_max_conditional,
)
from .scheme import SchemeParams

MAX_SIDE = 64


class OracleDimensionError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    pass


def _check_side(m: int) -> None:
    if not 2 <= m <= MAX_SIDE:
        raise OracleDimensionError(f"oracle supports 2 <= m <= {MAX_SIDE}, got {m}")


def assemble_gh(m: int, h: float) -> np.ndarray:
    """1D Neumann second-difference matrix, diagonal (-1, -2, ..., -2, -1)/h^2."""
    _check_side(m)
    g = np.zeros((m, m))
    idx = np.arange(m - 1)
    g[idx, idx + 1] = 1.0
    g[idx + 1, idx] = 1.0
    g[np.arange(m), np.arange(m)] = -2.0
    g[0, 0] = g[-1, -1] = -1.0
    return g / h**2


def assemble_dh(m: int, h: float) -> np.ndarray:
    g = assemble_gh(m, h)
    eye = np.eye(m)
    return np.kron(eye, g) + np.kron(g, eye)


def lu_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    x = np.array(b, dtype=np.float64)
    n = a.shape[0]
    scale = np.max(np.abs(a)) if a.size else 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) <= 1e-300 + 1e-15 * scale:
            raise SingularMatrixError(f"zero pivot in column {k}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            x[[k, p]] = x[[p, k]]
        l = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(l, a[k, k:])
        x[k + 1 :] -= l * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


def helmholtz_matrix(shift: float, kappa: float, lam: np.ndarray, h: float) -> np.ndarray:
    """Dense ``shift I - kappa diag(lam) D_h``."""
    m = lam.shape[0]
    return shift * np.eye(m * m) - kappa * np.diag(lam.ravel()) @ assemble_dh(m, h)


def q_matrix(tau: float, params: SchemeParams, mobility_values: np.ndarray, h: float) -> np.ndarray:
    """Right-hand transfer matrix ``(1/tau - S1/2 + S2 tau) I + (eps^2/2) Lam D_h``."""
    lam = np.asarray(mobility_values, dtype=float)
    if np.any(lam < 0):
        raise ValueError("mobility values must be nonnegative")
    m = lam.shape[0]
    _check_side(m)
    diag = 1.0 / tau - 0.5 * params.s1 + params.s2 * tau
    return diag * np.eye(m * m) + 0.5 * params.eps**2 * np.diag(lam.ravel()) @ assemble_dh(m, h)


@dataclass(frozen=True)
class QCheck:
    min_entry: float
    max_row_sum_error: float
    nonnegative: bool
    row_sums_ok: bool


def check_q_matrix(q: np.ndarray, tau: float, params: SchemeParams) -> QCheck:
    expected = 1.0 / tau - 0.5 * params.s1 + params.s2 * tau
    row_err = float(np.max(np.abs(q.sum(axis=1) - expected)))
    min_entry = float(q.min())
    return QCheck(
        min_entry,
        row_err,
        min_entry >= -1e-14,
        row_err <= 1e-12 * max(1.0, abs(expected), float(np.abs(q).max())),
    )


def dense_step(
    state: np.ndarray, tau: float, h: float, params: SchemeParams, mobility: Mobility, which: str = "cn"
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """BDF1 or CN step through assembled matrices.

    ``which="bdf1"`` returns the new state; ``which="cn"`` returns
    ``(half_state, next_state)``.
    """
    phi = np.asarray(state, dtype=float)
    m = phi.shape[0]
    _check_side(m)
    d = assemble_dh(m, h)
    v = phi.ravel()

    def bdf1(vec, dt):
        lam = np.diag(mobility(vec))
        f = mobility(vec) * (vec**3 - vec)
        a = (1.0 / dt + params.s1) * np.eye(m * m) - params.eps**2 * lam @ d
        return lu_solve(a, (1.0 / dt + params.s1) * vec - f)

    if which == "bdf1":
        return bdf1(v, tau).reshape(m, m)
    if which != "cn":
        raise ValueError(f"unknown step kind {which!r}")
    half = bdf1(v, 0.5 * tau)
    lam = np.diag(mobility(half))
    k = 0.5 * params.eps**2
    s1, s2 = params.s1, params.s2
    lhs = (1.0 / tau + 0.5 * s1 + s2 * tau) * np.eye(m * m) - k * lam @ d
    q = (1.0 / tau - 0.5 * s1 + s2 * tau) * np.eye(m * m) + k * lam @ d
    rhs = q @ v + s1 * half - mobility(half) * (half**3 - half)
    return half.reshape(m, m), lu_solve(lhs, rhs).reshape(m, m)


# --- verification suite ----------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def verify_all(trials: int = 50, seed: int = 12345) -> list[CheckResult]:
    """Cross-check every matrix-free kernel against the dense route.

    Margins are ``tolerance - worst observed error`` (positive means pass), or
    for the inadmissible Q-matrix case the depth of the most negative entry.
    """
    from .grid import grad, inner_edge, inner_l2, laplacian
    from .linsolve import HelmholtzOperator
    from .scheme import bdf1_step, cn_step

    rng = np.random.default_rng(seed)
    sides = [2 + (k % 7) for k in range(trials)]
    worst = {"laplacian": 0.0, "helmholtz": 0.0, "bdf1": 0.0, "cn": 0.0, "sbp": 0.0}
    for m in sides:
        h = 1.0 / m
        u = rng.uniform(-1, 1, (m, m))
        v = rng.uniform(-1, 1, (m, m))
        d = assemble_dh(m, h)
        worst["laplacian"] = max(worst["laplacian"], _rel(laplacian(u, h).ravel(), d @ u.ravel()))

        lam = rng.uniform(0.1, 1.0, (m, m))
        c, kappa = rng.uniform(1, 10), rng.uniform(0, 0.1)
        op = HelmholtzOperator(c, kappa, lam, h)
        a = helmholtz_matrix(c, kappa, lam, h)
        worst["helmholtz"] = max(worst["helmholtz"], _rel(op.apply(u).ravel(), a @ u.ravel()))

        lhs = -inner_l2(laplacian(u, h), v, h)
        rhs = inner_edge(grad(u, h), grad(v, h), h)
        worst["sbp"] = max(worst["sbp"], abs(lhs - rhs) / (1 + abs(rhs)))

        mob = constant_mobility() if m % 2 else degenerate_mobility()
        s1 = 2.0 if m % 2 else 0.8
        eps = rng.uniform(0.05, 0.3) / m
        params = SchemeParams(eps, s1, s2_lower_bound(s1, 1.0, eps, h))
        tau = rng.uniform(0.01, 2.0)
        x, _ = bdf1_step(u, tau, h, params, mob)
        worst["bdf1"] = max(worst["bdf1"], _rel(x, dense_step(u, tau, h, params, mob, "bdf1")))
        out = cn_step(u, tau, h, params, mob)
        half, new = dense_step(u, tau, h, params, mob, "cn")
        worst["cn"] = max(worst["cn"], _rel(out.half_state, half), _rel(out.next_state, new))

    tol = {"laplacian": 1e-10, "helmholtz": 1e-10, "bdf1": 1e-10, "cn": 1e-10, "sbp": 1e-12}
    results = [
        CheckResult(f"{k} vs dense", worst[k] <= tol[k], tol[k] - worst[k], f"worst relative error {worst[k]:.3e}")
        for k in ("laplacian", "helmholtz", "bdf1", "cn")
    ]
    results.append(
        CheckResult("summation by parts", worst["sbp"] <= tol["sbp"], tol["sbp"] - worst["sbp"], f"worst {worst['sbp']:.3e}")
    )
    results.extend(_q_checks(rng))
    results.extend(_bound_checks())
    return results


def _q_checks(rng: np.random.Generator) -> list[CheckResult]:
    m, eps, s1, big_l = 6, 1.0 / 6, 0.8, 1.0
    h = 1.0 / m
    lam = rng.uniform(0.0, big_l, (m, m))
    out = []

    s2 = s2_lower_bound(s1, big_l, eps, h)
    worst = np.inf
    for tau in (1e-3, 0.1, 1.0, 10.0, 1e3):
        params = SchemeParams(eps, s1, s2)
        worst = min(worst, check_q_matrix(q_matrix(tau, params, lam, h), tau, params).min_entry)
    out.append(CheckResult("Q >= 0, unconditional regime", worst >= -1e-14, worst, f"min entry {worst:.3e}"))

    params = SchemeParams(eps, s1, 0.0)
    tau = tau_max_conditional(s1, big_l, eps, h)
    chk = check_q_matrix(q_matrix(tau, params, lam, h), tau, params)
    out.append(CheckResult("Q >= 0, conditional regime at the bound", chk.nonnegative, chk.min_entry, f"min entry {chk.min_entry:.3e}"))
    out.append(CheckResult("Q row sums", chk.row_sums_ok, 1e-12 - chk.max_row_sum_error, f"max error {chk.max_row_sum_error:.3e}"))

    tau = 10.0 * tau
    q = q_matrix(tau, params, np.full((m, m), big_l), h)
    neg = float(q.min())
    out.append(CheckResult("Q has a negative entry past the bound", neg < 0, -neg, f"min entry {neg:.3e}"))

    d = np.diag(lam.ravel()) @ assemble_dh(m, h)
    rs = float(np.max(np.abs(d.sum(axis=1)))) / float(np.abs(d).max())
    out.append(CheckResult("Lambda D_h row sums vanish", rs <= 1e-13, 1e-13 - rs, f"relative max {rs:.3e}"))
    return out


def _bound_checks() -> list[CheckResult]:
    out = []
    for mob, expected in ((constant_mobility(), 2.0), (degenerate_mobility(), 0.8)):
        s1 = s1_lower_bound(mob)
        err = abs(s1 - expected)
        out.append(CheckResult(f"S1 bound, {mob.name}", err <= 1e-8, 1e-8 - err, f"S1 = {s1!r}"))
        rep = check_stabilized_bound(mob, s1)
        out.append(CheckResult(f"|S1 r - f(r)| <= S1, {mob.name}", rep.passed, rep.margin, f"max {rep.max_deviation!r}"))
    return out
