"""Max-min fair power control by bisection over the common SINR target.

Uplink feasibility is linear in the power coefficients and is decided exactly
through the minimal fixed point of the interference function. Downlink
feasibility is a second-order cone program in the amplitudes ``nu``; two
engines are provided (an interior-point cone solver and projected
subgradient descent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .downlink import DownlinkCoefficients, dl_sinr_hcf, equal_power_nu
from .uplink import UplinkSinrCoefficients, ul_sinr


class SolverError(RuntimeError):
    """Bisection did not close its bracket within ``max_iters``."""


@dataclass
class BisectionSettings:
    """Tolerances of the max-min solvers.

    ``feasibility_tolerance`` is the constraint slack ``delta``; downlink
    constraint margins are measured in units of the noise amplitude.
    """

    epsilon: float = 1e-3
    max_iters: int = 200
    feasibility_tolerance: float = 1e-4
    dl_engine: str = "clarabel"
    subgradient_iters: int = 5000
    trace: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.feasibility_tolerance > self.epsilon / 10:
            raise ValueError("feasibility_tolerance must be <= epsilon / 10")
        if self.dl_engine not in ("clarabel", "subgradient"):
            raise ValueError(f"unknown downlink engine {self.dl_engine!r}")


@dataclass
class PowerAllocation:
    """Result of a max-min solve.

    Exactly one of ``eta`` (uplink, shape ``(K,)``) and ``nu`` (downlink,
    shape ``(n_nodes, K)``) is set. ``bracket`` is the final ``(lo, hi)`` of
    the bisection; ``achieved_target == lo`` is certified feasible.
    """

    achieved_target: float
    bracket: tuple[float, float]
    iterations: int
    eta: np.ndarray | None = None
    nu: np.ndarray | None = None
    kinds: np.ndarray | None = None


def _bisect(lo: float, hi: float, check, start, settings: BisectionSettings, label: str):
    """Bisection on ``[lo, hi]``; ``start`` must be feasible at ``lo``."""
    hi = max(hi, lo)
    best, it = start, 0
    while hi - lo > settings.epsilon:
        if it >= settings.max_iters:
            raise SolverError(f"{label}: bracket ({lo:.6g}, {hi:.6g}) still open after {it} iterations")
        mid = 0.5 * (lo + hi)
        sol = check(mid, best)
        if sol is not None:
            lo, best = mid, sol
        else:
            hi = mid
        it += 1
        if settings.trace is not None:
            settings.trace.append({"solver": label, "iteration": it, "target": mid,
                                   "feasible": sol is not None, "lo": lo, "hi": hi})
    return lo, hi, best, it


def expected_iterations(lo: float, hi: float, epsilon: float) -> int:
    """Number of halvings needed to shrink ``[lo, hi]`` to width ``epsilon``."""
    if hi - lo <= epsilon:
        return 0
    return math.ceil(math.log2((hi - lo) / epsilon))


def ul_gamma_high(coeffs: UplinkSinrCoefficients) -> float:
    """Noise-only SINR bound ``max_k p_u ||h_hat_k||^2 / sigma2``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = np.where(coeffs.noise > 0, coeffs.signal / coeffs.noise, 0.0)
    return float(np.max(bound))


def ul_feasibility(gamma_t: float, coeffs: UplinkSinrCoefficients) -> np.ndarray | None:
    """Smallest ``eta`` reaching SINR ``gamma_t`` for every user, or None.

    ``gamma_k >= gamma_t`` is the linear inequality
    ``eta_k (S_k - gamma_t I_kk) >= gamma_t (sum_{j != k} I_kj eta_j + N_k)``.
    A nonnegative solution exists iff the spectral radius of the normalized
    coupling matrix is below one; the minimal one is then the fixed point
    ``eta = F eta + b`` and must also respect ``eta <= 1``.
    """
    S, I, N = coeffs.signal, coeffs.interference, coeffs.noise
    K = len(S)
    if gamma_t <= 0:
        return np.zeros(K)
    margin = S - gamma_t * np.diag(I)
    if np.any(margin <= 0):
        return None
    off = I - np.diag(np.diag(I))
    F = gamma_t * off / margin[:, None]
    b = gamma_t * N / margin
    if K > 1 and np.max(np.abs(np.linalg.eigvals(F))) >= 1.0:
        return None
    eta = np.linalg.solve(np.eye(K) - F, b)
    if np.any(eta < -1e-12) or np.any(eta > 1.0 + 1e-12):
        return None
    return np.clip(eta, 0.0, 1.0)


def maxmin_uplink(coeffs: UplinkSinrCoefficients, settings: BisectionSettings | None = None) -> PowerAllocation:
    """Max-min uplink powers.

    The bracket starts at the smallest SINR under full power, which is
    feasible by construction; the returned allocation therefore never has a
    lower minimum SINR than full power.
    """
    settings = settings or BisectionSettings()
    full = np.ones(coeffs.K)
    lo = float(np.min(ul_sinr(coeffs, full)))
    hi = ul_gamma_high(coeffs)
    lo, hi, eta, it = _bisect(lo, hi, lambda g, _: ul_feasibility(g, coeffs), full, settings, "uplink")
    # the minimal solution at lo equalizes every SINR, even if lo never moved
    tight = ul_feasibility(lo, coeffs)
    if tight is not None:
        eta = tight
    return PowerAllocation(lo, (lo, hi), it, eta=eta)


# --- downlink -------------------------------------------------------------


def dl_xi_high(coeffs: DownlinkCoefficients) -> float:
    """``max_k (sum_n A[n, k])**2 / sigma2``."""
    return float(np.max(coeffs.A.sum(axis=0) ** 2) / coeffs.sigma2)


def project_nu(nu: np.ndarray) -> np.ndarray:
    """Projection onto ``{nu >= 0, ||nu[n, :]|| <= 1}``."""
    nu = np.clip(nu, 0.0, None)
    norms = np.linalg.norm(nu, axis=1, keepdims=True)
    return nu / np.maximum(norms, 1.0)


def soc_margins(xi_t: float, coeffs: DownlinkCoefficients, nu: np.ndarray) -> np.ndarray:
    """``sum_n nu[n, k] A[n, k] - sqrt(xi_t) ||f_k(nu)||`` for every user."""
    signal = np.einsum("nk,nk->k", nu, coeffs.A)
    norm_f = np.sqrt(np.einsum("nkj,nj->k", coeffs.W, nu ** 2) + coeffs.sigma2)
    return signal - np.sqrt(xi_t) * norm_f


def _subgradient_feasibility(xi_t, c: DownlinkCoefficients, settings, start):
    """Projected subgradient on ``max_k -margin_k(nu)`` with ``1/sqrt(t)`` steps."""
    sq = np.sqrt(xi_t)
    W = c.W
    nu = project_nu(start if start is not None else equal_power_nu(c))
    delta = settings.feasibility_tolerance * c.sigma_z
    best_val, best_nu = np.inf, nu
    step0 = 0.5
    for t in range(settings.subgradient_iters):
        norm_f = np.sqrt(np.einsum("nkj,nj->k", W, nu ** 2) + c.sigma2)
        viol = sq * norm_f - np.einsum("nk,nk->k", nu, c.A)
        k = int(np.argmax(viol))
        if viol[k] < best_val:
            best_val, best_nu = viol[k], nu
            if best_val <= -delta:
                return best_nu
        grad = sq * W[:, k, :] * nu / norm_f[k]
        grad[:, k] -= c.A[:, k]
        gnorm = np.linalg.norm(grad)
        if gnorm == 0:
            break
        nu = project_nu(nu - step0 / np.sqrt(t + 1.0) * grad / gnorm)
    return None


class _ConeProgram:
    """Cone data of the downlink feasibility problem.

    The sparsity pattern is fixed by the coefficient table; only the values
    change with the target, so rows, columns and unscaled values are built
    once. Every user cone is divided by its largest entry, which leaves the
    cone unchanged but keeps the interior-point solver well conditioned.
    """

    def __init__(self, c: DownlinkCoefficients):
        self.c = c
        n, K = c.A.shape
        self.n, self.K, self.m = n, K, n * K
        m = self.m
        sqrtW = np.sqrt(c.W)
        # nonnegativity (m rows), then one (1, nu[node]) cone per node
        node_rows = m + np.arange(n)[:, None] * (K + 1) + 1 + np.arange(K)[None, :]
        rows = [np.arange(m), node_rows.ravel()]
        cols = [np.arange(m), np.arange(m)]
        r0 = m + n * (K + 1)
        self.b_fixed = np.zeros(r0)
        self.b_fixed[m + np.arange(n) * (K + 1)] = 1.0
        self.n_fixed = 2 * m
        a_rows, w_rows, w_vals, a_vals, sizes, last = [], [], [], [], [], []
        r = r0
        for k in range(K):
            a_idx = np.flatnonzero(c.A[:, k])
            w = sqrtW[:, k, :].ravel()
            nz = np.flatnonzero(w)
            rows.append(np.full(len(a_idx), r)); cols.append(a_idx * K + k); a_vals.append(c.A[a_idx, k])
            rows.append(r + 1 + np.arange(len(nz))); cols.append(nz); w_vals.append(w[nz])
            a_rows.append(len(a_idx)); w_rows.append(len(nz))
            last.append(r + len(nz) + 1)
            sizes.append(len(nz) + 2)
            r += len(nz) + 2
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.a_vals, self.w_vals = a_vals, w_vals
        self.n_rows, self.sizes, self.last = r, sizes, np.array(last)
        self.a_max = np.array([v.max() if v.size else 0.0 for v in a_vals])
        self.w_max = np.array([v.max() if v.size else 0.0 for v in w_vals])
        self._solver = None

    def _data(self, xi_t: float):
        sq = np.sqrt(xi_t)
        sigma_z = self.c.sigma_z
        scale = np.maximum.reduce([self.a_max, sq * self.w_max, np.full(self.K, sq * sigma_z)])
        scale = np.maximum(scale, 1e-300)
        vals = [-np.ones(self.n_fixed)]
        for k in range(self.K):
            vals.append(-self.a_vals[k] / scale[k])
            vals.append(-sq * self.w_vals[k] / scale[k])
        b = np.zeros(self.n_rows)
        b[: len(self.b_fixed)] = self.b_fixed
        b[self.last] = sq * sigma_z / scale
        A = sp.csc_matrix((np.concatenate(vals), (self.rows, self.cols)), shape=(self.n_rows, self.m))
        return A, b

    def solve(self, xi_t: float):
        import clarabel

        A, b = self._data(xi_t)
        if self._solver is None:
            cones = [clarabel.NonnegativeConeT(self.m)]
            cones += [clarabel.SecondOrderConeT(self.K + 1)] * self.n
            cones += [clarabel.SecondOrderConeT(s) for s in self.sizes]
            opts = clarabel.DefaultSettings()
            opts.verbose = False
            # data updates between targets require presolve off
            opts.presolve_enable = False
            self._solver = clarabel.DefaultSolver(sp.csc_matrix((self.m, self.m)), np.zeros(self.m), A, b, cones, opts)
        else:
            self._solver.update(A=A, b=b)
        sol = self._solver.solve()
        if "Solved" not in str(sol.status):
            return None
        return np.asarray(sol.x).reshape(self.n, self.K)


def dl_soc_feasibility(xi_t: float, coeffs: DownlinkCoefficients, settings: BisectionSettings | None = None,
                       start: np.ndarray | None = None, program: _ConeProgram | None = None) -> np.ndarray | None:
    """Find ``nu`` meeting every user's SOC constraint at target ``xi_t``, or None.

    A candidate is accepted only when, after projection onto the power
    constraints, every margin is at least ``-delta * sigma_z``.
    """
    settings = settings or BisectionSettings()
    c = coeffs.normalized()
    if xi_t <= 0:
        return equal_power_nu(c)
    if settings.dl_engine == "subgradient":
        nu = _subgradient_feasibility(xi_t, c, settings, start)
    else:
        nu = (program or _ConeProgram(c)).solve(xi_t)
    if nu is None:
        return None
    nu = project_nu(nu)
    if np.min(soc_margins(xi_t, c, nu)) < -settings.feasibility_tolerance * c.sigma_z:
        return None
    return nu


def maxmin_downlink(coeffs: DownlinkCoefficients, settings: BisectionSettings | None = None) -> PowerAllocation:
    """Max-min downlink amplitudes; the bracket starts at the equal-split minimum SINR."""
    settings = settings or BisectionSettings()
    c = coeffs.normalized()
    program = _ConeProgram(c) if settings.dl_engine == "clarabel" else None
    hi = dl_xi_high(c)

    def check(xi_t, warm):
        return dl_soc_feasibility(xi_t, c, settings, start=warm, program=program)

    start = equal_power_nu(c)
    lo = float(np.min(dl_sinr_hcf(c, start)))
    lo, hi, nu, it = _bisect(lo, hi, check, start, settings, "downlink")
    return PowerAllocation(lo, (lo, hi), it, nu=nu, kinds=coeffs.kinds)


def power_saving(allocation: PowerAllocation, baseline: PowerAllocation | np.ndarray) -> dict:
    """Percent transmit-power reduction of ``allocation`` relative to ``baseline``.

    Uplink: ``{"ue": ...}`` from mean power coefficients. Downlink: per-node
    savings, reported as ``{"cbs": ..., "ap": ...}`` with the AP figure
    averaged over nodes; absent node kinds are omitted.
    """
    base = baseline.eta if isinstance(baseline, PowerAllocation) and allocation.eta is not None else baseline
    if allocation.eta is not None:
        base = np.asarray(base, dtype=float)
        if np.mean(base) <= 0:
            raise ValueError("zero baseline power")
        return {"ue": 100.0 * (1.0 - np.mean(allocation.eta) / np.mean(base))}
    if isinstance(baseline, PowerAllocation):
        base = baseline.nu
    base_load = np.sum(np.asarray(base) ** 2, axis=1)
    if np.any(base_load <= 0):
        raise ValueError("zero baseline power at some node")
    saving = 100.0 * (1.0 - np.sum(allocation.nu ** 2, axis=1) / base_load)
    kinds = allocation.kinds if allocation.kinds is not None else np.array(["ap"] * len(saving))
    return {kind: float(np.mean(saving[kinds == kind])) for kind in ("cbs", "ap") if np.any(kinds == kind)}


def min_sinr_uplink(coeffs: UplinkSinrCoefficients, eta) -> float:
    return float(np.min(ul_sinr(coeffs, eta)))


def min_sinr_downlink(coeffs: DownlinkCoefficients, nu) -> float:
    return float(np.min(dl_sinr_hcf(coeffs, nu)))
