"""Small-gain certificates, DoS resilience bounds and event-trigger bounds.

The pipeline is:

1. ``lyapunov_solutions``: one ``P_i`` per subsystem from its closed loop.
2. ``comparison_matrices``: the scalar comparison system ``(A, B, Gamma)``
   obtained from Young's inequality with parameter ``delta``.
3. ``choose_mu``: a positive weighting with ``mu' (B - A) < 0``.
4. ``sigma_bounds`` / ``omega_rates``: per-subsystem error gains and the
   decay/growth rates of the aggregate Lyapunov function
   ``V = sum_i mu_i x_i' P_i x_i``.

``certify`` runs all of it, with optional overrides for any intermediate
quantity so that reference values can be pinned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import matrixcore as mc
from .dos import DoSBudget
from .errors import (
    AlphaNonPositive,
    DimensionMismatch,
    NoFeasibleDelta,
    NonPositiveC,
    NotCertified,
    SigmaTooLarge,
    SmallGainViolated,
)
from .plant import PlantModel

DELTA_GRID_POINTS = 200
DEFAULT_SIGMA_FRACTION = 0.5


def _exp(x: float) -> float:
    """``exp`` that saturates to ``inf`` instead of raising."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class ComparisonMatrices:
    delta: float
    a_diag: np.ndarray
    b_off: np.ndarray
    gamma: np.ndarray

    @property
    def n(self) -> int:
        return len(self.a_diag)

    def small_gain_radius(self) -> float:
        return mc.spectral_radius(self.b_off / self.a_diag[:, None])


@dataclass(frozen=True)
class GainCertificate:
    p: list[np.ndarray]
    comparison: ComparisonMatrices
    mu: np.ndarray
    l_row: np.ndarray
    j_row: np.ndarray
    sigma_max: np.ndarray
    sigma: np.ndarray
    omega1: float
    omega2: float
    resilience_bound: float
    small_gain_radius: float
    overrides: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.mu)

    def p_extremes(self) -> list[tuple[float, float]]:
        return [mc.eig_extremes_symmetric(p) for p in self.p]

    def lyapunov_value(self, model: PlantModel, x) -> float:
        xs = model.split(x)
        if len(xs) != self.n:
            raise DimensionMismatch("certificate and model sizes differ")
        return float(sum(m * xi @ p @ xi for m, p, xi in zip(self.mu, self.p, xs)))


@dataclass(frozen=True)
class EnvelopeParams:
    delta_star: float
    kappa_star: float
    t_star: float
    beta_star: float
    omega1: float
    omega2: float
    tau_d: float
    eta: float

    @property
    def certified(self) -> bool:
        return self.beta_star > 0

    def gain(self) -> float:
        return _exp(self.kappa_star * (self.omega1 + self.omega2))

    def envelope(self, t, v0: float):
        """Upper bound ``exp(kappa*(w1+w2)) exp(-beta* t) V(0)``."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self.gain() * np.exp(-self.beta_star * np.asarray(t, dtype=float)) * v0


@dataclass(frozen=True)
class TriggerParams:
    sigma: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if sigma.shape != c.shape:
            raise DimensionMismatch("sigma and c must have the same length")
        if np.any(sigma < 0) or np.any(sigma >= 1):
            raise ValueError("trigger sigma must lie in [0, 1)")
        if np.any(~np.isfinite(c)) or np.any(c <= 0):
            raise NonPositiveC("trigger floors c_i must be positive and finite")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "c", c)

    @property
    def sigma_bar(self) -> np.ndarray:
        return self.sigma / (1.0 - self.sigma)

    @classmethod
    def from_certificate(cls, cert: GainCertificate, c, sigma=None) -> "TriggerParams":
        sigma = cert.sigma if sigma is None else np.asarray(sigma, dtype=float)
        bound = np.minimum(cert.sigma_max, 1.0)
        for i, (s, b) in enumerate(zip(sigma, bound), start=1):
            if not s < b:
                raise SigmaTooLarge(i, float(s), float(b))
        return cls(sigma, np.broadcast_to(np.asarray(c, dtype=float), sigma.shape).copy())


@dataclass(frozen=True)
class AdmissibilityCheck:
    lhs: float
    rhs: float
    certified: bool


def lyapunov_solutions(model: PlantModel) -> list[np.ndarray]:
    return [mc.solve_lyapunov(s.phi, s.q) for s in model.subsystems]


def comparison_matrices(model: PlantModel, delta: float, p: list[np.ndarray] | None = None) -> ComparisonMatrices:
    if not delta > 0:
        raise ValueError("delta must be positive")
    if p is None:
        p = lyapunov_solutions(model)
    a_diag = np.zeros(model.n_subsystems)
    for s in model.subsystems:
        lam_q, _ = mc.eig_extremes_symmetric(s.q)
        # one Young term for e_i, two (x_j and e_j) per declared neighbor
        a_diag[s.id - 1] = lam_q - delta * (1 + 2 * len(model.neighbors[s.id]))
        if a_diag[s.id - 1] <= 0:
            raise AlphaNonPositive(s.id, delta, float(a_diag[s.id - 1]))
    b_off, gamma = coupling_gains(model, delta, p)
    return ComparisonMatrices(delta, a_diag, b_off, gamma)


def _coupling(model: PlantModel, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """``(H_ij, L_ij)`` with absent couplings as zero blocks."""
    s = model.subsystem(i)
    h = s.h(j)
    l = s.l(j)
    if h is None:
        h = np.zeros((s.n, model.dims[j - 1]))
    if l is None:
        l = np.zeros((s.m, model.dims[j - 1]))
    return h, l


def coupling_gains(model: PlantModel, delta: float, p: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Off-diagonal ``B`` and full ``Gamma`` of the comparison system."""
    n = model.n_subsystems
    b_off = np.zeros((n, n))
    gamma = np.zeros((n, n))
    for s in model.subsystems:
        i = s.id - 1
        p2 = mc.spectral_norm(p[i]) ** 2
        gamma[i, i] = p2 * mc.spectral_norm(s.b @ s.k) ** 2 / delta
        for j in model.neighbors[s.id]:
            h, l = _coupling(model, s.id, j)
            b_off[i, j - 1] = p2 * mc.spectral_norm(s.b @ l + h) ** 2 / delta
            gamma[i, j - 1] = p2 * mc.spectral_norm(s.b @ l) ** 2 / delta
    return b_off, gamma


def _is_feasible_mu(cm: ComparisonMatrices, mu: np.ndarray) -> bool:
    return bool(np.all(mu > 0) and np.all(mu @ (cm.b_off - np.diag(cm.a_diag)) < 0))


def choose_mu(cm: ComparisonMatrices) -> np.ndarray:
    r = cm.small_gain_radius()
    if r >= 1:
        raise SmallGainViolated(r)
    ones = np.ones(cm.n)
    if _is_feasible_mu(cm, ones):
        return ones
    # A - B is a nonsingular M-matrix here, so its inverse is entrywise nonnegative
    mu = np.linalg.solve((np.diag(cm.a_diag) - cm.b_off).T, ones)
    if not _is_feasible_mu(cm, mu):
        raise SmallGainViolated(r)
    return mu


def gain_rows(cm: ComparisonMatrices, mu) -> tuple[np.ndarray, np.ndarray]:
    """``(L, J) = (mu'(A - B), mu' Gamma)``."""
    mu = np.asarray(mu, dtype=float)
    return mu @ (np.diag(cm.a_diag) - cm.b_off), mu @ cm.gamma


def sigma_bounds(l_row, j_row) -> np.ndarray:
    """Strict upper bounds ``sqrt(l_i / j_i)``; ``inf`` marks an unconstrained error (``j_i = 0``)."""
    l_row = np.asarray(l_row, dtype=float)
    j_row = np.asarray(j_row, dtype=float)
    out = np.full(l_row.shape, math.inf)
    nz = j_row > 0
    out[nz] = np.sqrt(l_row[nz] / j_row[nz])
    return out


def omega_rates(l_row, j_row, mu, sigma, p_extremes) -> tuple[float, float, float]:
    """Return ``(omega1, omega2, omega1 / (omega1 + omega2))``."""
    l_row, j_row, mu, sigma = (np.asarray(v, dtype=float) for v in (l_row, j_row, mu, sigma))
    if np.any(sigma <= 0):
        raise ValueError("sigma entries must be positive")
    smax = sigma_bounds(l_row, j_row)
    for i, (s, b) in enumerate(zip(sigma, smax), start=1):
        if not s < b:
            raise SigmaTooLarge(i, float(s), float(b))
    lam_min = np.array([e[0] for e in p_extremes])
    lam_max = np.array([e[1] for e in p_extremes])
    omega1 = float(np.min((l_row - sigma**2 * j_row) / (lam_max * mu)))
    omega2 = float(4.0 * np.max(j_row) / np.min(mu * lam_min))
    return omega1, omega2, omega1 / (omega1 + omega2)


def default_sigma(sigma_max, fraction: float = DEFAULT_SIGMA_FRACTION) -> np.ndarray:
    return fraction * np.minimum(np.asarray(sigma_max, dtype=float), 1.0)


def certify(
    model: PlantModel,
    delta: float | None = None,
    sigma=None,
    *,
    mu=None,
    a_diag=None,
    b_off=None,
    gamma=None,
    sigma_fraction: float = DEFAULT_SIGMA_FRACTION,
) -> GainCertificate:
    """Build the full certificate.

    ``delta=None`` runs :func:`choose_delta`; ``sigma=None`` picks
    ``sigma_fraction * min(sigma_max, 1)``.  ``mu``, ``a_diag``, ``b_off`` and
    ``gamma`` pin the corresponding quantity instead of deriving it.
    """
    p = lyapunov_solutions(model)
    if delta is None:
        delta = choose_delta(model, sigma_fraction=sigma_fraction, p=p)
    overrides = []
    if a_diag is not None:
        # a pinned diagonal bypasses the formula and its positivity check
        cm = _comparison_with_overrides(model, delta, p, a_diag, b_off, gamma)
        overrides.append("a_diag")
    else:
        cm = comparison_matrices(model, delta, p)
        if b_off is not None or gamma is not None:
            cm = ComparisonMatrices(
                delta,
                cm.a_diag,
                cm.b_off if b_off is None else np.asarray(b_off, dtype=float),
                cm.gamma if gamma is None else np.asarray(gamma, dtype=float),
            )
    if b_off is not None:
        overrides.append("b_off")
    if gamma is not None:
        overrides.append("gamma")
    radius = cm.small_gain_radius()
    if mu is None:
        mu = choose_mu(cm)
    else:
        mu = np.asarray(mu, dtype=float)
        overrides.append("mu")
        if radius >= 1:
            raise SmallGainViolated(radius)
        if not _is_feasible_mu(cm, mu):
            raise ValueError("pinned mu does not satisfy mu'(B - A) < 0")
    l_row, j_row = gain_rows(cm, mu)
    smax = sigma_bounds(l_row, j_row)
    sigma = default_sigma(smax, sigma_fraction) if sigma is None else np.asarray(sigma, dtype=float)
    sigma = np.broadcast_to(sigma, smax.shape).astype(float)
    extremes = [mc.eig_extremes_symmetric(pi) for pi in p]
    w1, w2, bound = omega_rates(l_row, j_row, mu, sigma, extremes)
    return GainCertificate(
        p=p,
        comparison=cm,
        mu=mu,
        l_row=l_row,
        j_row=j_row,
        sigma_max=smax,
        sigma=sigma,
        omega1=w1,
        omega2=w2,
        resilience_bound=bound,
        small_gain_radius=radius,
        overrides=tuple(overrides),
    )


def _comparison_with_overrides(model, delta, p, a_diag, b_off, gamma) -> ComparisonMatrices:
    n = model.n_subsystems
    a_diag = np.asarray(a_diag, dtype=float).reshape(-1)
    if a_diag.shape != (n,):
        raise DimensionMismatch(f"a_diag override must have {n} entries")
    if np.any(a_diag <= 0):
        raise ValueError("a_diag override entries must be positive")
    base_b, base_g = coupling_gains(model, delta, p)
    return ComparisonMatrices(
        delta,
        a_diag,
        base_b if b_off is None else np.asarray(b_off, dtype=float),
        base_g if gamma is None else np.asarray(gamma, dtype=float),
    )


def choose_delta(
    model: PlantModel,
    sigma_fraction: float = DEFAULT_SIGMA_FRACTION,
    p: list[np.ndarray] | None = None,
) -> float:
    """Grid-search ``delta`` maximizing the resilience bound.

    200 log-spaced points over ``(0, min_i lambda_min(Q_i))``; ties go to the
    smaller ``delta``.
    """
    if p is None:
        p = lyapunov_solutions(model)
    q_min = min(mc.eig_extremes_symmetric(s.q)[0] for s in model.subsystems)
    grid = np.geomspace(q_min * 1e-4, q_min, DELTA_GRID_POINTS, endpoint=False)
    extremes = [mc.eig_extremes_symmetric(pi) for pi in p]
    best, best_bound = None, -math.inf
    for delta in grid:
        try:
            cm = comparison_matrices(model, float(delta), p)
            mu = choose_mu(cm)
        except (AlphaNonPositive, SmallGainViolated):
            continue
        l_row, j_row = gain_rows(cm, mu)
        smax = sigma_bounds(l_row, j_row)
        if np.any(smax <= 0):
            continue
        try:
            _, _, bound = omega_rates(l_row, j_row, mu, default_sigma(smax, sigma_fraction), extremes)
        except SigmaTooLarge:
            continue
        if bound > best_bound:
            best, best_bound = float(delta), bound
    if best is None:
        raise NoFeasibleDelta("no grid delta gives positive alphas and r(A^-1 B) < 1")
    return best


def check_dos_admissible(budget: DoSBudget, n_subsystems: int, delta: float, bound: float) -> AdmissibilityCheck:
    """Compare ``1/T + N*Delta/tau_D`` against the resilience bound (strict)."""
    lhs = 1.0 / budget.t_ratio + n_subsystems * delta / budget.tau_d
    return AdmissibilityCheck(lhs=lhs, rhs=float(bound), certified=lhs < bound)


def envelope_params(budget: DoSBudget, cert: GainCertificate, n: int, delta: float) -> EnvelopeParams:
    d_star = n * delta
    k_star = budget.kappa + (1 + budget.eta) * d_star
    if math.isinf(budget.tau_d):
        t_star = budget.t_ratio
    else:
        t_star = budget.tau_d * budget.t_ratio / (budget.tau_d + budget.t_ratio * d_star)
    w1, w2 = cert.omega1, cert.omega2
    beta = w1 - (w1 + w2) * (d_star / budget.tau_d + 1.0 / budget.t_ratio)
    return EnvelopeParams(
        delta_star=d_star,
        kappa_star=k_star,
        t_star=t_star,
        beta_star=beta,
        omega1=w1,
        omega2=w2,
        tau_d=budget.tau_d,
        eta=budget.eta,
    )


def zeno_interevent_bound(
    model: PlantModel, trig: TriggerParams, x_bound: float, m_bound: float, i: int
) -> float:
    """Lower bound on the time between consecutive trigger events of subsystem ``i``.

    ``x_bound`` bounds ``|x_i|`` at the last event, ``m_bound`` bounds the
    neighbors' held states over the inter-event interval.
    """
    c = trig.c[i - 1]
    if not c > 0:
        raise NonPositiveC(f"c_{i} must be positive")
    s = model.subsystem(i)
    sbar = trig.sigma_bar
    zeta_sum = 0.0
    floor_sum = 0.0
    for j in model.neighbors[i]:
        h, l = _coupling(model, i, j)
        h_norm = mc.spectral_norm(h)
        zeta_sum += mc.spectral_norm(s.b @ l + h) + h_norm * sbar[j - 1]
        floor_sum += h_norm * sbar[j - 1] * trig.c[j - 1]
    denom = mc.spectral_norm(s.phi) * x_bound + m_bound * zeta_sum + floor_sum
    if denom <= 0:
        return math.inf
    z = c / denom
    mu_a = mc.log_norm(s.a)
    if mu_a <= 0:
        return z
    return math.log(z * mu_a + 1.0) / mu_a


def practical_bound(cert: GainCertificate, trig: TriggerParams, env: EnvelopeParams) -> tuple[float, float]:
    """Asymptotic bound on ``V`` under the hybrid policy; returns ``(bound, c)``."""
    if env.beta_star <= 0:
        raise NotCertified(f"beta* = {env.beta_star:.6g} <= 0; DoS budget not admissible")
    c = float(np.sum(cert.j_row * trig.c**2))
    w1 = cert.omega1
    if math.isfinite(env.tau_d):
        head = _exp(env.kappa_star * (env.omega1 + env.omega2) + env.beta_star * env.tau_d * env.eta)
        head /= 1.0 - math.exp(-env.beta_star * env.tau_d)
    else:
        # no average dwell constraint: at most floor(eta) + 1 transitions ever
        head = _exp(env.kappa_star * (env.omega1 + env.omega2)) * (math.floor(env.eta) + 1)
    return head * c / w1 + c / w1, c
