"""Two-regime hidden Markov model on deviation series.

Each firm's deviation series is modeled with two unobserved regimes
(prosperous, recessionary).  Emissions are Gaussian around a per-regime
linear trend ``alpha * t + beta`` (t is the 1-based position in the
window), regimes follow a first-order Markov chain with a constant
transition matrix, and parameters are estimated per firm by EM.
The filtered regime probabilities come from the causal forward recursion:
the recessionary probability only builds up as deviations accumulate,
which is what the uncertainty index aggregates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROSPEROUS = 0
RECESSIONARY = 1

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_SIMPLEX_TOL = 1e-12


class FilterDegeneracyError(RuntimeError):
    """All regime densities vanished numerically at some step."""


@dataclass(frozen=True)
class RegimeParams:
    """Emission parameters of one regime: trend slope, intercept, residual std."""

    alpha: float
    beta: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    def mean(self, t):
        """Trend value at 1-based position(s) ``t``."""
        return self.alpha * np.asarray(t, dtype=float) + self.beta


def _check_simplex(vec: np.ndarray, what: str) -> None:
    if np.any(vec < 0.0) or np.any(vec > 1.0):
        raise ValueError(f"{what} entries must lie in [0, 1], got {vec}")
    if abs(float(vec.sum()) - 1.0) > _SIMPLEX_TOL:
        raise ValueError(f"{what} must sum to 1 within {_SIMPLEX_TOL}, got {vec}")


@dataclass(frozen=True)
class RegimeModel:
    """Transition matrix, per-regime emission parameters, initial state probabilities.

    By convention index 0 is the prosperous regime and index 1 the
    recessionary one once the model has been through ``label_regimes``.
    """

    q: np.ndarray
    params: tuple[RegimeParams, RegimeParams]
    pi0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "pi0", np.asarray(self.pi0, dtype=float))
        object.__setattr__(self, "params", tuple(self.params))
        if self.q.shape != (2, 2):
            raise ValueError("q must be a 2x2 matrix")
        if len(self.params) != 2:
            raise ValueError("exactly two regimes are supported")
        for row in self.q:
            _check_simplex(row, "transition matrix row")
        if self.pi0.shape != (2,):
            raise ValueError("pi0 must have two entries")
        _check_simplex(self.pi0, "initial state probabilities")

    @property
    def prosperous(self) -> RegimeParams:
        return self.params[PROSPEROUS]

    @property
    def recessionary(self) -> RegimeParams:
        return self.params[RECESSIONARY]


@dataclass(frozen=True)
class FilterOutput:
    """Forward-filter result: per-step filtered and predicted pairs plus the log-likelihood."""

    filtered: np.ndarray
    predicted: np.ndarray
    loglik: float

    def __post_init__(self):
        object.__setattr__(self, "filtered", np.asarray(self.filtered, dtype=float))
        object.__setattr__(self, "predicted", np.asarray(self.predicted, dtype=float))
        if not np.isfinite(self.loglik):
            raise ValueError("log-likelihood must be finite")
        for name, arr in (("filtered", self.filtered), ("predicted", self.predicted)):
            if np.abs(arr.sum(axis=1) - 1.0).max() > _SIMPLEX_TOL:
                raise ValueError(f"{name} probability pairs must sum to 1 within {_SIMPLEX_TOL}")

    @property
    def mu_p(self) -> np.ndarray:
        return self.filtered[:, PROSPEROUS]

    @property
    def mu_r(self) -> np.ndarray:
        return self.filtered[:, RECESSIONARY]


@dataclass(frozen=True)
class FitReport:
    """EM fit outcome: labeled model, iteration trace and quality flags."""

    model: RegimeModel
    iterations: int
    loglik_trace: np.ndarray
    converged: bool
    degenerate: bool

    def __post_init__(self):
        object.__setattr__(self, "loglik_trace", np.asarray(self.loglik_trace, dtype=float))


def _as_observations(y) -> np.ndarray:
    arr = np.asarray(getattr(y, "y", y), dtype=float)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("observations must be a nonempty 1-d sequence")
    return arr


def emission_logdensity(y_t, t, params: RegimeParams):
    """Log Gaussian density of ``y_t`` around the regime trend at position ``t`` (1-based)."""
    resid = (np.asarray(y_t, dtype=float) - params.mean(t)) / params.sigma
    return -np.log(params.sigma) - _HALF_LOG_2PI - 0.5 * resid * resid


def _emission_logmatrix(y: np.ndarray, model: RegimeModel) -> np.ndarray:
    t = np.arange(1, len(y) + 1, dtype=float)
    return np.column_stack([emission_logdensity(y, t, p) for p in model.params])


def propagate(prob_pair, q) -> np.ndarray:
    """One-step state-probability propagation through the transition matrix."""
    return np.asarray(prob_pair, dtype=float) @ np.asarray(q, dtype=float)


def _shifted_emissions(logb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # per-step max shift keeps the dominant regime's density at 1.0
    shift = logb.max(axis=1)
    return np.exp(logb - shift[:, None]), shift


def forward_filter(y, model: RegimeModel) -> FilterOutput:
    """Causal forward recursion: filtered regime probabilities and the log-likelihood.

    ``filtered[t]`` conditions on observations up to and including step t;
    ``predicted[t]`` is the prior pair before seeing step t (``predicted[0]``
    is pi0).  The log-likelihood accumulates the per-step normalizers.
    """
    offsets = getattr(y, "offsets", None)
    yv = _as_observations(y)
    T = len(yv)
    b, shift = _shifted_emissions(_emission_logmatrix(yv, model))

    filtered = np.empty((T, 2))
    predicted = np.empty((T, 2))
    pred = model.pi0.astype(float)
    loglik = 0.0
    for t in range(T):
        predicted[t] = pred
        joint = pred * b[t]
        c = joint.sum()
        if not (np.isfinite(c) and c > 0.0):
            where = offsets[t] if offsets is not None else t + 1
            raise FilterDegeneracyError(f"filter degeneracy at offset {where}")
        filtered[t] = joint / c
        loglik += np.log(c) + shift[t]
        pred = filtered[t] @ model.q
    return FilterOutput(filtered, predicted, float(loglik))


def _forward_backward(yv: np.ndarray, model: RegimeModel):
    """Scaled forward-backward pass.

    Returns (loglik, gamma, xi_sum): smoothed per-step posteriors and the
    summed pairwise transition posteriors.
    """
    T = len(yv)
    b, shift = _shifted_emissions(_emission_logmatrix(yv, model))
    q = model.q

    alpha_hat = np.empty((T, 2))
    c = np.empty(T)
    a = model.pi0 * b[0]
    c[0] = a.sum()
    if not (np.isfinite(c[0]) and c[0] > 0.0):
        raise FilterDegeneracyError("filter degeneracy at offset 1")
    alpha_hat[0] = a / c[0]
    for t in range(1, T):
        a = (alpha_hat[t - 1] @ q) * b[t]
        c[t] = a.sum()
        if not (np.isfinite(c[t]) and c[t] > 0.0):
            raise FilterDegeneracyError(f"filter degeneracy at offset {t + 1}")
        alpha_hat[t] = a / c[t]
    loglik = float(np.sum(np.log(c)) + np.sum(shift))

    beta_hat = np.empty((T, 2))
    beta_hat[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta_hat[t] = (q @ (b[t + 1] * beta_hat[t + 1])) / c[t + 1]

    gamma = alpha_hat * beta_hat
    gamma /= gamma.sum(axis=1, keepdims=True)

    if T > 1:
        inner = (b[1:] * beta_hat[1:]) / c[1:, None]
        xi_sum = np.einsum("ti,ij,tj->ij", alpha_hat[:-1], q, inner)
    else:
        xi_sum = np.zeros((2, 2))
    return loglik, gamma, xi_sum


def _weighted_line(t: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """Weighted least-squares line y ~ alpha*t + beta (centered for stability)."""
    sw = w.sum()
    if sw <= 0.0:
        return 0.0, 0.0
    t_bar = float(w @ t) / sw
    y_bar = float(w @ y) / sw
    dt = t - t_bar
    denom = float(w @ (dt * dt))
    if denom <= 0.0:
        return 0.0, y_bar
    alpha = float(w @ (dt * (y - y_bar))) / denom
    return alpha, y_bar - alpha * t_bar


def sigma_floor(y) -> float:
    """Lower bound for regime stds: 1e-4 of the data spread (1e-4 flat if constant)."""
    sd = float(np.std(_as_observations(y)))
    return 1e-4 * (sd if sd > 0.0 else 1.0)


def _m_step(yv, t, gamma, xi_sum, model: RegimeModel, floor: float) -> RegimeModel:
    params = []
    for i in range(2):
        w = gamma[:, i]
        if w.sum() <= 0.0:
            params.append(model.params[i])
            continue
        alpha, beta = _weighted_line(t, yv, w)
        resid = yv - (alpha * t + beta)
        var = float(w @ (resid * resid)) / float(w.sum())
        sigma = max(np.sqrt(max(var, 0.0)), floor)
        params.append(RegimeParams(alpha, beta, sigma))

    q = model.q.copy()
    den = xi_sum.sum(axis=1)
    for i in range(2):
        if den[i] > 0.0:
            row = xi_sum[i] / den[i]
            q[i] = row / row.sum()

    pi0 = gamma[0] / gamma[0].sum()
    return RegimeModel(q, tuple(params), pi0)


def label_regimes(model: RegimeModel) -> tuple[RegimeModel, bool]:
    """Order the states (prosperous, recessionary) and report indistinguishability.

    The state with the smaller trend intercept is recessionary; intercept
    ties break toward the larger sigma.  If both tie the regimes are
    indistinguishable: the order is kept and the degenerate flag raised.
    """
    b = [p.beta for p in model.params]
    s = [p.sigma for p in model.params]
    degenerate = False
    if b[0] != b[1]:
        rec = int(np.argmin(b))
    elif s[0] != s[1]:
        rec = int(np.argmax(s))
    else:
        rec = RECESSIONARY
        degenerate = True
    pros = 1 - rec
    order = np.array([pros, rec])
    relabeled = RegimeModel(
        model.q[np.ix_(order, order)],
        (model.params[pros], model.params[rec]),
        model.pi0[order],
    )
    return relabeled, degenerate


def em_fit(y, init: RegimeModel, tol: float = 1e-6, max_iter: int = 500) -> FitReport:
    """Maximum-likelihood fit by EM (forward-backward E-step, closed-form M-step).

    Stops when the absolute log-likelihood change drops below ``tol``.
    The returned model is labeled; the trace ends with the log-likelihood
    of the returned model, and ``iterations`` counts M-step updates.
    Sigma collapse is floored (see ``sigma_floor``) and, like regime
    indistinguishability, reported through the degenerate flag.
    """
    yv = _as_observations(y)
    t = np.arange(1, len(yv) + 1, dtype=float)
    floor = sigma_floor(yv)

    model = init
    trace: list[float] = []
    converged = False
    updates = 0
    for _ in range(max_iter):
        loglik, gamma, xi_sum = _forward_backward(yv, model)
        if not np.isfinite(loglik):
            raise RuntimeError("non-finite log-likelihood during EM")
        trace.append(loglik)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
        model = _m_step(yv, t, gamma, xi_sum, model, floor)
        updates += 1
    if not converged:
        # trace must end with the likelihood of the model being returned
        final_ll, _, _ = _forward_backward(yv, model)
        if not np.isfinite(final_ll):
            raise RuntimeError("non-finite log-likelihood during EM")
        trace.append(final_ll)

    labeled, indistinct = label_regimes(model)
    floored = any(p.sigma <= floor * (1.0 + 1e-12) for p in labeled.params)
    return FitReport(
        model=labeled,
        iterations=updates,
        loglik_trace=np.asarray(trace),
        converged=converged,
        degenerate=indistinct or floored,
    )


def init_params(y) -> RegimeModel:
    """Deterministic EM starting point from a median split of the deviations.

    Values strictly below the median seed the recessionary regime's line,
    the rest seed the prosperous one (a constant series seeds both
    identically).  Transitions start sticky, initial state probabilities
    uniform.
    """
    yv = _as_observations(y)
    t = np.arange(1, len(yv) + 1, dtype=float)
    floor = sigma_floor(yv)
    med = float(np.median(yv))
    below = yv < med
    if not below.any():
        below = np.ones(len(yv), dtype=bool)
    above = yv >= med
    if not above.any():
        above = np.ones(len(yv), dtype=bool)

    def seed(mask: np.ndarray) -> RegimeParams:
        tm, ym = t[mask], yv[mask]
        alpha, beta = _weighted_line(tm, ym, np.ones(mask.sum()))
        resid = ym - (alpha * tm + beta)
        sd = float(np.sqrt(np.mean(resid * resid))) if len(ym) else 0.0
        return RegimeParams(alpha, beta, max(sd, floor))

    return RegimeModel(
        q=np.array([[0.95, 0.05], [0.05, 0.95]]),
        params=(seed(above), seed(below)),
        pi0=np.array([0.5, 0.5]),
    )


def random_init(y, rng: np.random.Generator) -> RegimeModel:
    """Randomized EM starting point for optional multi-start fitting."""
    yv = _as_observations(y)
    floor = sigma_floor(yv)
    lo, hi = np.quantile(yv, [0.1, 0.9])
    spread = float(np.std(yv)) or 1.0

    def seed() -> RegimeParams:
        beta = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        alpha = float(rng.normal(0.0, spread / max(len(yv), 2)))
        sigma = max(float(rng.uniform(0.3, 2.0)) * spread, floor)
        return RegimeParams(alpha, beta, sigma)

    stay = rng.uniform(0.8, 0.99, size=2)
    q = np.array([[stay[0], 1.0 - stay[0]], [1.0 - stay[1], stay[1]]])
    p = float(rng.uniform(0.2, 0.8))
    return RegimeModel(q, (seed(), seed()), np.array([p, 1.0 - p]))


def sample_path(model: RegimeModel, T: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Simulate a state path and observations from the generative model.

    Deterministic per seed.  Returns (states, observations); states use the
    model's index convention.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(T)
    z = rng.standard_normal(T)

    states = np.empty(T, dtype=int)
    states[0] = 0 if u[0] < model.pi0[0] else 1
    stay0, stay1 = model.q[0, 0], model.q[1, 1]
    for t in range(1, T):
        stay = stay0 if states[t - 1] == 0 else stay1
        states[t] = states[t - 1] if u[t] < stay else 1 - states[t - 1]

    t_idx = np.arange(1, T + 1, dtype=float)
    alpha = np.array([p.alpha for p in model.params])
    beta = np.array([p.beta for p in model.params])
    sigma = np.array([p.sigma for p in model.params])
    y = alpha[states] * t_idx + beta[states] + sigma[states] * z
    return states, y
