"""Next-flip predictability score.

Features are extracted from the first k-1 flips of each window; the last
flip (0/1) is regressed with an L1-penalized least-squares model fit
from scratch by cyclic coordinate descent with soft thresholding.  The
cross-validated held-out mean squared error is the headline number:
0.25 for a fair i.i.d. source, lower means more predictable.

Cross-validation is grouped by parent sequence so overlapping windows
cut from one response can never straddle a train/test split.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Optional, Sequence

import numpy as np

from .rng import Xorshift64Star, derive_seed
from .sequences import Window
from .stats import InsufficientDataError, count_maximal_runs


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[float, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class CVConfig:
    folds: int = 5
    n_lambdas: int = 50
    lambda_min_ratio: float = 1e-3
    lambdas: Optional[tuple[float, ...]] = None  # explicit descending grid
    seed: int = 0
    tolerance: float = 1e-7
    max_sweeps: int = 10_000

    def validate(self) -> None:
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.lambdas is not None:
            grid = self.lambdas
            if not grid:
                raise ValueError("explicit lambda grid must be non-empty")
            if any(l <= 0 for l in grid):
                raise ValueError("lambda grid values must be positive")
            if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
                raise ValueError("lambda grid must be strictly descending")
        else:
            if self.n_lambdas < 1:
                raise ValueError("n_lambdas must be >= 1")
            if not 0 < self.lambda_min_ratio <= 1:
                raise ValueError("lambda_min_ratio must be in (0, 1]")


@dataclass(frozen=True)
class LassoModel:
    feature_names: tuple[str, ...]
    weights: tuple[float, ...]  # original (unstandardized) units
    intercept: float
    lam: float
    feature_means: tuple[float, ...]
    feature_scales: tuple[float, ...]
    sweeps: int
    converged: bool
    objective_history: tuple[float, ...]  # one entry per completed sweep

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Linear prediction clamped to [0, 1]."""
        X = np.asarray(X, dtype=float)
        raw = self.intercept + X @ np.asarray(self.weights)
        return np.clip(raw, 0.0, 1.0)

    @property
    def nonzero_features(self) -> tuple[str, ...]:
        return tuple(
            name for name, w in zip(self.feature_names, self.weights) if w != 0.0
        )


@dataclass(frozen=True)
class CVResult:
    best_lambda: float
    mse: float  # mean held-out MSE at best_lambda
    fold_mses: tuple[float, ...]  # per-fold held-out MSE at best_lambda
    lambda_grid: tuple[float, ...]
    mean_mse_per_lambda: tuple[float, ...]
    model: LassoModel  # refit on all data at best_lambda
    n_windows: int


def feature_names(prefix_length: int) -> tuple[str, ...]:
    names = [f"flip_{i}" for i in range(1, prefix_length + 1)]
    names += ["heads_count", "alternation_count"]
    names += [f"run_count_{L}" for L in range(1, prefix_length + 1)]
    names.append("terminal_run_length")
    return tuple(names)


def extract_features(prefix: Window | Sequence[int]) -> FeatureVector:
    """Deterministic feature map of a next-flip prediction prefix."""
    bits = tuple(prefix.bits) if isinstance(prefix, Window) else tuple(prefix)
    p = len(bits)
    if p < 2:
        raise ValueError(f"prefix must have length >= 2, got {p}")
    runs = count_maximal_runs(Window(bits, 0))
    n_runs = sum(runs.values())
    terminal = 1
    for i in range(p - 1, 0, -1):
        if bits[i - 1] == bits[i]:
            terminal += 1
        else:
            break
    values = list(float(b) for b in bits)
    values.append(float(sum(bits)))
    values.append(float(n_runs - 1))  # alternations = maximal runs - 1
    values.extend(float(runs.get(L, 0)) for L in range(1, p + 1))
    values.append(float(terminal))
    return FeatureVector(feature_names(p), tuple(values))


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale by population std; constant columns get scale 1,
    which zeroes them out and makes them inert under the penalty."""
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    scales = np.where(stds > 0, stds, 1.0)
    return (X - means) / scales, means, scales


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every coefficient is exactly zero."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xs, _, _ = _standardize(X)
    m = X.shape[0]
    return float(np.max(np.abs(Xs.T @ (y - y.mean()))) / m)


def _cd_solve(
    G: np.ndarray,
    c: np.ndarray,
    y_var: float,
    lam: float,
    beta: np.ndarray,
    tolerance: float,
    max_sweeps: int,
) -> tuple[np.ndarray, list[float], int, bool]:
    """Cyclic coordinate descent on the standardized problem.

    Minimizes 0.5*var(y) - c.beta + 0.5*beta'G beta + lam*|beta|_1, i.e.
    (1/2m)*RSS + lam*L1 up to a beta-free constant.  G = Xs'Xs/m and
    c = Xs'(y-ybar)/m are precomputed, so each sweep costs O(p^2)
    regardless of sample count.
    """
    p = len(c)
    diag = np.diag(G).copy()

    def objective(b: np.ndarray) -> float:
        return float(0.5 * y_var - c @ b + 0.5 * b @ G @ b + lam * np.abs(b).sum())

    history: list[float] = []
    prev_obj = objective(beta)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if diag[j] <= 0.0:
                continue  # constant feature, self-neutralized
            old = beta[j]
            z = c[j] - float(G[j] @ beta) + diag[j] * old
            new = soft_threshold(z, lam) / diag[j]
            if new != old:
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        obj = objective(beta)
        if obj > prev_obj + 1e-10 * (1.0 + abs(prev_obj)):
            raise RuntimeError(
                f"coordinate descent objective increased: {prev_obj} -> {obj}"
            )
        prev_obj = obj
        history.append(obj)
        if max_delta < tolerance:
            converged = True
            break
    return beta, history, sweeps, converged


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    config: CVConfig | None = None,
    feature_labels: tuple[str, ...] | None = None,
) -> LassoModel:
    """L1-penalized least squares, (1/2m)*RSS + lam*L1, unpenalized intercept.

    Features are standardized internally; reported weights are in the
    original units.  Works for under-determined problems (more features
    than rows).
    """
    cfg = config or CVConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    m, p = X.shape
    if m == 0:
        raise ValueError("X has zero rows")
    if m < 2:
        raise ValueError("need at least 2 rows")
    if len(y) != m:
        raise ValueError(f"X has {m} rows but y has {len(y)}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("X and y must be finite")
    if lam < 0:
        raise ValueError("lam must be >= 0")

    Xs, means, scales = _standardize(X)
    ybar = float(y.mean())
    yc = y - ybar
    G = Xs.T @ Xs / m
    c = Xs.T @ yc / m
    y_var = float(yc @ yc) / m

    beta = np.zeros(p)
    beta, history, sweeps, converged = _cd_solve(
        G, c, y_var, lam, beta, cfg.tolerance, cfg.max_sweeps
    )

    weights = beta / scales
    intercept = ybar - float(weights @ means)
    labels = feature_labels or tuple(f"x{j}" for j in range(p))
    return LassoModel(
        feature_names=labels,
        weights=tuple(float(w) for w in weights),
        intercept=float(intercept),
        lam=float(lam),
        feature_means=tuple(float(v) for v in means),
        feature_scales=tuple(float(v) for v in scales),
        sweeps=sweeps,
        converged=converged,
        objective_history=tuple(history),
    )


def design_matrix(
    windows: Sequence[Window],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple[str, ...]]:
    """Feature matrix X, target y (last flip), and parent-group ids."""
    if not windows:
        raise InsufficientDataError("no windows supplied")
    k = len(windows[0].bits)
    if k < 3:
        raise ValueError("windows must have length >= 3 to predict the last flip")
    if any(len(w.bits) != k for w in windows):
        raise ValueError("windows have mixed lengths")
    names = feature_names(k - 1)
    rows = np.empty((len(windows), len(names)), dtype=float)
    y = np.empty(len(windows), dtype=float)
    groups = np.empty(len(windows), dtype=np.int64)
    for i, w in enumerate(windows):
        fv = extract_features(w.bits[:-1])
        rows[i] = fv.values
        y[i] = w.bits[-1]
        groups[i] = w.parent
    return rows, y, groups, names


def _lambda_grid(lmax: float, cfg: CVConfig) -> tuple[float, ...]:
    if cfg.lambdas is not None:
        return cfg.lambdas
    if lmax <= 0:
        # target is constant on this data; any positive penalty gives the
        # all-zero model, so a degenerate one-point grid suffices
        return (1.0,)
    if cfg.n_lambdas == 1:
        return (lmax,)
    lo = lmax * cfg.lambda_min_ratio
    grid = np.geomspace(lmax, lo, cfg.n_lambdas)
    return tuple(float(g) for g in grid)


def _fold_assignment(groups: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Deterministic group-aware fold ids: parents shuffled, round-robin."""
    order: list[int] = []
    seen = set()
    for g in groups:
        if int(g) not in seen:
            seen.add(int(g))
            order.append(int(g))
    rng = Xorshift64Star(derive_seed(seed, 0xF01D5))
    rng.shuffle(order)
    fold_of_parent = {g: i % folds for i, g in enumerate(order)}
    return np.array([fold_of_parent[int(g)] for g in groups], dtype=np.int64)


def cross_validated_mse(windows: Sequence[Window], config: CVConfig | None = None) -> CVResult:
    """Grouped k-fold CV over a penalty path; returns the best penalty,
    its mean held-out MSE, and a final model refit on all data.

    Ties in mean MSE resolve toward the larger penalty (sparser model).
    """
    cfg = config or CVConfig()
    cfg.validate()
    X, y, groups, names = design_matrix(windows)
    m = len(y)
    if m < cfg.folds * 2:
        raise InsufficientDataError(
            f"need at least {cfg.folds * 2} windows for {cfg.folds}-fold CV, got {m}"
        )
    n_parents = len(set(int(g) for g in groups))
    if n_parents < cfg.folds:
        raise InsufficientDataError(
            f"need at least {cfg.folds} parent sequences for grouped CV, got {n_parents}"
        )

    grid = _lambda_grid(lambda_max(X, y), cfg)
    fold_ids = _fold_assignment(groups, cfg.folds, cfg.seed)

    fold_mse = np.zeros((len(grid), cfg.folds))
    for fold in range(cfg.folds):
        train = fold_ids != fold
        test = ~train
        Xtr, ytr = X[train], y[train]
        Xte, yte = X[test], y[test]
        Xs, means, scales = _standardize(Xtr)
        mtr = Xtr.shape[0]
        ybar = float(ytr.mean())
        yc = ytr - ybar
        G = Xs.T @ Xs / mtr
        c = Xs.T @ yc / mtr
        y_var = float(yc @ yc) / mtr
        beta = np.zeros(X.shape[1])
        for li, lam in enumerate(grid):  # warm start down the path
            beta, _, _, _ = _cd_solve(
                G, c, y_var, lam, beta, cfg.tolerance, cfg.max_sweeps
            )
            w = beta / scales
            b0 = ybar - float(w @ means)
            pred = np.clip(b0 + Xte @ w, 0.0, 1.0)
            fold_mse[li, fold] = float(np.mean((yte - pred) ** 2))

    mean_mse = fold_mse.mean(axis=1)
    best = int(np.argmin(mean_mse))  # grid is descending: first min = largest lam
    model = fit_lasso(X, y, grid[best], cfg, feature_labels=names)
    return CVResult(
        best_lambda=float(grid[best]),
        mse=float(mean_mse[best]),
        fold_mses=tuple(float(v) for v in fold_mse[best]),
        lambda_grid=tuple(float(g) for g in grid),
        mean_mse_per_lambda=tuple(float(v) for v in mean_mse),
        model=model,
        n_windows=m,
    )


def gap_ratio(mse_subject: float, mse_human: float, mse_random: float) -> float:
    """(human - subject) / (random - human), in MSE units.

    Carried out in decimal arithmetic so ratios of reported few-decimal
    MSEs are exact instead of losing precision to binary cancellation.
    """
    if not mse_random > mse_human:
        raise ValueError(
            f"mse_random ({mse_random}) must exceed mse_human ({mse_human})"
        )
    subject = Decimal(str(mse_subject))
    human = Decimal(str(mse_human))
    random_ = Decimal(str(mse_random))
    return float((human - subject) / (random_ - human))
