"""CTR predictors: linear regression, constrained Lasso, RBF support-vector
regression, plus Random and Constant-Mean baselines.

All learners consume a DesignMatrix and standardize features internally
(zero mean, unit variance per column); artifacts carry the standardization
parameters so callers may pass either raw or pre-standardized rows to
``predict``.

The constrained Lasso minimizes ||Xw + b - y||^2 + lambda*||w||_1 subject to
box bounds on the training predictions. It is solved with a monotone
accelerated proximal-gradient scheme: each step is a proximal step on the
nonsmooth part (soft threshold plus the prediction box), and the incumbent
iterate only ever improves, so the recorded objective trace is
non-increasing by construction. The prox is a closed-form soft threshold
whenever the box is slack at the candidate; otherwise it is solved exactly
by a small inner ADMM.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVC, SVR

LASSO_LAMBDA_GRID = tuple(float(x) for x in np.logspace(-4, 0, 7))
SVR_C_GRID = (0.1, 1.0, 10.0, 100.0)
SVR_EPSILON_GRID = (1e-3, 1e-2)
SVR_GAMMA_GRID = tuple(float(2.0 ** e) for e in range(-4, 3))

ARTIFACT_FORMAT_VERSION = 1


class DimensionMismatch(ValueError):
    """Feature row length does not match the trained model."""


@dataclass(frozen=True)
class TrainConfig:
    lasso_lambdas: tuple = LASSO_LAMBDA_GRID
    svr_c: tuple = SVR_C_GRID
    svr_epsilon: tuple = SVR_EPSILON_GRID
    svr_gamma: tuple = SVR_GAMMA_GRID
    cv_folds: int = 5
    cv_seed: int = 0
    solver_tol: float = 1e-8
    max_iter: int = 5000
    bounds: tuple | None = None  # explicit (y_min, y_max); None = from data

    def __post_init__(self):
        for name in ("lasso_lambdas", "svr_c", "svr_epsilon", "svr_gamma"):
            if not getattr(self, name):
                raise ValueError(f"{name} grid must be non-empty")
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be positive")


@dataclass
class DesignMatrix:
    """n x d feature matrix with CTR targets and standardization stats."""

    features: np.ndarray
    targets: np.ndarray
    names: tuple = ()
    col_mean: np.ndarray = field(init=False)
    col_std: np.ndarray = field(init=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.features.ndim != 2 or self.targets.ndim != 1:
            raise ValueError("features must be 2-D and targets 1-D")
        if self.features.shape[0] != self.targets.size:
            raise ValueError("row count mismatch between features and targets")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.targets)):
            raise ValueError("non-finite entries in design matrix")
        if np.any(self.targets < 0) or np.any(self.targets > 1):
            raise ValueError("targets must lie in [0, 1]")
        if not self.names:
            self.names = tuple(f"x{i}" for i in range(self.features.shape[1]))
        self.col_mean = self.features.mean(axis=0)
        std = self.features.std(axis=0)
        self.col_std = np.where(std > 0, std, 1.0)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def standardized(self) -> np.ndarray:
        return (self.features - self.col_mean) / self.col_std

    def subset(self, idx: np.ndarray) -> "DesignMatrix":
        return DesignMatrix(self.features[idx], self.targets[idx], self.names)


@dataclass
class ModelArtifact:
    """Trained predictor: kind, payload, hyperparameters, training metadata."""

    kind: str  # "lr" | "classo" | "svr" | "random" | "cm"
    col_mean: np.ndarray
    col_std: np.ndarray
    weights: np.ndarray | None = None        # lr / classo
    intercept: float = 0.0
    support_vectors: np.ndarray | None = None  # svr (standardized rows)
    dual_coef: np.ndarray | None = None
    support_idx: np.ndarray | None = None
    constant: float = 0.0                     # cm
    train_targets: np.ndarray | None = None   # random
    seed: int | None = None
    bounds: tuple | None = None               # classo clip range
    hyperparams: dict = field(default_factory=dict)
    converged: bool = True
    rank_deficient: bool = False
    objective_trace: np.ndarray | None = None
    kkt_violation: float | None = None

    def predict(self, X: np.ndarray, standardized: bool = False) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.col_mean.size:
            raise DimensionMismatch(
                f"expected {self.col_mean.size} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature values")
        Xs = X if standardized else (X - self.col_mean) / self.col_std
        if self.kind in ("lr", "classo"):
            pred = Xs @ self.weights + self.intercept
            if self.kind == "classo":
                pred = np.clip(pred, self.bounds[0], self.bounds[1])
            return pred
        if self.kind == "svr":
            k = _rbf_kernel(Xs, self.support_vectors, self.hyperparams["gamma"])
            return k @ self.dual_coef + self.intercept
        if self.kind == "cm":
            return np.full(X.shape[0], self.constant)
        if self.kind == "random":
            rng = np.random.default_rng(self.seed)
            return rng.choice(self.train_targets, size=X.shape[0])
        raise ValueError(f"unknown model kind {self.kind!r}")

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()
        return {
            "format_version": ARTIFACT_FORMAT_VERSION,
            "kind": self.kind,
            "col_mean": arr(self.col_mean),
            "col_std": arr(self.col_std),
            "weights": arr(self.weights),
            "intercept": self.intercept,
            "support_vectors": arr(self.support_vectors),
            "dual_coef": arr(self.dual_coef),
            "support_idx": arr(self.support_idx),
            "constant": self.constant,
            "train_targets": arr(self.train_targets),
            "seed": self.seed,
            "bounds": list(self.bounds) if self.bounds else None,
            "hyperparams": self.hyperparams,
            "converged": self.converged,
            "rank_deficient": self.rank_deficient,
            "kkt_violation": self.kkt_violation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArtifact":
        if d.get("format_version") != ARTIFACT_FORMAT_VERSION:
            raise ValueError(f"unsupported artifact version {d.get('format_version')}")

        def arr(a, dtype=np.float64):
            return None if a is None else np.asarray(a, dtype=dtype)
        return cls(
            kind=d["kind"],
            col_mean=arr(d["col_mean"]),
            col_std=arr(d["col_std"]),
            weights=arr(d["weights"]),
            intercept=d["intercept"],
            support_vectors=arr(d["support_vectors"]),
            dual_coef=arr(d["dual_coef"]),
            support_idx=arr(d["support_idx"], np.int64),
            constant=d["constant"],
            train_targets=arr(d["train_targets"]),
            seed=d["seed"],
            bounds=tuple(d["bounds"]) if d["bounds"] else None,
            hyperparams=d["hyperparams"],
            converged=d["converged"],
            rank_deficient=d["rank_deficient"],
            kkt_violation=d.get("kkt_violation"),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-gamma * sq)


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def fit_linear(dm: DesignMatrix) -> ModelArtifact:
    """Ordinary least squares with intercept via a stable factorization.

    Collinear columns beyond tolerance fall back to a tiny ridge jitter and
    flag the artifact as rank deficient.
    """
    if dm.n <= dm.d:
        raise ValueError(f"need more rows than features for LR ({dm.n} <= {dm.d})")
    Xs = dm.standardized()
    A = np.column_stack([Xs, np.ones(dm.n)])
    theta, _, rank, _ = np.linalg.lstsq(A, dm.targets, rcond=None)
    rank_deficient = rank < dm.d + 1
    if rank_deficient:
        G = A.T @ A + 1e-10 * np.eye(dm.d + 1)
        theta = np.linalg.solve(G, A.T @ dm.targets)
    return ModelArtifact(kind="lr", col_mean=dm.col_mean, col_std=dm.col_std,
                         weights=theta[:-1], intercept=float(theta[-1]),
                         rank_deficient=rank_deficient)


def classo_objective(A: np.ndarray, y: np.ndarray, theta: np.ndarray, lam: float) -> float:
    r = A @ theta - y
    return float(r @ r + lam * np.abs(theta[:-1]).sum())


class _Quadratic:
    """Precomputed forms of ||A theta - y||^2 and its gradient."""

    def __init__(self, A, y):
        self.G = A.T @ A
        self.Ay = A.T @ y
        self.yy = float(y @ y)

    def grad(self, theta):
        return 2.0 * (self.G @ theta - self.Ay)

    def value(self, theta):
        return float(theta @ (self.G @ theta) - 2.0 * (theta @ self.Ay) + self.yy)


def _soft(v: np.ndarray, thresh: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


class _ClassoProx:
    """prox of t*(lambda*||w||_1 + I_box(A theta)) at a point v.

    Soft threshold when the box is slack at the candidate; otherwise an
    exact inner ADMM solve of the small constrained quadratic, warm-started
    across calls. Both primal and dual residuals gate the inner stop: the
    primal residual alone can touch zero long before optimality.
    """

    def __init__(self, A, lo, hi, lam_vec, t, feas_tol):
        self.A = A
        self.lo = lo
        self.hi = hi
        self.thresh = t * lam_vec
        self.feas_tol = feas_tol
        self.rho = 2.0 / A.shape[0]
        G = A.T @ A
        self.chol = cho_factor((1.0 + self.rho) * np.eye(A.shape[1]) + self.rho * G)
        self.state = None  # (z, s, u, r) carried between calls

    def __call__(self, v: np.ndarray) -> np.ndarray:
        cand = _soft(v, self.thresh)
        pred = self.A @ cand
        if np.all(pred >= self.lo - self.feas_tol) and np.all(pred <= self.hi + self.feas_tol):
            return cand
        # inner ADMM on: min 1/2||theta - v||^2 + t*lam*||s_w||_1
        #                s.t. A theta = z in box, theta = s
        rho = self.rho
        if self.state is None:
            z = np.clip(pred, self.lo, self.hi)
            s = cand.copy()
            u = np.zeros_like(z)
            r = np.zeros_like(cand)
        else:
            z, s, u, r = self.state
        tol = 0.01 * self.feas_tol
        theta = cand
        for _ in range(20000):
            rhs = v + rho * (self.A.T @ (z - u)) + rho * (s - r)
            theta = cho_solve(self.chol, rhs)
            pred = self.A @ theta
            z_old, s_old = z, s
            z = np.clip(pred + u, self.lo, self.hi)
            s = _soft(theta + r, self.thresh / rho)
            u += pred - z
            r += theta - s
            primal = max(np.abs(pred - z).max(), np.abs(theta - s).max())
            dual = rho * max(np.abs(self.A.T @ (z - z_old)).max(),
                             np.abs(s - s_old).max())
            if primal <= tol and dual <= tol:
                break
        self.state = (z, s, u, r)
        return theta

    def violation(self, theta: np.ndarray) -> float:
        pred = self.A @ theta
        return float(max(0.0, (pred - self.hi).max(), (self.lo - pred).max()))


def _solve_classo(Xs, y, lam, lo, hi, tol, max_iter):
    """Monotone accelerated proximal gradient for the constrained Lasso.

    The incumbent iterate is replaced only when the proximal step improves
    the objective, so the returned trace is non-increasing by construction;
    a restart drops the momentum whenever the step failed to improve, which
    makes the following plain proximal step a guaranteed descent step.
    """
    n, d = Xs.shape
    A = np.column_stack([Xs, np.ones(n)])
    lam_vec = np.concatenate([np.full(d, lam), [0.0]])  # intercept unpenalized
    quad = _Quadratic(A, y)
    L = 2.0 * np.linalg.norm(A, 2) ** 2
    step = 1.0 / L
    scale = max(1.0, float(np.abs(y).max()))
    feas_tol = 1e-9 * scale
    grad_tol = tol * max(1.0, float(np.abs(quad.Ay).max()) * 2.0)
    prox = _ClassoProx(A, lo, hi, lam_vec, step, feas_tol)

    def objective(theta):
        # candidates violating the box beyond tolerance can never displace
        # the (always feasible) incumbent
        if prox.violation(theta) > 100.0 * feas_tol:
            return np.inf
        return quad.value(theta) + lam * float(np.abs(theta[:-1]).sum())

    x = np.zeros(d + 1)
    x[-1] = min(max(float(y.mean()), lo), hi)  # feasible start
    x_prev = x.copy()
    xi = x.copy()
    t_k = 1.0
    obj = objective(x)
    trace = [obj]
    converged = False
    for it in range(max_iter):
        z = prox(xi - step * quad.grad(xi))
        obj_z = objective(z)
        if obj_z <= obj:
            x_new, obj_new = z, obj_z
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            xi = x_new + (t_k / t_next) * (z - x_new) \
                + ((t_k - 1.0) / t_next) * (x_new - x_prev)
        else:
            x_new, obj_new = x, obj
            t_next = 1.0
            xi = x_new.copy()
        x_prev, x, obj, t_k = x, x_new, obj_new, t_next
        trace.append(obj)
        # certify optimality at the incumbent itself: momentum keeps the
        # extrapolated point away from x, so the gradient mapping there
        # never gets small even at the solution
        if it % 25 == 24 or obj_z > obj:
            zx = prox(x - step * quad.grad(x))
            if L * float(np.abs(zx - x).max()) <= grad_tol:
                obj_zx = objective(zx)
                if obj_zx <= obj:
                    x, obj = zx, obj_zx
                    trace.append(obj)
                converged = True
                break
    return x[:-1], float(x[-1]), np.array(trace), converged


def fit_classo(dm: DesignMatrix, cfg: TrainConfig = TrainConfig(),
               lam: float | None = None) -> ModelArtifact:
    """Constrained Lasso; lambda chosen by k-fold cross-validation unless given."""
    y = dm.targets
    lo, hi = cfg.bounds if cfg.bounds is not None else (float(y.min()), float(y.max()))
    if lo > hi:
        raise ValueError("y_min must not exceed y_max")
    if lam is None:
        lam = _cv_select_classo_lambda(dm, cfg, lo, hi)
    Xs = dm.standardized()
    w, b, trace, converged = _solve_classo(Xs, y, lam, lo, hi,
                                           cfg.solver_tol, cfg.max_iter)
    return ModelArtifact(kind="classo", col_mean=dm.col_mean, col_std=dm.col_std,
                         weights=w, intercept=b, bounds=(lo, hi),
                         hyperparams={"lambda": lam}, converged=converged,
                         objective_trace=trace)


def _cv_select_classo_lambda(dm: DesignMatrix, cfg: TrainConfig, lo, hi) -> float:
    folds = kfold_indices(dm.n, cfg.cv_folds, cfg.cv_seed)
    best = (np.inf, 0.0)
    for lam in cfg.lasso_lambdas:
        errs = []
        for fold in folds:
            mask = np.ones(dm.n, dtype=bool)
            mask[fold] = False
            train = dm.subset(np.flatnonzero(mask))
            w, b, _, _ = _solve_classo(train.standardized(), train.targets, lam,
                                       lo, hi, cfg.solver_tol, cfg.max_iter)
            Xv = (dm.features[fold] - train.col_mean) / train.col_std
            pred = np.clip(Xv @ w + b, lo, hi)
            errs.append(float(np.mean((pred - dm.targets[fold]) ** 2)))
        score = float(np.mean(errs))
        if score < best[0]:
            best = (score, lam)
    return best[1]


def fit_svr(dm: DesignMatrix, cfg: TrainConfig = TrainConfig(),
            params: dict | None = None) -> ModelArtifact:
    """Epsilon-insensitive RBF support-vector regression.

    Backed by libsvm's SMO dual decomposition; hyperparameters come from
    grid cross-validation unless ``params`` pins them. The artifact stores
    the support expansion so prediction is an explicit kernel sum.
    """
    if dm.n < 10:
        raise ValueError(f"need at least 10 rows for SVR, got {dm.n}")
    if params is None:
        params = _cv_select_svr_params(dm, cfg)
    Xs = dm.standardized()
    svr = SVR(kernel="rbf", C=params["C"], epsilon=params["epsilon"],
              gamma=params["gamma"], tol=1e-4, cache_size=256, max_iter=2_000_000)
    converged = True
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        try:
            svr.fit(Xs, dm.targets)
        except ConvergenceWarning:
            converged = False
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                svr.fit(Xs, dm.targets)
    art = ModelArtifact(kind="svr", col_mean=dm.col_mean, col_std=dm.col_std,
                        support_vectors=svr.support_vectors_.copy(),
                        dual_coef=svr.dual_coef_[0].copy(),
                        support_idx=svr.support_.astype(np.int64),
                        intercept=float(svr.intercept_[0]),
                        hyperparams=dict(params), converged=converged)
    art.kkt_violation = svr_kkt_violation(art, Xs, dm.targets)
    return art


def _cv_select_svr_params(dm: DesignMatrix, cfg: TrainConfig) -> dict:
    folds = kfold_indices(dm.n, cfg.cv_folds, cfg.cv_seed)
    best = (np.inf, None)
    for c in cfg.svr_c:
        for eps in cfg.svr_epsilon:
            for gamma in cfg.svr_gamma:
                errs = []
                for fold in folds:
                    mask = np.ones(dm.n, dtype=bool)
                    mask[fold] = False
                    train = dm.subset(np.flatnonzero(mask))
                    svr = SVR(kernel="rbf", C=c, epsilon=eps, gamma=gamma,
                              tol=1e-3, cache_size=256)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", ConvergenceWarning)
                        svr.fit(train.standardized(), train.targets)
                    Xv = (dm.features[fold] - train.col_mean) / train.col_std
                    errs.append(float(np.mean((svr.predict(Xv) - dm.targets[fold]) ** 2)))
                score = float(np.mean(errs))
                if score < best[0]:
                    best = (score, {"C": c, "epsilon": eps, "gamma": gamma})
    return best[1]


def svr_kkt_violation(art: ModelArtifact, Xs: np.ndarray, y: np.ndarray) -> float:
    """Worst KKT violation of the epsilon-insensitive dual at the solution."""
    pred = art.predict(Xs, standardized=True)
    e = y - pred
    eps = art.hyperparams["epsilon"]
    c = art.hyperparams["C"]
    beta = np.zeros(y.size)
    beta[art.support_idx] = art.dual_coef
    at_upper = beta >= c * (1 - 1e-9)
    at_lower = beta <= -c * (1 - 1e-9)
    interior = (beta != 0) & ~at_upper & ~at_lower
    zero = beta == 0
    viol = np.zeros(y.size)
    viol[zero] = np.maximum(np.abs(e[zero]) - eps, 0.0)
    pos = interior & (beta > 0)
    neg = interior & (beta < 0)
    viol[pos] = np.abs(e[pos] - eps)
    viol[neg] = np.abs(e[neg] + eps)
    viol[at_upper] = np.maximum(eps - e[at_upper], 0.0)
    viol[at_lower] = np.maximum(e[at_lower] + eps, 0.0)
    return float(viol.max())


def fit_baselines(dm: DesignMatrix, seed: int) -> tuple[ModelArtifact, ModelArtifact]:
    """Random (seeded draws from the training CTR multiset) and Constant-Mean."""
    if dm.n < 1:
        raise ValueError("need at least one training row")
    random_art = ModelArtifact(kind="random", col_mean=dm.col_mean,
                               col_std=dm.col_std,
                               train_targets=np.sort(dm.targets.copy()), seed=seed)
    cm_art = ModelArtifact(kind="cm", col_mean=dm.col_mean, col_std=dm.col_std,
                           constant=float(dm.targets.mean()))
    return random_art, cm_art


def fit_svc_extreme(Xs: np.ndarray, labels: np.ndarray, params: dict) -> SVC:
    """RBF-kernel binary classifier used by the extreme-CTR protocol."""
    clf = SVC(kernel="rbf", C=params["C"], gamma=params["gamma"], tol=1e-3,
              cache_size=256)
    clf.fit(Xs, labels)
    return clf
