"""Alternating optimization of the structural-entropy guided selection model.

Variables: the global view matrix ``Xf`` (n x d), the row-stochastic
assignment ``W`` (d x q), the shared sample graph ``S`` (n x n), one
view-specific map ``H[v]`` (d(v) x d(v)) per view and the view weights
``alpha_v``.  The objective is::

    ||Xf W - Y||^2 + alpha * L_SE(W)
      + beta * (||Xf - S sum_v alpha_v X_v P_v||^2 + ||S - sum_v alpha_v S_v||^2)
      + lambda * Tr(L_Y^T S L_Y) + gamma * sum_v ||Xf P_v^T - X_v H_v||^2

Each outer iteration updates Xf, W, S, H_v and alpha_v in that order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .dataset import MultiViewDataset, normalize_features
from .graphs import ViewPlacement, label_laplacian, semantic_graph, view_placements
from .infotheory import build_feature_graph
from .structural import soft_structural_entropy, soft_structural_entropy_grad

logger = logging.getLogger(__name__)

VARIANTS = ("full", "no_se", "no_shared", "no_lap", "no_specific")
VARIANT_ALIASES = {
    "SEHFS": "full",
    "SEHFS-W": "no_se",
    "SEHFS-S": "no_shared",
    "SEHFS-L": "no_lap",
    "SEHFS-H": "no_specific",
}
GRID_VALUES = tuple(10.0 ** k for k in range(-3, 4))


class NumericalError(FloatingPointError):
    """A non-finite value appeared during optimization."""

    def __init__(self, term: str, iteration: int | None = None, detail: str = ""):
        self.term = term
        self.iteration = iteration
        where = f" at outer iteration {iteration}" if iteration is not None else ""
        super().__init__(f"non-finite values in {term}{where}{': ' + detail if detail else ''}")


@dataclass(frozen=True)
class Hyperparams:
    """Weights and solver settings.

    ``lam`` is the Laplacian weight (``lambda`` is reserved in Python).
    ``graph_refresh`` > 0 recomputes the feature MI graph from ``Xf`` every
    that many outer iterations; 0 keeps the graph built from the input.
    ``w_inner_iters=1`` takes a single projected step per outer iteration.
    """

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    lam: float = 1.0
    max_outer_iters: int = 100
    tol: float = 1e-5
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_max_halvings: int = 50
    w_inner_iters: int = 50
    eps: float = 1e-12
    seed: int = 0
    knn: int = 5
    sigma: float | str = "auto"
    bins: int | None = None
    normalization: str = "minmax"
    graph_refresh: int = 0
    w_jitter: float = 1e-2
    qp_tol: float = 1e-10
    qp_max_iter: int = 100_000

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "lam", "tol", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.armijo_c < 1 or not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_c and armijo_shrink must lie in (0, 1)")
        if self.max_outer_iters < 1 or self.w_inner_iters < 1:
            raise ValueError("iteration budgets must be >= 1")


@dataclass(frozen=True)
class Weights:
    """Term weights actually in force for a variant (dropped terms are 0)."""

    alpha: float
    beta: float
    gamma: float
    lam: float


def resolve_variant(variant: str) -> str:
    variant = VARIANT_ALIASES.get(variant, variant)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; use one of {VARIANTS}")
    return variant


def effective_weights(hp: Hyperparams, variant: str = "full") -> Weights:
    variant = resolve_variant(variant)
    w = Weights(hp.alpha, hp.beta, hp.gamma, hp.lam)
    if variant == "no_se":
        w = replace(w, alpha=0.0)
    elif variant == "no_shared":
        # without a learned shared graph the Laplacian on S goes too
        w = replace(w, beta=0.0, lam=0.0)
    elif variant == "no_lap":
        w = replace(w, lam=0.0)
    elif variant == "no_specific":
        w = replace(w, gamma=0.0)
    return w


@dataclass
class ModelState:
    Xf: np.ndarray
    W: np.ndarray
    S: np.ndarray
    H: list[np.ndarray]
    alpha_v: np.ndarray
    # constants
    views: list[np.ndarray]
    Y: np.ndarray
    A: np.ndarray
    S_views: list[np.ndarray]
    L_Y: np.ndarray
    placements: list[ViewPlacement]
    LL: np.ndarray = field(init=False)

    def __post_init__(self):
        self.LL = self.L_Y @ self.L_Y.T

    def view_matrix(self) -> np.ndarray:
        """sum_v alpha_v X_v P_v  (n x d)."""
        return np.hstack([a * X for a, X in zip(self.alpha_v, self.views)])

    def mean_graph(self) -> np.ndarray:
        """sum_v alpha_v S_v."""
        return sum(a * Sv for a, Sv in zip(self.alpha_v, self.S_views))

    def specific_matrix(self) -> np.ndarray:
        """sum_v X_v H_v P_v  (n x d)."""
        return np.hstack([X @ H for X, H in zip(self.views, self.H)])

    def variables(self) -> dict[str, np.ndarray]:
        out = {"Xf": self.Xf, "W": self.W, "S": self.S, "alpha_v": self.alpha_v}
        out.update({f"H{v}": H for v, H in enumerate(self.H)})
        return out


@dataclass(frozen=True)
class ObjectiveBreakdown:
    total: float
    fit: float
    se: float
    recon_xf: float
    recon_s: float
    lap: float
    specific: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _sq(M) -> float:
    return float(np.einsum("ij,ij->", M, M))


def structural_term(A: np.ndarray, W: np.ndarray) -> float:
    """L_SE(W), taken as 0 on an edgeless feature graph."""
    if A.sum() == 0:
        return 0.0
    return soft_structural_entropy(A, W)


def objective(state: ModelState, hp: Hyperparams, variant: str = "full") -> ObjectiveBreakdown:
    w = effective_weights(hp, variant)
    fit = _sq(state.Xf @ state.W - state.Y)
    se = w.alpha * structural_term(state.A, state.W) if w.alpha else 0.0
    recon_xf = recon_s = lap = specific = 0.0
    if w.beta:
        recon_xf = w.beta * _sq(state.Xf - state.S @ state.view_matrix())
        recon_s = w.beta * _sq(state.S - state.mean_graph())
    if w.lam:
        lap = w.lam * float(np.trace(state.L_Y.T @ state.S @ state.L_Y))
    if w.gamma:
        specific = w.gamma * sum(
            _sq(p.extract(state.Xf) - X @ H)
            for p, X, H in zip(state.placements, state.views, state.H)
        )
    total = fit + se + recon_xf + recon_s + lap + specific
    return ObjectiveBreakdown(total, fit, se, recon_xf, recon_s, lap, specific)


def _check_finite(M, term: str, iteration=None):
    if not np.all(np.isfinite(M)):
        raise NumericalError(term, iteration)


def project_row_simplex(v) -> np.ndarray:
    """Euclidean projection of a vector onto {w >= 0, sum(w) = 1}."""
    v = np.asarray(v, dtype=np.float64)
    return _kernels.project_rows_simplex(np.ascontiguousarray(v[None, :]))[0]


def project_rows(V) -> np.ndarray:
    return _kernels.project_rows_simplex(np.ascontiguousarray(V, dtype=np.float64))


# ---------------------------------------------------------------- initialization


def precompute(data: MultiViewDataset, hp: Hyperparams):
    """Per-view semantic graphs, label Laplacian and feature MI graph."""
    k = min(hp.knn, data.n - 1)
    S_views = [semantic_graph(X, k, hp.sigma).S for X in data.views]
    L_Y = label_laplacian(data.labels).L_Y
    A = build_feature_graph(data.concatenated(), hp.bins).adjacency
    return S_views, L_Y, A


def init_state(data: MultiViewDataset, hp: Hyperparams, graphs=None, seed: int | None = None) -> ModelState:
    """Feasible starting point.

    Xf is the concatenated (already normalized) data, W the uniform assignment
    plus seeded jitter projected back onto the simplex, H_v = I, alpha_v = 1/V
    and S the alpha-weighted mean of the view graphs.
    """
    S_views, L_Y, A = graphs if graphs is not None else precompute(data, hp)
    rng = np.random.default_rng(hp.seed if seed is None else seed)
    d, q, V = data.d, data.q, data.n_views
    W = project_rows(np.full((d, q), 1.0 / q) + hp.w_jitter * rng.random((d, q)))
    alpha_v = np.full(V, 1.0 / V)
    state = ModelState(
        Xf=data.concatenated().copy(),
        W=W,
        S=np.zeros((data.n, data.n)),
        H=[np.eye(w) for w in data.view_dims],
        alpha_v=alpha_v,
        views=[X.copy() for X in data.views],
        Y=data.labels.astype(np.float64),
        A=np.asarray(A, dtype=np.float64),
        S_views=[np.asarray(S, dtype=np.float64) for S in S_views],
        L_Y=np.asarray(L_Y, dtype=np.float64),
        placements=view_placements(data.view_dims),
    )
    state.S = state.mean_graph()
    return state


# ---------------------------------------------------------------- block updates


def update_Xf(state: ModelState, hp: Hyperparams, variant: str = "full") -> ModelState:
    w = effective_weights(hp, variant)
    num = state.Y @ state.W.T
    den = state.Xf @ (state.W @ state.W.T)
    if w.beta:
        num = num + w.beta * (state.S @ state.view_matrix())
        den = den + w.beta * state.Xf
    if w.gamma:
        num = num + w.gamma * state.specific_matrix()
        # sum_v Xf P_v^T P_v = Xf since the view blocks partition the columns
        den = den + w.gamma * state.Xf
    state.Xf = state.Xf * num / (den + hp.eps)
    return state


def update_S(state: ModelState, hp: Hyperparams, variant: str = "full") -> ModelState:
    """Multiplicative step on S.

    The Laplacian term is linear in S with constant gradient lambda * L_Y L_Y^T;
    its negative entries go to the numerator and positive ones to the
    denominator so that S stays non-negative.
    """
    w = effective_weights(hp, variant)
    if not w.beta and not w.lam:
        return state
    B = state.view_matrix()
    num = w.beta * (state.Xf @ B.T + state.mean_graph())
    den = w.beta * ((state.S @ B) @ B.T + state.S)
    if w.lam:
        half = 0.5 * w.lam * state.LL
        num = num + np.maximum(-half, 0.0)
        den = den + np.maximum(half, 0.0)
    state.S = state.S * num / (den + hp.eps)
    return state


def update_H(state: ModelState, hp: Hyperparams, v: int, variant: str = "full") -> ModelState:
    w = effective_weights(hp, variant)
    if not w.gamma:
        return state
    X, H = state.views[v], state.H[v]
    num = X.T @ state.placements[v].extract(state.Xf)
    den = (X.T @ X) @ H
    state.H[v] = H * num / (den + hp.eps)
    return state


@dataclass
class WStepInfo:
    steps: int = 0
    stalled: bool = False
    objective: list[float] = field(default_factory=list)


def w_subproblem(Xf, Y, A, alpha: float):
    """J(W) and its gradient for fixed Xf, Y, A."""
    use_se = alpha > 0 and A.sum() > 0

    def J(W):
        val = _sq(Xf @ W - Y)
        if use_se:
            val += alpha * soft_structural_entropy(A, W)
        return val

    def grad(W):
        G = 2.0 * Xf.T @ (Xf @ W - Y)
        if use_se:
            G = G + alpha * soft_structural_entropy_grad(A, W)
        return G

    return J, grad


def update_W(state: ModelState, hp: Hyperparams, variant: str = "full", info: WStepInfo | None = None) -> ModelState:
    """Projected gradient on the row simplex with Armijo backtracking.

    A trial ``Pi(W - eta G)`` is accepted when
    ``J(trial) <= J(W) - c * eta * ||G||^2``.  G is the gradient with its
    row means removed; adding a constant to a row does not move its simplex
    projection, so trials are unchanged and only the sufficient-decrease
    test is sharpened.  If no step is accepted within the halving budget, W
    is left unchanged and the stall is recorded.
    """
    w = effective_weights(hp, variant)
    info = info if info is not None else WStepInfo()
    J, grad = w_subproblem(state.Xf, state.Y, state.A, w.alpha)
    W = state.W
    J0 = J(W)
    info.objective.append(J0)
    for _ in range(hp.w_inner_iters):
        G = grad(W)
        _check_finite(G, "W gradient")
        G = G - G.mean(axis=1, keepdims=True)
        g2 = _sq(G)
        eta = 1.0
        accepted = None
        for _ in range(hp.armijo_max_halvings):
            trial = project_rows(W - eta * G)
            Jt = J(trial)
            if Jt <= J0 - hp.armijo_c * eta * g2:
                accepted = trial
                break
            eta *= hp.armijo_shrink
        if accepted is None:
            info.stalled = True
            break
        rel = abs(Jt - J0) / (J0 + hp.eps)
        W, J0 = accepted, Jt
        info.steps += 1
        info.objective.append(J0)
        if rel < hp.tol:
            break
    state.W = W
    return state


def alpha_qp_terms(state: ModelState) -> tuple[np.ndarray, np.ndarray]:
    """M and h of the view-weight subproblem  min a^T M a - a^T h.

    Psi has columns vec(S X_v P_v) and Omega columns vec(S_v); both Gram
    matrices are formed from Frobenius inner products without stacking.
    Different views occupy disjoint column blocks, so Psi^T Psi is diagonal.
    """
    V = len(state.views)
    SX = [state.S @ X for X in state.views]
    M = np.zeros((V, V))
    h = np.zeros(V)
    for u in range(V):
        M[u, u] += _sq(SX[u])
        h[u] = 2.0 * (
            float(np.vdot(SX[u], state.placements[u].extract(state.Xf)))
            + float(np.vdot(state.S_views[u], state.S))
        )
        for v in range(V):
            M[u, v] += float(np.vdot(state.S_views[u], state.S_views[v]))
    return M, h


def solve_nonneg_qp(M, h, x0=None, tol: float = 1e-10, max_iter: int = 100_000, history: list | None = None):
    """Minimize x^T M x - x^T h over x >= 0 by projected gradient.

    The step is 1 / (2 ||M||_2), the reciprocal Lipschitz constant of the
    gradient 2 M x - h, so the objective never increases.
    """
    M = np.asarray(M, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    x = np.zeros(len(h)) if x0 is None else np.maximum(np.asarray(x0, dtype=np.float64), 0.0)
    L = 2.0 * np.linalg.norm(M, 2)
    if L == 0:
        return x
    step = 1.0 / L
    for _ in range(max_iter):
        if history is not None:
            history.append(float(x @ M @ x - x @ h))
        x_new = np.maximum(x - step * (2.0 * M @ x - h), 0.0)
        done = np.max(np.abs(x_new - x)) < tol
        x = x_new
        if done:
            break
    if history is not None:
        history.append(float(x @ M @ x - x @ h))
    return x


def update_alpha(state: ModelState, hp: Hyperparams, variant: str = "full") -> ModelState:
    w = effective_weights(hp, variant)
    if not w.beta:
        return state
    M, h = alpha_qp_terms(state)
    state.alpha_v = solve_nonneg_qp(M, h, state.alpha_v, hp.qp_tol, hp.qp_max_iter)
    return state


# ---------------------------------------------------------------- driver


@dataclass
class SelectionResult:
    ranking: np.ndarray
    w_norms: np.ndarray
    state: ModelState
    trace: list[ObjectiveBreakdown]
    variant: str
    hyperparams: Hyperparams
    converged: bool
    iterations: int
    w_stalls: int = 0

    def top(self, k: int) -> np.ndarray:
        return self.ranking[:k]

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.hyperparams.seed,
            "hyperparams": asdict(self.hyperparams),
            "ranking": [int(i) for i in self.ranking],
            "w_norms": [float(x) for x in self.w_norms],
            "alpha_v": [float(x) for x in self.state.alpha_v],
            "converged": self.converged,
            "iterations": self.iterations,
            "w_stalls": self.w_stalls,
            "trace": [t.as_dict() for t in self.trace],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def rank_features(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Feature indices by descending row norm of W (ties keep index order)."""
    norms = np.linalg.norm(W, axis=1)
    return np.argsort(-norms, kind="stable"), norms


def _prepare(data: MultiViewDataset, hp: Hyperparams) -> MultiViewDataset:
    data = normalize_features(data, hp.normalization)
    if any(np.any(X < 0) for X in data.views):
        raise ValueError(
            "multiplicative updates need non-negative features; "
            f"normalization {hp.normalization!r} left negative entries (use 'minmax')"
        )
    return data


def fit(data: MultiViewDataset, hp: Hyperparams | None = None, variant: str = "full", callback=None) -> SelectionResult:
    """Run the alternating optimization and rank features.

    ``callback(iteration, update_name, state)`` is invoked after every block
    update (iteration 0 with name ``"init"`` for the starting point).
    """
    hp = hp or Hyperparams()
    variant = resolve_variant(variant)
    data = _prepare(data, hp)
    state = init_state(data, hp)
    if callback:
        callback(0, "init", state)
    trace = [objective(state, hp, variant)]
    converged = False
    stalls = 0
    it = 0

    def step(name, fn, *args):
        try:
            fn(state, hp, *args)
        except NumericalError as exc:
            raise NumericalError(exc.term, it) from exc
        for key, val in state.variables().items():
            _check_finite(val, f"{name} ({key})", it)
        if callback:
            callback(it, name, state)

    for it in range(1, hp.max_outer_iters + 1):
        if hp.graph_refresh and it > 1 and (it - 1) % hp.graph_refresh == 0:
            state.A = build_feature_graph(state.Xf, hp.bins).adjacency
        step("Xf", update_Xf, variant)
        info = WStepInfo()
        step("W", update_W, variant, info)
        stalls += info.stalled
        step("S", update_S, variant)
        for v in range(len(state.views)):
            step(f"H{v}", update_H, v, variant)
        step("alpha", update_alpha, variant)
        trace.append(objective(state, hp, variant))
        if not math.isfinite(trace[-1].total):
            raise NumericalError("objective", it)
        prev, cur = trace[-2].total, trace[-1].total
        if abs(prev - cur) / (abs(prev) + hp.eps) < hp.tol:
            converged = True
            break
    logger.info("fit %s: %d iterations, converged=%s, W stalls=%d", variant, it, converged, stalls)
    ranking, norms = rank_features(state.W)
    return SelectionResult(ranking, norms, state, trace, variant, hp, converged, it, stalls)
