import itertools
import json

import numpy as np
import pytest

from sehfs.dataset import MultiViewDataset
from sehfs.graphs import view_placements
from sehfs.optimizer import (
    GRID_VALUES,
    Hyperparams,
    ModelState,
    NumericalError,
    WStepInfo,
    alpha_qp_terms,
    effective_weights,
    fit,
    init_state,
    objective,
    project_row_simplex,
    rank_features,
    resolve_variant,
    solve_nonneg_qp,
    update_alpha,
    update_H,
    update_S,
    update_W,
    update_Xf,
    w_subproblem,
)
from sehfs.structural import soft_structural_entropy
from sehfs.synthetic import planted_dataset, random_dataset


def make_state(rng, n=5, dims=(2, 3), q=2, **overrides):
    d = sum(dims)
    views = [rng.random((n, w)) for w in dims]
    A = rng.random((d, d))
    A = A + A.T
    np.fill_diagonal(A, 0)
    S_views = []
    for _ in dims:
        B = rng.random((n, n))
        S_views.append((B + B.T) / 2)
    Y = (rng.random((n, q)) < 0.5).astype(float)
    L = np.diag((Y @ Y.T).sum(1)) - Y @ Y.T
    W = rng.random((d, q))
    fields = dict(
        Xf=rng.random((n, d)),
        W=W / W.sum(1, keepdims=True),
        S=rng.random((n, n)),
        H=[rng.random((w, w)) for w in dims],
        alpha_v=rng.random(len(dims)),
        views=views,
        Y=Y,
        A=A,
        S_views=S_views,
        L_Y=L,
        placements=view_placements(dims),
    )
    fields.update(overrides)
    return ModelState(**fields)


HP = Hyperparams(alpha=0.7, beta=1.3, gamma=0.4, lam=0.2)


# ------------------------------------------------------------- config


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(alpha=0)
    with pytest.raises(ValueError):
        Hyperparams(armijo_c=1.5)
    assert len(GRID_VALUES) == 7 and GRID_VALUES[0] == pytest.approx(1e-3) and GRID_VALUES[-1] == 1e3


def test_variants():
    hp = Hyperparams(alpha=2, beta=3, gamma=4, lam=5)
    assert effective_weights(hp, "no_se").alpha == 0
    assert effective_weights(hp, "no_lap").lam == 0 and effective_weights(hp, "no_lap").beta == 3
    assert effective_weights(hp, "no_specific").gamma == 0
    w = effective_weights(hp, "no_shared")
    assert w.beta == 0 and w.lam == 0 and w.gamma == 4
    assert resolve_variant("SEHFS-W") == "no_se"
    with pytest.raises(ValueError):
        resolve_variant("bogus")


# ------------------------------------------------------------- init


def test_init_state():
    data = random_dataset(n=30, view_dims=(3, 5), q=4, seed=1)
    st = init_state(data, Hyperparams())
    np.testing.assert_allclose(st.W, 0.25, atol=0.02)
    np.testing.assert_allclose(st.W.sum(1), 1, atol=1e-12)
    np.testing.assert_array_equal(st.alpha_v, [0.5, 0.5])
    np.testing.assert_array_equal(st.Xf, data.concatenated())
    np.testing.assert_allclose(st.S, 0.5 * st.S_views[0] + 0.5 * st.S_views[1])
    assert all(np.array_equal(H, np.eye(w)) for H, w in zip(st.H, (3, 5)))


# ------------------------------------------------------------- objective


def naive_objective(st, hp):
    def fro2(M):
        return sum(M[i, j] ** 2 for i in range(M.shape[0]) for j in range(M.shape[1]))

    n, d = st.Xf.shape
    fit_ = fro2(st.Xf @ st.W - st.Y)
    se = hp.alpha * soft_structural_entropy(st.A, st.W)
    P = [p.dense() for p in st.placements]
    B = sum(a * X @ Pv for a, X, Pv in zip(st.alpha_v, st.views, P))
    rx = hp.beta * fro2(st.Xf - st.S @ B)
    rs = hp.beta * fro2(st.S - sum(a * Sv for a, Sv in zip(st.alpha_v, st.S_views)))
    LSL = st.L_Y.T @ st.S @ st.L_Y
    lap = hp.lam * sum(LSL[i, i] for i in range(n))
    sp = hp.gamma * sum(fro2(st.Xf @ Pv.T - X @ H) for Pv, X, H in zip(P, st.views, st.H))
    return fit_ + se + rx + rs + lap + sp


def test_objective_matches_naive(rng):
    for _ in range(5):
        st = make_state(rng)
        ob = objective(st, HP)
        assert ob.total == pytest.approx(naive_objective(st, HP), rel=1e-10)
        parts = ob.fit + ob.se + ob.recon_xf + ob.recon_s + ob.lap + ob.specific
        assert ob.total == pytest.approx(parts, rel=1e-8)


def test_objective_zero_residual_construction(rng):
    st = make_state(rng, S_views=[np.eye(5), np.eye(5)], alpha_v=np.array([0.5, 0.5]))
    st.S = st.mean_graph()
    st.Xf = st.S @ st.view_matrix()
    st.H = [0.5 * np.eye(2), 0.5 * np.eye(3)]
    st.Y = st.Xf @ st.W
    ob = objective(st, HP)
    assert ob.fit == pytest.approx(0, abs=1e-20)
    assert ob.recon_xf == pytest.approx(0, abs=1e-18) and ob.recon_s == 0
    assert ob.specific == pytest.approx(0, abs=1e-18)
    assert ob.total == pytest.approx(ob.se + ob.lap, rel=1e-9)


def test_objective_linear_in_beta(rng):
    st = make_state(rng)
    a = objective(st, HP)
    b = objective(st, Hyperparams(alpha=0.7, beta=2.6, gamma=0.4, lam=0.2))
    assert b.recon_xf + b.recon_s == pytest.approx(2 * (a.recon_xf + a.recon_s))
    assert (b.fit, b.se, b.lap, b.specific) == (a.fit, a.se, a.lap, a.specific)


def test_objective_edgeless_feature_graph(rng):
    st = make_state(rng, A=np.zeros((5, 5)))
    assert objective(st, HP).se == 0.0


# ------------------------------------------------------------- Xf


def test_update_Xf_hand_formula(rng):
    st = make_state(rng, n=3, dims=(2,), W=np.zeros((2, 2)))
    expected = st.Xf * (st.alpha_v[0] * st.S @ st.views[0]) / (st.Xf + 1e-12)
    update_Xf(st, Hyperparams(beta=1.0), "no_specific")
    np.testing.assert_allclose(st.Xf, expected, rtol=1e-12)


def test_update_Xf_full_formula_and_placement_identity(rng):
    st = make_state(rng)
    hp = HP
    P = [p.dense() for p in st.placements]
    num = st.Y @ st.W.T + sum(hp.beta * a * st.S @ X @ Pv + hp.gamma * X @ H @ Pv
                              for a, X, H, Pv in zip(st.alpha_v, st.views, st.H, P))
    den = (st.Xf @ st.W @ st.W.T + hp.beta * st.Xf
           + hp.gamma * sum(st.Xf @ Pv.T @ Pv for Pv in P) + hp.eps)
    expected = st.Xf * num / den
    update_Xf(st, hp)
    np.testing.assert_allclose(st.Xf, expected, rtol=1e-12)


def test_update_Xf_fixed_point(rng):
    st = make_state(rng, n=4, dims=(3,), W=np.zeros((3, 2)))
    # with W = 0 and gamma dropped, Xf = alpha S X is a fixed point
    st.Xf = st.alpha_v[0] * st.S @ st.views[0]
    before = st.Xf.copy()
    update_Xf(st, Hyperparams(), "no_specific")
    np.testing.assert_allclose(st.Xf, before, rtol=1e-10)


# ------------------------------------------------------------- S


def test_update_S_printed_rule_without_laplacian(rng):
    st = make_state(rng, n=3, dims=(1, 2))
    hp = Hyperparams(beta=0.8)
    P = [p.dense() for p in st.placements]
    num = hp.beta * st.Xf @ sum(a * Pv.T @ X.T for a, X, Pv in zip(st.alpha_v, st.views, P)) \
        + hp.beta * sum(a * Sv for a, Sv in zip(st.alpha_v, st.S_views))
    den = hp.beta * st.S @ sum(a ** 2 * X @ Pv @ Pv.T @ X.T for a, X, Pv in zip(st.alpha_v, st.views, P)) \
        + hp.beta * st.S + hp.eps
    expected = st.S * num / den
    update_S(st, hp, "no_lap")
    np.testing.assert_allclose(st.S, expected, rtol=1e-12)


def test_update_S_nonnegative_with_laplacian(rng):
    for _ in range(10):
        st = make_state(rng)
        update_S(st, Hyperparams(lam=100.0))
        assert np.all(st.S >= 0)


def test_update_S_decreases_its_terms(rng):
    # beta and lambda terms of the objective as a function of S only
    for _ in range(10):
        st = make_state(rng)
        before = objective(st, HP)
        update_S(st, HP)
        after = objective(st, HP)
        f0 = before.recon_xf + before.recon_s + before.lap
        f1 = after.recon_xf + after.recon_s + after.lap
        assert f1 <= f0 + 1e-9 * abs(f0)


# ------------------------------------------------------------- H


def test_update_H_converges_on_solvable_system(rng):
    # orthonormal, non-negative columns
    X = np.array([[0.6, 0.0], [0.8, 0.0], [0.0, 1.0], [0.0, 0.0]])
    H_star = np.array([[0.5, 1.5], [2.0, 0.25]])
    st = make_state(rng, n=4, dims=(2,), views=[X], H=[np.ones((2, 2))])
    st.Xf = X @ H_star
    res = []
    for _ in range(5):
        res.append(np.linalg.norm(st.Xf - X @ st.H[0]))
        update_H(st, HP, 0)
    res.append(np.linalg.norm(st.Xf - X @ st.H[0]))
    assert all(b <= a + 1e-15 for a, b in zip(res, res[1:]))
    np.testing.assert_allclose(st.H[0], H_star, atol=1e-9)


def test_update_H_monotone_random(rng):
    for _ in range(10):
        st = make_state(rng)
        for v in range(2):
            r0 = objective(st, HP).specific
            update_H(st, HP, v)
            assert objective(st, HP).specific <= r0 * (1 + 1e-12)
            assert np.all(st.H[v] >= 0)


def test_update_H_skipped_without_gamma(rng):
    st = make_state(rng)
    H0 = [H.copy() for H in st.H]
    update_H(st, HP, 0, "no_specific")
    np.testing.assert_array_equal(st.H[0], H0[0])


# ------------------------------------------------------------- simplex


@pytest.mark.parametrize("v,expected", [
    ([0.5, 0.5], [0.5, 0.5]),
    ([2, 0], [1, 0]),
    ([1, 1], [0.5, 0.5]),
    ([0.3, -0.1, 0.2], [0.5, 0.1, 0.4]),
    ([5.0], [1.0]),
])
def test_simplex_examples(v, expected):
    np.testing.assert_allclose(project_row_simplex(v), expected, atol=1e-12)


# ------------------------------------------------------------- W


def test_update_W_recovers_row_stochastic_target(rng):
    d, q = 6, 3
    Y = rng.random((d, q))
    Y /= Y.sum(1, keepdims=True)
    st = make_state(rng, n=d, dims=(3, 3), q=q, Xf=np.eye(d), Y=Y)
    info = WStepInfo()
    update_W(st, Hyperparams(tol=1e-14), "no_se", info)
    np.testing.assert_allclose(st.W, Y, atol=1e-6)
    assert not info.stalled


def test_update_W_inner_objective_monotone(rng):
    for _ in range(10):
        st = make_state(rng, n=8, dims=(4, 3), q=3)
        info = WStepInfo()
        update_W(st, HP, "full", info)
        J = np.array(info.objective)
        assert np.all(np.diff(J) <= 0)
        np.testing.assert_allclose(st.W.sum(1), 1, atol=1e-9)
        assert np.all(st.W >= 0)


def test_update_W_single_step_mode(rng):
    st = make_state(rng)
    info = WStepInfo()
    update_W(st, Hyperparams(w_inner_iters=1), "full", info)
    assert info.steps <= 1


def test_w_subproblem_gradient(rng):
    st = make_state(rng)
    J, grad = w_subproblem(st.Xf, st.Y, st.A, 0.9)
    G = grad(st.W)
    h = 1e-6
    for idx in [(0, 0), (2, 1), (4, 0)]:
        E = np.zeros_like(st.W)
        E[idx] = h
        assert G[idx] == pytest.approx((J(st.W + E) - J(st.W - E)) / (2 * h), rel=1e-5)


# ------------------------------------------------------------- alpha


def test_alpha_qp_terms_match_dense_construction(rng):
    st = make_state(rng, n=4, dims=(2, 1))
    P = [p.dense() for p in st.placements]
    Psi = np.column_stack([(st.S @ X @ Pv).ravel() for X, Pv in zip(st.views, P)])
    Omega = np.column_stack([Sv.ravel() for Sv in st.S_views])
    M, h = alpha_qp_terms(st)
    np.testing.assert_allclose(M, Psi.T @ Psi + Omega.T @ Omega, rtol=1e-12)
    np.testing.assert_allclose(h, 2 * (Psi.T @ st.Xf.ravel() + Omega.T @ st.S.ravel()), rtol=1e-12)


def test_qp_scalar_closed_form():
    assert solve_nonneg_qp([[2.0]], [3.0])[0] == pytest.approx(0.75, abs=1e-9)
    assert solve_nonneg_qp([[2.0]], [-3.0])[0] == 0.0


def test_qp_history_monotone(rng):
    B = rng.normal(size=(3, 3))
    hist = []
    solve_nonneg_qp(B @ B.T, rng.normal(size=3) * 3, history=hist)
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_qp_grid_oracle_spot(rng):
    B = rng.random((2, 2)) + 0.2
    M = B @ B.T
    h = rng.random(2) * 4
    x = solve_nonneg_qp(M, h)
    g = np.arange(0, 3.0005, 0.01)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    F = M[0, 0] * X1 ** 2 + 2 * M[0, 1] * X1 * X2 + M[1, 1] * X2 ** 2 - h[0] * X1 - h[1] * X2
    i, j = np.unravel_index(np.argmin(F), F.shape)
    assert np.max(np.abs(x - [g[i], g[j]])) < 0.02


def test_update_alpha_nonnegative(rng):
    for _ in range(10):
        st = make_state(rng)
        update_alpha(st, HP)
        assert np.all(st.alpha_v >= 0)


# ------------------------------------------------------------- fit


def test_fit_trace_and_invariants():
    data = random_dataset(n=60, view_dims=(10, 10), q=3, seed=3)
    seen = []

    def cb(it, name, st):
        for key, val in st.variables().items():
            assert np.all(val >= 0), (it, name, key)
        if name in ("init", "W"):
            np.testing.assert_allclose(st.W.sum(1), 1, atol=1e-9)
        seen.append(name)

    res = fit(data, Hyperparams(seed=3), callback=cb)
    totals = [t.total for t in res.trace]
    assert all(b <= a + 1e-6 * abs(a) for a, b in zip(totals, totals[1:]))
    assert res.converged and res.iterations <= 100
    assert seen[:7] == ["init", "Xf", "W", "S", "H0", "H1", "alpha"]
    assert sorted(res.ranking.tolist()) == list(range(20))


def test_fit_deterministic():
    data = random_dataset(n=40, view_dims=(4, 6), q=2, seed=5)
    a = fit(data, Hyperparams(seed=1))
    b = fit(data, Hyperparams(seed=1))
    assert a.to_json() == b.to_json()


def test_no_lap_ignores_lambda():
    data = random_dataset(n=40, view_dims=(4, 6), q=2, seed=2)
    a = fit(data, Hyperparams(lam=0.1), "no_lap")
    b = fit(data, Hyperparams(lam=100.0), "no_lap")
    np.testing.assert_array_equal(a.ranking, b.ranking)
    np.testing.assert_array_equal(a.state.W, b.state.W)


@pytest.mark.parametrize("variant", ["no_se", "no_shared", "no_specific", "SEHFS-L"])
def test_variants_run(variant):
    res = fit(random_dataset(n=30, view_dims=(3, 3), q=2, seed=0), Hyperparams(), variant)
    assert res.variant == resolve_variant(variant)
    assert json.loads(res.to_json())["variant"] == res.variant


def test_planted_recovery_single_seed():
    res = fit(planted_dataset(seed=0), Hyperparams(seed=0))
    assert set(res.top(3).tolist()) == {0, 1, 2}


def test_fit_rejects_negative_features():
    data = random_dataset(n=20, view_dims=(2, 2), q=2, seed=0)
    with pytest.raises(ValueError, match="non-negative"):
        fit(data, Hyperparams(normalization="zscore"))


def test_numerical_abort_reports_iteration():
    data = random_dataset(n=20, view_dims=(2, 2), q=2, seed=0)

    def poison(it, name, st):
        if name == "init":
            st.Xf[0, 0] = np.nan

    with pytest.raises(NumericalError) as err:
        fit(data, Hyperparams(), callback=poison)
    assert err.value.iteration == 1


def test_rank_features_stable_ties():
    order, norms = rank_features(np.array([[0.5, 0.5], [1, 0], [0.5, 0.5], [0, 1]]))
    assert order.tolist() == [1, 3, 0, 2]


def test_graph_refresh_mode():
    data = random_dataset(n=30, view_dims=(3, 3), q=2, seed=0)
    res = fit(data, Hyperparams(graph_refresh=2, max_outer_iters=5))
    assert res.iterations <= 5
