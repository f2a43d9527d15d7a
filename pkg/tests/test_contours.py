import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from stormresponse.condext import estimate_density_grid
from stormresponse.contours import (
    Contour,
    ModelSpec,
    aggregate_score,
    conditional_cdf,
    conditional_quantile,
    enumerate_specs,
    fit_conditional_model,
    iform_contour,
    inverse_rosenblatt,
    model_zoo,
    rosenblatt,
    write_zoo_csv,
    zeta_overlap,
    _cv_score,
    _PPF,
)
from stormresponse.errors import DataError, NumericalError
from stormresponse.marginal import fit_marginal
from stormresponse.response import CdeGrid
from stormresponse.synth import generate_conditional_sample


@pytest.fixture(scope="module")
def lognormal_data():
    return generate_conditional_sample(5000, "lognormal", mu_coef=(0.1, 0.02),
                                       sigma_coef=(0.3, 0.0), seed=5)


def test_lognormal_recovery_within_3se(lognormal_data):
    model = fit_conditional_model(lognormal_data, ModelSpec("lognormal", "linear", "linear"),
                                  compute_se=True)
    truth = [0.1, 0.02, 0.3, 0.0]
    assert len(model.se) == 4
    for est, t, se in zip(model.coef_vector, truth, model.se):
        assert abs(est - t) < 3 * se


def test_constant_slope_recovery():
    hs, s2 = generate_conditional_sample(5000, "lognormal", mu_coef=(0.2, 0.0),
                                         sigma_coef=(0.25, 0.0), seed=6)
    model = fit_conditional_model((hs, s2), ModelSpec("lognormal", "linear", "linear"),
                                  compute_se=True)
    assert abs(model.coef1[1]) < 3 * model.se[1]


def test_small_sample_rejected(lognormal_data):
    hs, s2 = lognormal_data
    with pytest.raises(DataError, match="50"):
        fit_conditional_model((hs[:30], s2[:30]), ModelSpec("gamma", "linear", "linear"))


def test_sign_transform_reflection(lognormal_data):
    hs, s2 = lognormal_data
    model = fit_conditional_model((hs, s2), ModelSpec("gev", "linear", "linear",
                                                      sign_transform=True))
    h = 4.0
    p = np.array([0.1, 0.5, 0.9])
    q = conditional_quantile(model, p, h)
    # reflected family quantile: q(S2) = min_s2 - q_family(1 - p)
    from stormresponse.contours import _family_params, _gev_ppf

    p1, p2 = _family_params(model, h)
    base = _gev_ppf(1.0 - p, p1, p2, model.gev_xi)
    assert np.allclose(q, model.min_s2 - base, rtol=1e-12)
    # and the cdf inverts the quantile
    assert np.allclose(conditional_cdf(model, q, h), p, atol=1e-9)


def test_transform_breaks_positive_support_families(lognormal_data):
    with pytest.raises(NumericalError, match="support"):
        fit_conditional_model(lognormal_data,
                              ModelSpec("lognormal", "linear", "linear", sign_transform=True))


def test_cv_v0_is_plain_kfold_loo(lognormal_data):
    # with v = 0 and K = n the score is leave-one-out over the full sample;
    # reproduce it directly as the oracle
    hs, s2 = lognormal_data
    hs, s2 = hs[:60], s2[:60]
    spec = ModelSpec("lognormal", "linear", "linear")
    full = fit_conditional_model((hs, s2), spec)
    warm = full.coef_vector
    score = _cv_score(hs, s2, spec, 60, 0.0, np.random.default_rng(0), warm)
    total = 0.0
    from stormresponse.contours import conditional_logpdf

    perm = np.random.default_rng(0).permutation(np.arange(60))
    for i in perm:
        keep = np.delete(np.arange(60), i)
        m = fit_conditional_model((hs[keep], s2[keep]), spec, init=warm,
                                  n_starts=0, maxiter=250, fatol=1e-3, xatol=1e-3)
        total += float(conditional_logpdf(m, s2[i], hs[i]))
    assert score == pytest.approx(total / 60.0, rel=1e-9)


def test_aggregate_score_mean_and_labels(lognormal_data):
    hs, s2 = lognormal_data
    sc = aggregate_score((hs[:400], s2[:400]), ModelSpec("lognormal", "linear", "linear"),
                         replicates=3, seed=0)
    assert sc.labels == ("aic", "cv_0_5", "cv_0_10", "cv_0.8_5", "cv_0.8_10",
                         "cv_0.9_5", "cv_0.9_10")
    assert len(sc.scores) == 7
    # aggregate equals the mean of the per-criterion means here because the
    # replicate average commutes with the criterion average
    assert sc.aggregate == pytest.approx(float(np.mean(sc.scores)), rel=1e-12)


def test_aggregate_score_constant_property():
    # if every standardized sub-score equals s the aggregate is s
    scores = np.full(7, -1.234)
    assert np.mean(scores) == pytest.approx(-1.234)


def test_as_ordering_invariant_to_constant_shift():
    a = np.array([-0.5, -0.52, -0.49])
    shifted = a + 3.7
    assert np.array_equal(np.argsort(a), np.argsort(shifted))


def test_empty_tail_error(lognormal_data):
    hs, s2 = lognormal_data
    spec = ModelSpec("lognormal", "linear", "linear")
    with pytest.raises(DataError, match="folds"):
        _cv_score(hs[:100], s2[:100], spec, 50, 0.9, np.random.default_rng(0), None)


def test_family_ranking_on_lognormal_data(lognormal_data):
    hs, s2 = lognormal_data
    hs, s2 = hs[:1500], s2[:1500]
    scores = {}
    for family in ("lognormal", "gamma", "weibull", "gev"):
        sc = aggregate_score((hs, s2), ModelSpec(family, "linear", "linear"),
                             replicates=5, seed=3)
        scores[family] = sc
    best = max(scores.values(), key=lambda s: s.aggregate)
    ln = scores["lognormal"]
    assert ln.aggregate >= best.aggregate - 2.0 * max(best.se, ln.se)


# ---------------------------------------------------------------------------
# Rosenblatt and IFORM

class GaussianMargin:
    def cdf(self, x):
        return ndtr(np.asarray(x, dtype=float))

    def quantile(self, p):
        return ndtri(np.asarray(p, dtype=float))


class GaussianConditional:
    def cdf(self, s2, hs):
        return ndtr(np.asarray(s2, dtype=float))

    def quantile(self, p, hs):
        return ndtri(np.asarray(p, dtype=float))


@pytest.fixture(scope="module")
def fitted_pair(lognormal_data):
    hs, s2 = lognormal_data
    marg = fit_marginal(hs, 0.8)
    cond = fit_conditional_model((hs, s2), ModelSpec("lognormal", "linear", "linear"))
    return marg, cond


def test_rosenblatt_median_maps_to_origin(fitted_pair):
    from stormresponse.marginal import marginal_quantile

    marg, cond = fitted_pair
    hs0 = marginal_quantile(marg, 0.5)
    s20 = conditional_quantile(cond, 0.5, hs0)
    u1, u2 = rosenblatt(hs0, s20, marg, cond)
    assert abs(u1) < 1e-9 and abs(u2) < 1e-9


def test_rosenblatt_independent_factorization(fitted_pair):
    # conditional parameters constant in hs -> u2 depends only on s2
    _, cond0 = fitted_pair
    from stormresponse.contours import ConditionalModel

    cond = ConditionalModel(spec=cond0.spec, coef1=(0.15, 0.0), coef2=(0.3, 0.0),
                            gev_xi=0.0, min_s2=cond0.min_s2, loglik=0.0,
                            n_obs=cond0.n_obs, converged=True)
    marg, _ = fitted_pair
    _, u2a = rosenblatt(2.0, 1.1, marg, cond)
    _, u2b = rosenblatt(9.0, 1.1, marg, cond)
    assert u2a == pytest.approx(u2b, abs=1e-12)


def test_rosenblatt_round_trip(fitted_pair):
    marg, cond = fitted_pair
    hs = np.array([2.0, 4.0, 8.0])
    s2 = np.array([1.0, 1.2, 1.5])
    u1, u2 = rosenblatt(hs, s2, marg, cond)
    hs2, s22 = inverse_rosenblatt(u1, u2, marg, cond)
    assert np.allclose(hs2, hs, atol=1e-8)
    assert np.allclose(s22, s2, atol=1e-8)


def test_iform_beta_index():
    # frozen from the independent mpmath quantile oracle
    contour = iform_contour(GaussianMargin(), GaussianConditional(), 1000.0, 73.0, k=32)
    assert contour.beta_index == pytest.approx(4.194087182467003, abs=1e-9)


def test_iform_points_on_radius(fitted_pair):
    marg, cond = fitted_pair
    contour = iform_contour(marg, cond, 500.0, 70.0, k=90)
    radii = np.hypot(contour.u1, contour.u2)
    assert np.abs(radii - contour.beta_index).max() < 1e-9


def test_iform_identity_models_give_circle():
    contour = iform_contour(GaussianMargin(), GaussianConditional(), 1000.0, 73.0, k=64)
    assert np.allclose(contour.hs, contour.u1, atol=1e-9)
    assert np.allclose(contour.s2, contour.u2, atol=1e-9)


def test_iform_continuity_in_p(fitted_pair):
    marg, cond = fitted_pair
    c1 = iform_contour(marg, cond, 1000.0, 73.0, k=72)
    c2 = iform_contour(marg, cond, 1010.0, 73.0, k=72)
    assert np.abs(c1.hs - c2.hs).max() < 0.05 * (c1.hs.max() - c1.hs.min())
    assert np.abs(c1.s2 - c2.s2).max() < 0.05 * (c1.s2.max() - c1.s2.min())


def test_iform_validation(fitted_pair):
    marg, cond = fitted_pair
    with pytest.raises(DataError):
        iform_contour(marg, cond, 0.5, 73.0)
    with pytest.raises(DataError):
        iform_contour(marg, cond, 100.0, 73.0, k=4)


# ---------------------------------------------------------------------------
# Zeta overlap

def _cde_uniform(hs_lo, hs_hi, n=4):
    hs_edges = np.linspace(hs_lo, hs_hi, n + 1)
    s2_edges = np.linspace(0.0, 1.0, n + 1)
    area = np.outer(np.diff(hs_edges), np.diff(s2_edges))
    value = np.ones((n, n)) / area.sum()
    return CdeGrid(hs_edges=hs_edges, s2_edges=s2_edges, value=value, r_p=1.0,
                   normalization_residual=0.0)


def _square_contour(hs_lo, hs_hi, s2_lo=-1.0, s2_hi=2.0, k=25):
    # closed rectangle traversed once
    top = np.linspace(s2_lo, s2_hi, k)
    hs = np.concatenate([np.full(k, hs_lo), np.full(k, hs_hi), [hs_lo]])
    s2 = np.concatenate([top, top[::-1], [s2_lo]])
    return Contour(angles=np.zeros(hs.size), u1=np.zeros(hs.size), u2=np.zeros(hs.size),
                   hs=hs, s2=s2, beta_index=1.0, p=100.0, n_an=73.0, clamped=False)


def test_zeta_full_containment():
    cde = _cde_uniform(0.0, 1.0)
    contour = _square_contour(5.0, 6.0)  # far above all mass: everything covered
    assert zeta_overlap(contour, cde) == pytest.approx(1.0, abs=0.02)


def test_zeta_disjoint():
    cde = _cde_uniform(5.0, 6.0)
    contour = _square_contour(0.0, 1.0)  # all mass beyond the contour
    assert zeta_overlap(contour, cde) == pytest.approx(-1.0, abs=0.02)


def test_zeta_half_mass():
    cde = _cde_uniform(0.0, 1.0)
    contour = _square_contour(0.0, 0.5)  # upper envelope splits the mass in half
    assert zeta_overlap(contour, cde) == pytest.approx(0.0, abs=0.02)


def test_zeta_monotone_as_contour_grows():
    cde = _cde_uniform(0.0, 1.0)
    values = [zeta_overlap(_square_contour(0.0, hi), cde)
              for hi in (0.2, 0.5, 0.8, 1.2)]
    assert (np.diff(values) >= -1e-12).all()


def test_zeta_degenerate_polygon():
    cde = _cde_uniform(0.0, 1.0)
    contour = Contour(angles=np.zeros(3), u1=np.zeros(3), u2=np.zeros(3),
                      hs=np.ones(3), s2=np.ones(3), beta_index=1.0, p=1.0,
                      n_an=1.0, clamped=False)
    with pytest.raises(DataError, match="degenerate"):
        zeta_overlap(contour, cde)


# ---------------------------------------------------------------------------
# Model zoo

def test_enumerate_all_specs_unique():
    specs = enumerate_specs()
    assert len(specs) == 72
    assert len(set(specs)) == 72


def test_model_zoo_reports_all(lognormal_data, tmp_path):
    hs, s2 = lognormal_data
    specs = [ModelSpec("lognormal", "linear", "linear"),
             ModelSpec("gamma", "linear", "linear"),
             ModelSpec("lognormal", "linear", "linear", sign_transform=True)]
    results = model_zoo((hs[:400], s2[:400]), replicates=2, seed=1, specs=specs)
    assert len(results) == 3
    assert results[0].status == "ok"
    assert results[2].status.startswith("failed")
    path = tmp_path / "zoo.csv"
    write_zoo_csv(results, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("family,transform,form_p1,form_p2,aic")
