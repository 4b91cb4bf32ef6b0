import numpy as np
import pytest

import statboost as sb
from conftest import linear_data, linear_learners


def spec_for(d, family="gaussian", nu=0.1):
    return sb.BoostSpec(family, tuple(linear_learners(d)), nu=nu)


def oracle_risks(d, spec, plan, grid):
    """Refit each fold independently, truncate with set_mstop and average the loss."""
    fam = sb.get_family(spec.family)
    rows = []
    for train, test in sb.make_folds(d, plan):
        tr, te = d.subset(train), d.subset(test)
        full = spec.fit(tr, max(grid))
        rows.append([np.mean(fam.loss(te.response, sb.predict(sb.set_mstop(full, m), te)))
                     for m in grid])
    return np.array(rows)


@pytest.mark.parametrize("family", ["gaussian", "binomial"])
def test_cvrisk_matches_independent_recomputation(family):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(90, 4))
    eta = X[:, 0] - 0.5 * X[:, 2]
    y = eta + rng.normal(size=90) if family == "gaussian" else \
        (rng.uniform(size=90) < 1 / (1 + np.exp(-eta))).astype(float)
    d = sb.Dataset.from_arrays(X, y)
    spec = spec_for(d, family)
    plan = sb.ResamplingPlan.kfold_plan(5, seed=3)
    grid = (0, 1, 2, 5, 13, 40)
    rg = sb.cvrisk(d, spec, plan, grid)
    np.testing.assert_array_equal(rg.risks, oracle_risks(d, spec, plan, grid))


def test_grid_zero_is_offset_risk():
    d = linear_data(seed=2, beta=[1, 0, 0, 0, 0])
    plan = sb.ResamplingPlan.kfold_plan(4, seed=0)
    rg = sb.cvrisk(d, spec_for(d), plan, grid=[0])
    for i, (train, test) in enumerate(sb.make_folds(d, plan)):
        yt = d.response[train]
        assert rg.risks[i, 0] == pytest.approx(np.mean(0.5 * (d.response[test] - yt.mean()) ** 2), abs=1e-14)
    assert sb.select_mstop(rg) == 0


def test_leave_one_out():
    d = linear_data(n=10, p=2, beta=[2, 0], seed=4)
    plan = sb.ResamplingPlan.kfold_plan(10, seed=0)
    rg = sb.cvrisk(d, spec_for(d), plan, grid=range(0, 21, 5))
    assert rg.risks.shape == (10, 5)
    np.testing.assert_array_equal(rg.risks, oracle_risks(d, spec_for(d), plan, rg.grid))


def test_select_mstop_ties_prefer_smaller():
    plan = sb.ResamplingPlan()
    rg = sb.RiskGrid(np.array([[3.0, 1.0, 1.0, 2.0]]), (0, 10, 20, 30), plan)
    assert sb.select_mstop(rg) == 10


def test_grid_validation():
    d = linear_data(seed=0)
    for bad in ([], [3, 1], [-1, 2], [1, 1]):
        with pytest.raises(sb.ConfigError):
            sb.cvrisk(d, spec_for(d), grid=bad)


def test_resampling_schemes_and_fold_order():
    d = linear_data(n=60, seed=5, beta=[1, 0, 0, 0, 0])
    for plan in (sb.ResamplingPlan.subsample_plan(0.5, 6, seed=1),
                 sb.ResamplingPlan.bootstrap_plan(6, seed=1)):
        rg = sb.cvrisk(d, spec_for(d), plan, grid=range(30))
        assert rg.risks.shape == (6, 30)
        assert np.all(np.isfinite(rg.risks))
    plan = sb.ResamplingPlan.kfold_plan(5, seed=2)
    rg = sb.cvrisk(d, spec_for(d), plan, grid=range(30))
    # mean over folds does not depend on fold order
    np.testing.assert_allclose(rg.risks[::-1].mean(0), rg.mean, atol=1e-15)


def test_jobs_do_not_change_result():
    d = linear_data(seed=6, beta=[1, 1, 0, 0, 0])
    plan = sb.ResamplingPlan.kfold_plan(5, seed=0)
    a = sb.cvrisk(d, spec_for(d), plan, range(50), jobs=1)
    b = sb.cvrisk(d, spec_for(d), plan, range(50), jobs=4)
    np.testing.assert_array_equal(a.risks, b.risks)


def test_fold_failure_names_fold():
    # leave-one-out: the fold that holds out the only 1 trains on all zeros
    y = np.array([0, 0, 0, 0, 0, 0, 0, 0, 0, 1], dtype=float)
    d = sb.Dataset.from_arrays(np.arange(10.0)[:, None], y)
    with pytest.raises(sb.DataError, match=r"fold \d+: binomial response is degenerate"):
        sb.cvrisk(d, spec_for(d, "binomial"), sb.ResamplingPlan.kfold_plan(10, seed=0), range(5))


def test_signal_selects_interior_mstop():
    d = linear_data(n=150, seed=7, beta=[1.5, -1, 0, 0, 0])
    rg = sb.cvrisk(d, spec_for(d), sb.ResamplingPlan.kfold_plan(5, seed=0), range(201))
    m = sb.select_mstop(rg)
    assert 20 < m <= 200


def test_tune_grid2_matches_separate_cvrisk():
    d = linear_data(seed=8, beta=[1, 0, 0.5, 0, 0])
    spec = spec_for(d)
    plan = sb.ResamplingPlan.kfold_plan(4, seed=1)
    res = sb.tune_grid2(d, spec, plan, nu_grid=(0.3, 0.05, 0.1), mstop_grid=range(0, 101, 5))
    assert res.nu_grid == (0.05, 0.1, 0.3)
    for a, nu in enumerate(res.nu_grid):
        ref = sb.cvrisk(d, sb.BoostSpec("gaussian", spec.learners, nu=nu), plan, res.mstop_grid)
        np.testing.assert_array_equal(res.surface[a], ref.mean)
    a, b = np.unravel_index(np.argmin(res.surface), res.surface.shape)
    assert (res.nu, res.mstop) == (res.nu_grid[a], res.mstop_grid[b])


def test_tune_grid2_degenerate_grid_and_ties():
    d = linear_data(seed=9)
    plan = sb.ResamplingPlan.kfold_plan(3, seed=0)
    res = sb.tune_grid2(d, spec_for(d), plan, nu_grid=(0.1, 0.5), mstop_grid=[0])
    # every nu gives the offset-only model, so the smaller nu wins the tie
    assert res.surface[0, 0] == res.surface[1, 0]
    assert (res.nu, res.mstop) == (0.1, 0)
    with pytest.raises(sb.ConfigError):
        sb.tune_grid2(d, spec_for(d), plan, nu_grid=(0.1, 0.1))


def test_riskgrid_csv(tmp_path):
    d = linear_data(seed=10)
    rg = sb.cvrisk(d, spec_for(d), sb.ResamplingPlan.kfold_plan(3, seed=0), range(4))
    rg.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "fold,0,1,2,3"
    assert [float(v) for v in lines[1].split(",")[1:]] == list(rg.risks[0])
