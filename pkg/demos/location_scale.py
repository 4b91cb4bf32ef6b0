"""Model the mean and the spread of a heteroscedastic response.

The mean depends on x1 and the standard deviation on x2; three more
covariates are noise. Both stopping iterations are tuned jointly by
5-fold cross-validation of the predictive log-likelihood.
"""

import numpy as np

import statboost as sb

rng = np.random.default_rng(11)
n = 400
X = rng.normal(size=(n, 5))
y = rng.normal(2 * X[:, 0], np.exp(0.5 + 0.5 * X[:, 1]))
d = sb.Dataset.from_arrays(X, y)

# the intercept lets each predictor shift its level away from the offset;
# log sd(y) overstates the spread once the mean is modelled
learners = tuple(sb.BaseLearner.linear(c, intercept=True) for c in d.names)
spec = sb.LssSpec(learners, learners, nu=0.1)
grid = range(0, 301, 25)
tuned = sb.tune_lss(d, spec, sb.ResamplingPlan.kfold_plan(5, seed=0), grid, grid)
print(f"mstop for mu: {tuned.mstop_mu}, for sigma: {tuned.mstop_sigma}")

fit = sb.fit_lss(d, learners, learners, 0.1, tuned.mstop_mu, tuned.mstop_sigma)
# column 0 of each coefficient vector is the intercept, column 1 the slope
level_mu = fit.offset_mu + sum(c[0] for c in fit.coefs_mu)
level_sigma = fit.offset_sigma + sum(c[0] for c in fit.coefs_sigma)
print("              mu      log sigma")
print(f"{'level':<10} {level_mu:8.3f} {level_sigma:10.3f}")
for k, name in enumerate(d.names):
    print(f"{name:<10} {fit.coefs_mu[k][1]:8.3f} {fit.coefs_sigma[k][1]:10.3f}")
print("truth: mu = 2 x1, log sigma = 0.5 + 0.5 x2")

mu, sigma = sb.predict_lss(fit, d)
inside = np.mean(np.abs(y - mu) <= 1.96 * sigma)
print(f"share of training points inside the 95% band: {inside:.3f}")
