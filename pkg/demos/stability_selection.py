"""Variable selection with error control in a p >> n problem.

Five of 200 covariates carry signal. Boosting runs on 100 half-samples
until 8 distinct learners are picked; learners chosen in a large enough
share of runs are declared stable, with the threshold set so that the
expected number of false selections is at most 1. Other thresholds are
read off the same counts without refitting.
"""

import numpy as np

import statboost as sb

rng = np.random.default_rng(7)
n, p = 60, 200
X = rng.normal(size=(n, p))
y = X[:, :5] @ np.array([1.5, -1.2, 1.0, 0.8, -0.8]) + rng.normal(size=n)
d = sb.standardize(sb.Dataset.from_arrays(X, y))

spec = sb.BoostSpec("gaussian", tuple(sb.BaseLearner.linear(c) for c in d.names))
res = sb.stabsel(d, spec, q=8, B=100, pfer=1.0, seed=3)

print(f"threshold {res.pi_thr:.3f} for an error bound of {res.pfer:.1f}")
print(res.ranking_table().splitlines()[0])
for line in res.ranking_table().splitlines()[1:11]:
    print(line)

for thr in (0.6, 0.75, 0.9):
    s = sb.stable_set(res, thr)
    print(f"pi_thr={thr:.2f}: {len(s.ids)} stable, bound on false selections {s.pfer:.2f}")
