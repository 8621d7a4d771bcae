"""Walk through the censored beta-geometric likelihood on a tiny cohort."""

import numpy as np

from beta_survival import BetaParams, SurvivalData, fit_sbg_cohort, sbg_pmf, sbg_survival
from beta_survival.sbg import sbg_derivatives, survival_curve

# a uniform prior on the per-step event rate
uniform = BetaParams(1.0, 1.0)
print("P(T=t) under Beta(1,1):", [round(sbg_pmf(uniform, t), 4) for t in range(1, 6)])
print("P(T>t) under Beta(1,1):", [round(sbg_survival(uniform, t), 4) for t in range(1, 6)])

# mixing over theta makes the hazard fall with time even though each unit is stationary
prior = BetaParams(0.5, 1.5)
s = survival_curve([prior.alpha], [prior.beta], 8)[0]
hazard = 1 - s / np.concatenate([[1.0], s[:-1]])
print("\nBeta(0.5, 1.5) step hazards:", np.round(hazard, 4))

# gradients are taken in log-parameters
d = sbg_derivatives(prior, 3, censored=False)
print(f"\nd log P(T=3) / d log alpha = {d.dlog_da:.5f}, d / d log beta = {d.dlog_db:.5f}")

# fit a cohort from counts: 30 events at t=1, 15 at t=2, 8 at t=3, 47 still waiting
t = np.repeat([1, 2, 3, 3], [30, 15, 8, 47])
censored = np.repeat([False, False, False, True], [30, 15, 8, 47])
fit = fit_sbg_cohort(SurvivalData(t, censored, np.zeros((t.shape[0], 0))))
print(f"\ncohort fit: alpha={fit.params.alpha:.4f} beta={fit.params.beta:.4f} "
      f"nll={fit.neg_log_likelihood:.4f} identifiable={fit.identifiable}")
print("fitted survival:", np.round(survival_curve([fit.params.alpha], [fit.params.beta], 6)[0], 4))
