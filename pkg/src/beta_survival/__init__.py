"""Beta-logistic discrete-time survival models.

Each unit has a per-step event probability ``theta`` drawn from a
feature-dependent ``Beta(alpha(x), beta(x))`` prior; integrating ``theta``
out gives the shifted-beta-geometric likelihood for censored event times.
"""

from .baselines import (GaussianScorePosterior, GeometricModel, LogisticConfig, LogisticModel,
                        fit_geometric_pointestimate, fit_logistic_at_horizon,
                        logistic_prediction_variance, sigmoid_gaussian_variance)
from .beta_math import (BetaDomainError, BetaParams, beta_median, beta_quantile, log_beta_fn,
                        reg_inc_beta, sample_beta)
from .data import DataError, Observation, SurvivalData, label_at_horizon
from .datafile import load_model, read_dataset, save_model, write_dataset
from .evalkit import (CohortFit, HorizonEval, auc_at_horizon, empirical_survival,
                      fit_sbg_cohort, posterior_size_experiment)
from .gbrt import GbrtBetaLogistic, GbrtConfig, custom_objective, fit_gbrt, predict_gbrt
from .linear import (FitConfig, LinearBetaLogistic, TrainingError, fit_linear, predict_event_variance,
                     predict_params, predict_survival_curve, to_logistic_equivalent)
from .ranking import (PowerBetaMoments, ProjectionError, RankedItem, compare_by_median,
                      pairwise_prob_integer, project_power_beta, rank_at_horizon)
from .sbg import (convexity_diagnostic, sbg_derivatives, sbg_neg_log_likelihood, sbg_pmf,
                  sbg_survival, survival_curve)
from .simgen import (TABLE1_COHORTS, CohortSpec, gen_beta_geometric, gen_heterogeneity_sweep,
                     gen_skewed_covariate, gen_table1_mixture)

__version__ = "0.1.0"
