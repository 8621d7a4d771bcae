"""Rankings of beta priors by median, now and several steps ahead."""

from beta_survival import BetaParams, compare_by_median, pairwise_prob_integer, rank_at_horizon
from beta_survival.beta_math import beta_median
from beta_survival.ranking import (event_at_horizon_params, projection_mode_report,
                                   rank_csv_text)

u, v = BetaParams(1, 1), BetaParams(1, 2)
print(f"P(theta_v > theta_u) = {pairwise_prob_integer(u, v):.4f}; "
      f"medians {beta_median(u):.4f} vs {beta_median(v):.4f}; order {compare_by_median(u, v).value}")

items = [("uniform", BetaParams(1.0, 1.0)), ("normal", BetaParams(4.75, 14.25)),
         ("right_skewed", BetaParams(0.5, 1.5)), ("u_shaped", BetaParams(1 / 12, 0.25))]
for t in (1, 2, 5, 10):
    order = [r.item_id for r in rank_at_horizon(items, t)]
    print(f"t={t:<2} most at risk first: {order}")

print("\nprojected event-at-step distributions at t=5")
for name, p in items:
    q = event_at_horizon_params(p, 5)
    print(f"  {name:<13} Beta({q.alpha:.4g}, {q.beta:.4g})")

print()
print(rank_csv_text(rank_at_horizon(items, 5)), end="")

# closed-form product moments against Monte Carlo for an asymmetric prior
for row in projection_mode_report([(BetaParams(2.0, 5.0), 1), (BetaParams(2.0, 5.0), 3)],
                                  n_draws=200_000, seed=1):
    print(row)
