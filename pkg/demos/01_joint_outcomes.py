"""Correlated binary outcomes as joint categories.

Two binary endpoints have four joint response patterns.  The response
design enumerates them in binary countdown order; joint probabilities
live on that 4-simplex and marginal success probabilities are sums of
the right cells.
"""

import numpy as np

import bmmlr

design = bmmlr.build_response_design(2)
print("pattern matrix H (rows = joint categories):")
print(design.patterns)

# a category index is just the row of H matching the outcome vector
print("\ncategory of outcome (0,1):", bmmlr.encode_outcome([0, 1], design))

# the multinomial logistic link maps Q-1 linear predictors to the
# Q-simplex (the last category is the reference with predictor 0)
psi = np.array([0.0, 0.433, 0.433])
phi = bmmlr.multinomial_logistic(psi)
print("\njoint probabilities at psi =", psi, "->", phi.round(4))

theta = bmmlr.joint_to_success(phi, design)
print("marginal success probabilities:", theta.round(4))

# negative dependence example: mass concentrated on the discordant
# patterns (1,0) and (0,1)
phi_neg = np.array([0.05, 0.45, 0.45, 0.05])
theta_neg = bmmlr.joint_to_success(phi_neg, design)
corr = (phi_neg[0] - theta_neg[0] * theta_neg[1]) / np.sqrt(
    theta_neg[0] * (1 - theta_neg[0]) * theta_neg[1] * (1 - theta_neg[1])
)
print("\ndiscordant-heavy phi:", phi_neg, "-> theta", theta_neg, f"correlation {corr:+.3f}")
