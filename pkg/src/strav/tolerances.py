"""Numeric comparison slack, documented in one place.

Every float tolerance used by the library lives here.  The values are desk
scale: coordinates of order 1..10, dimensions up to 6, constraint counts up
to 12.
"""

__all__ = [
    "PROPERTY_SLACK",
    "MEMBERSHIP_TOL",
    "RANK_TOL",
    "FEASIBILITY_TOL",
    "MULTIPLIER_TOL",
    "WITNESS_TOL",
]

# Slack for operator inequality predicates (firm nonexpansiveness,
# nonexpansiveness, quasi-nonexpansiveness): residual >= -PROPERTY_SLACK.
PROPERTY_SLACK = 1e-10

# Tighter bound for set membership, projection idempotence, fixed-point
# tests and weight sums.
MEMBERSHIP_TOL = 1e-12

# Singular-value cutoff for rank decisions (affine constraint rows).
RANK_TOL = 1e-10

# Constraint residual allowed when the oracle tests feasibility.
FEASIBILITY_TOL = 1e-10

# KKT multiplier nonnegativity slack in the enumeration oracle.
MULTIPLIER_TOL = 1e-10

# Fixed-point residual allowed for a certified witness of the common
# fixed-point set.
WITNESS_TOL = 1e-8
