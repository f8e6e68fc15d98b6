# Copyright (C) 2025-2026 The ksflow developers
#
# This file is part of ksflow
#
# It is subject to the license terms in the LICENSE file found in the top-level
# directory of this distribution.
#
# No part of ksflow, including this file, may be copied, modified,
# propagated, or distributed except according to the terms contained in the
# LICENSE file.

# snapshot format
SNAPSHOT_MAGIC = b"KSFLOW-SNAPSHOT\n"
SNAPSHOT_FORMAT_VERSION = 1
SNAPSHOT_LAYOUT_SYMMETRIC = "symmetric"
SNAPSHOT_LAYOUT_GENERAL = "general"
SNAPSHOT_SUFFIX = ".ksnap"

# exit codes of the command line front end
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MONITOR = 3
EXIT_NUMERIC = 4
EXIT_VIOLATION = 5

# columns of the monitored norm series, in file order
NORM_SERIES_COLUMNS = (
    "t",
    "trace",
    "energy",
    "hs_norm",
    "W1",
    "W2",
    "L2r_Linf_c",
    "gamma_inf",
    "boundary_mass",
    "scat_residual",
    "commut_residual",
)

CSV_FLOAT_FORMAT = "{:.17g}"

# grids
SUPPORTED_DIMENSIONS = (1, 2, 3)
MIN_POINTS_PER_AXIS = 8

# numerical tolerances
DENSITY_NEGATIVE_TOL = 1e-10
REG_FLOOR = 1e-12
SINGULAR_DROP_TOL = 1e-14
BOUNDARY_FRACTION = 0.25
BOUNDARY_MASS_LIMIT = 1e-6
DIVERGENCE_FACTOR = 10.0
ZERO_SCALE = 1e-14

# exact-inequality slack
INEQUALITY_SLACK = 1e-10
POINTWISE_SLACK = 1e-12
POINTWISE_RHO_CONSTANT = 4.0
STATED_POINTWISE_RHO_CONSTANT = 2.0

# identity tolerances
JACOBI_TOL = 1e-10
JD_TOL = 1e-6
D_DC_TOL = 1e-8
FREE_COMMUTATION_TOL = 1e-8

# exponents
MAX_EXPONENT_DENOMINATOR = 8

# interaction range classes
SHORT_RANGE = "short_range"
CRITICAL = "critical"
LONG_RANGE = "long_range"
RANGE_ORDER = {SHORT_RANGE: 0, CRITICAL: 1, LONG_RANGE: 2}

POTENTIAL_KINDS = ("riesz", "delta", "none")

# decay fits and a-priori monitor
FIT_WINDOW = (5.0, 40.0)
FIT_MIN_SAMPLES = 10
FIT_CONFIDENCE = 0.95
APRIORI_MIN_REFERENCE_TIME = 10.0
APRIORI_RATIO_BOUND = 2.0

# acceptance of a short-range run: relative error of the fitted rates
# against d and d/2, Cauchy window start, final relative residual
DECAY_RATE_TOLERANCE = 0.15
SCATTERING_CAUCHY_START = 5.0
SCATTERING_RESIDUAL_LIMIT = 0.05

# Picard iteration
PICARD_MIN_NODES = 8

# verify suites
SUITES = ("identities", "inequalities", "dynamics-oracles")
RUN_SUITES = ("decay", "scattering", "apriori", "inequalities")
