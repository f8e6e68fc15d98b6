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

from ksflow.constants import EXIT_CONFIG, EXIT_MONITOR, EXIT_NUMERIC


class KsflowError(Exception):
    """Base class of all errors raised by ksflow."""

    exit_code = 1


class ConfigError(KsflowError, ValueError):
    """Malformed or inadmissible experiment configuration."""

    exit_code = EXIT_CONFIG


class MonitorAlarm(KsflowError, RuntimeError):
    """A runtime monitor (boundary mass) crossed its limit."""

    exit_code = EXIT_MONITOR


class NumericalFailure(KsflowError, FloatingPointError):
    """Non-finite values or a failed numerical procedure."""

    exit_code = EXIT_NUMERIC


class DivergenceError(NumericalFailure):
    """The Picard iteration left its contraction ball."""


class IntegrityError(KsflowError, ValueError):
    """A snapshot failed its checksum or structural checks."""

    exit_code = EXIT_NUMERIC


class RankBudgetExceeded(KsflowError, RuntimeError):
    """An operator kept more terms than the configured rank budget."""

    exit_code = EXIT_NUMERIC


class NegativeDensityError(KsflowError, ValueError):
    """A density dropped below the negative tolerance."""

    exit_code = EXIT_NUMERIC


class GridMismatchError(KsflowError, ValueError):
    """Operands live on different grids."""
