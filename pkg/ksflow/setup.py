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

import os

# process-wide numerical settings; modules read them through the getters
THREADS = None
RANK_MAX = 64
COMPRESS_TOL = 1e-12

THREADS_ENV_VAR = "KSFLOW_THREADS"


def setup(threads: int = None, rank_max: int = 64, compress_tol: float = 1e-12) -> dict:
    """Sets the worker count, the rank budget and the compression tolerance.

    Returns the resulting settings as a dictionary.
    """
    global THREADS, RANK_MAX, COMPRESS_TOL

    if threads is not None and int(threads) < 1:
        raise ValueError("threads must be a positive integer")
    if int(rank_max) < 1:
        raise ValueError("rank_max must be a positive integer")
    if compress_tol < 0:
        raise ValueError("compress_tol must be non-negative")

    THREADS = None if threads is None else int(threads)
    RANK_MAX = int(rank_max)
    COMPRESS_TOL = float(compress_tol)
    return {
        "threads": get_threads(),
        "rank_max": RANK_MAX,
        "compress_tol": COMPRESS_TOL,
    }


def get_threads() -> int:
    global THREADS
    if THREADS is not None:
        return THREADS
    value = os.environ.get(THREADS_ENV_VAR)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {value!r}")
    return 1


def get_rank_max() -> int:
    global RANK_MAX
    return RANK_MAX


def get_compress_tol() -> float:
    global COMPRESS_TOL
    return COMPRESS_TOL
