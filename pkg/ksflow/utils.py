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

import hashlib
from typing import Iterable, List, Union

import numpy as np
from sympy import Rational

from ksflow.constants import CSV_FLOAT_FORMAT, MAX_EXPONENT_DENOMINATOR
from ksflow.errors import NumericalFailure


def parse_rational(value: Union[str, int, float, Rational], what: str = "exponent") -> Rational:
    """Parses an exact rational such as '2', '3/2' or '0.5'.

    Denominators above MAX_EXPONENT_DENOMINATOR are rejected.
    """
    if isinstance(value, Rational):
        number = value
    elif isinstance(value, (int, np.integer)):
        number = Rational(int(value))
    elif isinstance(value, (float, np.floating)):
        number = Rational(float(value)).limit_denominator(10 ** 6)
        if abs(float(number) - float(value)) > 1e-12:
            raise ValueError(f"{what} is not a rational number: {value!r}")
    elif isinstance(value, str):
        text = value.strip()
        if not text:
            raise ValueError(f"empty {what}")
        try:
            number = Rational(text)
        except (TypeError, ValueError, SyntaxError):
            raise ValueError(f"{what} is not a rational number: {value!r}")
    else:
        raise TypeError(f"{what} must be a string or a number")

    if not number.is_Rational:
        raise ValueError(f"{what} is not a rational number: {value!r}")
    if number.q > MAX_EXPONENT_DENOMINATOR:
        raise ValueError(
            f"{what} {number} has denominator {number.q} > {MAX_EXPONENT_DENOMINATOR}"
        )
    return number


def format_float(value: float) -> str:
    """Round-trip safe text form of a float."""
    return CSV_FLOAT_FORMAT.format(float(value))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def dyadic_times(t_first: float, t_final: float) -> List[float]:
    """Returns t_first * 2**k for all k with the value not exceeding t_final."""
    if t_first <= 0:
        raise ValueError("dyadic start time must be positive")
    times = []
    t = float(t_first)
    while t <= t_final * (1 + 1e-12):
        times.append(t)
        t *= 2.0
    return times


def ensure_finite(values: np.ndarray, what: str) -> np.ndarray:
    """Raises NumericalFailure if values contain NaN or infinities."""
    if not np.all(np.isfinite(values)):
        raise NumericalFailure(f"non-finite values in {what}")
    return values


def relative_difference(a: float, b: float, floor: float = 1e-14) -> float:
    """|a - b| normalised by the larger magnitude, absolute below floor."""
    scale = max(abs(a), abs(b))
    if scale < floor:
        return abs(a - b)
    return abs(a - b) / scale


def parse_list(text: str) -> List[str]:
    """Splits a comma separated config value."""
    return [item.strip() for item in text.split(",") if item.strip()]


def join_list(items: Iterable[str]) -> str:
    return ", ".join(items)
