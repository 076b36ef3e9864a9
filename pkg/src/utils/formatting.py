"""Value formatting shared by tool observations, answers and fixtures."""
import math
import re
from datetime import date, datetime

import numpy as np
import pandas as pd

GUID_PATTERN = re.compile(r"[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}")
FILENAME_PATTERN = re.compile(
    r"[\w\-.]+\.(?:csv|geojson|json|shp|dbf|shx|asc|legend|ppm|png|txt)\b", re.IGNORECASE
)
NUMERAL_PATTERN = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?")

SIGNIFICANT_DIGITS = 8


def is_null(value):
    """True for None, NaN and NaT."""
    if value is None:
        return True
    try:
        return bool(pd.isna(value))
    except (TypeError, ValueError):
        return False


def format_number(value):
    """Format a number with 8 significant digits and no exponent notation."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    text = f"{value:.{SIGNIFICANT_DIGITS}g}"
    if "e" in text:
        text = f"{value:.12f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def format_value(value, resolution=None):
    """Format a typed cell for display; nulls render as ``null``."""
    if is_null(value):
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (pd.Timestamp, datetime, date)):
        stamp = pd.Timestamp(value)
        if resolution == "year":
            return f"{stamp.year:04d}"
        if resolution == "month":
            return f"{stamp.year:04d}-{stamp.month:02d}"
        return stamp.strftime("%Y-%m-%d")
    if isinstance(value, (int, float, np.integer, np.floating)):
        return format_number(value)
    return str(value)


def format_percentage(value):
    """Format a fraction as a percentage string."""
    return f"{format_number(round(value * 100, 4))}%"


def strip_references(text):
    """Remove GUIDs and file names so their digits are not read as numerals."""
    text = FILENAME_PATTERN.sub(" ", text)
    return GUID_PATTERN.sub(" ", text)


def extract_numerals(text):
    """Return the numeric literals of ``text`` as floats."""
    return [float(token) for token in NUMERAL_PATTERN.findall(strip_references(text))]


def extract_filenames(text):
    return FILENAME_PATTERN.findall(text)


def numerals_grounded(answer, evidence, rel_tol=1e-6):
    """Return the numerals of ``answer`` that appear nowhere in ``evidence``.

    Values compare by magnitude at display precision.
    """
    known = sorted({abs(v) for v in evidence})
    missing = []
    for value in extract_numerals(answer):
        target = abs(value)
        if not any(math.isclose(target, k, rel_tol=rel_tol, abs_tol=1e-9) for k in known):
            missing.append(value)
    return missing
