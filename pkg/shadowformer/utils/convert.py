import math
from typing import Any, List, Optional, Tuple


def _text(value: Any) -> Optional[str]:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def to_int(value: Any, default: Optional[int] = None) -> Optional[int]:
    """Base-10 integer from a manifest cell or CLI token; `default` for anything else ("2.5", "x", "")."""

    text = _text(value)
    if text is None:
        return default
    try:
        return int(text, 10)
    except ValueError:
        return default


def to_float(value: Any, default: Optional[float] = None) -> Optional[float]:
    """Finite float from text; nan / inf count as invalid."""

    text = _text(value)
    if text is None:
        return default
    try:
        number = float(text)
    except ValueError:
        return default
    return number if math.isfinite(number) else default


def parse_int_list(text: str) -> List[int]:
    """`"1,2, 4"` -> [1, 2, 4]; raises ValueError on any bad item."""

    items: List[int] = []
    for part in text.split(","):
        if part.strip() == "":
            continue
        value = to_int(part)
        if value is None or str(value) != part.strip().lstrip("+"):
            raise ValueError(f"not an integer: {part.strip()!r}")
        items.append(value)
    return items


def parse_float_list(text: str) -> List[float]:
    items: List[float] = []
    for part in text.split(","):
        if part.strip() == "":
            continue
        value = to_float(part)
        if value is None:
            raise ValueError(f"not a number: {part.strip()!r}")
        items.append(value)
    return items


def parse_point(text: str) -> Tuple[int, int]:
    """`"x,y"` pixel coordinates."""

    values = parse_int_list(text)
    if len(values) != 2:
        raise ValueError(f"expected 'x,y', got {text!r}")
    return values[0], values[1]
