from typing import Any, Dict, TypeVar

from pydantic import BaseModel, ValidationError

from shadowformer.exceptions import ConfigError

M = TypeVar("M", bound=BaseModel)


def apply_model_fields(model: M, data: Dict[str, Any], section: str = "") -> M:
    """Return a validated copy of a pydantic model with the non-None values of `data` on top.

    Keys the model does not declare are fatal.
    """

    fields = type(model).model_fields
    unknown = sorted(k for k in data if k not in fields)
    if unknown:
        where = f"[{section}] " if section else ""
        raise ConfigError(f"{where}unknown key(s): {', '.join(unknown)}")

    merged = model.model_dump()
    merged.update({k: v for k, v in data.items() if v is not None})
    try:
        return type(model).model_validate(merged)
    except ValidationError as exc:
        where = f"[{section}] " if section else ""
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"{where}{loc}: {first['msg']}") from exc
