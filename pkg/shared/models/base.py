from pydantic import BaseModel, ConfigDict


class FrozenModel(BaseModel):
    """Immutable value object; safe to share between worker threads."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class ArrayModel(BaseModel):
    """Model that carries numpy arrays as fields."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
