from pydantic import BaseModel, ConfigDict, Field


class GradcheckResult(BaseModel):
    """Worst relative error of analytic against central-difference gradients for one op or pipeline."""

    model_config = ConfigDict(frozen=True)

    name: str
    instances: int = Field(..., ge=1)
    max_relative_error: float = Field(..., ge=0.0)
    tolerance: float = Field(..., gt=0.0)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance
