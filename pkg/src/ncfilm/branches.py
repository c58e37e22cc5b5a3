"""Solution-branch containers shared by the steady-state solvers.

A Branch is an arclength-ordered list of solution summaries along a
one-parameter family, plus annotations marking the special points found
while tracing it (folds, onset/termination bifurcations, crossings).
"""

from __future__ import annotations

from dataclasses import dataclass, field

ANNOTATION_KINDS = ("primary_bif", "secondary_bif", "fold", "transcritical")


@dataclass(frozen=True)
class BranchPoint:
    """Summary of one converged solution along a branch.

    param is the continuation parameter value (domain length L or rate
    gamma, depending on the run); stability stays None until a spectrum
    pass fills it in.
    """

    param: float
    mean: float
    p_min: float
    p_max: float
    h_min: float
    h_max: float
    stability: bool | None = None
    amplitude: float = 0.0
    p_norm: float = 0.0


@dataclass(frozen=True)
class BranchAnnotation:
    kind: str
    param_value: float
    detail: str = ""

    def __post_init__(self):
        if self.kind not in ANNOTATION_KINDS:
            raise ValueError(f"unknown annotation kind {self.kind!r}")


@dataclass
class Branch:
    """Points ordered by arclength along the family, with annotations."""

    parameter: str
    points: list[BranchPoint] = field(default_factory=list)
    annotations: list[BranchAnnotation] = field(default_factory=list)
    truncated: bool = False

    def params(self) -> list[float]:
        return [p.param for p in self.points]

    def means(self) -> list[float]:
        return [p.mean for p in self.points]
