"""Shared enumerations used across the cascade lab."""
from enum import Enum


class Phase(Enum):
    """Regions of the (gamma, beta) phase diagram we distinguish."""

    PHASE_I = "phase_i"
    BOUNDARY_I_II = "boundary_i_ii"
    OUTSIDE = "outside"

    @property
    def label(self) -> str:
        if self is Phase.PHASE_I:
            return "phase I"
        if self is Phase.BOUNDARY_I_II:
            return "I/II boundary"
        return "outside phase I"


class SimulationMode(Enum):
    """How a cascade tree is generated."""

    BREADTH = "breadth"
    STREAM = "stream"


class DiameterMode(Enum):
    """Block diameter computation for oscillation brackets."""

    EXACT = "exact"
    BBOX = "bbox"

    @property
    def approximate(self) -> bool:
        return self is DiameterMode.BBOX


class OutputFormat(Enum):
    JSON = "json"
    CSV = "csv"


class ExperimentName(Enum):
    """Experiments the command line can dispatch."""

    CRITICALITY = "criticality"
    MEAN = "mean"
    TAIL_SUP = "tail_sup"
    FOURTH_MOMENT = "fourth_moment"
    BARRIER = "barrier"
    MODULUS = "modulus"
    VARIATION = "variation"
    MANY_TO_ONE = "many_to_one"
    BALLOT = "ballot"
    EXP_SUM = "exp_sum"
    IDENTITIES = "identities"
    SMOOTHING = "smoothing"

    @classmethod
    def allowed_values(cls) -> list[str]:
        return [member.value for member in cls]

    @property
    def needs_boundary(self) -> bool:
        """Experiments whose claims only hold on the I/II boundary."""
        return self in {
            ExperimentName.TAIL_SUP,
            ExperimentName.FOURTH_MOMENT,
            ExperimentName.MODULUS,
            ExperimentName.VARIATION,
        }


class TestFunctionKind(Enum):
    """Families of test functions F for the many-to-one comparison."""

    __test__ = False

    ONE = "one"
    IDENTITY = "identity"
    INDICATOR_ABOVE = "indicator_above"
    EXP_DECAY = "exp_decay"
    POLYNOMIAL = "polynomial"


__all__ = [
    "Phase",
    "SimulationMode",
    "DiameterMode",
    "OutputFormat",
    "ExperimentName",
    "TestFunctionKind",
]
