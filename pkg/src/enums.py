from enum import Enum, IntEnum, auto


class Side(Enum):
    """
    Enum for the two wings of the experiment.
    """
    ALICE = "alice"
    BOB = "bob"


class ConditioningKind(Enum):
    """
    Enum to store the different kinds of hidden-variable conditioning.
    """
    UNCONDITIONED = auto()
    ON_ALICE_SETTING = auto()
    ON_BOB_SETTING = auto()


class QuadratureMethod(Enum):
    """
    Enum to store the available integration rules.
    """
    COMPOSITE_SIMPSON = "composite-simpson"
    ADAPTIVE = "adaptive"


class ScanParameter(Enum):
    """
    Enum to store the settings a scan can sweep.
    """
    A1 = "a1"
    A2 = "a2"
    B1 = "b1"
    B2 = "b2"
    ROTATION = "rotation"


class ExitCode(IntEnum):
    """
    Enum to store the process exit codes of the command line.
    """
    OK = 0
    INPUT_ERROR = 1
    MODEL_ERROR = 2


class Stream(IntEnum):
    """
    Enum to store the RNG substream of each random quantity.
    """
    SETTING_PAIRS = 0
    LAMBDA = 1
