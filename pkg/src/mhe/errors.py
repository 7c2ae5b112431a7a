"""Exception types shared across the package.

Every error carries a ``kind`` string so the command-line front end can emit
structured error records without a lookup table.
"""

from __future__ import annotations


class MHEError(Exception):
    """Base class for all package errors."""

    kind = "MHEError"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": str(self)}


class ZeroNormNeuron(MHEError):
    kind = "ZeroNormNeuron"

    def __init__(self, index: int):
        super().__init__(f"neuron {index} has (near) zero norm")
        self.index = int(index)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "index": self.index}


class NonFiniteEnergy(MHEError):
    kind = "NonFiniteEnergy"


class GeodesicWithBeta(MHEError):
    kind = "GeodesicWithBeta"


class HalfSpaceOnOutput(MHEError):
    kind = "HalfSpaceOnOutput"


class BatchTooSmall(MHEError):
    kind = "BatchTooSmall"


class LabelOutOfRange(MHEError):
    kind = "LabelOutOfRange"


class InvalidRegime(MHEError):
    kind = "InvalidRegime"


class DimensionMismatch(MHEError):
    kind = "DimensionMismatch"


class InvalidConfig(MHEError, ValueError):
    """A parameter record violates its invariants."""

    kind = "InvalidConfig"


class ConfigParse(MHEError):
    kind = "ConfigParse"
