"""
Error Hierarchy
Exceptions raised by the library; the CLI maps each one to an exit code
"""


class BellMeasurementError(Exception):
    """Base class for all errors raised by this package"""

    exit_code = 1


class ConstructionError(BellMeasurementError):
    """Invalid ancilla parameters or a malformed polynomial"""

    exit_code = 2


class DimensionError(BellMeasurementError):
    """Mode-count or photon-count mismatch between two objects"""

    exit_code = 2


class PairingError(BellMeasurementError):
    """Ancilla modes cannot be grouped into (H, V) rails"""

    exit_code = 2


class NotUnitaryError(BellMeasurementError):
    """Matrix deviates from unitarity beyond the configured tolerance"""

    exit_code = 2


class ConfigError(BellMeasurementError):
    """Configuration file could not be parsed or failed validation"""

    exit_code = 2


class ResourceLimitError(BellMeasurementError):
    """A computation was refused because it would exceed a configured ceiling"""

    exit_code = 3


IO_EXIT_CODE = 4
