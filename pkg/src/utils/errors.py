class AmodError(Exception):
    """Base class of every error raised by the rebalancing suite."""


class ConfigurationError(AmodError, ValueError):
    """Invalid configuration value or combination of values."""


class NetworkError(AmodError, ValueError):
    pass


class NetworkParseError(NetworkError):
    pass


class DanglingEndpointError(NetworkError):
    pass


class NonPositiveLengthError(NetworkError):
    pass


class DisconnectedGraphError(NetworkError):
    pass


class DataError(AmodError, ValueError):
    pass


class HankelLengthError(DataError):
    """Series too short for the requested Hankel depth."""


class LengthMismatchError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class UndefinedMetricError(DataError):
    pass


class MissingCollectedDataError(DataError):
    def __init__(self, path: str):
        super().__init__(
            f"Collected data file '{path}' not found. Upper-layer policies need a "
            f"Hankel data set: run `python main.py collect --config <file>` first."
        )
        self.path = path


class CommandConservationError(AmodError, RuntimeError):
    """Integer command would leave a negative number of vehicles in a region."""


class SolverError(AmodError, RuntimeError):
    """QP result not usable for a control command."""
