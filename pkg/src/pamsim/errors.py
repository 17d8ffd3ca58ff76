"""Exception types shared across the simulator and analysis modules."""


class PamsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PamsimError):
    """Malformed configuration file or invalid parameter value."""


class InvalidStateError(PamsimError):
    """A state or command contains non-finite or out-of-range values."""


class DomainError(PamsimError):
    """An operation was called outside its admissible input domain."""


class IntegrationDivergedError(PamsimError):
    """The integrator produced a non-finite state; the session is halted."""


class DesignError(PamsimError):
    """An excitation design violates bin alignment or count constraints."""


class DegenerateExcitationError(PamsimError):
    """The averaged input spectrum vanishes on an excited line."""


class InsufficientRealizationsError(PamsimError):
    """Fewer than two FRF realizations were supplied."""


class InsufficientDataError(PamsimError):
    """Fewer episodes than the moving-statistics window."""


class NoContactError(PamsimError):
    """An impact run never reached the probe within its time budget."""


class SessionError(PamsimError):
    """A measurement session failed mid-way (e.g. transport timeout)."""
