"""Exception types shared across the simulator."""


class RegistryConflictError(ValueError):
    """Two states or registries disagree on ports, bins, or mode layout."""


class ZeroNormError(ValueError):
    """Normalization of a state with (numerically) zero norm was requested."""


class PhotonCapError(ValueError):
    """An operation would exceed the configured maximum photon number."""


class NonUnitaryElementError(ValueError):
    """A projective element (polarizer) was used where a unitary is required."""


class PermanentSizeError(ValueError):
    """Permanent requested for a matrix above the supported dimension cap."""


class ConfigError(ValueError):
    """Invalid source, scenario, or sweep configuration."""


class ConventionError(RuntimeError):
    """A gate preset produced results inconsistent with the pinned conventions."""
