"""Shared exception and warning types."""


class EquivarError(Exception):
    """Base class for library errors."""


class NotARotation(EquivarError):
    """Input matrix is not a proper rotation (orthogonal, det +1)."""


class ShapeMismatch(EquivarError):
    """Operands disagree in bandlimit, channel count or grid layout."""


class BandlimitOverflow(EquivarError):
    """Requested degrees exceed the available coefficient tables."""


class NonManifold(EquivarError):
    """Mesh is not an oriented manifold surface."""


class KernelConstraintViolated(EquivarError):
    """Supplied kernel fails its equivariance constraint beyond tolerance."""


class TieDetected(UserWarning):
    """Argmax over the subgroup orbit was not unique; equivariance of the
    vector-field nonlinearity is not guaranteed on this input."""
