"""Exception hierarchy shared by every module."""


class GibbsError(Exception):
    """Base class for all errors raised by gibbslab."""


class ModelError(GibbsError, ValueError):
    """A model, volume or configuration violates a structural invariant."""


class PartitionFunctionError(GibbsError, ValueError):
    """No admissible configuration: the partition function is zero."""


class StateSpaceTooLarge(GibbsError):
    """An enumeration would exceed the configured state cap."""


class SpaceMismatch(GibbsError, ValueError):
    """Two objects were expected to live on the same configuration space."""


class CouplingError(GibbsError, ValueError):
    """A joint table fails the coupling invariants."""
