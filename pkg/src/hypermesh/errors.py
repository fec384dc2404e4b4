"""Exception types shared across the package."""


class HypermeshError(Exception):
    """Base class for all package errors."""


class ShapeError(HypermeshError):
    """Operands have incompatible shapes."""


class NumericError(HypermeshError):
    """A numeric domain or finiteness contract was violated."""


class ContractError(HypermeshError):
    """An operation precondition (other than shape/domain) was violated."""


class ConfigError(HypermeshError):
    """Invalid, unknown, or missing configuration fields."""


class TopologyError(HypermeshError):
    """Inconsistent mesh topology (upsampler, edges, faces)."""
