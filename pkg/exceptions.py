"""
Exception hierarchy for the n-widths laboratory
"""


class WidthsLabError(ValueError):
    """Base class for every error raised by the laboratory"""


class GridError(WidthsLabError):
    """Grid size is odd or too small"""


class AliasingError(WidthsLabError):
    """Requested frequency cannot be resolved on the grid"""


class GridMismatchError(WidthsLabError):
    """Two signals live on different grids"""


class DimensionMismatchError(WidthsLabError):
    """Vector length does not match the space dimension"""


class SpaceDefinitionError(WidthsLabError):
    """Invalid norm descriptor (weights, facets, exponent)"""


class RegimeError(WidthsLabError):
    """Regime is unclassified or does not match the requested model"""


class FitError(WidthsLabError):
    """Order fit cannot be performed on the given data"""


class CapacityError(WidthsLabError):
    """Sweep asks for more modes than the grid resolves"""


class DependentBasisError(WidthsLabError):
    """Approximating functionals are linearly dependent"""


class ExtensionCoverageError(WidthsLabError):
    """Dual sample misses a vertex of a polytope dual ball"""


class ScenarioError(WidthsLabError):
    """Scenario configuration is missing keys or violates preconditions"""


class OutputExistsError(WidthsLabError):
    """Output file exists and overwriting was not requested"""
