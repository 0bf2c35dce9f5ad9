"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Shapes, dimensions or grids do not fit together."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class NumericalError(ArithmeticError):
    """A non-finite value appeared during an evaluation.

    ``cell_index`` is the flat index of the first offending cell, when known.
    """

    def __init__(self, message, cell_index=None):
        super().__init__(message)
        self.cell_index = cell_index


class ConstructionError(ValueError):
    """A model could not be built with the requested parameters."""
