class ConfigurationError(ValueError):
    """Invalid lattice, scheme or run configuration."""


class NumericalBreakdown(RuntimeError):
    """Non-finite or non-positive state detected during time stepping."""

    def __init__(self, message: str, step: int | None = None, cell: tuple[int, ...] | None = None):
        super().__init__(message)
        self.step = step
        self.cell = cell

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg += f" (step {self.step}"
            msg += f", cell {self.cell})" if self.cell is not None else ")"
        return msg
