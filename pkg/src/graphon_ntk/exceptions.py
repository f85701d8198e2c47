"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes do not chain (signal width, tap shapes, index sets)."""


class NumericError(FloatingPointError):
    """A non-finite value appeared in an input or an intermediate result."""


class UnsupportedArchitectureError(ValueError):
    """The requested kernel path does not support these weights."""


class ResolutionError(ValueError):
    """Two step kernels live on incompatible grids."""


class IntegrityError(ValueError):
    """A matrix that must be symmetric is not."""


class TrainingError(RuntimeError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")
        self.epoch = epoch
        self.loss = loss


class ConvergenceError(RuntimeError):
    def __init__(self, message, grad_norm):
        super().__init__(f"{message} (last gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


class ParseError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
