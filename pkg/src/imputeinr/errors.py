class ImputeINRError(Exception):
    """Base class for all package errors."""


class ParseError(ImputeINRError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class EmptyDataError(ImputeINRError):
    pass


class WindowTooLarge(ImputeINRError):
    pass


class ShapeError(ImputeINRError, ValueError):
    pass


class PatchError(ImputeINRError, ValueError):
    pass


class EmptyMaskSet(ImputeINRError, ValueError):
    pass


class NumericsError(ImputeINRError, ArithmeticError):
    def __init__(self, message, epoch=None, window=None):
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if window is not None:
            where.append(f"window {window}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))
        self.epoch = epoch
        self.window = window


class CheckpointError(ImputeINRError):
    pass
