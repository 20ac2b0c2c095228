"""Exception types raised across the package."""


class CskinError(Exception):
    """Base class for every error the library raises on bad input."""


class MissingFile(CskinError, FileNotFoundError):
    pass


class ParseError(CskinError, ValueError):
    pass


class EmptyShapeList(CskinError, ValueError):
    pass


class MeshParseError(ParseError):
    pass


class VertexCountMismatch(CskinError, ValueError):
    def __init__(self, file, expected, got):
        self.file = str(file)
        self.expected = expected
        self.got = got
        super().__init__(f"{self.file}: expected {expected} vertices, got {got}")


class DimensionMismatch(CskinError, ValueError):
    pass


class LengthMismatch(DimensionMismatch):
    pass


class IndexOutOfRange(CskinError, IndexError):
    pass


class NonFiniteGradient(CskinError, FloatingPointError):
    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"non-finite gradient at iteration {iteration}")
