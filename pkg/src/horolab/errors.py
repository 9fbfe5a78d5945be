"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class HorolabError(Exception):
    exit_code = 1


class RangeError(HorolabError, ValueError):
    exit_code = 2


class DegenerateSegmentError(HorolabError, ValueError):
    exit_code = 2


class WindowError(HorolabError, ValueError):
    exit_code = 2


class IdentityError(HorolabError, ValueError):
    exit_code = 2


class ConstraintError(HorolabError, ValueError):
    exit_code = 2


class StructureError(HorolabError, ValueError):
    exit_code = 2


class ConstructionError(HorolabError):
    exit_code = 2


class CapacityError(HorolabError):
    exit_code = 3

    def __init__(self, message, depth_reached=None):
        super().__init__(message)
        self.depth_reached = depth_reached


class DataError(HorolabError):
    exit_code = 3


class CoverageError(HorolabError):
    exit_code = 3


class BudgetError(HorolabError):
    exit_code = 3


class SchemaError(HorolabError, ValueError):
    exit_code = 4


class MatrixError(SchemaError):
    """A group file names a matrix that is not an orientation preserving isometry."""
