from pathlib import Path


class PlaneableError(Exception):
    """
    Base class for all errors raised by planeable.
    """

    pass


class DegenerateGeometryError(PlaneableError, ValueError):
    """
    Exception raised when geometry is too degenerate for the requested operation,
    e.g. fitting a plane to collinear points or sampling a zero-area mesh.
    """

    pass


class ResolutionMismatchError(PlaneableError, ValueError):
    """
    Exception raised when a keyframe does not match the resolution of the frames
    already fused into a volume.
    """

    def __init__(
        self, expected: tuple[int, int], actual: tuple[int, int], message: str = ""
    ):
        super().__init__(
            message
            or f"Keyframe resolution {actual} does not match volume resolution {expected}"
        )
        self.expected = expected
        self.actual = actual


class ArchiveFormatError(PlaneableError, ValueError):
    """
    Exception raised when a scene archive file is missing or malformed.
    """

    def __init__(self, path: Path | str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = Path(path)
        self.reason = reason


class MissingPlaneIdError(PlaneableError, ValueError):
    """
    Exception raised when a ground-truth mesh carries no per-vertex plane ids.
    """

    def __init__(self, path: Path | str | None = None):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}mesh has no 'plane_id' vertex property")
        self.path = Path(path) if path is not None else None


class MeshFormatError(PlaneableError, ValueError):
    """
    Exception raised when a mesh file cannot be decoded.
    """

    def __init__(self, path: Path | str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = Path(path)
        self.reason = reason
