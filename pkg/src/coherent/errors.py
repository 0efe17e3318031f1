"""Exception types raised by the coherent package."""


class ValidationError(ValueError):
    """Input data violates a documented invariant (exit code 2 in the CLI)."""


class MeshFormatError(ValidationError):
    pass


class WatertightError(ValidationError):
    pass


class SceneFormatError(ValidationError):
    pass


class DuplicateIdError(SceneFormatError):
    pass


class MaskError(ValidationError):
    pass


class ImageFormatError(ValidationError):
    pass


class NearPlaneError(ValidationError):
    """A body reaches the camera's near plane and cannot be rendered."""
