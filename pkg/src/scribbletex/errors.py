"""Exception hierarchy shared across the engine."""


class ScribbleTexError(Exception):
    """Base class for all engine errors."""


# --- mesh / asset loading ---

class MeshLoadError(ScribbleTexError):
    pass


class MissingUVs(MeshLoadError):
    pass


class NonTriangleFace(MeshLoadError):
    pass


class MultiAtlasUnsupported(MeshLoadError):
    pass


class CorruptImage(MeshLoadError):
    pass


# --- scribble handling ---

class EmptyScribble(ScribbleTexError):
    pass


class EmptyMask(ScribbleTexError):
    pass


# --- model backends ---

class BackendError(ScribbleTexError):
    """Base for backend failures; carries the raw payload when available."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class BackendTimeout(BackendError):
    pass


class AuthFailure(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class EmptyPrompt(BackendError):
    pass


class SegmentationBackendError(BackendError):
    """Segmentation failed mid-refinement; ``trace`` holds completed steps."""

    def __init__(self, message, payload=None, trace=None):
        super().__init__(message, payload)
        self.trace = trace


class InpaintBackendError(BackendError):
    pass


# --- intent / texturing ---

class NoCandidate(ScribbleTexError):
    pass


class PatchLargerThanRegion(ScribbleTexError):
    pass


class OverlappingRegions(ScribbleTexError):
    pass
