class VRGAError(Exception):
    pass


class NotAMotorError(VRGAError, ValueError):
    pass


class RecordingFormatError(VRGAError, ValueError):
    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number
        if path is not None:
            location = str(path) if line_number is None else f"{path}:{line_number}"
            message = f"{location}: {message}"
        super().__init__(message)


class SessionExistsError(VRGAError, FileExistsError):
    pass


class RecordingClosedError(VRGAError, RuntimeError):
    pass


class UnknownPlayerError(VRGAError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InteractionError(VRGAError, ValueError):
    pass


class GridMismatchError(VRGAError, ValueError):
    pass


class MissingSkipError(VRGAError, ValueError):
    pass
