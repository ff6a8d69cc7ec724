class ConfigurationError(ValueError):
    """An experiment or algorithm configuration that cannot be run."""


class CheckpointError(ValueError):
    """A checkpoint file that cannot be parsed.

    ``section`` names the part of the file that was malformed
    (``"magic"``, ``"header"`` or ``"weights"``).
    """

    def __init__(self, section: str, message: str):
        super().__init__(f"[{section}] {message}")
        self.section = section
