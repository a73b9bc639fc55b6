"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor or series extents do not line up."""


class NumericError(ArithmeticError):
    """Non-finite values or numeric breakdown."""


class DomainError(ValueError):
    """Value outside the supported domain."""


class DegenerateDataError(ValueError):
    """Data has no usable spread (zero range or zero IQR)."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class ModelFormatError(ValueError):
    """Model file is corrupt or not a model file."""


class ModelVersionError(ModelFormatError):
    """Model file written under an unsupported format version."""


class ProjectionError(RuntimeError):
    """Conditioning on a value whose probability is below the floor."""

    def __init__(self, site: int, prob: float):
        super().__init__(
            f"near-zero probability {prob:.3e} while conditioning site {site}"
        )
        self.site = site
        self.prob = prob
