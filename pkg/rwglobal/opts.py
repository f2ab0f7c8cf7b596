import dataclasses
import os

# Tolerances used by residual checks unless overridden.
DEFAULT_TOLERANCE = float(os.environ.get("RWGLOBAL_TOLERANCE", "1e-9"))
DROP_TOLERANCE = 1e-13


def default_output_dir():
    return os.environ.get("RWGLOBAL_OUTPUT_DIR", ".")


@dataclasses.dataclass(frozen=True)
class ConventionFlags:
    """
    Normalisation conventions which are not fixed by the geometry.

    atiyah_half:
        The quadratic antiholomorphic coefficient of the Grothendieck
        connection is reported against 1/2 of the Atiyah tensor. When
        False, the reference is the full Atiyah tensor and the factor two
        discrepancy shows up in the report.

    redef_R:
        Reported Taylor tensors R_k are rescaled by (k+1)! so that the
        pairing <R_k y^k, y> carries the 1/(k+1)! of the split action.
    """
    atiyah_half: bool = True
    redef_R: bool = False

    def to_dict(self):
        return dataclasses.asdict(self)
