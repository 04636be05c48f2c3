"""Exception types shared across the package.

Two families matter operationally: configuration/validation problems
(rejected before any numerics run) and numerical-guard failures (detected
mid-run).  The CLI maps them to distinct exit codes.
"""


class BohmlabError(Exception):
    """Base class for all package-specific errors."""


class GridSpecError(BohmlabError):
    """Invalid grid construction parameters."""


class ResolutionError(BohmlabError):
    """A state cannot be represented on the grid without aliasing.

    The message names the violated bound so configs can be fixed directly.
    """


class GridMismatchError(BohmlabError):
    """Two fields that must share a grid do not."""


class SchemeError(BohmlabError):
    """Propagation scheme incompatible with the grid or potential."""


class CommensurabilityError(BohmlabError):
    """A requested time is not an integer multiple of the step size."""


class ConfigValidationError(BohmlabError):
    """A config file violates the schema or a guard.

    ``path`` is the dotted key path of the offending entry.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class NumericalGuardError(BohmlabError):
    """A runtime numerical guard tripped mid-computation."""


class TrajectoryExitError(NumericalGuardError):
    """A trajectory left the grid (possible only through numerical error
    in bounded domains, or an undersized domain for free runs)."""

    def __init__(self, trajectory_id, t, q):
        self.trajectory_id = trajectory_id
        self.t = t
        self.q = q
        super().__init__(
            f"trajectory {trajectory_id} exited the grid at t={t} (q={q})"
        )


class FragmentedStateError(NumericalGuardError):
    """Branch decomposition found implausibly many components."""
