"""Exception types shared across the package."""


class HypothesisFailure(RuntimeError):
    """A genericity condition for the double Hopf analysis does not hold."""

    def __init__(self, which, detail=""):
        super().__init__(f"{which}: {detail}" if detail else which)
        self.which = which


class NumericalDegeneracy(RuntimeError):
    """A linear solve or classification is too ill-conditioned to trust."""


class SimulationError(RuntimeError):
    """The integrator left the region where the solution is meaningful."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
