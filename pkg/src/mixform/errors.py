"""Exception hierarchy shared by the library and the command line."""


class MixformError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(MixformError, ValueError):
    """Physical parameters violate their invariants."""


class NumericInputError(MixformError, ValueError):
    """A numeric input is NaN or infinite."""


class ScenarioError(MixformError, ValueError):
    """A scenario (or scenario file) failed validation."""


class AssumptionViolation(ScenarioError):
    """A passive-active arm does not start from rest."""


class BranchDomainError(ScenarioError):
    """Initial actuated angle of a passive-active arm lies outside [-pi, pi]."""


class DivergenceError(MixformError, FloatingPointError):
    """The integrated state became non-finite.

    ``agent`` is the zero-based index of the first offending agent and
    ``time`` the simulation time of the step that produced it.
    """

    def __init__(self, agent, time):
        self.agent = agent
        self.time = time
        super().__init__(
            f"non-finite state for agent {agent + 1} at t={time:.6g} s"
        )
