"""Exception types shared across the package."""


class ConsensusError(Exception):
    pass


class NoSpanningTree(ConsensusError, ValueError):
    """The digraph has no root from which every agent can be reached."""


class NotStronglyConnected(ConsensusError, ValueError):
    """A Laplacian (or block) whose zero eigenvalue is not simple."""


class InvalidParameters(ConsensusError, ValueError):
    """Protocol parameters fail the convergence conditions."""

    def __init__(self, report):
        self.report = report
        super().__init__(report.summary())


class NonFiniteState(ConsensusError, ArithmeticError):
    pass
