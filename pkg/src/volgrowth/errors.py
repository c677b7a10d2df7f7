"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument fell outside the mathematical domain of an operation."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class ScenarioError(ValueError):
    """A scenario document failed validation.

    Collects every violation instead of stopping at the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario: " + "; ".join(self.problems))
