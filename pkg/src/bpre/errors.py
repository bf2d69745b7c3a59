"""Exception hierarchy shared across the package.

ContractError maps to CLI exit code 2 (bad inputs, violated preconditions),
BudgetError to exit code 3 (enumeration / population budgets exceeded).
"""


class BpreError(Exception):
    pass


class ContractError(BpreError):
    pass


class BudgetError(BpreError):
    pass


class DegenerateLawError(ContractError):
    pass


class NotSupercriticalError(ContractError):
    pass


class TruncationError(ContractError):
    pass


class PopulationCapError(BudgetError):
    pass
