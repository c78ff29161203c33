class SymcoreError(Exception):
    pass


class UnbalancedIndices(SymcoreError):
    """A term's free indices differ from the rest of the expression, or an
    index symbol occurs more than twice in one product."""


class NotAFunctional(SymcoreError):
    pass
