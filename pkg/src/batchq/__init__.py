def partitions(l, partition_size):
    """
    >>> list(partitions([], 10))
    []
    >>> list(partitions([1,2,3,4,5], 1))
    [[1], [2], [3], [4], [5]]
    >>> list(partitions([1,2,3,4,5], 2))
    [[1, 2], [3, 4], [5]]
    >>> list(partitions([1,2,3,4,5], 5))
    [[1, 2, 3, 4, 5]]

    :param list l: List to be partitioned
    :param int partition_size: Size of partitions
    """
    for i in range(0, len(l), partition_size):
        yield l[i:i + partition_size]


class UserError(Exception):
    pass


class ConfigError(UserError):
    """Invalid scenario configuration or command-line arguments."""
    pass


class TraceParseError(UserError):
    """A trace file could not be parsed."""
    pass


class HypothesisError(Exception):
    """
    Raised when an operation is asked to run outside the hypotheses it is stated for, e.g. a
    coupling over servers whose service times are not NBU.
    """
    pass


class IncompleteTraceError(ValueError):
    pass


def require(expression, message, *args):
    """
    Raises a UserError if expression is false.

    >>> require(True, 'never raised')
    >>> require(1 > 2, 'expected %i > %i', 1, 2)
    Traceback (most recent call last):
    ...
    batchq.UserError: expected 1 > 2

    :param bool expression: Condition that must hold
    :param str message: Message, %-formatted with args
    """
    if not expression:
        raise UserError(message % args if args else message)
