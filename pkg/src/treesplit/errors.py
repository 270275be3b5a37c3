class TreesplitError(Exception):
    """Base class for all errors raised by treesplit."""


class DisconnectedInput(TreesplitError):
    pass


class NotSimplyConnected(TreesplitError):
    pass


class NotSpanningTree(TreesplitError):
    pass


class CrossRegionPath(TreesplitError):
    pass


class NoTargetReachable(TreesplitError):
    pass


class NotAnEdgeQCenter(TreesplitError):
    pass


class TooSmall(TreesplitError):
    pass


class TooLarge(TreesplitError):
    pass


class QTooLarge(TreesplitError):
    pass


class InfeasibleBalance(TreesplitError):
    pass


class BadInput(TreesplitError):
    pass
