"""Exception types shared across the package.

Class names double as the machine-parsable error kinds emitted by the CLI
(`error: <Kind>: <detail>` on a single stderr line), so they stay short and
suffix-free.
"""


class TreeOodError(Exception):
    """Base class for all errors raised by this package."""


# -- hierarchy construction / queries ------------------------------------

class MultipleRoots(TreeOodError):
    pass


class CycleDetected(TreeOodError):
    pass


class DuplicateId(TreeOodError):
    pass


class DanglingParent(TreeOodError):
    pass


class UnknownNode(TreeOodError):
    pass


class NotALeaf(TreeOodError):
    pass


# -- ID/OOD split ---------------------------------------------------------

class InvalidSpec(TreeOodError):
    pass


class EmptyIdTree(TreeOodError):
    pass


# -- probability stacks and conditionals ----------------------------------

class MissingDepth(TreeOodError):
    pass


class MissingLogits(TreeOodError):
    pass


class MissingConditional(TreeOodError):
    pass


class DimensionMismatch(TreeOodError):
    pass


class DegenerateDenominator(UserWarning):
    """Warning (not an error): a conditional denominator underflowed and the
    node's distribution was replaced by a uniform over children + ood."""


# -- metrics ---------------------------------------------------------------

class EmptyClassSet(TreeOodError):
    pass


class NoOodSamplesAtNode(TreeOodError):
    pass


class EmptyClass(TreeOodError):
    pass


# -- synthetic data --------------------------------------------------------

class ConfigInvalid(TreeOodError):
    pass


# -- wire formats ----------------------------------------------------------

class HeaderMismatch(TreeOodError):
    pass


class SampleSetMismatch(TreeOodError):
    pass


class RowSumViolation(TreeOodError):
    pass
