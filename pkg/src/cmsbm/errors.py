"""Error taxonomy shared by all toolkit modules."""


class CmsbmError(Exception):
    """Base class for all toolkit errors."""


class InvalidParams(CmsbmError):
    """A model-parameter invariant is violated; the message names the first
    offending constraint."""


class IndexOutOfRange(CmsbmError, IndexError):
    """A layer or vertex index is outside the valid range."""


class InfeasibleSize(CmsbmError):
    """The requested computation cannot be embedded (e.g. n too small for the
    requested cycle length)."""


class BudgetExceeded(CmsbmError):
    """An enumeration or operation-count budget was exceeded; the message
    carries the estimated cost."""


class PartitionBudgetExceeded(BudgetExceeded):
    """The set-partition count needed by the transfer backend grows too fast
    (Bell numbers); raised for cycle/path lengths above the supported range."""


class NoConvergence(CmsbmError):
    """An iterative solver exhausted its budget without meeting tolerance."""


class Infeasible(CmsbmError):
    """A constraint set is provably empty (e.g. correlation floor > 1)."""


class MissingTruth(CmsbmError):
    """A metric that needs the latent ground truth was called on an
    observation that has none."""


class DominanceViolated(CmsbmError):
    """The moment-dominance suite found a query where the sign-vector moment
    exceeds the Gaussian moment; indicates an implementation bug."""


class SchemaMismatch(CmsbmError):
    """A CSV/plan file does not match the expected schema."""
