"""Error types raised across the pipeline.

Everything derives from ValueError so callers that don't care about the
specific failure can catch one base class.
"""


class TatedocError(ValueError):
    """Base class for all library-specific errors."""


class EmptyResult(TatedocError):
    """An operation would produce a zero-sized result (e.g. over-downsampling)."""


class DegenerateContour(TatedocError):
    """Contour points are collinear or too few to circumscribe."""


class SingularFit(TatedocError):
    """Affine fit or inversion is singular."""


class NoPageFrame(TatedocError):
    """No plausible page frame found on a scan."""


class EmptyRegion(TatedocError):
    """A region crop contains no ink."""


class HierarchyViolation(TatedocError):
    """A child rect lies outside its parent beyond tolerance."""


class InsufficientCorpus(TatedocError):
    """Too few pages to compute corpus statistics."""


class BadCorrection(TatedocError):
    """A correction references a missing page/element or breaks the tree."""


class InfeasibleSpec(TatedocError):
    """A synthetic page spec cannot be laid out within its page."""


class ParseError(TatedocError):
    """Malformed input file (JSON, manifest, corrections, config)."""
