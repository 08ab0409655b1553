"""
Error hierarchy for the MDFC solver.
Every failure raised by the library derives from MDFCError so callers (and the CLI)
can catch one type and still inspect the structured attributes of the subclass.
"""

from typing import Optional, Sequence


class MDFCError(Exception):
    """Base class for all solver errors."""


class ConfigError(MDFCError):
    """Invalid user configuration (case file, CLI arguments, environment)."""


# Mesh construction

class EmptyDomain(MDFCError):
    """The requested resolution produces no cells."""


class NonConformingFracture(MDFCError):
    """A fracture segment is not representable on the lattice."""

    def __init__(self, message: str, segment: Optional[int] = None):
        super().__init__(message)
        self.segment = segment


class ParseError(MDFCError):
    """Malformed mesh or case file."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())
        self.line = line
        self.path = path


class TopologyError(MDFCError):
    """Fracture faces do not form admissible chains."""


# Mortar coupling

class GeometryMismatch(MDFCError):
    """Trace supports and mortar cells do not cover the same interface."""

    def __init__(self, message: str, interface: Optional[int] = None):
        super().__init__(message)
        self.interface = interface


class DegenerateKappaPerp(MDFCError):
    """Normal permeability must be strictly positive on every interface."""

    def __init__(self, message: str, interfaces: Sequence[int] = ()):
        super().__init__(message)
        self.interfaces = tuple(interfaces)


class InterfaceMismatch(MDFCError):
    """Two solutions are defined on different interface sets."""


# Discretization

class ZeroDistance(MDFCError):
    """A cell center coincides with one of its face centers."""

    def __init__(self, message: str, cell: Optional[int] = None, face: Optional[int] = None):
        super().__init__(message)
        self.cell = cell
        self.face = face


class NonSimplicialGrid(MDFCError):
    """The method needs triangles (2D) or segments (1D)."""


class IncompatibleData(MDFCError):
    """Pure-Neumann problem with loads that do not sum to zero."""

    def __init__(self, message: str, imbalance: float = 0.0):
        super().__init__(message)
        self.imbalance = imbalance


# Assembly and solution

class NestedBlockingDomains(MDFCError):
    """A blocking subdomain has a blocking up-neighbor, or an intersection sees only blocking branches."""

    def __init__(self, message: str, subdomains: Sequence[int] = ()):
        super().__init__(message)
        self.subdomains = tuple(subdomains)


class MissingOperator(MDFCError):
    """No discretization was assembled for a subdomain."""

    def __init__(self, subdomain: int):
        super().__init__(f"no operator for subdomain {subdomain}")
        self.subdomain = subdomain


class MissingProjection(MDFCError):
    """No projection pair was assembled for an interface."""

    def __init__(self, interface: int):
        super().__init__(f"no projection for interface {interface}")
        self.interface = interface


class SingularSystem(MDFCError):
    """The coupled system could not be solved to the required residual."""


# Linear algebra kernel

class SingularMatrix(MDFCError):
    """Zero pivot encountered during factorization."""

    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


class NoConvergence(MDFCError):
    """An iterative eigen solver did not reach its tolerance."""

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations
