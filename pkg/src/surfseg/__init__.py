"""Multi-object multi-surface graph segmentation with learned costs and
interactive editing."""

__version__ = "0.1.0"

from .graph import ColumnGraph, GraphParams            # noqa: F401
from .maxflow import FlowError, FlowState, SurfaceSolution, build_flow  # noqa: F401
from .volume import Phantom, PhantomSpec, Volume3, make_phantom  # noqa: F401
