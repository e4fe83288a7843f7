"""Pre-routing slack estimation from placed netlists.

Parses Liberty, DEF, SDC and SDF/label files, builds a pin-level timing graph,
provides arrival times (labels, external predictions or a built-in
propagator) and estimates endpoint RAT, CRPR-corrected slack, TNS and WNS.
"""

from .arrival import PinTiming, at_from_external, at_from_labels, propagate_at
from .errors import GraphError, LabelError, ParseError, PreslackError, StructuralError
from .graph import TimingGraph, build_graph, compute_levels, prepare_graph, remove_cycles
from .liberty import LibrarySet, Lut, interpolate_lut, lut_lookup, parse_liberty, read_liberty
from .metrics import EvalSummary, evaluate, mae, r2_score
from .physical import PhysicalDesign, parse_def, read_def
from .sdc import SdcConstraints, parse_sdc, read_sdc
from .sdf import DelayLabels, parse_label_sidecar, parse_sdf, read_sdf
from .slack import EndpointResult, SlackReport, analyze, compute_tns_wns, generate_report

__version__ = "0.1.0"
