"""Offline figure generation for mfl experiment outputs.

Reads only the documented artifact formats (trace CSVs with header
``step,tau,G,H,F,wall_ms`` and whitespace snapshot files); deliberately
has no in-process dependency on the simulation package, so figures can be
rebuilt from archived outputs alone.
"""

from .io import ParticleCloud, TraceTable, read_particle_snapshot, read_trace_csv
from .render import assemble_curve, normalize_end_at_one, render
from .spec import PlotSpec, load_plot_spec

__version__ = "0.1.0"
