"""PNG figure rendering for tscore result files."""

from .io import GridTable, SchemaError, read_grid_csv, read_records_jsonl, read_sweep_csv
from .render import render_auc_box, render_heatmap, render_sweep

__version__ = "0.1.0"
