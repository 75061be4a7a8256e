//! CSV ingestion and emission, configuration, console tables and SVG charts.

pub mod config;
pub mod csvio;
pub mod summary;
pub mod svg;

pub use config::{load_slice_file, parse_slice_list, Config};
pub use csvio::{
    curves_from_rows, parse_aux, parse_per_qp, parse_summary, read_aux, read_per_qp, read_summary,
    records_from_summary, rows_from_curves, write_aux, write_per_qp, write_summary, Cell,
    ColumnAliases, PerQpRow, SummaryRow,
};
pub use summary::{
    pct, render_classifications, render_slices, render_summary, summarize, variant_ids,
    VariantSummary,
};
