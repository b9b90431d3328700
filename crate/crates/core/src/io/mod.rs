//! File formats: datasets, model files and study tables.
//!
//! Every CSV written here is header-first and comma-separated, with `NA` for
//! missing values and Rust's shortest round-trip float formatting.

mod dataset;
mod model;
mod study;

pub use dataset::{load_csv, read_csv, write_csv, write_dataset, write_matrix_csv};
pub use model::{load_model, parse_model, save_model, ModelFile, MODEL_FORMAT_VERSION};
pub use study::{read_records, write_records, write_summary};

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub(crate) fn is_na(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}
