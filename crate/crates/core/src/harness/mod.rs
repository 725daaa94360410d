//! Experiment orchestration: evaluation campaigns, learning-curve
//! post-processing, field and posterior dumps, and the on-disk formats.

mod config;
mod curve;
mod dump;
mod eval;
mod io;
mod starts;

pub use config::ExperimentConfig;
pub use curve::{parse_raw_curve, postprocess_curve, raw_curve_csv, smoothed_curve_csv, CurvePoint};
pub use dump::{dump_field, dump_posterior, field_csv, posterior_csv, DensityRow, FieldCell};
pub use eval::{evaluate, summarize, EvalConfig, EvalReport, StartReport};
pub use io::{
    default_grid_path, load_policy, parse_path, parse_policy, parse_qtable, parse_records, path_text, qtable_text,
    records_text, DEFAULT_GRID_PATH,
};
pub use starts::{canonical_starts, CanonicalStarts, StartSpec};
