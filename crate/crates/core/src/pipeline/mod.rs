//! End-to-end coreset construction, weighted EM and the size-versus-error
//! experiment.

pub mod coreset;
pub mod em;
pub mod experiment;
pub mod io;
pub mod synth;
pub mod uniform;

pub use coreset::{gmm_sensitivities, kgmm_coreset, sample_with_sensitivities, KgmmConfig, KgmmCoreset, KgmmReducer, SchemeChoice};
pub use em::{em_fit_weighted, EmConfig, EmFit};
pub use experiment::{run_experiment, run_on, write_report, CellResult, ExperimentConfig, FitReport, SchemeName, SummaryRow};
pub use io::{read_points_csv, write_points_csv};
pub use synth::{sample_gmm, synthesize, SynthConfig, Synthetic};
pub use uniform::uniform_baseline;
