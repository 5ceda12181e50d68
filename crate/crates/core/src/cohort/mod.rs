//! Cohort ingestion, description and synthesis.

mod csv_io;
mod report;
mod synth;

pub use csv_io::{
    load_cohort, read_cohort, read_patients, save_cohort, write_cohort, CohortSchema, LoadedCohort, LoadedPatients,
    Rejection, MIN_ER_PERCENT,
};
pub use report::{describe_cohort, CategoryRow, CohortReport};
pub use synth::{synth_cohort, Band, CohortMarginals, FeatureMarginal, LinkModel};
