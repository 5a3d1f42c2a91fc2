//! Scenario files, the seeded scenario generator and the theorem suite.

mod generate;
mod scenario;
mod suite;

pub use generate::random_scenario;
pub use scenario::{
    fmt_real, parse_check_list, parse_scenario, CheckId, EmbeddingSpec, ExpectationSpec, Scenario,
    ToleranceOverrides, SCHEMA_VERSION,
};
pub use suite::{
    aggregate, block_vector_json, element_json, minimal_projections, pure_state_extensions, run_batch,
    run_suite, BatchReport, CheckRecord, Environment, RunOptions, Status, SuiteReport, CONSTANT_TOL,
    DEFAULT_KADISON_SAMPLES, DEFAULT_PIMSNER_SAMPLES, DEFAULT_RESTARTS, DEFAULT_TOWER_LEVELS, DILATION_TOL,
    IDENTITY_TOL, POINTWISE_TOL,
};

#[cfg(test)]
mod tests;
