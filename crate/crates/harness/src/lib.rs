//! Experiment orchestration for the sensing toolkit.
