//! Home of the `acceptance` test target (`cargo test -p mzfisher-validation`).
//!
//! Kept as its own package so that a failing verdict never stops the unit
//! and integration tests of the other crates from running: cargo executes
//! test binaries package by package and halts at the first failure.
