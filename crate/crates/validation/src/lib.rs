//! Acceptance checks for `distsom-core` live in `tests/acceptance.rs`.
