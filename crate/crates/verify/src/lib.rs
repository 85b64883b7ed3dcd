//! Acceptance suite for `couette`, kept in its own package so that the slow
//! full-lattice criteria in `tests/acceptance.rs` run after every other test
//! target in the workspace.
