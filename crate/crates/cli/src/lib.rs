//! Library surface of the leafmatch CLI: command implementations plus the
//! synthetic-corpus generator and mask tracer, reusable from tests.

pub mod commands;
pub mod mask;
pub mod synth;
