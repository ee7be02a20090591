//! Command-line driver and file formats for `hessfem-core`.
//!
//! ```text
//! hessfem verify fd     --problem model-nonlinear-id --h 1e-4,1e-3,1e-2,1e-1 --samples 100 --out fd.jsonl
//! hessfem verify taylor --problem model-nonlinear-id --eps 1e-4,1e-3,1e-2,1e-1 --out taylor.json
//! hessfem verify modes  --problem model-nonlinear-id --samples 20
//! hessfem optimize      --problem source-id --optimizer newton-cg-ad --out run/
//! ```

pub mod cli;
pub mod io;

