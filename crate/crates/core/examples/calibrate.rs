//! Regenerates the frozen calibration table in `src/calibration.rs`.
//!
//! cargo run --release --example calibrate

use rayon::prelude::*;
use varpx::calibration::{measure, render, CALIBRATION_SAMPLES, CALIBRATION_SEED, CELLS, WIDENING};

fn main() {
    let cells: Vec<_> = CELLS
        .par_iter()
        .enumerate()
        .map(|(i, &(kappa, lo, hi))| measure(kappa, lo, hi, CALIBRATION_SAMPLES, CALIBRATION_SEED + i as u64))
        .collect();
    for c in &cells {
        eprintln!("{c:?}");
    }
    let widened: Vec<_> = cells.iter().map(|c| c.widened(WIDENING)).collect();
    print!("{}", render(&widened));
}
