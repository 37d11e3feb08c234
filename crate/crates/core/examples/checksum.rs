//! Prints a checksum of a small grid run; used to compare the parallel
//! and sequential builds byte-for-byte.

use mmm_core::{generate_truth, run_grid, CellPenalties, FitOptions, PenaltyConfig, SimConfig};

fn main() {
    let mut cfg = SimConfig::standard(150, 40.0, 9001);
    cfg.stability_replicates = 4;
    let truth = generate_truth(&cfg).unwrap();
    let penalties = CellPenalties::Fixed(PenaltyConfig::uniform(10.0, 2.0).unwrap());
    let grid = run_grid(
        &truth,
        &cfg,
        &[100, 150],
        &[40.0],
        &penalties,
        3,
        &FitOptions::default(),
    )
    .unwrap();
    let mut hash = 0xcbf29ce484222325u64;
    let mut push = |v: f64| {
        for b in v.to_bits().to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001B3);
        }
    };
    for cell in &grid.cells {
        let c = cell.result.as_ref().unwrap();
        for m in &c.nrmse_indirect {
            push(m.value);
        }
        for v in &c.qq_samples {
            push(*v);
        }
        if let Some(s) = c.stability {
            push(s);
        }
    }
    println!("checksum: {hash:016x}");
}
