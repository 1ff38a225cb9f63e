// A reduced simulation grid: type I error over noise levels and
// significance levels, printed in table form.
//
// ```bash
// cargo run --release --example simulate_table
// ```

use std::error::Error;

use evaluator_outliers::sim::{format_tables, run_grid, Grid, SimulationScenario};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let scenario = SimulationScenario {
        replicates: 20,
        grid: Some(Grid {
            sigma: vec![2.0, 6.0, 10.0],
            alpha: vec![0.05, 0.1, 0.3],
            ..Default::default()
        }),
        ..SimulationScenario::single_null(2.0)
    };
    let report = run_grid(&scenario)?;
    print!("{}", format_tables(&report));
    assert_eq!(report.cells.len(), 9);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
