//! A scaled-down rate experiment: risk against n with d = n^{1/γ}, fitted
//! log-log slopes, and CSV/JSON/SVG output in a directory.

use std::path::PathBuf;

use kernel_flow::harness::emit::{risk_svg, risk_table_csv, summary, to_json, write_file};
use kernel_flow::harness::{run_experiment, ExperimentConfig};

fn main() -> kernel_flow::Result<()> {
    let mut cfg = ExperimentConfig::new(1.5, vec![100, 200, 300, 400]);
    cfg.trials = 4;
    let table = run_experiment(&cfg)?;
    println!(
        "best C = {}, regression slope {:.3}, interpolation slope {:.3}, theory -{:.3}",
        table.best_c, table.r_regression, table.r_interpolation, table.theoretical_exponent
    );

    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    write_file(&dir.join("risk_table.csv"), &risk_table_csv(&table)?)?;
    write_file(&dir.join("summary.json"), &to_json(&summary(&table))?)?;
    write_file(&dir.join("risk.svg"), &risk_svg(&table))?;
    println!("wrote risk_table.csv, summary.json and risk.svg to {}", dir.display());
    Ok(())
}
