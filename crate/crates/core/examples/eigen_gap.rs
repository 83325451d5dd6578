//! Block structure of the empirical kernel spectrum: the top N(p) Gram
//! eigenvalues separate from the rest as the population gap predicts.

use kernel_flow::harness::eigen_gap_check;
use kernel_flow::kernels::KernelProfile;

fn main() -> kernel_flow::Result<()> {
    let seeds: Vec<u64> = (0..10).collect();
    let report = eigen_gap_check(&KernelProfile::taylor_all_ones(4), 1.5, 40, 0, &seeds)?;
    println!(
        "n = {}, N(p) = {}, mu_p = {:.4}, mu_p+1 = {:.4}",
        report.n, report.n_p, report.mu_p, report.mu_p1
    );
    for s in &report.per_seed {
        println!("seed {:>2}: lambda_N = {:.4}, lambda_N+1 = {:.4}, pass {}", s.seed, s.lambda_np, s.lambda_np1, s.pass);
    }
    println!("pass fraction {}", report.pass_fraction);
    Ok(())
}
