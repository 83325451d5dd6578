//! Metric entropy of the RKHS ball, the covering radius ε̄_n and the
//! minimax lower-bound condition.

use kernel_flow::entropy::{certify_lower_bound, covering_radius, DEFAULT_C2};
use kernel_flow::kernels::KernelProfile;
use kernel_flow::spectrum::{build_spectrum, DEFAULT_TAIL_TOL};

fn main() -> kernel_flow::Result<()> {
    let d = 20;
    let eigs = build_spectrum(&KernelProfile::Ntk2, d, DEFAULT_TAIL_TOL)?.weighted();
    for n in [100, 400, 1600] {
        let fx = covering_radius(&eigs, n, 1.0)?;
        let cert = certify_lower_bound(&eigs, n, 1.0, DEFAULT_C2)?;
        println!(
            "n = {n:>5}: eps_bar^2 = {:.5}, condition {} ({:.1} vs {:.1}), risk >= {:.3e}",
            fx.eps_bar.powi(2),
            cert.holds,
            cert.lhs,
            cert.rhs,
            cert.risk_lower_bound
        );
    }
    Ok(())
}
