//! Mercer spectrum of the two-layer NTK on S^d: eigenvalues, multiplicities
//! and the trace identity Σ μ_k N(d, k) = Φ(1).

use kernel_flow::kernels::KernelProfile;
use kernel_flow::spectrum::{build_spectrum, eigenvalue_quadrature, ntk_eigen_closed, DEFAULT_TAIL_TOL};

fn main() -> kernel_flow::Result<()> {
    let d = 10;
    let s = build_spectrum(&KernelProfile::Ntk2, d, DEFAULT_TAIL_TOL)?;
    println!("{:>3} {:>14} {:>14} {:>10}", "k", "mu_k", "quadrature", "N(d,k)");
    for k in 0..=8 {
        let level = s.level(k).unwrap();
        let quad = eigenvalue_quadrature(&KernelProfile::Ntk2, d, k)?;
        println!("{k:>3} {:>14.6e} {:>14.6e} {:>10.0}", level.mu, quad, level.multiplicity_f64());
    }
    println!("closed form mu_4 = {:.6e}", ntk_eigen_closed(d, 4)?);
    println!(
        "trace = {:.12} (stored {:.12} + tail {:.3e}), Phi(1) = {}",
        s.trace(),
        s.stored_trace(),
        s.tail_estimate,
        s.kappa
    );

    let rbf = build_spectrum(&KernelProfile::RbfSphere, d, DEFAULT_TAIL_TOL)?;
    println!("rbf: {} levels, trace {:.12}", rbf.levels.len(), rbf.trace());
    Ok(())
}
