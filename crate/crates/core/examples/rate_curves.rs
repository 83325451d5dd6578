//! Theoretical rate exponents against γ: the multiple-descent curve on the
//! n scale and the periodic plateaus on the d scale.

use kernel_flow::rates::{audit_continuity, gamma_grid, plateaus, rate_curve, rate_table, RateFamily};

fn main() -> kernel_flow::Result<()> {
    for g in [0.5, 0.8, 1.5, 1.8, 2.0, 3.0, 3.5] {
        let p = rate_curve(g, RateFamily::Inner)?;
        println!("gamma {g:>4}: n^-{:.4}  d^-{:.4}  log factor {}", p.n_exponent, p.d_exponent, p.log_factor);
    }
    let grid = gamma_grid(0.1, 8.0, 0.01)?;
    let inner = rate_table(&grid, &[RateFamily::Inner]).points;
    for (a, b, v) in plateaus(&inner) {
        println!("d-scale plateau {v} on [{a}, {b}]");
    }
    let audit = audit_continuity(&inner);
    println!("kinks at {:?}", audit.kinks);
    println!("interpolation at 1.5: n^-{}", rate_curve(1.5, RateFamily::Interpolation)?.n_exponent);
    Ok(())
}
