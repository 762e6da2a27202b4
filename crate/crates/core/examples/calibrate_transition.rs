//! Fit the chaoticity κ of Poisson-to-GUE transition spectra `H = H₀ + λ V`.
//!
//! ```not_rust
//! cargo run --release --example calibrate_transition
//! ```

use elastic_enhancement::rmtsim::{calibrate_kappa, CalibrationConfig};

fn main() -> elastic_enhancement::Result<()> {
    let cfg = CalibrationConfig::default();
    println!(
        "{:>7} {:>10} {:>24} {:>9}",
        "lambda", "kappa", "interval", "chi2/dof"
    );
    for lambda in [0.0, 0.01, 0.03, 0.1, 3.0] {
        let c = calibrate_kappa(lambda, &cfg)?;
        let (lo, hi) = c.kappa_interval;
        let flag = match (c.at_lower_bound, c.at_upper_bound) {
            (true, _) => "  (consistent with Poisson)",
            (_, true) => "  (consistent with GUE)",
            _ => "",
        };
        println!(
            "{lambda:>7} {:>10.4} {:>24} {:>9.3}{flag}",
            c.kappa.as_f64(),
            format!("[{lo:.3e}, {hi:.3e}]"),
            c.reduced_chi2
        );
    }
    Ok(())
}
