//! Monte Carlo enhancement factor for GUE and Poisson spectra, compared
//! with the analytic limits.
//!
//! ```not_rust
//! cargo run --release --example monte_carlo_validation -- 2000
//! ```

use elastic_enhancement::enhancement::enhancement_gue;
use elastic_enhancement::rmtsim::{estimate_enhancement_mc, Ensemble, ScatteringModel};

fn main() -> elastic_enhancement::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .map_or(500, |a| a.parse().expect("realization count"));
    let eta = 1.0;
    for (ensemble, reference) in [
        (Ensemble::Gue, enhancement_gue(eta)),
        (Ensemble::PoissonDiagonal, 2.0),
    ] {
        let model = ScatteringModel::with_eta(200, 20, eta, 1.0, ensemble)?;
        let est = estimate_enhancement_mc(&model, n, 7)?;
        println!(
            "{:<8} F = {:.4} ± {:.4}  reference {:.4}  z = {:+.2}  max |S†S - 1| = {:.1e}",
            ensemble.name(),
            est.f.value,
            est.f.std_error,
            reference,
            est.f.z_score(reference),
            est.max_unitarity_deficit
        );
    }
    Ok(())
}
