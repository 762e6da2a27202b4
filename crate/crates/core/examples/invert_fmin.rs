//! Recover κ from a measured minimum of the enhancement factor.
//!
//! ```not_rust
//! cargo run --release --example invert_fmin -- 1.6
//! ```

use elastic_enhancement::critical::{eta_critical, FminInverter};
use elastic_enhancement::QuadratureConfig;

fn main() -> elastic_enhancement::Result<()> {
    let targets: Vec<f64> = match std::env::args().nth(1) {
        Some(arg) => vec![arg.parse().expect("F_min must be a number")],
        None => vec![1.9, 1.75, 1.6, 1.4, 1.2],
    };
    let cfg = QuadratureConfig::default();
    let inverter = FminInverter::new(&cfg)?;
    let (lo, hi) = inverter.attainable_range();
    println!("attainable F_min: [{lo:.6}, {hi:.6}]");
    for f in targets {
        let kappa = inverter.invert(f)?;
        let cp = eta_critical(kappa, &cfg)?;
        println!(
            "F_min = {f:<6} -> kappa = {:.6}  (eta_c = {:.5}, check F_min = {:.8})",
            kappa.as_f64(),
            cp.eta_c,
            cp.f_min
        );
    }
    Ok(())
}
