//! Critical openness and minimal enhancement factor for a few chaoticities.
//!
//! ```not_rust
//! cargo run --release --example critical_point
//! ```

use elastic_enhancement::critical::eta_critical;
use elastic_enhancement::{Chaoticity, QuadratureConfig};

fn main() -> elastic_enhancement::Result<()> {
    let cfg = QuadratureConfig::default();
    println!("{:>8} {:>14} {:>14} {:>12}", "kappa", "eta_c", "F_min", "dF/deta");
    for k in [0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0] {
        let cp = eta_critical(Chaoticity::Finite(k), &cfg)?;
        println!(
            "{k:>8} {:>14.8} {:>14.10} {:>12.2e}",
            cp.eta_c, cp.f_min, cp.slope
        );
    }
    Ok(())
}
