//! `F(η|κ)` from every evaluation route on a small grid, next to the
//! small-η tangent `2 - η/2`.
//!
//! ```not_rust
//! cargo run --release --example enhancement_curves
//! ```

use elastic_enhancement::enhancement::{
    approx_large_kappa, enhancement_exact, repr_large_kappa, repr_small_kappa, series_is_meaningful,
    series_small_kappa,
};
use elastic_enhancement::{Chaoticity, QuadratureConfig};

fn main() -> elastic_enhancement::Result<()> {
    let cfg = QuadratureConfig::default();
    for k in [0.5, 5.0, 50.0] {
        let kappa = Chaoticity::Finite(k);
        println!("kappa = {k}");
        println!(
            "{:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10}",
            "eta", "exact", "small-rep", "large-rep", "series", "large-kappa", "tangent"
        );
        for eta in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0] {
            let exact = enhancement_exact(eta, kappa, &cfg)?.f;
            let small = repr_small_kappa(eta, kappa, &cfg)?.f;
            let large = repr_large_kappa(eta, kappa, &cfg)?.f;
            let series = if series_is_meaningful(eta, k) {
                format!("{:12.6}", series_small_kappa(eta, k, 3)?.f)
            } else {
                format!("{:>12}", "-")
            };
            let approx = approx_large_kappa(eta, kappa)?.f;
            println!(
                "{eta:>6} {exact:12.8} {small:12.8} {large:12.8} {series} {approx:12.6} {:10.4}",
                2.0 - 0.5 * eta
            );
        }
        println!();
    }
    Ok(())
}
