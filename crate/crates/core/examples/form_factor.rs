//! Two-level form factor `B₂(s|κ)` across the crossover.
//!
//! ```not_rust
//! cargo run --release --example form_factor
//! ```

use elastic_enhancement::formfactor::{b2_gue, b2_transient};
use elastic_enhancement::{Chaoticity, QuadratureConfig, ScaledTime};

fn main() -> elastic_enhancement::Result<()> {
    let cfg = QuadratureConfig::default();
    let kappas = [0.5, 5.0, 50.0];
    print!("{:>6}", "s");
    for k in kappas {
        print!("  {:>12}", format!("kappa={k}"));
    }
    println!("  {:>12}", "gue");
    for i in 0..=12 {
        let s = ScaledTime::new(0.125 * i as f64)?;
        print!("{:>6.3}", s.get());
        for k in kappas {
            let b = b2_transient(s, Chaoticity::Finite(k), &cfg)?;
            print!("  {:>12.8}", b.value);
        }
        println!("  {:>12.8}", b2_gue(s));
    }
    Ok(())
}
