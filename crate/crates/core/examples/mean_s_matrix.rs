//! Average S-matrix and transmission in weak coupling, from full
//! scattering realizations and from the self-consistent resolvent.
//!
//! ```not_rust
//! cargo run --release --example mean_s_matrix
//! ```

use elastic_enhancement::rmtsim::{
    mean_s_and_transmission, mean_s_self_consistent, Ensemble, ScatteringModel,
};

fn main() -> elastic_enhancement::Result<()> {
    let x = 0.01;
    let gue = ScatteringModel::with_x(200, 20, x, 1.0, Ensemble::Gue)?;
    let mc = mean_s_and_transmission(&gue, 400, 3)?;
    println!(
        "weak coupling: <S> = {:.6}, T = {:.6}",
        gue.mean_s_weak(),
        gue.transmission()
    );
    println!(
        "realizations:  <S> = {:.6} ± {:.6}, T = {:.6} ± {:.6}",
        mc.s_aa_re.value, mc.s_aa_re.std_error, mc.transmission.value, mc.transmission.std_error
    );

    let poisson = ScatteringModel::with_x(1000, 100, x, 1.0, Ensemble::PoissonDiagonal)?;
    let sc = mean_s_self_consistent(&poisson, 100, 3, 1e-13)?;
    println!(
        "self-consistent: <S> = {:.6} ± {:.6}  (max residual {:.1e})",
        sc.s_re.value, sc.s_re.std_error, sc.max_residual
    );
    Ok(())
}
