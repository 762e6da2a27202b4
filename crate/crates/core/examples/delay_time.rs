//! Wigner delay time statistics and the enhancement factor they imply.
//!
//! ```not_rust
//! cargo run --release --example delay_time
//! ```

use elastic_enhancement::enhancement::enhancement_gue;
use elastic_enhancement::rmtsim::{
    delay_stats_from_records, enhancement_from_records, simulate, Ensemble, ScatteringModel,
};

fn main() -> elastic_enhancement::Result<()> {
    let seed = 11;
    let model = ScatteringModel::with_eta(200, 20, 1.0, 1.0, Ensemble::Gue)?;
    let records = simulate(&model, 800, seed)?;
    let delay = delay_stats_from_records(&records, &model, seed)?;
    let direct = enhancement_from_records(&records, seed)?;
    println!(
        "<Q> M / t_H        = {:.4} ± {:.4}",
        delay.mean_q_over_weyl.value, delay.mean_q_over_weyl.std_error
    );
    println!(
        "var Q / <Q>^2      = {:.4} ± {:.4}",
        delay.var_q_normalized.value, delay.var_q_normalized.std_error
    );
    println!(
        "F from var Q       = {:.4} ± {:.4}",
        delay.f_from_var_q.value, delay.f_from_var_q.std_error
    );
    println!(
        "F from S directly  = {:.4} ± {:.4}",
        direct.f.value, direct.f.std_error
    );
    println!("F_GUE(eta = 1)     = {:.4}", enhancement_gue(model.eta()));
    Ok(())
}
