//! Sparsity baselines on the same planted signal: BIHT and 1-bit Lasso from
//! signs, Lasso from the unquantized measurements.

use onebit_gcs::embed::unit;
use onebit_gcs::genmodel::{sample_range_point, GroupSparseModel};
use onebit_gcs::measure::{geodesic_dist, sign_measure, MeasurementEnsemble};
use onebit_gcs::recover::{biht, lasso_1bit, lasso_linear, BihtConfig, DEFAULT_LASSO_REG};
use onebit_gcs::rng::rng_from_seed;

fn main() -> onebit_gcs::Result<()> {
    let model = GroupSparseModel::with_default_amplitudes(60, 3)?;
    let (_, x) = sample_range_point(&model, &mut rng_from_seed(9))?;
    let a = MeasurementEnsemble::gaussian(200, 60, 10)?;
    let b = sign_measure(&a, &x)?;

    let xb = biht(
        &a,
        &b,
        &BihtConfig {
            sparsity: 3,
            ..BihtConfig::default()
        },
    )?;
    println!("biht        d_S = {:.4}", geodesic_dist(&x, &xb)?);

    let xl = lasso_1bit(&a, &b)?;
    println!("1-bit lasso d_S = {:.4}", geodesic_dist(&x, &unit(&xl)?)?);

    let sol = lasso_linear(&a, &a.apply(&x)?, DEFAULT_LASSO_REG)?;
    println!(
        "lasso       d_S = {:.4} after {} iterations",
        geodesic_dist(&x, &unit(&sol.estimate)?)?,
        sol.iterations
    );
    Ok(())
}
