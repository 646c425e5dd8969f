//! Noiseless 1-bit recovery of a planted group-sparse signal with PGD.

use onebit_gcs::genmodel::{sample_range_point, GroupSparseModel};
use onebit_gcs::measure::{geodesic_dist, sign_measure, MeasurementEnsemble};
use onebit_gcs::recover::{pgd_1bit, RecoveryConfig, StepScaling};
use onebit_gcs::rng::rng_from_seed;

fn main() -> onebit_gcs::Result<()> {
    let model = GroupSparseModel::with_default_amplitudes(60, 3)?;
    let (_, x) = sample_range_point(&model, &mut rng_from_seed(4))?;
    let config = RecoveryConfig {
        step_size: 0.5,
        step_scaling: StepScaling::PerMeasurement,
        outer_iters: 60,
        ..RecoveryConfig::default()
    };
    for m in [100, 300, 600, 1200] {
        let a = MeasurementEnsemble::gaussian(m, 60, m as u64)?;
        let b = sign_measure(&a, &x)?;
        let res = pgd_1bit(&a, &b, &model, &config)?;
        println!(
            "m = {m:>5}  d_S = {:.5}  loss = {:.3e}  best iterate {}",
            geodesic_dist(&x, &res.estimate)?,
            res.final_loss,
            res.best_iteration
        );
    }
    Ok(())
}
