//! PGD with a small random tanh network as the prior. The network has no
//! exact projector, so each step projects with Adam in latent space.

use ndarray::Array2;
use onebit_gcs::genmodel::{
    normalize_model, sample_range_point, Activation, FeedForwardModel, GenerativeModel, Layer,
};
use onebit_gcs::measure::{geodesic_dist, sign_measure, MeasurementEnsemble};
use onebit_gcs::recover::{pgd_1bit, RecoveryConfig, StepScaling};
use onebit_gcs::rng::{rng_from_seed, standard_normal_vec};

fn layer(
    rng: &mut impl rand::Rng,
    inputs: usize,
    outputs: usize,
    act: Activation,
) -> onebit_gcs::Result<Layer> {
    let w = standard_normal_vec(rng, inputs * outputs) / (inputs as f64).sqrt();
    let w = Array2::from_shape_vec((outputs, inputs), w.to_vec()).expect("shape");
    Layer::new(w, standard_normal_vec(rng, outputs) * 0.1, act)
}

fn main() -> onebit_gcs::Result<()> {
    let mut rng = rng_from_seed(21);
    let net = FeedForwardModel::new(
        vec![
            layer(&mut rng, 4, 24, Activation::Tanh)?,
            layer(&mut rng, 24, 40, Activation::Identity)?,
        ],
        1.0,
    )?;
    let model = normalize_model(net, 0.05)?;
    println!("{}", model.describe());

    let (_, x) = sample_range_point(&model, &mut rng)?;
    let a = MeasurementEnsemble::gaussian(400, model.ambient_dim(), 3)?;
    let b = sign_measure(&a, &x)?;
    let config = RecoveryConfig {
        step_scaling: StepScaling::PerMeasurement,
        restarts: 3,
        inner_steps: 100,
        ..RecoveryConfig::default()
    };
    let res = pgd_1bit(&a, &b, &model, &config)?;
    println!(
        "d_S = {:.4}, loss = {:.4}, restart {} iteration {}",
        geodesic_dist(&x, &res.estimate)?,
        res.final_loss,
        res.restart_index,
        res.best_iteration
    );
    Ok(())
}
