//! Sign measurements of two nearby unit vectors: the fraction of differing
//! bits tracks their geodesic distance as m grows.

use onebit_gcs::embed::unit_pair_at_distance;
use onebit_gcs::measure::{
    geodesic_dist, hamming_dist, noisy_sign_measure, sign_measure, MeasurementEnsemble, NoiseSpec,
};
use onebit_gcs::rng::rng_from_seed;

fn main() -> onebit_gcs::Result<()> {
    let mut rng = rng_from_seed(1);
    let (x, s) = unit_pair_at_distance(&mut rng, 32, 0.4)?;
    println!("d_S = {:.4}", geodesic_dist(&x, &s)?);
    for m in [100, 1_000, 10_000] {
        let a = MeasurementEnsemble::gaussian(m, 32, 7)?;
        let d_h = hamming_dist(&sign_measure(&a, &x)?, &sign_measure(&a, &s)?)?;
        println!("m = {m:>6}  d_H = {d_h:.4}");
    }

    let a = MeasurementEnsemble::gaussian(10_000, 32, 8)?;
    let clean = sign_measure(&a, &x)?;
    let flipped = noisy_sign_measure(&a, &x, &NoiseSpec::sign_flip(0.05, 3))?;
    println!(
        "sign-flip p = 0.05 changed {:.4} of the bits",
        hamming_dist(&clean, &flipped)?
    );
    Ok(())
}
