//! Monte Carlo checks of the hyperplane-separation, norm-preservation and
//! sign-flip probabilities for random vectors.

use onebit_gcs::embed::{
    unit_pair_at_distance, verify_norm_preservation, verify_sep_lemma, verify_sep_lemma_near,
    verify_sign_flip_prob,
};
use onebit_gcs::measure::geodesic_dist;
use onebit_gcs::rng::rng_from_seed;

fn main() -> onebit_gcs::Result<()> {
    let mut rng = rng_from_seed(3);
    let eps = 0.5;
    let (x, s) = unit_pair_at_distance(&mut rng, 10, 1.2)?;
    println!(
        "far pair:  {:.4} >= {:.4}",
        verify_sep_lemma(&x, &s, eps, 100_000, 1)?,
        eps / 12.0
    );
    let (x, s) = unit_pair_at_distance(&mut rng, 10, 0.3)?;
    println!(
        "near pair: {:.4} >= {:.4}",
        verify_sep_lemma_near(&x, &s, eps, 100_000, 2)?,
        1.0 - 2.0 * eps / 3.0
    );

    let rep = verify_norm_preservation(&x, 1000, 0.3, 100, 4)?;
    println!(
        "norm kept within 1±0.3 in {}/{} draws",
        rep.within, rep.trials
    );

    let freq = verify_sign_flip_prob(&x, &s, 1000, 100, 5)?;
    println!("sign flips {freq:.4}, d_S {:.4}", geodesic_dist(&x, &s)?);
    Ok(())
}
