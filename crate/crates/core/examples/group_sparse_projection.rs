//! The explicit group-sparse generative model: evaluate it, project onto
//! its range exactly and check range membership.

use ndarray::array;
use onebit_gcs::genmodel::{GenerativeModel, GroupSparseModel};

fn main() -> onebit_gcs::Result<()> {
    let model = GroupSparseModel::with_default_amplitudes(12, 3)?;
    println!("{}", model.describe());
    println!("Lipschitz constant {:.3}", model.lipschitz_bound());

    let z = array![0.1, -0.25, 0.0];
    let x = model.forward(&z)?;
    println!("G(z) = {x:.3}");

    let y = array![0.3, -1.0, 0.2, 0.0, 0.0, 0.5, 0.1, 0.0, 0.0, 0.0, 0.4, 2.0];
    let (p, zp) = model.exact_project(&y)?;
    println!("projection {p:.3}");
    println!("latent {zp:.3}, in range: {}", model.contains(&p, 1e-9));
    Ok(())
}
