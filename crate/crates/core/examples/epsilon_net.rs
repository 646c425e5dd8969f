//! Grid ε-nets of a latent ball: size against the covering-number bound,
//! and a random-probe check of the covering radius.

use onebit_gcs::embed::build_epsilon_net;

fn main() -> onebit_gcs::Result<()> {
    for (k, delta) in [(2, 0.2), (2, 0.05), (3, 0.2), (4, 0.3)] {
        let net = build_epsilon_net(k, 1.0, delta)?;
        println!(
            "k = {k}, δ = {delta}: {:>6} points, log size {:.2} <= bound {:.2}, worst probe {:.4}",
            net.len(),
            net.log_cardinality(),
            net.declared_bound,
            net.certify(20_000, 1)
        );
    }
    Ok(())
}
