//! How uniformly sign measurements preserve geodesic distance on the range
//! of a group-sparse model, and the local far/near picture.

use onebit_gcs::embed::{bese_deviation, local_embedding_check};
use onebit_gcs::genmodel::GroupSparseModel;
use onebit_gcs::measure::MeasurementEnsemble;

fn main() -> onebit_gcs::Result<()> {
    let model = GroupSparseModel::new(64, 2, 1.0, 3f64.sqrt(), 1.0)?;
    for m in [250, 1000, 4000] {
        let a = MeasurementEnsemble::gaussian(m, 64, m as u64)?;
        let rep = bese_deviation(&model, &a, 1000, 1)?;
        println!(
            "m = {m:>5}  max dev {:.4}  mean dev {:.4}",
            rep.max_dev, rep.mean_dev
        );
    }
    let a = MeasurementEnsemble::gaussian(2000, 64, 5)?;
    let local = local_embedding_check(&model, &a, 0.2, 1000, 2)?;
    println!("{}", serde_json::to_string_pretty(&local).expect("json"));
    Ok(())
}
