//! A small recovery sweep over measurement counts and solvers, written as
//! CSV to stdout.

use onebit_gcs::harness::{run_sweep, write_csv, ExperimentConfig};

const CONFIG: &str = r#"
seed = 1
trials = 4
m_grid = [50, 200]
solvers = ["pgd1bit", "biht", "lasso1bit"]

[model]
kind = "group_sparse"
n = 30
k = 3

[noise]
kind = "sign_flip"
p = 0.02

[settings.pgd1bit]
step_scaling = "per_measurement"

[settings.biht]
sparsity = 3
"#;

fn main() -> onebit_gcs::Result<()> {
    let config = ExperimentConfig::from_toml_str(CONFIG)?;
    let result = run_sweep(&config)?;
    for agg in &result.aggregates {
        eprintln!(
            "m = {:>4} {:<10} d_S = {:.4} ± {:.4}",
            agg.m,
            agg.solver.name(),
            agg.d_s,
            agg.d_s_errbar
        );
    }
    write_csv(&result, std::io::stdout().lock())
}
