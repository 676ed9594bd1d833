//! Directional benchmark on imbalanced synthetic AR(1) data: IB-GAN vs.
//! the plain classifier vs. a naive conditional GAN, five replicates.
//!
//! `cargo run --release -p ibgan-core --example desk_benchmark [out.jsonl]`

use std::path::PathBuf;

use ibgan::dataio::SyntheticSpec;
use ibgan::experiment::{
    run_experiment, summarize, summary_table, DataConfig, ExperimentConfig, Method, RunSettings, SweepConfig,
};
use ibgan::trainer::TrainConfig;

fn main() -> ibgan::Result<()> {
    let output = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ibgan_desk_benchmark.jsonl"));
    let cfg = ExperimentConfig {
        experiment: RunSettings {
            methods: vec![Method::Ibgan, Method::Plain, Method::NaiveGan],
            replicates: 5,
            seed: 0,
            output,
            losses_output: None,
            record_timing: true,
        },
        data: DataConfig::Synthetic {
            spec: SyntheticSpec::two_class_ar(3, 40, [900, 100]),
            test_sizes: vec![300, 300],
            imbalance_drop: None,
        },
        train: TrainConfig::default(),
        sweep: SweepConfig::default(),
    };
    let records = run_experiment(&cfg, |r| {
        eprintln!(
            "{:>10} replicate {} balanced_accuracy {:.3} ({:.1}s)",
            r.method.name(),
            r.replicate,
            r.balanced_accuracy.unwrap_or(f64::NAN),
            r.duration_s
        )
    })?;
    print!("{}", summary_table(&summarize(&records)?));
    Ok(())
}
