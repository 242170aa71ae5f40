//! Trains one baseline network and its Seagull-first twin on the same data
//! from the same initial weights, then compares test MAE and symmetry gaps.
//!
//! cargo run --release --example paired_run -- [activation] [epochs]

use seagull::datagen::make_dataset;
use seagull::{measure_symmetry, train, ActivationKind, Domain, Network, NetworkSpec, NoiseSpec, TargetKind, TrainConfig, TransformKind};

fn main() -> seagull::Result<()> {
    let mut args = std::env::args().skip(1);
    let act: ActivationKind = args.next().as_deref().unwrap_or("relu").parse()?;
    let epochs: usize = args.next().map_or(30, |e| e.parse().expect("epochs must be an integer"));

    let data = |n, seed| make_dataset(TargetKind::TriangleArea, TransformKind::Identity, NoiseSpec::none(), n, seed, Domain::Cube);
    let (train_set, test_set) = (data(10_000, 1)?, data(2_000, 2)?);
    let cfg = TrainConfig {
        epochs,
        halve_every: (epochs / 5).max(1),
        ..TrainConfig::default()
    };

    let base = Network::build(NetworkSpec::benchmark(act), 3)?;
    for (label, net) in [("baseline", base.clone()), ("seagull-first", base.replace_activation(0, ActivationKind::Seagull)?)] {
        let (trained, report) = train(&net, &train_set, &test_set, &cfg)?;
        let sym = measure_symmetry(&trained, 1_000, 4, Domain::Cube)?;
        println!(
            "{act} {label:>13}: best MAE {:.4} (epoch {}), exchange gap {:.4}, {:.1}s",
            report.best_test_mae.unwrap_or(f64::NAN),
            report.best_epoch.unwrap_or(0),
            sym.exchange_gap.mean,
            report.wall_time_secs
        );
    }
    Ok(())
}
