//! Test accuracy of the coordinate and eigen-only recipes under rotation
//! protocols.
//!
//! cargo run --release -p gsnet --example rotation_robustness [epochs] [protocols]

use gsnet::data_io::{apply_protocol, synth_dataset, Protocol, SynthSpec};
use gsnet::net::{evaluate_classification, fit, prepare_classification, GsNet, GscConfig, InputRecipe, TrainConfig};

fn main() -> gsnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let protocols = Protocol::parse_list(&args.next().unwrap_or_else(|| "z/z,0/s".into()))?;
    let data = synth_dataset(&SynthSpec::default())?;
    for recipe in [InputRecipe::CoordsEigenDist, InputRecipe::EigenOnly] {
        for &protocol in &protocols {
            let rotated = apply_protocol(&data, protocol, 1);
            let net = GsNet::new(GscConfig {
                recipe,
                ..GscConfig::desk()
            })?;
            let train = prepare_classification(&net, &rotated.train.classification_items())?;
            let test = prepare_classification(&net, &rotated.test.classification_items())?;
            let mut params = net.init_params(0);
            let config = TrainConfig {
                epochs,
                ..TrainConfig::default()
            };
            let log = fit(&net, &mut params, &train, &config, |_, _| Ok(()))?;
            let m = evaluate_classification(&net, &params, &test)?;
            println!(
                "{:<13} {:<4} test {:.3}  train {:.3}  {:.0}s",
                recipe.name(),
                protocol.name(),
                m.accuracy,
                log.last().map_or(0.0, |r| r.train_accuracy),
                log.last().map_or(0.0, |r| r.wall_time)
            );
        }
    }
    Ok(())
}
