//! Trains the default network on the synthetic 5-class corpus and prints
//! per-epoch loss and test accuracy.
//!
//! cargo run --release -p gsnet --example desk_classification [epochs]

use std::time::Instant;

use gsnet::data_io::{synth_dataset, SynthSpec};
use gsnet::net::{evaluate_classification, fit, prepare_classification, GsNet, GscConfig, TrainConfig};

fn main() -> gsnet::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let start = Instant::now();
    let data = synth_dataset(&SynthSpec::default())?;
    let net = GsNet::new(GscConfig::desk())?;
    let train = prepare_classification(&net, &data.train.classification_items())?;
    let test = prepare_classification(&net, &data.test.classification_items())?;
    println!("prepared {} + {} clouds in {:.1}s", train.len(), test.len(), start.elapsed().as_secs_f64());
    let mut params = net.init_params(0);
    let config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    fit(&net, &mut params, &train, &config, |r, p| {
        let m = evaluate_classification(&net, p, &test)?;
        println!(
            "epoch {:>2}  loss {:.4}  train {:.3}  test {:.3}  {:.1}s",
            r.epoch, r.loss, r.train_accuracy, m.accuracy, r.wall_time
        );
        Ok(())
    })?;
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
