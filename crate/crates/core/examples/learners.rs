// OGD and ONS side by side on one stationary stream.

use ons_unlearn::metrics::{cumulative_regret, hindsight_comparator};
use ons_unlearn::optim::{OgdParams, OgdState, OnsParams, OnsState};
use ons_unlearn::stream::{gen_stream, StreamConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = StreamConfig { seed: 3, ..StreamConfig::default() };
    let stream = gen_stream(&cfg)?;
    let mut ogd = OgdState::new(cfg.dimension, OgdParams::default());
    let mut ons = OnsState::new(cfg.dimension, OnsParams::default());

    let (mut ogd_losses, mut ons_losses) = (Vec::new(), Vec::new());
    for obs in &stream {
        ogd_losses.push(ogd.step(obs)?.loss);
        ons_losses.push(ons.step(obs)?.loss);
        if obs.t % 100 == 0 {
            println!(
                "t = {:3}  |w_ogd - w*| = {:.4}  |w_ons - w*| = {:.4}  tr(A) = {:.1}",
                obs.t,
                (&ogd.w - &obs.w_star).norm(),
                (&ons.w - &obs.w_star).norm(),
                ons.a.trace()
            );
        }
    }

    let best = hindsight_comparator(&stream, 5.0)?;
    println!("comparator {:.4?}", best.as_slice());
    println!("regret OGD {:.3}", cumulative_regret(&ogd_losses, &stream, 5.0)?);
    println!("regret ONS {:.3}", cumulative_regret(&ons_losses, &stream, 5.0)?);
    let rebuilt = ons.rebuild_preconditioner();
    println!("A vs rebuilt from log: {:.2e}", rebuilt.frobenius_distance(&ons.a));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
