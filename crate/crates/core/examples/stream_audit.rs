// Generates both stream kinds and prints their empirical moments.

use ons_unlearn::stream::{drift_target, gen_stream, Environment, StreamConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for environment in [Environment::Stationary, Environment::Drifting] {
        let cfg = StreamConfig { environment, seed: 11, ..StreamConfig::default() };
        let stream = gen_stream(&cfg)?;
        let n = stream.len() as f64;
        let d = cfg.dimension;

        let mut second = vec![0.0; d * d];
        let mut resid = 0.0;
        for obs in &stream {
            for i in 0..d {
                for j in 0..d {
                    second[i * d + j] += obs.x[i] * obs.x[j] / n;
                }
            }
            resid += (obs.y - obs.x.dot(&obs.w_star)).powi(2) / n;
        }
        println!("{environment}: T = {}, E[x x^T] ~ {:.3?}", stream.len(), second);
        println!("  residual variance {resid:.4} (noise_std^2 = {:.4})", cfg.noise_std.powi(2));
        println!(
            "  |w*| at t = 1, 200, 400: {:.3} {:.3} {:.3}",
            stream[0].w_star.norm(),
            stream[199].w_star.norm(),
            stream[399].w_star.norm()
        );
    }

    let drifting = StreamConfig { environment: Environment::Drifting, ..StreamConfig::default() };
    let quarter = std::f64::consts::FRAC_PI_2 / drifting.drift_rate;
    println!("drift target after a quarter period: {:.4?}", drift_target(quarter, &drifting)?.as_slice());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
