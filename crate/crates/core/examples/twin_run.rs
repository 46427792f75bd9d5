// One realized/counterfactual pair around the deletion event.

use ons_unlearn::harness::{run_pair, ExperimentConfig};
use ons_unlearn::optim::ModelKind;
use ons_unlearn::stream::{Environment, StreamConfig};
use ons_unlearn::unlearn::{DeletionEvent, Intervention};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        stream: StreamConfig { environment: Environment::Drifting, ..StreamConfig::default() },
        model: ModelKind::Ons,
        event: Some(DeletionEvent::most_recent(200, 10, Intervention::PartialReset { alpha: 0.5 })?),
        ..ExperimentConfig::default()
    };
    let run = run_pair(&cfg, 0)?;
    println!("  t    loss   track    cond_A  cos_state  cos_update");
    for r in &run.records[195..=212] {
        println!(
            "{:3} {:7.4} {:7.4} {:9.3} {:10.6} {:>11}",
            r.t,
            r.loss,
            r.tracking_error,
            r.cond_a.unwrap_or(f64::NAN),
            r.cos_state.unwrap_or(f64::NAN),
            r.cos_update.map_or("-".to_string(), |c| format!("{c:.6}"))
        );
    }
    let o = run.outcome.expect("event configured");
    println!(
        "shock {:.5}  recovery {} (censored {})  overshoot {:.4}  final regret {:.2}",
        o.param_shock, o.recovery.rounds, o.recovery.censored, o.overshoot, run.final_regret
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
