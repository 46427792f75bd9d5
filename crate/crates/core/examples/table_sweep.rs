// The standard nine-row grid on a few seeds, printed as a table.

use ons_unlearn::harness::{run_sweep, summarize, SweepPlan};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut plan = SweepPlan::standard();
    plan.seeds = vec![0, 1, 2];
    let runs = run_sweep(&plan, None)?
        .into_iter()
        .map(|u| u.result)
        .collect::<Result<Vec<_>, _>>()?;

    println!("{:<5} {:<11} {:<26} {:>16} {:>16} {:>18}", "model", "env", "intervention", "recovery", "overshoot", "shock");
    for s in summarize(&runs) {
        println!(
            "{:<5} {:<11} {:<26} {:>7.2} ± {:<6.2} {:>7.3} ± {:<6.3} {:>8.4} ± {:<7.4}",
            s.model,
            s.environment,
            s.intervention,
            s.recovery_time.mean,
            s.recovery_time.std,
            s.overshoot.mean,
            s.overshoot.std,
            s.param_shock.mean,
            s.param_shock.std
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
