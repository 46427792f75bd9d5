// Removes ten rounds from an ONS learner and checks the preconditioner
// against a rebuild from the surviving gradients.

use ons_unlearn::geometry::SymMatrix;
use ons_unlearn::optim::{OnsParams, OnsState};
use ons_unlearn::stream::{gen_stream, Environment, StreamConfig};
use ons_unlearn::unlearn::{delete_ons_standard, DeletionEvent, Intervention};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = StreamConfig { environment: Environment::Drifting, horizon: 200, seed: 5, ..StreamConfig::default() };
    let stream = gen_stream(&cfg)?;
    let params = OnsParams::default();
    let mut ons = OnsState::new(cfg.dimension, params);
    for obs in &stream {
        ons.step(obs)?;
    }

    let event = DeletionEvent::most_recent(200, 10, Intervention::None)?;
    let after = delete_ons_standard(&ons, &event)?;

    let mut brute = SymMatrix::scaled_identity(cfg.dimension, params.lambda);
    for rec in ons.grad_log.iter().filter(|r| !event.contains(r.round)) {
        brute.add_outer(&rec.grad);
    }
    println!("deleted rounds {:?}", event.deleted_rounds);
    println!("log length {} -> {}", ons.grad_log.len(), after.grad_log.len());
    println!("|A_removed - brute|_F = {:.3e}", after.a.frobenius_distance(&brute));
    println!("w {:.4?} -> {:.4?}", ons.w.as_slice(), after.w.as_slice());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
