// Partial reset and eigenvalue decay applied to one preconditioner.

use ons_unlearn::geometry::{cond_number, eig_sym, SymMatrix};
use ons_unlearn::unlearn::{intervene, Intervention};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let a = SymMatrix::from_rows(3, &[9.0, 2.0, 0.5, 2.0, 4.0, 0.3, 0.5, 0.3, 0.8])?;
    let before = eig_sym(&a)?;
    println!("{:<28} eigenvalues {:.4?}  cond {:.3}", "before", before.eigenvalues.as_slice(), cond_number(&a)?);

    for spec in [
        Intervention::PartialReset { alpha: 0.3 },
        Intervention::PartialReset { alpha: 0.7 },
        Intervention::Decay { beta: 0.5 },
        Intervention::Decay { beta: 0.9 },
    ] {
        let treated = intervene(&a, &spec)?;
        let eig = eig_sym(&treated)?;
        println!("{:<28} eigenvalues {:.4?}  cond {:.3}", spec.label(), eig.eigenvalues.as_slice(), cond_number(&treated)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
