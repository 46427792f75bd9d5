// Spectra, flooring, conditioning and the two ball projections on a 2x2 example.

use nalgebra::DVector;
use ons_unlearn::geometry::{
    cond_number, cos_frobenius, eig_sym, project_ball_euclid, project_ball_metric, psd_floor, SymMatrix,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let a = SymMatrix::from_rows(2, &[4.0, 1.0, 1.0, 2.0])?;
    let spec = eig_sym(&a)?;
    println!("eigenvalues {:.6?}", spec.eigenvalues.as_slice());
    println!("cond(A) = {:.6}", cond_number(&a)?);
    println!("reconstruction error {:.2e}", spec.reconstruct().frobenius_distance(&a));

    let indefinite = SymMatrix::from_diagonal(&[3.0, -0.5]);
    let floored = psd_floor(&indefinite, 1e-6)?;
    println!("floored diag: {:?}", [floored.entry(0, 0), floored.entry(1, 1)]);

    let b = SymMatrix::identity(2);
    println!("cos_F(A, I) = {:.6}", cos_frobenius(&a, &b)?);

    let u = DVector::from_vec(vec![6.0, 3.0]);
    let e = project_ball_euclid(&u, 5.0);
    let m = project_ball_metric(&u, &a, 5.0)?;
    println!("Euclidean projection {:.4?} (norm {:.6})", e.as_slice(), e.norm());
    println!("A-metric projection  {:.4?} (norm {:.6})", m.as_slice(), m.norm());
    let dist = |w: &DVector<f64>| {
        let r = w - &u;
        r.dot(&a.mul_vec(&r))
    };
    println!("A-distance: euclid {:.6} >= metric {:.6}", dist(&e), dist(&m));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
