//! Fixed point of a weighted two-cell transfer matrix against the leading
//! left eigenvector of the dense matrix.

use nalgebra::DMatrix;
use thermogame::sysflow::Domain;
use thermogame::thermo::{build_partition, transfer_fixed_point, Potential, UlamMatrix};

fn main() -> thermogame::Result<()> {
    let u = UlamMatrix::from_dense(&[vec![0.3, 0.7], vec![0.6, 0.4]])?;
    let part = build_partition(&Domain::unit(1, true), 2)?;
    let phi = Potential::custom(|x| if x[0] < 0.5 { 0.0 } else { 1.0 }, 0.0, 1.0);
    let w = u.weighted(&phi, &part)?;
    let fp = transfer_fixed_point(&w, 1e-14, 100_000, None)?;

    // L = P diag(exp φ); the fixed point is its leading left eigenvector
    let wts = w.weights().expect("weighted");
    let dense = DMatrix::from_fn(2, 2, |i, j| w.get(i, j) * wts[j]);
    let lead = dense.transpose().complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max);
    println!("fixed point {:?}", fp.density.as_slice());
    println!("log growth {:.12}  log of leading eigenvalue {:.12}", fp.log_growth, lead.ln());
    Ok(())
}
