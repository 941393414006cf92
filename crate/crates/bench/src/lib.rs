//! Fixed-seed problem instances shared by the benchmarks.

use hdselect_core::inference::HdDesign;
use hdselect_core::ivhds::IvDesign;
use hdselect_core::sim::{replication_rng, IvDgp, PlrDgp};
use hdselect_core::Block;
use nalgebra::{DMatrix, DVector};

fn block(prefix: &str, m: DMatrix<f64>) -> Block {
    let names = (1..=m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    Block::new(names, m).expect("names match columns")
}

fn single(name: &str, v: &DVector<f64>) -> Block {
    block(name, DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Sparse regression with Toeplitz(0.5) design and five active columns.
pub fn regression(n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let s = PlrDgp::sparse(n, p, 0.0, 5, 0.5, 0.5).draw(&mut replication_rng(7, 0));
    (s.x, s.y)
}

/// Treatment-effect design with `p` candidate controls.
pub fn plr_design(n: usize, p: usize) -> HdDesign {
    let s = PlrDgp::sparse(n, p, 0.5, 5, 0.5, 0.5).draw(&mut replication_rng(8, 0));
    HdDesign::new(s.y, single("d", &s.d), block("x", s.x))
}

/// One endogenous regressor, `m` candidate instruments, three relevant.
pub fn iv_design(n: usize, m: usize) -> IvDesign {
    let s = IvDgp::sparse(n, m, 3, 0.5, 0.5, 0.6).draw(&mut replication_rng(9, 0));
    IvDesign::new(s.y, single("d", &s.d), block("z", s.z))
}
