#![allow(dead_code)]

use landmix::lattice::Adjacency;
use landmix::potts::LabelField;
use landmix::prep::{MixtureData, PrepOptions};
use landmix::simgen::{simulate, SimSpec};

pub struct Panel {
    pub data: MixtureData,
    pub adjacency: Adjacency,
    pub truth: LabelField,
}

pub fn spec(k: usize, n_sites: usize, seed: u64) -> SimSpec {
    SimSpec {
        n_sites,
        seed,
        ..SimSpec::with_components(k)
    }
}

pub fn panel_from(spec: &SimSpec) -> Panel {
    let sim = simulate(spec).unwrap();
    let data = MixtureData::from_dataset(&sim.dataset, &PrepOptions::default()).unwrap();
    Panel {
        data,
        adjacency: sim.adjacency,
        truth: sim.truth,
    }
}

pub fn panel(k: usize, n_sites: usize, seed: u64) -> Panel {
    panel_from(&spec(k, n_sites, seed))
}

/// Solves the weighted least-squares problem `min Σ w (y − Xβ)²` by SVD of
/// the row-scaled design.
pub fn weighted_ols(rows: &[[f64; 3]], y: &[f64], w: &[f64]) -> [f64; 3] {
    let m = rows.len();
    let x = nalgebra::DMatrix::from_fn(m, 3, |r, c| w[r].sqrt() * rows[r][c]);
    let b = nalgebra::DVector::from_fn(m, |r, _| w[r].sqrt() * y[r]);
    let beta = x.svd(true, true).solve(&b, 1e-14).unwrap();
    [beta[0], beta[1], beta[2]]
}
