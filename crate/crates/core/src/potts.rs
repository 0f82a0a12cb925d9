//! Hidden Potts field over the site lattice.
//!
//! The density is `f(z | δ) ∝ exp(δ S(z))` with `S(z)` the number of lattice
//! edges whose endpoints share a label.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Adjacency;

/// Number of Swendsen–Wang sweeps used to draw the auxiliary field of the
/// exchange update.
pub const AUX_SWEEPS: usize = 50;

/// Default uniform prior support for δ.
pub const DELTA_PRIOR: (f64, f64) = (0.0, 3.0);

/// Largest number of configurations the brute-force partition function
/// will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

#[derive(Debug, Error, PartialEq)]
pub enum PottsError {
    #[error("label field has {labels} entries but the lattice has {sites} sites")]
    LengthMismatch { labels: usize, sites: usize },
    #[error("label {label} is not below K = {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("K must be at least 1")]
    NoLabels,
    #[error("{configs:e} configurations exceed the enumeration limit")]
    TooLarge { configs: f64 },
    #[error("interaction strength {0} must be finite and non-negative")]
    InvalidDelta(f64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelField {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl LabelField {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<LabelField, PottsError> {
        if k == 0 {
            return Err(PottsError::NoLabels);
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(PottsError::LabelOutOfRange { label, k });
        }
        Ok(LabelField { labels, k })
    }

    pub fn constant(n: usize, k: usize) -> LabelField {
        LabelField { labels: vec![0; n], k }
    }

    pub fn uniform<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> LabelField {
        LabelField {
            labels: (0..n).map(|_| rng.random_range(0..k)).collect(),
            k,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Mixed-radix index of the configuration, site 0 least significant.
    pub fn config_index(&self) -> usize {
        self.labels.iter().rev().fold(0, |acc, &l| acc * self.k + l)
    }

    pub fn from_config_index(mut index: usize, n: usize, k: usize) -> LabelField {
        let labels = (0..n)
            .map(|_| {
                let l = index % k;
                index /= k;
                l
            })
            .collect();
        LabelField { labels, k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PottsParams {
    pub delta: f64,
}

impl PottsParams {
    pub fn new(delta: f64) -> Result<PottsParams, PottsError> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(PottsError::InvalidDelta(delta));
        }
        Ok(PottsParams { delta })
    }
}

fn check_len(z: &LabelField, a: &Adjacency) -> Result<(), PottsError> {
    if z.len() != a.n() {
        return Err(PottsError::LengthMismatch {
            labels: z.len(),
            sites: a.n(),
        });
    }
    Ok(())
}

fn count_same(labels: &[usize], a: &Adjacency) -> usize {
    a.edges().iter().filter(|&&(i, j)| labels[i] == labels[j]).count()
}

/// `S(z)`: number of edges joining equal labels.
pub fn same_label_edges(z: &LabelField, a: &Adjacency) -> Result<usize, PottsError> {
    check_len(z, a)?;
    Ok(count_same(&z.labels, a))
}

/// `δ · S(z)`, the log-density without the normaliser.
pub fn potts_log_unnorm(z: &LabelField, p: &PottsParams, a: &Adjacency) -> Result<f64, PottsError> {
    Ok(p.delta * same_label_edges(z, a)? as f64)
}

/// Calls `f` with every labelling of `n` sites over `k` labels, in
/// [`LabelField::config_index`] order.
pub fn for_each_config(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut labels = vec![0; n];
    loop {
        f(&labels);
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

fn check_enumerable(n: usize, k: usize) -> Result<(), PottsError> {
    if k == 0 {
        return Err(PottsError::NoLabels);
    }
    let configs = (k as f64).powi(n as i32);
    if configs > BRUTE_FORCE_LIMIT {
        return Err(PottsError::TooLarge { configs });
    }
    Ok(())
}

/// Exact `Z_δ = Σ_z exp(δ S(z))` by enumeration.
pub fn potts_partition_brute(a: &Adjacency, k: usize, delta: f64) -> Result<f64, PottsError> {
    check_enumerable(a.n(), k)?;
    let mut z = 0.0;
    for_each_config(a.n(), k, |labels| z += (delta * count_same(labels, a) as f64).exp());
    Ok(z)
}

/// Exact probabilities `exp(δ S(z)) / Z_δ` of every configuration, indexed by
/// [`LabelField::config_index`].
pub fn potts_probabilities_brute(a: &Adjacency, k: usize, delta: f64) -> Result<Vec<f64>, PottsError> {
    check_enumerable(a.n(), k)?;
    let mut w = Vec::new();
    for_each_config(a.n(), k, |labels| w.push((delta * count_same(labels, a) as f64).exp()));
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn sw_sweep_in_place<R: Rng + ?Sized>(labels: &mut [usize], k: usize, delta: f64, a: &Adjacency, rng: &mut R) {
    let n = labels.len();
    let p_open = -(-delta).exp_m1();
    let mut uf = UnionFind::new(n);
    for &(i, j) in a.edges() {
        if labels[i] == labels[j] && rng.random::<f64>() < p_open {
            uf.union(i, j);
        }
    }
    let mut fresh = vec![usize::MAX; n];
    for i in 0..n {
        let root = uf.find(i);
        if fresh[root] == usize::MAX {
            fresh[root] = rng.random_range(0..k);
        }
        labels[i] = fresh[root];
    }
}

/// One Swendsen–Wang cluster update.
pub fn swendsen_wang_step<R: Rng + ?Sized>(
    z: &LabelField,
    p: &PottsParams,
    a: &Adjacency,
    rng: &mut R,
) -> LabelField {
    let mut labels = z.labels.clone();
    sw_sweep_in_place(&mut labels, z.k, p.delta, a, rng);
    LabelField { labels, k: z.k }
}

/// Draws a field from `sweeps` Swendsen–Wang updates started at a uniform
/// random labelling.
pub fn simulate_potts<R: Rng + ?Sized>(a: &Adjacency, k: usize, delta: f64, sweeps: usize, rng: &mut R) -> LabelField {
    let mut z = LabelField::uniform(a.n(), k, rng);
    for _ in 0..sweeps {
        sw_sweep_in_place(&mut z.labels, k, delta, a, rng);
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeStep {
    pub params: PottsParams,
    pub accepted: bool,
}

/// One exchange-algorithm update of δ under a uniform prior on `prior`,
/// using [`AUX_SWEEPS`] sweeps for the auxiliary field.
pub fn exchange_update_delta<R: Rng + ?Sized>(
    z: &LabelField,
    p: &PottsParams,
    a: &Adjacency,
    proposal_sd: f64,
    prior: (f64, f64),
    rng: &mut R,
) -> ExchangeStep {
    exchange_update_delta_with(z, p, a, proposal_sd, prior, AUX_SWEEPS, rng)
}

/// Exchange update with an explicit auxiliary burn-in.
///
/// Proposals falling outside the prior support have zero prior density and
/// are rejected without simulating the auxiliary field.
pub fn exchange_update_delta_with<R: Rng + ?Sized>(
    z: &LabelField,
    p: &PottsParams,
    a: &Adjacency,
    proposal_sd: f64,
    prior: (f64, f64),
    aux_sweeps: usize,
    rng: &mut R,
) -> ExchangeStep {
    let unchanged = ExchangeStep {
        params: *p,
        accepted: false,
    };
    if !(proposal_sd > 0.0) {
        return unchanged;
    }
    let proposal = Normal::new(p.delta, proposal_sd).expect("finite proposal").sample(rng);
    if proposal < prior.0 || proposal > prior.1 {
        return unchanged;
    }
    let w = simulate_potts(a, z.k, proposal, aux_sweeps, rng);
    let s_z = count_same(&z.labels, a) as f64;
    let s_w = count_same(&w.labels, a) as f64;
    let log_alpha = (proposal - p.delta) * (s_z - s_w);
    if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
        ExchangeStep {
            params: PottsParams { delta: proposal },
            accepted: true,
        }
    } else {
        unchanged
    }
}
