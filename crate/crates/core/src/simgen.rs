//! Synthetic catchments with known latent land-use fields.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, LandUseComposition, Observation, Site};
use crate::lattice::{build_voronoi_adjacency, Adjacency, LatticeError};
use crate::potts::{simulate_potts, LabelField};
use crate::rng::{substream, Stream};

/// Swendsen–Wang sweeps used to draw a latent field.
pub const LATENT_SWEEPS: usize = 500;

const MAX_LABEL_RESAMPLES: u32 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("label fields have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("no latent field with all {0} labels after {MAX_LABEL_RESAMPLES} draws")]
    LabelsMissing(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Geometry {
    /// Sites on a regular `width × height` grid with unit spacing.
    Grid { width: usize, height: usize },
    /// Sites uniform on `[0, extent]²`.
    UniformRandom { extent: f64 },
    Given { points: Vec<(f64, f64)> },
}

/// Mean curve of one component: `baseline + slope·t + amplitude·sin(2πt/period + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub baseline: f64,
    pub slope: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub noise_sd: f64,
}

impl CurveSpec {
    pub fn mean(&self, t: usize, period: usize) -> f64 {
        let t = t as f64;
        self.baseline + self.slope * t + self.amplitude * (std::f64::consts::TAU * t / period as f64 + self.phase).sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n_sites: usize,
    pub geometry: Geometry,
    pub k: usize,
    pub delta: f64,
    pub components: Vec<CurveSpec>,
    pub t_len: usize,
    pub period: usize,
    /// Share of the true label in each catchment composition.
    pub q: f64,
    /// Concentration of the symmetric Dirichlet spreading `1 − q`.
    pub dirichlet_alpha: f64,
    /// Redraw the latent field until every label occurs.
    pub require_all_labels: bool,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl SimSpec {
    /// Default scenario with `k` components: baselines `−3, −1, 1, …` (gaps of
    /// four noise standard deviations), distinct slopes, amplitudes and phases.
    pub fn with_components(k: usize) -> SimSpec {
        let components = (0..k)
            .map(|c| CurveSpec {
                baseline: -3.0 + 2.0 * c as f64,
                slope: [0.002, -0.002, 0.004, -0.004][c % 4] * (1.0 + (c / 4) as f64),
                amplitude: [1.0, 0.5, 1.5, 0.8][c % 4],
                phase: std::f64::consts::FRAC_PI_2 * (c % 4) as f64,
                noise_sd: 0.5,
            })
            .collect();
        SimSpec {
            n_sites: 16,
            geometry: Geometry::UniformRandom { extent: 10.0 },
            k,
            delta: 1.0,
            components,
            t_len: 260,
            period: 52,
            q: 0.4,
            dirichlet_alpha: 1.0,
            require_all_labels: true,
            start_date: NaiveDate::from_ymd_opt(2008, 1, 7).expect("valid date"),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidSpec(m.to_string()));
        if self.n_sites < 2 {
            return bad("n_sites must be at least 2");
        }
        if self.k < 1 {
            return bad("K must be at least 1");
        }
        if self.components.len() != self.k {
            return bad("one curve spec per component is required");
        }
        if self.period < 2 || self.t_len < 2 * self.period {
            return bad("series must cover at least two periods");
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad("delta must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.q) {
            return bad("q must lie in [0, 1]");
        }
        if !(self.dirichlet_alpha > 0.0) {
            return bad("dirichlet_alpha must be positive");
        }
        if self.components.iter().any(|c| !(c.noise_sd >= 0.0)) {
            return bad("noise_sd must be non-negative");
        }
        if self.require_all_labels && self.k > self.n_sites {
            return bad("cannot place every label with fewer sites than components");
        }
        match &self.geometry {
            Geometry::Grid { width, height } if width * height != self.n_sites => {
                bad("grid size must equal n_sites")
            }
            Geometry::Given { points } if points.len() != self.n_sites => bad("one point per site is required"),
            Geometry::UniformRandom { extent } if !(*extent > 0.0) => bad("extent must be positive"),
            _ => Ok(()),
        }
    }

    pub fn categories(&self) -> Vec<String> {
        (0..self.k).map(|c| format!("landuse_{c}")).collect()
    }
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec::with_components(4)
    }
}

/// A simulated dataset with its ground truth.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub dataset: Dataset,
    pub truth: LabelField,
    pub adjacency: Adjacency,
    pub points: Vec<(f64, f64)>,
}

pub fn site_points<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Vec<(f64, f64)> {
    match &spec.geometry {
        Geometry::Grid { width, .. } => (0..spec.n_sites).map(|i| ((i % width) as f64, (i / width) as f64)).collect(),
        Geometry::UniformRandom { extent } => (0..spec.n_sites)
            .map(|_| (rng.random::<f64>() * extent, rng.random::<f64>() * extent))
            .collect(),
        Geometry::Given { points } => points.clone(),
    }
}

/// Potts field after [`LATENT_SWEEPS`] Swendsen–Wang sweeps from a uniform start.
pub fn simulate_latent<R: Rng + ?Sized>(a: &Adjacency, k: usize, delta: f64, rng: &mut R) -> LabelField {
    simulate_potts(a, k, delta, LATENT_SWEEPS, rng)
}

fn composition<R: Rng + ?Sized>(label: usize, spec: &SimSpec, rng: &mut R) -> Vec<f64> {
    let mut p = vec![0.0; spec.k];
    p[label] = spec.q;
    if spec.k == 1 {
        p[0] = 1.0;
        return p;
    }
    let gamma = Gamma::new(spec.dirichlet_alpha, 1.0).expect("positive concentration");
    let draws: Vec<f64> = (0..spec.k - 1).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    let others = (0..spec.k).filter(|&c| c != label);
    for (c, g) in others.zip(&draws) {
        p[c] = if total > 0.0 {
            (1.0 - spec.q) * g / total
        } else {
            (1.0 - spec.q) / (spec.k - 1) as f64
        };
    }
    // Absorb rounding so each row sums to one.
    let drift: f64 = 1.0 - p.iter().sum::<f64>();
    p[label] += drift;
    p
}

/// Observations and compositions for a given latent field; every site lies
/// in its own catchment.
pub fn simulate_observations<R: Rng + ?Sized>(
    z: &LabelField,
    spec: &SimSpec,
    points: &[(f64, f64)],
    rng: &mut R,
) -> Dataset {
    let width = (z.len().max(1) as f64).log10().floor() as usize + 1;
    let site_id = |i: usize| format!("s{i:0width$}");
    let catchment_id = |i: usize| format!("c{i:0width$}");
    let sites: Vec<Site> = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Site {
            site_id: site_id(i),
            x,
            y,
            catchment_id: catchment_id(i),
        })
        .collect();
    let mut observations = Vec::with_capacity(z.len() * spec.t_len);
    for (i, &label) in z.labels.iter().enumerate() {
        let curve = &spec.components[label];
        let noise = Normal::new(0.0, curve.noise_sd).expect("finite sd");
        for t in 0..spec.t_len {
            let eps = if curve.noise_sd > 0.0 { noise.sample(rng) } else { 0.0 };
            observations.push(Observation {
                site_id: site_id(i),
                date: spec.start_date + chrono::Duration::days(7 * t as i64),
                value: curve.mean(t, spec.period) + eps,
            });
        }
    }
    let compositions = z
        .labels
        .iter()
        .enumerate()
        .map(|(i, &label)| LandUseComposition {
            catchment_id: catchment_id(i),
            proportions: composition(label, spec, rng),
        })
        .collect();
    Dataset {
        sites,
        observations,
        compositions,
        categories: spec.categories(),
    }
}

/// Full scenario from `spec.seed`: geometry, lattice, latent field, data.
pub fn simulate(spec: &SimSpec) -> Result<Simulation, SimError> {
    spec.validate()?;
    let points = site_points(spec, &mut substream(spec.seed, Stream::Geometry, 0));
    let adjacency = build_voronoi_adjacency(&sites_for(&points), None)?;
    let mut truth = None;
    for attempt in 0..MAX_LABEL_RESAMPLES {
        let mut rng = substream(spec.seed, Stream::Latent, attempt);
        let z = simulate_latent(&adjacency, spec.k, spec.delta, &mut rng);
        if !spec.require_all_labels || z.counts().iter().all(|&c| c > 0) {
            truth = Some(z);
            break;
        }
    }
    let truth = truth.ok_or(SimError::LabelsMissing(spec.k))?;
    let dataset = simulate_observations(&truth, spec, &points, &mut substream(spec.seed, Stream::Observations, 0));
    Ok(Simulation {
        dataset,
        truth,
        adjacency,
        points,
    })
}

fn sites_for(points: &[(f64, f64)]) -> Vec<Site> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Site {
            site_id: i.to_string(),
            x,
            y,
            catchment_id: String::new(),
        })
        .collect()
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand Index between two partitions.
pub fn recovery_score(truth: &LabelField, estimate: &LabelField) -> Result<f64, SimError> {
    if truth.len() != estimate.len() {
        return Err(SimError::LengthMismatch(truth.len(), estimate.len()));
    }
    let (ka, kb) = (
        truth.labels.iter().max().map_or(0, |m| m + 1),
        estimate.labels.iter().max().map_or(0, |m| m + 1),
    );
    let mut table = vec![vec![0u64; kb]; ka];
    for (&a, &b) in truth.labels.iter().zip(&estimate.labels) {
        table[a][b] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&v| choose2(v)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|b| choose2(table.iter().map(|r| r[b]).sum())).sum();
    let total = choose2(truth.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < 1e-12 {
        // Both partitions trivial (all-in-one or all singletons).
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
