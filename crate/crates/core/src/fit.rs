//! Estimator-independent fit summary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nem::MixtureParams;
use crate::potts::LabelField;
use crate::prep::MixtureData;
use crate::seasonal::BasisSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nem,
    Gibbs,
    Clr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nem => "nem",
            Method::Gibbs => "gibbs",
            Method::Clr => "clr",
        }
    }

    /// Row label used in comparison tables.
    pub fn model_name(self) -> &'static str {
        match self {
            Method::Nem => "mixture",
            Method::Gibbs => "spatial mixture",
            Method::Clr => "CLR",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("fitted values do not align with the data ({0})")]
    AlignmentMismatch(String),
}

/// Free-form diagnostics; only the fields relevant to a method are filled.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Penalised objective after each iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_trace: Vec<f64>,
    /// Trace indices at which a component was reseeded; ascent is only
    /// guaranteed between consecutive boundaries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace_segments: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Held-out score for each candidate penalty weight.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_scores: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_acceptance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhat_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rhat_mu0: Vec<f64>,
    /// Log-posterior (up to a constant) of every retained sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log_posterior_trace: Vec<f64>,
    /// Sites whose posterior mode was a tie.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tied_sites: Vec<usize>,
    /// Number of component-mean draws taken from the diffuse fallback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty_component_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped_category: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub site_ids: Vec<String>,
    pub categories: Vec<String>,
    /// Latent label per site; absent for the lumped model.
    pub map_labels: Option<LabelField>,
    pub params: Option<MixtureParams>,
    /// Land-use category assigned to each mixture component.
    pub component_category: Vec<usize>,
    /// Baseline estimate per land-use category; `None` where the model has
    /// no estimate.
    pub category_baselines: Vec<Option<f64>>,
    pub basis: Option<BasisSet>,
    pub fitted: Vec<Vec<f64>>,
    pub sse: f64,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    /// Baseline of the component a site is assigned to.
    pub fn site_baseline(&self, i: usize) -> Option<f64> {
        let z = self.map_labels.as_ref()?.labels[i];
        Some(self.params.as_ref()?.mu0[z])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serialises")
    }
}

/// `Σ (y − ŷ)²` over the observed cells.
pub fn sse(fitted: &[Vec<f64>], data: &MixtureData) -> Result<f64, FitError> {
    if fitted.len() != data.n_sites() {
        return Err(FitError::AlignmentMismatch(format!(
            "{} fitted rows for {} sites",
            fitted.len(),
            data.n_sites()
        )));
    }
    let mut total = 0.0;
    for (i, row) in fitted.iter().enumerate() {
        if row.len() != data.t_len() {
            return Err(FitError::AlignmentMismatch(format!(
                "site {} has {} fitted values for {} grid steps",
                data.site_ids[i],
                row.len(),
                data.t_len()
            )));
        }
        for t in 0..row.len() {
            if data.observed[i][t] {
                let r = data.y[i][t] - row[t];
                total += r * r;
            }
        }
    }
    Ok(total)
}

/// Fitted curves of a labelled mixture.
pub fn mixture_fitted(labels: &LabelField, params: &MixtureParams, basis: &BasisSet) -> Vec<Vec<f64>> {
    let curves: Vec<Option<Vec<f64>>> = (0..params.k())
        .map(|k| basis.get(k).map(|b| params.component_curve(k, b)))
        .collect();
    labels
        .labels
        .iter()
        .map(|&z| {
            curves[z]
                .clone()
                .unwrap_or_else(|| vec![params.mu0[z]; basis.t_len])
        })
        .collect()
}

/// Assigns components to distinct land-use categories maximising the summed
/// composition share of each component's member sites. With more components
/// than categories the surplus components map to `usize::MAX`.
pub fn match_components(labels: &LabelField, compositions: &[Vec<f64>]) -> Vec<usize> {
    let k = labels.k;
    let c = compositions.first().map(Vec::len).unwrap_or(0);
    let mut score = vec![vec![0.0; c]; k];
    for (&z, comp) in labels.labels.iter().zip(compositions) {
        for (cat, &p) in comp.iter().enumerate() {
            score[z][cat] += p;
        }
    }
    if c == 0 {
        return vec![usize::MAX; k];
    }
    if c > 20 {
        return greedy_match(&score, k, c);
    }
    // best[mask] = best total using the first popcount(mask) components on
    // the categories in `mask`.
    let full = 1usize << c;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    let assigned = k.min(c);
    for mask in 0..full {
        if !best[mask].is_finite() {
            continue;
        }
        let comp = mask.count_ones() as usize;
        if comp >= assigned {
            continue;
        }
        for cat in 0..c {
            if mask & (1 << cat) == 0 {
                let next = mask | (1 << cat);
                let v = best[mask] + score[comp][cat];
                if v > best[next] + 1e-12 {
                    best[next] = v;
                    choice[next] = cat;
                }
            }
        }
    }
    let mut end = (0..full)
        .filter(|m| m.count_ones() as usize == assigned)
        .max_by(|&a, &b| best[a].total_cmp(&best[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut out = vec![usize::MAX; k];
    for comp in (0..assigned).rev() {
        let cat = choice[end];
        out[comp] = cat;
        end &= !(1 << cat);
    }
    out
}

fn greedy_match(score: &[Vec<f64>], k: usize, c: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; k];
    let mut used = vec![false; c];
    for _ in 0..k.min(c) {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for comp in (0..k).filter(|&z| out[z] == usize::MAX) {
            for cat in (0..c).filter(|&j| !used[j]) {
                if score[comp][cat] > best.0 {
                    best = (score[comp][cat], comp, cat);
                }
            }
        }
        out[best.1] = best.2;
        used[best.2] = true;
    }
    out
}

/// Category baselines implied by a mixture fit.
pub fn category_baselines(matching: &[usize], params: &MixtureParams, n_categories: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; n_categories];
    for (k, &cat) in matching.iter().enumerate() {
        if cat < n_categories {
            out[cat] = Some(params.mu0[k]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_prefers_dominant_share() {
        let z = LabelField::new(vec![0, 0, 1, 1], 2).unwrap();
        let comps = vec![
            vec![0.1, 0.9],
            vec![0.2, 0.8],
            vec![0.7, 0.3],
            vec![0.6, 0.4],
        ];
        assert_eq!(match_components(&z, &comps), vec![1, 0]);
    }

    #[test]
    fn matching_is_a_joint_optimum() {
        // Greedy would give component 0 category 0 (0.9) and leave 1 with 0.0.
        let z = LabelField::new(vec![0, 1], 2).unwrap();
        let comps = vec![vec![0.9, 0.8], vec![0.9, 0.0]];
        assert_eq!(match_components(&z, &comps), vec![1, 0]);
    }

    #[test]
    fn surplus_components_unmatched() {
        let z = LabelField::new(vec![0, 1, 2], 3).unwrap();
        let comps = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        let m = match_components(&z, &comps);
        assert_eq!(&m[..2], &[0, 1]);
        assert_eq!(m[2], usize::MAX);
    }
}
