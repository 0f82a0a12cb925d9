//! Lumped CLR regression and the model comparison table.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, Diagnostics, FitError, FitResult, Method};
use crate::prep::MixtureData;
use crate::seasonal::{decompose_values, SeasonalError, StlParams};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("composition has a zero entry at category {0}")]
    ZeroComponent(usize),
    #[error("composition has no positive entry")]
    EmptyComposition,
    #[error("design matrix is rank deficient")]
    SingularDesign,
    #[error("n_basis must be 1, 2 or 3, got {0}")]
    BadBasisCount(usize),
    #[error("fits do not share a category set: {0}")]
    CategoryMismatch(String),
    #[error(transparent)]
    Seasonal(#[from] SeasonalError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroPolicy {
    /// Replace zeros by half the smallest positive share, then renormalise.
    #[default]
    Multiplicative,
    Error,
}

/// Composition with zeros handled according to `policy`.
pub fn replace_zeros(p: &[f64], policy: ZeroPolicy) -> Result<Vec<f64>, BaselineError> {
    if let Some(k) = p.iter().position(|&v| v <= 0.0) {
        if policy == ZeroPolicy::Error {
            return Err(BaselineError::ZeroComponent(k));
        }
    } else {
        return Ok(p.to_vec());
    }
    let min_pos = p
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Err(BaselineError::EmptyComposition);
    }
    let filled: Vec<f64> = p.iter().map(|&v| if v > 0.0 { v } else { 0.5 * min_pos }).collect();
    let total: f64 = filled.iter().sum();
    Ok(filled.into_iter().map(|v| v / total).collect())
}

/// Centred log-ratio `log p_k − mean_j log p_j`.
pub fn clr_transform(p: &[f64], policy: ZeroPolicy) -> Result<Vec<f64>, BaselineError> {
    let p = replace_zeros(p, policy)?;
    let logs: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    Ok(logs.into_iter().map(|l| l - mean).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClrOptions {
    pub n_basis: usize,
    pub zero_policy: ZeroPolicy,
}

impl Default for ClrOptions {
    fn default() -> Self {
        ClrOptions {
            n_basis: 2,
            zero_policy: ZeroPolicy::Multiplicative,
        }
    }
}

/// Least-squares solution of the lumped model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClrFit {
    /// Coefficient of each basis function (intercepts).
    pub intercepts: Vec<f64>,
    /// `slopes[c][b]`: coefficient of `clr_c · g_b`; `None` for the dropped
    /// category.
    pub slopes: Vec<Option<Vec<f64>>>,
    pub dropped: usize,
    pub fitted: Vec<Vec<f64>>,
}

/// Global basis `[1, trend, seasonal][..n_basis]` from STL of the pooled
/// mean series.
pub fn global_basis(data: &MixtureData, n_basis: usize, stl: &StlParams) -> Result<Vec<Vec<f64>>, BaselineError> {
    if !(1..=3).contains(&n_basis) {
        return Err(BaselineError::BadBasisCount(n_basis));
    }
    let t_len = data.t_len();
    let pooled: Vec<f64> = (0..t_len)
        .map(|t| data.y.iter().map(|row| row[t]).sum::<f64>() / data.n_sites() as f64)
        .collect();
    let b = decompose_values("pooled", &pooled, stl)?;
    let all = [vec![1.0; t_len], b.trend_component(), b.seasonal_component()];
    Ok(all[..n_basis].to_vec())
}

/// Category with the smallest total share, ties to the lowest index.
pub fn dropped_category(compositions: &[Vec<f64>]) -> usize {
    let c = compositions.first().map(Vec::len).unwrap_or(0);
    let totals: Vec<f64> = (0..c).map(|j| compositions.iter().map(|p| p[j]).sum()).collect();
    (0..c).fold(0, |best, j| if totals[j] < totals[best] { j } else { best })
}

/// Ordinary least squares of every active cell on `g_b` and `clr_c · g_b`
/// for all basis functions `g_b` and retained categories `c`.
pub fn fit_clr_with_basis(
    data: &MixtureData,
    basis: &[Vec<f64>],
    policy: ZeroPolicy,
) -> Result<ClrFit, BaselineError> {
    let clr: Vec<Vec<f64>> = data
        .compositions
        .iter()
        .map(|p| clr_transform(p, policy))
        .collect::<Result<_, _>>()?;
    let n_cat = data.n_categories();
    let dropped = dropped_category(&data.compositions);
    let kept: Vec<usize> = (0..n_cat).filter(|&c| c != dropped).collect();
    let nb = basis.len();
    let p = nb * (1 + kept.len());

    let row = |i: usize, t: usize| -> Vec<f64> {
        let mut x = Vec::with_capacity(p);
        for g in basis {
            x.push(g[t]);
        }
        for &c in &kept {
            for g in basis {
                x.push(clr[i][c] * g[t]);
            }
        }
        x
    };
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for i in 0..data.n_sites() {
        for t in 0..data.t_len() {
            if !data.active[i][t] {
                continue;
            }
            let x = row(i, t);
            for a in 0..p {
                xty[a] += x[a] * data.y[i][t];
                for b in 0..p {
                    xtx[(a, b)] += x[a] * x[b];
                }
            }
        }
    }
    // Rank check on the correlation-scaled normal matrix.
    let scale: Vec<f64> = (0..p).map(|a| xtx[(a, a)].sqrt()).collect();
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(BaselineError::SingularDesign);
    }
    let scaled = DMatrix::from_fn(p, p, |a, b| xtx[(a, b)] / (scale[a] * scale[b]));
    let eig = scaled.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    if lo <= 1e-10 * hi {
        return Err(BaselineError::SingularDesign);
    }
    let ch = scaled.cholesky().ok_or(BaselineError::SingularDesign)?;
    let rhs = DVector::from_fn(p, |a, _| xty[a] / scale[a]);
    let beta_scaled = ch.solve(&rhs);
    let beta: Vec<f64> = (0..p).map(|a| beta_scaled[a] / scale[a]).collect();

    let fitted = (0..data.n_sites())
        .map(|i| {
            (0..data.t_len())
                .map(|t| row(i, t).iter().zip(&beta).map(|(x, b)| x * b).sum())
                .collect()
        })
        .collect();
    let mut slopes = vec![None; n_cat];
    for (m, &c) in kept.iter().enumerate() {
        slopes[c] = Some(beta[nb * (1 + m)..nb * (2 + m)].to_vec());
    }
    Ok(ClrFit {
        intercepts: beta[..nb].to_vec(),
        slopes,
        dropped,
        fitted,
    })
}

/// Lumped CLR model with `n_basis` pooled basis functions. The baseline of
/// a category is its CLR coefficient on the constant basis function.
pub fn fit_clr_model(data: &MixtureData, opts: &ClrOptions, stl: &StlParams) -> Result<FitResult, BaselineError> {
    let basis = global_basis(data, opts.n_basis, stl)?;
    let clr = fit_clr_with_basis(data, &basis, opts.zero_policy)?;
    let sse = fit::sse(&clr.fitted, data)?;
    Ok(FitResult {
        method: Method::Clr,
        site_ids: data.site_ids.clone(),
        categories: data.categories.clone(),
        map_labels: None,
        params: None,
        component_category: Vec::new(),
        category_baselines: clr.slopes.iter().map(|s| s.as_ref().map(|v| v[0])).collect(),
        basis: None,
        fitted: clr.fitted,
        sse,
        diagnostics: Diagnostics {
            dropped_category: Some(clr.dropped),
            notes: vec![format!(
                "intercepts {:?}; {} coefficients",
                clr.intercepts,
                opts.n_basis * data.n_categories()
            )],
            ..Diagnostics::default()
        },
    })
}

/// `Σ (y − ŷ)²` over observed cells.
pub fn sse(fit: &FitResult, data: &MixtureData) -> Result<f64, FitError> {
    fit::sse(&fit.fitted, data)
}

// ---------------------------------------------------------------------------
// Comparison table

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub category: String,
    pub baselines: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub models: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub sse: Vec<f64>,
}

/// Table of category baselines per model, rows sorted by the first mixture
/// model's baselines (categories without an estimate last).
pub fn compare_models(fits: &[FitResult]) -> Result<ComparisonTable, BaselineError> {
    if fits.len() < 2 {
        return Err(BaselineError::CategoryMismatch(format!(
            "need at least two fits, got {}",
            fits.len()
        )));
    }
    let categories = &fits[0].categories;
    if let Some(f) = fits.iter().find(|f| &f.categories != categories || f.category_baselines.len() != categories.len()) {
        return Err(BaselineError::CategoryMismatch(format!(
            "{} fit has categories {:?}, expected {:?}",
            f.method.name(),
            f.categories,
            categories
        )));
    }
    let key = fits
        .iter()
        .find(|f| f.method != Method::Clr)
        .unwrap_or(&fits[0]);
    let mut order: Vec<usize> = (0..categories.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (key.category_baselines[a], key.category_baselines[b]);
        match (x, y) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then(a.cmp(&b))
    });
    Ok(ComparisonTable {
        models: fits.iter().map(|f| f.method.model_name().to_string()).collect(),
        rows: order
            .into_iter()
            .map(|c| ComparisonRow {
                category: categories[c].clone(),
                baselines: fits.iter().map(|f| f.category_baselines[c]).collect(),
            })
            .collect(),
        sse: fits.iter().map(|f| f.sse).collect(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["category".to_string()];
        header.extend(self.models.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.category.clone()];
            rec.extend(r.baselines.iter().map(|v| v.map(|x| format!("{x:.6}")).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        let mut footer = vec!["SSE".to_string()];
        footer.extend(self.sse.iter().map(|s| format!("{s:.6}")));
        w.write_record(&footer).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Fixed-width text layout with an SSE footer line.
    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Land use".to_string()];
        header.extend(self.models.iter().cloned());
        grid.push(header);
        for r in &self.rows {
            let mut line = vec![r.category.clone()];
            line.extend(r.baselines.iter().map(|v| cell(*v)));
            grid.push(line);
        }
        let mut footer = vec!["SSE".to_string()];
        footer.extend(self.sse.iter().map(|s| format!("{s:.2}")));
        grid.push(footer);
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        let render = |r: &Vec<String>| {
            r.iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let rule = "-".repeat(total);
        let mut out = Vec::new();
        out.push(render(&grid[0]));
        out.push(rule.clone());
        for r in &grid[1..grid.len() - 1] {
            out.push(render(r));
        }
        out.push(rule);
        out.push(render(&grid[grid.len() - 1]));
        out.join("\n") + "\n"
    }
}
