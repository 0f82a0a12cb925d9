//! Fit-ready panel: every site on one common weekly grid, with its STL
//! decomposition and catchment composition.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{regularize_on_grid, Dataset, GridOptions, SeriesError};
use crate::seasonal::{decompose_values, SeasonalError, SiteBasis, StlParams};

#[derive(Debug, Error, PartialEq)]
pub enum PrepError {
    #[error("dataset has no sites")]
    NoSites,
    #[error("site {site}: {source}")]
    Series {
        site: String,
        #[source]
        source: SeriesError,
    },
    #[error("site time ranges do not overlap")]
    NoOverlap,
    #[error("site {site}: {source}")]
    Seasonal {
        site: String,
        #[source]
        source: SeasonalError,
    },
    #[error("site {0} has no land-use composition")]
    MissingComposition(String),
    #[error("series lengths differ")]
    Ragged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepOptions {
    pub grid: GridOptions,
    pub stl: StlParams,
}

impl Default for PrepOptions {
    fn default() -> Self {
        PrepOptions {
            grid: GridOptions::default(),
            stl: StlParams::for_period(52),
        }
    }
}

/// Regularised panel of `n` sites by `T` grid steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureData {
    pub site_ids: Vec<String>,
    pub start: NaiveDate,
    pub step_days: i64,
    pub period: usize,
    /// `y[i][t]`, gaps filled.
    pub y: Vec<Vec<f64>>,
    /// `true` where the cell held a raw observation.
    pub observed: Vec<Vec<bool>>,
    /// Cells entering the likelihood; all `true` except for held-out fits.
    pub active: Vec<Vec<bool>>,
    pub bases: Vec<SiteBasis>,
    /// Composition of each site's catchment, in category order.
    pub compositions: Vec<Vec<f64>>,
    pub categories: Vec<String>,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2008, 1, 7).expect("valid date")
}

fn decompose_all(site_ids: &[String], y: &[Vec<f64>], stl: &StlParams) -> Result<Vec<SiteBasis>, PrepError> {
    site_ids
        .par_iter()
        .zip(y.par_iter())
        .map(|(id, series)| {
            decompose_values(id, series, stl).map_err(|source| PrepError::Seasonal {
                site: id.clone(),
                source,
            })
        })
        .collect()
}

impl MixtureData {
    /// Regularises every site on a grid anchored at the earliest observation
    /// in the dataset and keeps the window covered by all sites.
    pub fn from_dataset(d: &Dataset, options: &PrepOptions) -> Result<MixtureData, PrepError> {
        if d.sites.is_empty() {
            return Err(PrepError::NoSites);
        }
        let anchor = d.observations.iter().map(|o| o.date).min().ok_or(PrepError::Series {
            site: d.sites[0].site_id.clone(),
            source: SeriesError::TooFewObservations(0),
        })?;
        let step = options.grid.step_days;
        let mut series = Vec::with_capacity(d.sites.len());
        for (site, obs) in d.sites.iter().zip(d.observations_by_site()) {
            let s = regularize_on_grid(&obs, anchor, &options.grid).map_err(|source| PrepError::Series {
                site: site.site_id.clone(),
                source,
            })?;
            series.push(s);
        }
        let bin = |date: NaiveDate| (date - anchor).num_days() / step;
        let lo = series.iter().map(|s| bin(s.start)).max().unwrap_or(0);
        let hi = series.iter().map(|s| bin(s.start) + s.len() as i64).min().unwrap_or(0);
        if hi <= lo {
            return Err(PrepError::NoOverlap);
        }
        let mut y = Vec::with_capacity(series.len());
        let mut observed = Vec::with_capacity(series.len());
        for s in &series {
            let off = (lo - bin(s.start)) as usize;
            let len = (hi - lo) as usize;
            y.push(s.values[off..off + len].to_vec());
            observed.push(s.observed[off..off + len].to_vec());
        }
        let compositions = d.site_compositions().ok_or_else(|| {
            let missing = d
                .sites
                .iter()
                .find(|s| !d.compositions.iter().any(|c| c.catchment_id == s.catchment_id))
                .map(|s| s.site_id.clone())
                .unwrap_or_default();
            PrepError::MissingComposition(missing)
        })?;
        let site_ids: Vec<String> = d.sites.iter().map(|s| s.site_id.clone()).collect();
        let bases = decompose_all(&site_ids, &y, &options.stl)?;
        let t_len = (hi - lo) as usize;
        Ok(MixtureData {
            site_ids,
            start: anchor + chrono::Duration::days(lo * step),
            step_days: step,
            period: options.stl.period,
            active: vec![vec![true; t_len]; y.len()],
            y,
            observed,
            bases,
            compositions,
            categories: d.categories.clone(),
        })
    }

    /// Panel from already regular, fully observed series.
    pub fn from_series(
        site_ids: Vec<String>,
        y: Vec<Vec<f64>>,
        compositions: Vec<Vec<f64>>,
        categories: Vec<String>,
        stl: &StlParams,
    ) -> Result<MixtureData, PrepError> {
        if y.is_empty() {
            return Err(PrepError::NoSites);
        }
        let t_len = y[0].len();
        if y.iter().any(|s| s.len() != t_len) || site_ids.len() != y.len() || compositions.len() != y.len() {
            return Err(PrepError::Ragged);
        }
        let bases = decompose_all(&site_ids, &y, stl)?;
        Ok(MixtureData {
            site_ids,
            start: default_start(),
            step_days: 7,
            period: stl.period,
            observed: vec![vec![true; t_len]; y.len()],
            active: vec![vec![true; t_len]; y.len()],
            y,
            bases,
            compositions,
            categories,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.y.len()
    }

    pub fn t_len(&self) -> usize {
        self.y.first().map(Vec::len).unwrap_or(0)
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn n_active(&self, i: usize) -> usize {
        self.active[i].iter().filter(|&&a| a).count()
    }

    /// Variance of every active cell, used to floor noise variances.
    pub fn active_variance(&self) -> f64 {
        let vals: Vec<f64> = self
            .y
            .iter()
            .zip(&self.active)
            .flat_map(|(row, act)| row.iter().zip(act).filter(|(_, &a)| a).map(|(v, _)| *v))
            .collect();
        crate::linalg::variance(&vals)
    }

    pub fn active_mean(&self) -> f64 {
        let (s, c) = self
            .y
            .iter()
            .zip(&self.active)
            .flat_map(|(row, act)| row.iter().zip(act))
            .filter(|(_, &a)| a)
            .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    }

    /// Per-site (mean, trend slope, seasonal amplitude) summaries.
    pub fn summaries(&self) -> Vec<Vec<f64>> {
        self.bases
            .iter()
            .map(|b| vec![b.f_const, b.trend_slope(), b.seasonal_amplitude()])
            .collect()
    }

    /// Splits off every `every`-th grid step (offset `every − 1`) as a
    /// held-out set: returns the training panel and the held-out mask.
    pub fn hold_out(&self, every: usize) -> (MixtureData, Vec<Vec<bool>>) {
        let mut train = self.clone();
        let mut test = vec![vec![false; self.t_len()]; self.n_sites()];
        for (i, row) in train.active.iter_mut().enumerate() {
            for (t, a) in row.iter_mut().enumerate() {
                if every > 1 && t % every == every - 1 && *a {
                    *a = false;
                    test[i][t] = true;
                }
            }
        }
        (train, test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LandUseComposition, Observation, Site};

    fn dataset() -> Dataset {
        let start = NaiveDate::from_ymd_opt(2010, 1, 4).unwrap();
        let mut observations = Vec::new();
        for (i, offset) in [(0usize, 0i64), (1, 3)] {
            for t in 0..(120 + offset) {
                observations.push(Observation {
                    site_id: format!("s{i}"),
                    date: start + chrono::Duration::days(7 * (t + offset)),
                    value: (t as f64 * 0.3).sin() + i as f64,
                });
            }
        }
        Dataset {
            sites: (0..2)
                .map(|i| Site {
                    site_id: format!("s{i}"),
                    x: i as f64,
                    y: 0.0,
                    catchment_id: "c".into(),
                })
                .collect(),
            observations,
            compositions: vec![LandUseComposition {
                catchment_id: "c".into(),
                proportions: vec![0.5, 0.5],
            }],
            categories: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn intersects_site_windows() {
        let d = dataset();
        let m = MixtureData::from_dataset(&d, &PrepOptions::default()).unwrap();
        assert_eq!(m.t_len(), 117);
        assert_eq!(m.start, NaiveDate::from_ymd_opt(2010, 1, 25).unwrap());
        assert_eq!(m.y[1][0], 1.0);
        assert_eq!(m.compositions[1], vec![0.5, 0.5]);
    }

    #[test]
    fn hold_out_masks_every_fifth_step() {
        let m = MixtureData::from_dataset(&dataset(), &PrepOptions::default()).unwrap();
        let (train, test) = m.hold_out(5);
        assert!(!train.active[0][4] && test[0][4]);
        assert!(train.active[0][5] && !test[0][5]);
        assert_eq!(train.n_active(0) + test[0].iter().filter(|&&b| b).count(), m.t_len());
    }
}
