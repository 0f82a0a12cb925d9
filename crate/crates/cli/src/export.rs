//! GeoJSON and CSV exports of lattices, latent maps and bases.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use landmix::dataset::Site;
use landmix::fit::FitResult;
use landmix::lattice::Adjacency;
use serde_json::{json, Value};

use crate::error::CliError;

fn ring(polygon: &[(f64, f64)]) -> Vec<[f64; 2]> {
    let mut r: Vec<[f64; 2]> = polygon.iter().map(|&(x, y)| [x, y]).collect();
    if let Some(&first) = r.first() {
        r.push(first);
    }
    r
}

fn feature(polygon: &[(f64, f64)], properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "Polygon", "coordinates": [ring(polygon)] },
        "properties": properties,
    })
}

fn collection(features: Vec<Value>) -> String {
    let mut s = serde_json::to_string_pretty(&json!({ "type": "FeatureCollection", "features": features }))
        .expect("GeoJSON serialises");
    s.push('\n');
    s
}

fn polygons(lattice: &Adjacency) -> Result<&[Vec<(f64, f64)>], CliError> {
    lattice
        .polygons()
        .ok_or_else(|| CliError::usage("NoPolygons", "lattice was built from an edge list and has no cell polygons"))
}

/// Edge list `site_i,site_j` plus one cell per site.
pub fn lattice_files(lattice: &Adjacency, sites: &[Site]) -> Result<(String, String), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["site_i", "site_j"]).expect("in-memory write");
    for &(i, j) in lattice.edges() {
        w.write_record([&sites[i].site_id, &sites[j].site_id]).expect("in-memory write");
    }
    let edges = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
    let cells = polygons(lattice)?
        .iter()
        .enumerate()
        .map(|(i, poly)| {
            let neighbours: Vec<&str> = lattice.neighbors(i).iter().map(|&j| sites[j].site_id.as_str()).collect();
            feature(
                poly,
                json!({
                    "site_id": sites[i].site_id,
                    "catchment_id": sites[i].catchment_id,
                    "neighbors": neighbours,
                }),
            )
        })
        .collect();
    Ok((edges, collection(cells)))
}

/// Name of component `k`: its matched land-use category, or `component_k`.
pub fn label_name(fit: &FitResult, k: usize) -> String {
    let fallback = || format!("component_{k}");
    match fit.component_category.get(k) {
        Some(&c) if fit.component_category.iter().filter(|&&o| o == c).count() == 1 => {
            fit.categories.get(c).cloned().unwrap_or_else(fallback)
        }
        _ => fallback(),
    }
}

/// Site polygons coloured by MAP label, ordered by ascending baseline.
pub fn latent_map(fit: &FitResult, lattice: &Adjacency, sites: &[Site]) -> Result<String, CliError> {
    let polys = polygons(lattice)?;
    let labels = fit
        .map_labels
        .as_ref()
        .ok_or_else(|| CliError::usage("NoLabels", format!("{} fit has no latent labels", fit.method.name())))?;
    let params = fit
        .params
        .as_ref()
        .ok_or_else(|| CliError::usage("NoLabels", "fit has no component parameters"))?;
    let index: HashMap<&str, usize> = fit.site_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rows = Vec::new();
    for (s, site) in sites.iter().enumerate() {
        let &i = index.get(site.site_id.as_str()).ok_or_else(|| {
            CliError::usage("SiteMismatch", format!("site {:?} is not part of the fit", site.site_id))
        })?;
        let z = labels.labels[i];
        rows.push((params.mu0[z], s, z));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let features = rows
        .into_iter()
        .map(|(mu0, s, z)| {
            feature(
                &polys[s],
                json!({
                    "site_id": sites[s].site_id,
                    "catchment_id": sites[s].catchment_id,
                    "map_label": z,
                    "label_name": label_name(fit, z),
                    "baseline_mu0": mu0,
                }),
            )
        })
        .collect();
    Ok(collection(features))
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// One `t,trend,seasonal` CSV per component plus a long-format table
/// `landuse,basis,t,value`.
pub fn basis_files(fit: &FitResult) -> Result<Vec<(PathBuf, String)>, CliError> {
    let empty = || CliError::usage("EmptyBasis", "fit carries no temporal basis");
    let basis = fit.basis.as_ref().ok_or_else(empty)?;
    if basis.components.iter().all(Option::is_none) {
        return Err(empty());
    }
    let mut long = csv::Writer::from_writer(Vec::new());
    long.write_record(["landuse", "basis", "t", "value"]).expect("in-memory write");
    let mut files = Vec::new();
    for (k, comp) in basis.components.iter().enumerate() {
        let Some(comp) = comp else { continue };
        let name = label_name(fit, k);
        let (trend, seasonal) = (normalized(&comp.trend), normalized(&comp.seasonal));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "trend", "seasonal"]).expect("in-memory write");
        for t in 0..trend.len() {
            w.write_record([t.to_string(), trend[t].to_string(), seasonal[t].to_string()])
                .expect("in-memory write");
            long.write_record([name.clone(), "trend".into(), t.to_string(), trend[t].to_string()])
                .expect("in-memory write");
        }
        for (t, v) in seasonal.iter().enumerate() {
            long.write_record([name.clone(), "seasonal".into(), t.to_string(), v.to_string()])
                .expect("in-memory write");
        }
        files.push((
            PathBuf::from(format!("basis_{}.csv", file_stem(&name))),
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"),
        ));
    }
    files.push((
        PathBuf::from("basis_long.csv"),
        String::from_utf8(long.into_inner().expect("flush")).expect("utf-8"),
    ));
    Ok(files)
}

/// Reads `site_i,site_j` rows naming sites by id.
pub fn read_edges(path: &Path, sites: &[Site]) -> Result<Vec<(usize, usize)>, CliError> {
    let index: HashMap<&str, usize> = sites.iter().enumerate().map(|(i, s)| (s.site_id.as_str(), i)).collect();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::usage("MissingFile", format!("{}: {e}", path.display())))?;
    let mut edges = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage("MalformedCsv", format!("{}: {e}", path.display())))?;
        let mut ends = [0usize; 2];
        for (slot, end) in ends.iter_mut().enumerate() {
            let id = record.get(slot).unwrap_or("").trim();
            *end = *index.get(id).ok_or_else(|| {
                CliError::usage(
                    "UnknownSiteReference",
                    format!("{}, row {}: unknown site {id:?}", path.display(), row + 2),
                )
            })?;
        }
        edges.push((ends[0], ends[1]));
    }
    Ok(edges)
}
