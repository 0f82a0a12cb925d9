use std::path::Path;

use landmix::baseline::{compare_models, fit_clr_model, ClrOptions};
use landmix::dataset::{load_dataset, save_dataset, validate_dataset, Dataset, LoadOptions, ValidationOptions};
use landmix::fit::FitResult;
use landmix::hbayes::{map_estimate, run_gibbs_chains, GibbsConfig};
use landmix::lattice::{adjacency_from_edges, build_voronoi_adjacency, Adjacency};
use landmix::nem::{fit_nem, InitMethod, NemConfig};
use landmix::prep::{MixtureData, PrepOptions};
use landmix::seasonal::StlParams;
use landmix::simgen::{simulate, Geometry, SimSpec};
use log::info;

use crate::config::{Flags, GeometryArg, MethodArg};
use crate::error::CliError;
use crate::export;

fn write(dir: &Path, name: impl AsRef<Path>, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn out_dir(flags: &Flags) -> Result<&Path, CliError> {
    let dir = flags.out_dir()?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

fn load(flags: &Flags) -> Result<Dataset, CliError> {
    let [s, o, c] = flags.input_paths()?;
    let options = LoadOptions {
        log_transform: flags.log.unwrap_or(false),
    };
    let d = load_dataset(&s, &o, &c, &options).map_err(|e| CliError::usage(e.code(), e.to_string()))?;
    info!("loaded {} sites, {} observations", d.sites.len(), d.observations.len());
    Ok(d)
}

fn lattice(flags: &Flags, d: &Dataset) -> Result<Adjacency, CliError> {
    match &flags.edges {
        Some(path) => {
            let edges = export::read_edges(path, &d.sites)?;
            adjacency_from_edges(d.sites.len(), &edges).map_err(CliError::from_input)
        }
        None => build_voronoi_adjacency(&d.sites, None).map_err(CliError::from_input),
    }
}

fn stl_params(flags: &Flags) -> Result<StlParams, CliError> {
    let period = flags.period.unwrap_or(52);
    if period < 2 {
        return Err(CliError::usage("InvalidConfig", "period must be at least 2"));
    }
    let p = StlParams::for_period(period);
    Ok(if flags.robust.unwrap_or(false) { p.robust() } else { p })
}

fn read_fit(path: &Path) -> Result<FitResult, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage("MissingFile", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage("InvalidFit", format!("{}: {e}", path.display())))
}

fn single_fit(flags: &Flags) -> Result<FitResult, CliError> {
    match flags.fit.as_deref() {
        Some([path]) => read_fit(path),
        _ => Err(CliError::usage("InvalidArguments", "exactly one --fit is required")),
    }
}

pub fn validate(flags: &Flags) -> Result<(), CliError> {
    let d = load(flags)?;
    let options = ValidationOptions {
        period: flags.period.unwrap_or(52),
        ..ValidationOptions::default()
    };
    let report = validate_dataset(&d, &options);
    let lines = report.to_json_lines();
    print!("{lines}");
    if let Some(dir) = &flags.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write(dir, "validation.jsonl", &lines)?;
    }
    if report.is_empty() {
        Ok(())
    } else {
        Err(CliError::usage(
            "ValidationFailed",
            format!("{} violated invariant(s)", report.entries.len()),
        ))
    }
}

fn sim_spec(flags: &Flags) -> Result<SimSpec, CliError> {
    let mut spec = SimSpec::with_components(flags.k.unwrap_or(4));
    spec.seed = flags.seed();
    if let Some(n) = flags.n_sites {
        spec.n_sites = n;
    }
    match flags.geometry {
        Some(GeometryArg::Grid) => {
            let width = flags.width.unwrap_or_else(|| (spec.n_sites as f64).sqrt().ceil() as usize).max(1);
            let height = flags.height.unwrap_or(spec.n_sites.div_ceil(width));
            spec.n_sites = width * height;
            spec.geometry = Geometry::Grid { width, height };
        }
        Some(GeometryArg::Random) | None => {
            if let Some(extent) = flags.extent {
                spec.geometry = Geometry::UniformRandom { extent };
            }
        }
    }
    if let Some(v) = flags.delta {
        spec.delta = v;
    }
    if let Some(v) = flags.t_len {
        spec.t_len = v;
    }
    if let Some(v) = flags.period {
        spec.period = v;
    }
    if let Some(v) = flags.q {
        spec.q = v;
    }
    if let Some(sd) = flags.noise_sd {
        spec.components.iter_mut().for_each(|c| c.noise_sd = sd);
    }
    spec.validate().map_err(CliError::from_input)?;
    Ok(spec)
}

pub fn simulate_cmd(flags: &Flags) -> Result<(), CliError> {
    let spec = sim_spec(flags)?;
    let dir = out_dir(flags)?;
    let sim = simulate(&spec).map_err(CliError::from_compute)?;
    save_dataset(
        &sim.dataset,
        &dir.join(landmix::dataset::SITES_FILE),
        &dir.join(landmix::dataset::OBSERVATIONS_FILE),
        &dir.join(landmix::dataset::LANDUSE_FILE),
    )
    .map_err(|e| CliError::compute("WriteFailed", e.to_string()))?;
    let mut truth = String::from("site_id,true_label\n");
    for (site, z) in sim.dataset.sites.iter().zip(&sim.truth.labels) {
        truth.push_str(&format!("{},{}\n", site.site_id, z));
    }
    write(dir, "truth.csv", &truth)?;
    let mut json = serde_json::to_string_pretty(&spec).expect("spec serialises");
    json.push('\n');
    write(dir, "spec.json", &json)
}

fn nem_config(flags: &Flags) -> Result<NemConfig, CliError> {
    let d = NemConfig::default();
    let cfg = NemConfig {
        k: flags.k.unwrap_or(d.k),
        lambda: flags.lambda()?,
        max_iters: flags.max_iters.unwrap_or(d.max_iters),
        tol: flags.tol.unwrap_or(d.tol),
        seed: flags.seed(),
        restarts: flags.restarts.unwrap_or(d.restarts),
        init: InitMethod::KMeans,
        update_basis: flags.update_basis.unwrap_or(d.update_basis),
    };
    if cfg.k < 2 || cfg.restarts == 0 || !(cfg.tol >= 0.0) {
        return Err(CliError::usage("InvalidConfig", "need k ≥ 2, restarts ≥ 1 and tol ≥ 0"));
    }
    Ok(cfg)
}

fn gibbs_config(flags: &Flags) -> Result<GibbsConfig, CliError> {
    let d = GibbsConfig::default();
    let cfg = GibbsConfig {
        sweeps: flags.sweeps.unwrap_or(d.sweeps),
        burn_in: flags.burn_in.unwrap_or(d.burn_in),
        thin: flags.thin.unwrap_or(d.thin),
        chains: flags.chains.unwrap_or(d.chains),
        a: flags.a.unwrap_or(d.a),
        b: flags.b.unwrap_or(d.b),
        delta_proposal_sd: flags.delta_proposal_sd.unwrap_or(d.delta_proposal_sd),
        delta_init: flags.delta_init.unwrap_or(d.delta_init),
        aux_sweeps: flags.aux_sweeps.unwrap_or(d.aux_sweeps),
        shared_variance: flags.shared_variance.unwrap_or(d.shared_variance),
        seed: flags.seed(),
        ..d
    };
    cfg.validate().map_err(|e| CliError::usage("InvalidConfig", e.to_string()))?;
    if flags.k.unwrap_or(4) < 2 {
        return Err(CliError::usage("InvalidConfig", "k must be at least 2"));
    }
    Ok(cfg)
}

enum Plan {
    Nem(NemConfig),
    Gibbs(GibbsConfig),
    Clr(ClrOptions),
}

pub fn fit(flags: &Flags) -> Result<(), CliError> {
    let method = flags
        .method
        .ok_or_else(|| CliError::usage("InvalidArguments", "--method is required"))?;
    let plan = match method {
        MethodArg::Nem => Plan::Nem(nem_config(flags)?),
        MethodArg::Gibbs => Plan::Gibbs(gibbs_config(flags)?),
        MethodArg::Clr => {
            let n_basis = flags.n_basis.unwrap_or(2);
            if !(1..=3).contains(&n_basis) {
                return Err(CliError::usage("InvalidConfig", "n_basis must be 1, 2 or 3"));
            }
            Plan::Clr(ClrOptions {
                n_basis,
                ..ClrOptions::default()
            })
        }
    };
    let stl = stl_params(flags)?;
    let dir = out_dir(flags)?;
    let d = load(flags)?;
    let prep = PrepOptions {
        stl: stl.clone(),
        ..PrepOptions::default()
    };
    let data = MixtureData::from_dataset(&d, &prep).map_err(CliError::from_input)?;
    info!("panel of {} sites by {} steps", data.n_sites(), data.t_len());

    let result = match plan {
        Plan::Nem(cfg) => {
            let a = lattice(flags, &d)?;
            fit_nem(&data, &a, &cfg).map_err(CliError::from_compute)?
        }
        Plan::Gibbs(cfg) => {
            let a = lattice(flags, &d)?;
            let k = flags.k.unwrap_or(4);
            let chains = run_gibbs_chains(&data, &a, k, &cfg).map_err(CliError::from_compute)?;
            let mut ndjson = Vec::new();
            for chain in &chains {
                chain.write_ndjson(&mut ndjson).expect("in-memory write");
            }
            write(dir, "chain.ndjson", &String::from_utf8(ndjson).expect("utf-8"))?;
            map_estimate(&chains, &data).map_err(CliError::from_compute)?
        }
        Plan::Clr(opts) => fit_clr_model(&data, &opts, &stl).map_err(CliError::from_compute)?,
    };
    info!("{} fit: SSE {:.4}", result.method.name(), result.sse);
    let mut json = result.to_json();
    json.push('\n');
    write(dir, "fit.json", &json)
}

pub fn compare(flags: &Flags) -> Result<(), CliError> {
    let paths = flags.fit.as_deref().unwrap_or_default();
    if paths.len() < 2 {
        return Err(CliError::usage("InvalidArguments", "compare needs at least two --fit files"));
    }
    let fits: Vec<FitResult> = paths.iter().map(|p| read_fit(p)).collect::<Result<_, _>>()?;
    let table = compare_models(&fits).map_err(CliError::from_input)?;
    let dir = out_dir(flags)?;
    write(dir, "comparison.csv", &table.to_csv())?;
    let text = table.to_text();
    write(dir, "comparison.txt", &text)?;
    print!("{text}");
    Ok(())
}

pub fn export_lattice(flags: &Flags) -> Result<(), CliError> {
    let d = load(flags)?;
    let a = lattice(flags, &d)?;
    let (edges, cells) = export::lattice_files(&a, &d.sites)?;
    let dir = out_dir(flags)?;
    write(dir, "lattice.csv", &edges)?;
    write(dir, "cells.geojson", &cells)
}

pub fn export_map(flags: &Flags) -> Result<(), CliError> {
    let fit = single_fit(flags)?;
    let d = load(flags)?;
    let a = lattice(flags, &d)?;
    let map = export::latent_map(&fit, &a, &d.sites)?;
    write(out_dir(flags)?, "latent_map.geojson", &map)
}

pub fn export_basis(flags: &Flags) -> Result<(), CliError> {
    let fit = single_fit(flags)?;
    let files = export::basis_files(&fit)?;
    let dir = out_dir(flags)?;
    for (name, contents) in files {
        write(dir, name, &contents)?;
    }
    Ok(())
}
