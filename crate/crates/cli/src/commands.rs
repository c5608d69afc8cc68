use crate::config::{ConfigError, RunConfig};
use crate::{AnalyzeArgs, EstimateArgs, PlotDataArgs, PrecomputeArgs, ReportArgs, SimulateArgs, SolverFlags};
use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use tomocov::basis::index::BasisIndexSet;
use tomocov::basis::radial::{default_quad_order, RadialBasis};
use tomocov::basis::transforms::volume_to_real_grid;
use tomocov::basis::volume::FourierVolume;
use tomocov::evaluate::{correlation, eigen_histogram, fsc, fsc_csv, key_value_csv, signed_correlation};
use tomocov::io::{read_estimates, read_volumes, write_estimates, write_volumes, ArrayData, Container, Dataset};
use tomocov::kernel::BlockProvider;
use tomocov::pipeline::{analyze as run_analysis, build_report, estimate as run_estimate, prepare, PipelineConfig, PipelineReport};
use tomocov::simulate::{generate_dataset, GroundTruth};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
pub const EXIT_MIXTURE: u8 = 5;
pub const EXIT_SIMULATION: u8 = 6;

pub const DATASET_FILE: &str = "dataset.tmcv";
pub const TRUTH_FILE: &str = "truth.tmcv";
pub const REPORT_FILE: &str = "report.json";
pub const COORDS_FILE: &str = "coordinates.csv";
pub const VOLUMES_FILE: &str = "volumes.tmcv";
pub const REAL_VOLUMES_FILE: &str = "real_volumes.tmcv";
pub const REAL_VOLUMES_KIND: &str = "real_volumes";

/// Maps the first library or config error in the chain to an exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use tomocov::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e.root() {
                E::Config(_) | E::UnknownStrategy { .. } => EXIT_USAGE,
                E::Io(_) | E::Json(_) | E::Format(_) => EXIT_IO,
                E::Mixture(_) => EXIT_MIXTURE,
                E::Simulation(_) => EXIT_SIMULATION,
                _ => EXIT_NUMERICAL,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_FAILURE
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(tomocov::Error::from).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(tomocov::Error::from).with_context(|| format!("creating {}", dir.display()))
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    RunConfig::load(path.map(PathBuf::as_path))
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_ref())?;
    let s = &mut cfg.simulate;
    if a.preset.is_some() {
        s.preset = a.preset.clone();
    }
    if let Some(n) = a.n {
        s.n = n;
    }
    if a.snr_het.is_some() {
        s.snr_het = a.snr_het;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    let sim_cfg = s.to_sim_config()?;
    let t = Instant::now();
    let sim = generate_dataset(&sim_cfg).context("simulate")?;
    ensure_dir(&a.out)?;
    sim.dataset.write(&a.out.join(DATASET_FILE)).context("writing dataset")?;
    sim.truth.write(&a.out.join(TRUTH_FILE)).context("writing ground truth")?;
    let summary = json!({ "config": sim_cfg, "noise": sim.truth.noise, "true_rank": sim.truth.sigma0_rank(1e-10) });
    write_text(&a.out.join("simulate.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "simulated {} images (N={}, K={}) in {:.1}s; sigma2 = {:.4e}; true rank {}",
        sim_cfg.n,
        sim_cfg.n_pix,
        sim_cfg.k_max,
        t.elapsed().as_secs_f64(),
        sim.truth.noise.sigma2,
        sim.truth.sigma0_rank(1e-10)
    );
    Ok(())
}

pub fn precompute(a: &PrecomputeArgs, cache_flag: Option<&PathBuf>) -> Result<()> {
    let cfg = load_config(a.config.as_ref())?;
    let dir = cfg
        .cache_dir(cache_flag)
        .ok_or_else(|| ConfigError("precompute needs a cache directory (--cache-dir or TOMOCOV_CACHE_DIR)".into()))?;
    let k_max = match (a.k_max, &a.dataset) {
        (Some(k), _) => k,
        (None, Some(p)) => Dataset::read(p).context("reading dataset")?.meta.k_max,
        (None, None) => return Err(ConfigError("give --k-max or --dataset".into()).into()),
    };
    let provider = BlockProvider::new(k_max, Some(dir.clone()));
    let t = Instant::now();
    println!("k1,k2,dim,nnz,fill");
    for k1 in 0..=k_max {
        for k2 in k1..=k_max {
            let b = provider.block(k1, k2).with_context(|| format!("kernel block ({k1},{k2})"))?;
            println!("{k1},{k2},{},{},{:.5}", b.dim1 * b.dim2, b.nnz(), b.fill_ratio());
        }
    }
    eprintln!("cached blocks for K={k_max} in {} ({:.1}s)", dir.display(), t.elapsed().as_secs_f64());
    Ok(())
}

fn apply_solver_flags(cfg: &mut PipelineConfig, f: &SolverFlags) {
    if let Some(s) = &f.solver {
        cfg.covariance_solver = s.clone();
    }
    if let Some(s) = &f.mean_solver {
        cfg.mean_solver = s.clone();
    }
    if let Some(t) = f.cg_tol {
        cfg.covariance.cg_tol = t;
    }
    if let Some(d) = f.rank_gap_delta {
        cfg.covariance.rank_gap_delta = d;
    }
}

pub fn estimate(a: &EstimateArgs, cache_flag: Option<&PathBuf>) -> Result<()> {
    let run = load_config(a.solver.config.as_ref())?;
    let mut cfg = run.pipeline.clone();
    apply_solver_flags(&mut cfg, &a.solver);
    cfg.cache_dir = run.cache_dir(cache_flag);
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    let dataset = Dataset::read(&a.dataset).with_context(|| format!("reading {}", a.dataset.display()))?;
    let t = Instant::now();
    let prep = prepare(&dataset, &cfg)?;
    let est = run_estimate(&prep.data, &prep.index, &cfg)?;
    write_estimates(&a.out, &est, prep.data.k_max(), prep.sigma2, dataset.fingerprint(), &cfg.hash()).context("writing estimate")?;
    let c = &est.covariance;
    println!(
        "estimated mean and covariance (p = {}) in {:.1}s; rank {}; top eigenvalues {:?}",
        est.mean.mu.len(),
        t.elapsed().as_secs_f64(),
        c.rank_estimate,
        &c.eigvals[..c.eigvals.len().min(5)]
    );
    if c.solver_report.flagged {
        eprintln!("warning: covariance guard fired: {}", c.solver_report.notes.join("; "));
    }
    Ok(())
}

pub fn analyze(a: &AnalyzeArgs, cache_flag: Option<&PathBuf>) -> Result<()> {
    let run = load_config(a.config.as_ref())?;
    let mut cfg = run.pipeline.clone();
    if a.classes.is_some() {
        cfg.classes = a.classes;
    }
    if let Some(m) = &a.mixture {
        cfg.mixture = m.clone();
    }
    cfg.cache_dir = run.cache_dir(cache_flag);
    let dataset = Dataset::read(&a.dataset).with_context(|| format!("reading {}", a.dataset.display()))?;
    let (est, meta) = read_estimates(&a.estimate).with_context(|| format!("reading {}", a.estimate.display()))?;
    if meta.source != dataset.fingerprint() {
        return Err(tomocov::Error::Format(format!(
            "estimate was built from a different dataset ({} vs {})",
            meta.source,
            dataset.fingerprint()
        ))
        .into());
    }
    // Reuse the noise level the estimate was built with.
    cfg.sigma2 = Some(meta.sigma2);
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    let truth = a.truth.as_ref().map(|p| GroundTruth::read(p).with_context(|| format!("reading {}", p.display()))).transpose()?;
    let prep = prepare(&dataset, &cfg)?;
    let an = run_analysis(&prep.data, &est, &cfg)?;
    let report = build_report(prep.data.len(), prep.data.k_max(), prep.sigma2, "estimate", &est, &an, &cfg);
    ensure_dir(&a.out)?;
    write_text(&a.out.join(REPORT_FILE), &serde_json::to_string_pretty(&report)?)?;
    write_text(&a.out.join(COORDS_FILE), &an.coords.to_csv(truth.as_ref().map(|t| t.labels.as_slice())))?;
    write_volumes(&a.out.join(VOLUMES_FILE), prep.data.k_max(), dataset.meta.omega_max, &an.volumes, &an.mixture.weights, &cfg.hash())
        .context("writing volumes")?;
    if run.report.volume_grid > 0 {
        export_real(&prep.index, &prep.basis, dataset.meta.omega_max, &an.volumes, run.report.volume_grid, &a.out.join(REAL_VOLUMES_FILE))?;
    }
    println!("C = {} (rank {}); weights {:?}", report.classes, report.rank_estimate, report.probabilities);
    Ok(())
}

fn export_real(index: &BasisIndexSet, basis: &RadialBasis, omega_max: f64, volumes: &[Vec<Complex64>], n: usize, path: &Path) -> Result<()> {
    let mut c = Container::new(REAL_VOLUMES_KIND, json!({ "n": n, "classes": volumes.len(), "grid": "voxel centers (2i+1)/n-1 on [-1,1]^3, x fastest" }));
    for (i, v) in volumes.iter().enumerate() {
        let grid = volume_to_real_grid(index, basis, &FourierVolume::new(index, omega_max, v.clone()), n);
        c = c.with(&format!("class_{i}"), ArrayData::F64(grid.data));
    }
    c.write(path).context("writing real-space volumes")?;
    Ok(())
}

fn read_report(dir: &Path) -> Result<PipelineReport> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(tomocov::Error::from).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(tomocov::Error::from)?)
}

fn basis_for(k_max: usize, omega_max: f64) -> Result<(BasisIndexSet, RadialBasis)> {
    Ok((BasisIndexSet::new(k_max), RadialBasis::build(k_max, omega_max, default_quad_order(k_max))?))
}

fn omega_of(meta: &serde_json::Value) -> Result<f64> {
    meta["omega_max"].as_f64().ok_or_else(|| anyhow!(tomocov::Error::Format("volume file lacks omega_max".into())))
}

fn minus(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let run = load_config(a.config.as_ref())?;
    let (est, meta) = read_estimates(&a.estimate).with_context(|| format!("reading {}", a.estimate.display()))?;
    let truth = GroundTruth::read(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let (volumes, vmeta) = read_volumes(&a.analysis.join(VOLUMES_FILE)).context("reading class volumes")?;
    let rep = read_report(&a.analysis)?;
    if truth.mu0.len() != est.mean.mu.len() {
        bail!(tomocov::Error::Format("ground truth and estimate use different bases".into()));
    }
    let (index, basis) = basis_for(meta.k_max, omega_of(&vmeta)?)?;
    ensure_dir(&a.out)?;
    let shells = run.report.fsc_shells;

    let mut rows = vec![("mean_correlation".to_string(), correlation(&est.mean.mu, &truth.mu0)?)];
    let true_rank = truth.sigma0_rank(1e-10);
    for i in 0..true_rank.min(est.covariance.eigvecs.ncols()) {
        let e: Vec<Complex64> = est.covariance.eigvecs.column(i).iter().copied().collect();
        let t: Vec<Complex64> = truth.sigma0_eigvecs.column(i).iter().copied().collect();
        rows.push((format!("eigvec_{i}_correlation"), correlation(&e, &t)?));
    }
    rows.push(("rank_estimate".into(), rep.rank_estimate as f64));
    rows.push(("true_rank".into(), true_rank as f64));
    rows.push(("classes".into(), rep.classes as f64));
    for (c, (v, w)) in volumes.iter().zip(&rep.probabilities).enumerate() {
        // Match each estimated class to the closest true volume after mean
        // subtraction. The signed score keeps opposite deviations apart.
        let dv = minus(v, &est.mean.mu);
        let scored: Vec<(usize, f64)> = truth
            .volumes
            .iter()
            .enumerate()
            .map(|(j, x)| (j, signed_correlation(&dv, &minus(x, &truth.mu0)).unwrap_or(-1.0)))
            .collect();
        let (j, best) = scored.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((0, 0.0));
        rows.push((format!("class_{c}_matched_truth"), j as f64));
        rows.push((format!("class_{c}_centered_correlation"), best));
        rows.push((format!("class_{c}_correlation"), correlation(v, &truth.volumes[j])?));
        rows.push((format!("class_{c}_weight"), *w));
        let curve = fsc(&index, &basis, v, &truth.volumes[j], shells)?;
        write_text(&a.out.join(format!("fsc_class_{c}.csv")), &fsc_csv(&curve))?;
    }
    let mean_curve = fsc(&index, &basis, &est.mean.mu, &truth.mu0, shells)?;
    write_text(&a.out.join("fsc_mean.csv"), &fsc_csv(&mean_curve))?;
    write_text(&a.out.join("correlations.csv"), &key_value_csv(&rows))?;
    let hist = eigen_histogram(&est.covariance.eigvals, run.report.hist_bins, None, None)?;
    write_text(&a.out.join("eigen_hist.csv"), &hist.to_csv())?;
    let summary: serde_json::Map<String, serde_json::Value> = rows.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    write_text(&a.out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    for (k, v) in &rows {
        println!("{k},{v}");
    }
    Ok(())
}

pub fn plot_data(a: &PlotDataArgs) -> Result<()> {
    let run = load_config(a.config.as_ref())?;
    let (est, _) = read_estimates(&a.estimate).with_context(|| format!("reading {}", a.estimate.display()))?;
    ensure_dir(&a.out)?;
    let bins = run.report.hist_bins;
    let mut eig = String::from("index,eigenvalue\n");
    for (i, v) in est.covariance.eigvals.iter().enumerate() {
        let _ = writeln!(eig, "{i},{v}");
    }
    write_text(&a.out.join("eigvals.csv"), &eig)?;
    write_text(&a.out.join("eigen_hist.csv"), &eigen_histogram(&est.covariance.eigvals, bins, None, None)?.to_csv())?;

    let coords_path = a.analysis.join(COORDS_FILE);
    let text = fs::read_to_string(&coords_path).map_err(tomocov::Error::from).with_context(|| format!("reading {}", coords_path.display()))?;
    let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
    let re_cols: Vec<(usize, &str)> = header.iter().enumerate().filter(|(_, h)| h.starts_with("re_")).map(|(i, h)| (i, *h)).collect();
    for (col, name) in re_cols {
        let vals: Vec<f64> = text.lines().skip(1).filter_map(|l| l.split(',').nth(col)?.parse().ok()).collect();
        if !vals.is_empty() {
            write_text(&a.out.join(format!("alpha_{name}_hist.csv")), &eigen_histogram(&vals, bins, None, None)?.to_csv())?;
        }
    }

    let real = a.analysis.join(REAL_VOLUMES_FILE);
    if real.exists() {
        let c = Container::read(&real).context("reading real-space volumes")?;
        let n = c.meta["n"].as_u64().unwrap_or(0) as usize;
        for (name, data) in &c.arrays {
            if let ArrayData::F64(v) = data {
                let mut s = String::from("y,x,value\n");
                let z = n / 2;
                for y in 0..n {
                    for x in 0..n {
                        let _ = writeln!(s, "{y},{x},{}", v[(z * n + y) * n + x]);
                    }
                }
                write_text(&a.out.join(format!("{name}_central_slice.csv")), &s)?;
            }
        }
    }
    println!("plot tables written to {}", a.out.display());
    Ok(())
}
