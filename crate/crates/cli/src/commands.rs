//! Subcommand implementations. Every command computes all of its outputs
//! before the first file is written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fkwalk_core::fdm::{exact_atomic_solution, solve_atomic_fd, solve_nonlocal_fd};
use fkwalk_core::heat_kernel::{heat_kernel_h, heat_kernel_mass};
use fkwalk_core::{compute_weights, FeynmanKac, Kernel, StableParams};

use crate::config::{cells_for, steps_for, LoadedConfig};
use crate::output::{
    compare as compare_files, csv_bytes, fmt_f64, time_label, version, write_artifacts, write_atomic, Artifact,
    CompareReport, Metadata, HEATKERNEL_HEADER, MC_HEADER, PROFILE_HEADER,
};
use crate::CliError;

fn metadata(cfg: &LoadedConfig, command: &str, h: f64, t_requested: f64, t_used: f64) -> Metadata {
    Metadata {
        tool: "fkwalk".into(),
        version: version().into(),
        command: command.into(),
        config_path: cfg.path.display().to_string(),
        config_sha256: cfg.sha256.clone(),
        problem: cfg.config.problem.id.clone(),
        kernel: format!("{:?}", cfg.config.kernel),
        seed: None,
        trials: None,
        h,
        k: None,
        t_requested,
        t_used,
        extra: BTreeMap::new(),
    }
}

fn out_path(cfg: &LoadedConfig, prefix: &str, t: f64) -> PathBuf {
    cfg.config.run.out.join(format!("{prefix}_{}.csv", time_label(t)))
}

/// Monte Carlo profiles, one CSV per target time.
pub fn run_mc(cfg: &LoadedConfig) -> Result<Vec<PathBuf>, CliError> {
    let c = &cfg.config;
    let problem = c.problem(c.run.h)?;
    let fk = FeynmanKac::new(&problem)?;
    let clock = fk.clock();
    let mut artifacts = Vec::new();
    for &t in &c.run.times {
        let profile = fk.estimate_profile(t, c.run.trials, c.run.seed)?;
        let snapped = profile[0].snapped_t;
        let cells = problem.lattice.cells;
        let rows = profile[1..cells].iter().map(|e| {
            vec![
                fmt_f64(problem.lattice.x(e.x_index)),
                fmt_f64(e.mean),
                fmt_f64(e.stderr),
                e.n_trials.to_string(),
                e.seed.to_string(),
            ]
        });
        let mut meta = metadata(cfg, "run-mc", c.run.h, t, snapped);
        meta.seed = Some(c.run.seed);
        meta.trials = Some(c.run.trials);
        meta.k = (clock.k > 0.0).then_some(clock.k);
        meta.extra.insert("step_duration".into(), fmt_f64(clock.step_duration));
        artifacts.push(Artifact {
            path: out_path(cfg, "mc", t),
            csv: csv_bytes(&MC_HEADER, rows)?,
            meta,
        });
    }
    write_artifacts(&artifacts)?;
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}

fn profile_rows(values: &[f64]) -> impl Iterator<Item = Vec<String>> + '_ {
    let cells = values.len() - 1;
    values
        .iter()
        .enumerate()
        .map(move |(j, v)| vec![fmt_f64(-1.0 + 2.0 * j as f64 / cells as f64), fmt_f64(*v)])
}

/// Finite-difference reference profiles at the target times.
pub fn run_fd(cfg: &LoadedConfig) -> Result<Vec<PathBuf>, CliError> {
    let c = &cfg.config;
    let fd =
        c.fd.as_ref()
            .ok_or_else(|| CliError::Usage("run-fd needs an [fd] section with h and k".into()))?;
    let cells = cells_for(fd.h)?;
    let steps = steps_for(c.problem.horizon, fd.k)?;
    let problem = c.problem(fd.h)?;
    let field = match problem.kernel {
        Kernel::Truncated { .. } => solve_nonlocal_fd(&problem, steps, cells)?,
        Kernel::Atomic { .. } => solve_atomic_fd(&problem, steps, cells)?,
        _ => {
            return Err(CliError::Usage(format!(
                "run-fd supports the truncated and atomic kernels, not {}",
                problem.kernel.name()
            )))
        }
    };
    let mut artifacts = Vec::new();
    for &t in &c.run.times {
        let n = field.level_of(t)?;
        let mut meta = metadata(cfg, "run-fd", fd.h, t, field.t(n));
        meta.k = Some(field.k);
        artifacts.push(Artifact {
            path: out_path(cfg, "fd", t),
            csv: csv_bytes(&PROFILE_HEADER, profile_rows(field.row(n)))?,
            meta,
        });
    }
    write_artifacts(&artifacts)?;
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}

/// Slice-by-slice solution for the atomic kernel.
pub fn run_oracle(cfg: &LoadedConfig) -> Result<Vec<PathBuf>, CliError> {
    let c = &cfg.config;
    let cells = c.oracle.cells;
    let h = 2.0 / cells as f64;
    let problem = c.problem(h)?;
    if !problem.kernel.is_atomic() {
        return Err(CliError::Usage("run-oracle needs the atomic kernel".into()));
    }
    let mut artifacts = Vec::new();
    for &t in &c.run.times {
        let profile = exact_atomic_solution(&problem, t, cells)?;
        artifacts.push(Artifact {
            path: out_path(cfg, "oracle", t),
            csv: csv_bytes(&PROFILE_HEADER, profile_rows(&profile))?,
            meta: metadata(cfg, "run-oracle", h, t, t),
        });
    }
    write_artifacts(&artifacts)?;
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}

/// `H_{t,x}(r, y)` on a rectangular grid; the total mass goes to the sidecar.
pub fn run_heatkernel(cfg: &LoadedConfig) -> Result<Vec<(PathBuf, f64)>, CliError> {
    let c = &cfg.config;
    let Kernel::Fractional { alpha } = c.kernel()? else {
        return Err(CliError::Usage("run-heatkernel needs the fractional kernel".into()));
    };
    let params = StableParams::new(alpha)?;
    let hk = &c.heatkernel;
    if !(hk.r_min < hk.r_max && hk.r_max < 0.0) || hk.r_points < 1 || hk.y_points < 1 {
        return Err(CliError::Usage(
            "heatkernel grid needs r_min < r_max < 0 and at least one point".into(),
        ));
    }
    let rs: Vec<f64> = (0..hk.r_points)
        .map(|i| {
            if hk.r_points == 1 {
                hk.r_max
            } else {
                hk.r_min + (hk.r_max - hk.r_min) * i as f64 / (hk.r_points - 1) as f64
            }
        })
        .collect();
    let ys: Vec<f64> = (1..=hk.y_points)
        .map(|j| -1.0 + 2.0 * j as f64 / (hk.y_points + 1) as f64)
        .collect();
    let mut artifacts = Vec::new();
    let mut masses = Vec::new();
    for &t in &c.run.times {
        let mut rows = Vec::with_capacity(rs.len() * ys.len());
        for &r in &rs {
            for &y in &ys {
                let v = heat_kernel_h(params, t, hk.x, r, y)?;
                rows.push(vec![fmt_f64(r), fmt_f64(y), fmt_f64(v)]);
            }
        }
        let mass = heat_kernel_mass(params, t, hk.x)?;
        let mut meta = metadata(cfg, "run-heatkernel", 0.0, t, t);
        meta.extra.insert("x".into(), fmt_f64(hk.x));
        meta.extra.insert("mass".into(), fmt_f64(mass));
        artifacts.push(Artifact {
            path: out_path(cfg, "heatkernel", t),
            csv: csv_bytes(&HEATKERNEL_HEADER, rows)?,
            meta,
        });
        masses.push(mass);
    }
    write_artifacts(&artifacts)?;
    Ok(artifacts.into_iter().map(|a| a.path).zip(masses).collect())
}

/// Compares a Monte Carlo CSV with a reference CSV; writes the report when
/// `out` is given.
pub fn compare(mc: &Path, reference: &Path, tol: f64, z: f64, out: Option<&Path>) -> Result<CompareReport, CliError> {
    if !(tol >= 0.0 && z >= 0.0) {
        return Err(CliError::Usage("tolerance and z must be nonnegative".into()));
    }
    let report = compare_files(mc, reference, tol, z)?;
    if let Some(dir) = out {
        write_atomic(&dir.join("compare_report.txt"), report.render().as_bytes())?;
    }
    Ok(report)
}

/// `j, ω_j, p_j` rows; the `j = 0` row carries `ω_0` and no probability.
pub fn weights_csv(alpha: f64, delta: f64, k: f64) -> Result<Vec<u8>, CliError> {
    let w = compute_weights(alpha, delta, k)?;
    let rows = w.omega.iter().enumerate().map(|(j, o)| {
        let p = if j == 0 { String::new() } else { fmt_f64(w.prob[j - 1]) };
        vec![j.to_string(), fmt_f64(*o), p]
    });
    csv_bytes(&["j", "omega", "p"], rows)
}
