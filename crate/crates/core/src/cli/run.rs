//! Executes one configured experiment and writes its CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::{model_from_name, Experiment, ExperimentConfig};
use crate::counterexample::{self, TowerParams};
use crate::dependence::{self, FinitePartitionPair};
use crate::deviation_bounds::{self, DominationRow};
use crate::error::{Error, Result};
use crate::numeric;
use crate::process_gen::{bm_reference_ensemble, scaled_stat_ensemble};
use crate::quantile_core::condition_report;
use crate::rng::stream_seed;
use crate::tightness_mc::{tightness_sums, TightnessEstimate};

/// Writes `rows` under a digest line and a header row.
fn write_csv(dir: &Path, name: &str, digest: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
    let mut text = format!("# config_digest={digest}\n{header}\n");
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// Runs the experiment in `cfg`, writing into `out_dir`. Returns the files
/// written, in order.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let digest = cfg.digest();
    let (seed, paths) = (cfg.seed, cfg.paths);
    let csv = |name: &str, header: &str, rows: &[String]| write_csv(out_dir, name, &digest, header, rows);
    let mut written = Vec::new();
    match &cfg.experiment {
        Experiment::Conditions(c) => {
            let rep = condition_report(c.kind, c.p, &c.dist, &c.decay, &c.t_grid)?;
            let kind = serde_json::to_value(c.kind)?.as_str().unwrap_or_default().to_string();
            let rows: Vec<String> =
                rep.t_grid.iter().zip(&rep.values).map(|(t, v)| format!("{kind},{},{t},{v}", c.p)).collect();
            written.push(csv("conditions.csv", "kind,p,t,condition_functional", &rows)?);
        }
        Experiment::Coefficients(c) => {
            let pair = FinitePartitionPair::new(c.joint.clone())?;
            let (a, r) = (dependence::alpha_exact(&pair)?, dependence::rho_exact(&pair)?);
            written.push(csv(
                "coefficients.csv",
                "rows,cols,alpha_exact,rho_exact",
                &[format!("{},{},{a},{r}", pair.rows(), pair.cols())],
            )?);
        }
        Experiment::Tightness(t) => {
            let model = model_from_name(&t.model)?;
            let est = tightness_sums(&model, t.n, t.delta, &t.eps, t.p, paths, seed)?;
            let levels: Vec<String> = est.iter().flat_map(TightnessEstimate::csv_rows).collect();
            written.push(csv("tightness_levels.csv", TightnessEstimate::CSV_HEADER, &levels)?);
            let sums: Vec<String> = est
                .iter()
                .map(|e| format!("{},{},{},{},{},{},{}", e.n, e.delta, e.eps, e.p, e.value, e.std_error, e.degenerate))
                .collect();
            written.push(csv("tightness_sum.csv", "n,delta,eps,p,tightness_sum,stderr,degenerate", &sums)?);
        }
        Experiment::FukNagaev(f) => {
            let model = model_from_name(&f.model)?;
            let rows = deviation_bounds::fuk_nagaev_check(&model, f.n, f.r, &f.lambdas, paths, seed)?;
            let lines: Vec<String> = rows.iter().map(DominationRow::csv_row).collect();
            written.push(csv("fuk_nagaev_bound.csv", DominationRow::CSV_HEADER, &lines)?);
        }
        Experiment::Shao(s) => {
            let model = model_from_name(&s.model)?;
            let cal = deviation_bounds::calibrate_shao_k(&model, s.q, &s.n_grid, &s.x_multipliers, paths, seed)?;
            let lines: Vec<String> = cal.rows.iter().map(DominationRow::csv_row).collect();
            written.push(csv("shao_bound.csv", DominationRow::CSV_HEADER, &lines)?);
            written.push(csv("shao_k.csv", "q,k,k_grid_index", &[format!("{},{},{}", s.q, cal.k, cal.k_grid_index)])?);
        }
        Experiment::Counterexample(c) => {
            let params = match c.levels {
                Some(l) => TowerParams::make(c.p, l)?,
                None => TowerParams::default_for(c.p)?,
            };
            let ev = counterexample::holder_event_probability(&params, c.event_level, paths, stream_seed(seed, "event"))?;
            written.push(csv(
                "holder_event_probability.csv",
                "level,threshold,probability,stderr,replicates,undecided",
                &[format!(
                    "{},{},{},{},{},{}",
                    ev.level, ev.threshold, ev.probability, ev.std_error, ev.replicates, ev.undecided
                )],
            )?);
            let mut lines = Vec::new();
            for &sigma in &c.sigma_m {
                let rows = counterexample::lp_ratio(
                    &params,
                    c.p,
                    sigma,
                    &c.n_grid,
                    paths,
                    stream_seed(seed, &format!("lp-ratio-{sigma}")),
                )?;
                for r in rows {
                    let cob = r.coboundary_norm.map_or(String::new(), |v| v.to_string());
                    lines.push(format!("{sigma},{},{},{},{cob}", r.n, r.estimate, r.std_error));
                }
            }
            written.push(csv("lp_ratio.csv", "sigma_m,n,lp_ratio,stderr,coboundary_norm", &lines)?);
        }
        Experiment::HolderClt(h) => {
            let model = model_from_name(&h.model)?;
            let mut stats = Vec::new();
            let mut ks = Vec::new();
            for &n in &h.n_grid {
                let ens =
                    scaled_stat_ensemble(&model, n, h.alpha, h.scale, h.method, paths, stream_seed(seed, &format!("n{n}")))?;
                let reference =
                    bm_reference_ensemble(n, h.alpha, h.method, paths, stream_seed(seed, &format!("reference{n}")))?;
                ks.push(format!(
                    "{n},{},{},{}",
                    numeric::median(&ens),
                    numeric::median(&reference),
                    numeric::ks_two_sample(&ens, &reference)
                ));
                stats.extend(ens.iter().enumerate().map(|(i, v)| format!("{n},{i},{v}")));
            }
            written.push(csv("scaled_holder_stat.csv", "n,replicate,scaled_holder_stat", &stats)?);
            written.push(csv("holder_clt_ks.csv", "n,median,reference_median,ks_distance", &ks)?);
        }
    }
    Ok(written)
}

/// Exit code for an error raised while running.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) => 2,
        _ => 3,
    }
}
