//! Command-line experiment runner: every subcommand validates its inputs,
//! executes one experiment, and writes CSV/JSON artifacts plus a `meta.json`
//! echoing the effective configuration, tool version, and wall-clock
//! timings. Runs with the same configuration and seeds are byte-identical.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use srblab::map_family::MapFamily;
use srblab::numeric::fmt_g17;
use srblab::parameter_select::{
    check_collet_eckmann, check_expansion_conditions, check_polynomial_recurrence,
    find_misiurewicz_thurston, mt_sequence, MtParameter, MtSequenceConfig, MtSequenceEntry,
};
use srblab::response_experiment::{
    decomposition_report, fit_holder_exponent, render_loglog_svg, response_curve,
    spike_displacement, BumpObservable, Estimator, ResponseConfig,
};
use srblab::srb_estimate::{
    birkhoff_average, build_ulam, integrate_observable, lyapunov, stationary_density_from,
    support_hint,
};
use srblab::tower::{build_tower, cutoff_family, shared_tower, TowerSpec};
use srblab::transfer_op::{leading_eigenpair, EigenConfig, GridSpec, TowerOperator};

mod cache;

#[derive(Parser)]
#[command(name = "srblab", version, about = "Numerical laboratory for unimodal map families")]
struct Cli {
    /// Worker threads for parallel sections (0 = all cores). Results are
    /// identical for any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "srblab-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, serde::Serialize)]
struct FamilyArgs {
    /// Built-in family id (currently: logistic).
    #[arg(long, default_value = "logistic")]
    family: String,
}

impl FamilyArgs {
    fn build(&self) -> Result<MapFamily> {
        match self.family.as_str() {
            "logistic" => Ok(MapFamily::logistic()),
            other => bail!("unknown family '{other}' (built-in: logistic)"),
        }
    }
}

#[derive(Subcommand, Clone, serde::Serialize)]
enum Command {
    /// Finite-horizon Collet-Eckmann check along the critical orbit.
    CheckCe {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1.5)]
        lambda_c: f64,
        #[arg(long, default_value_t = 1)]
        h0: usize,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
    },
    /// Polynomial recurrence check |c_k - c| > k^-alpha.
    CheckRecurrence {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        h0: usize,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
    },
    /// Sampled expansion conditions outside a neighborhood of the critical
    /// point.
    Expansion {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.1)]
        c0: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Locate a pre-periodic (Misiurewicz-Thurston) parameter on a bracket.
    FindMt {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, num_args = 2)]
        bracket: Vec<f64>,
        #[arg(long)]
        preperiod: usize,
        #[arg(long)]
        period: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Construct a one-sided MT sequence accumulating at a base parameter.
    MtSequence {
        #[command(flatten)]
        family: FamilyArgs,
        /// JSON file produced by find-mt.
        #[arg(long)]
        t0_from: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 10.0)]
        ca: f64,
        #[arg(long, default_value_t = 2)]
        roots_per_preperiod: usize,
        #[arg(long, default_value_t = 60)]
        max_preperiod: usize,
        /// +1 or -1; omit for automatic selection.
        #[arg(long)]
        side: Option<i8>,
    },
    /// Invariant density and observable averages by both estimators.
    Srb {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1 << 14)]
        bins: usize,
        #[arg(long, default_value_t = 10_000_000)]
        n_iters: usize,
        #[arg(long, default_value_t = 10_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 0.2137)]
        x0: f64,
    },
    /// Lyapunov exponent along a long orbit.
    Lyapunov {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 10_000_000)]
        n_iters: usize,
        #[arg(long, default_value_t = 10_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 0.2137)]
        x0: f64,
    },
    /// Build the tower over a parameter and serialize its geometry.
    Tower {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 4.0)]
        l_const: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 60)]
        k_max: usize,
        #[arg(long, default_value_t = 1.5)]
        lambda_c: f64,
    },
    /// Leading eigenpair of the truncated tower transfer operator.
    Eigenpair {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 4.0)]
        l_const: f64,
        #[arg(long, default_value_t = 60)]
        k_max: usize,
        #[arg(long, default_value_t = 1.5)]
        lambda_c: f64,
        #[arg(long, default_value_t = 1.25)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Spike displacement along an MT sequence (operator route).
    Spike {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t0_from: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 0.05)]
        d_obs: f64,
        #[arg(long, default_value_t = 44)]
        k_max: usize,
        #[arg(long, default_value_t = 1.6)]
        lambda_c: f64,
    },
    /// Response curve of an observable average along an MT sequence.
    Response {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t0_from: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        /// Observable: "ad" (localized bump at the periodic point) or "x".
        #[arg(long, default_value = "ad")]
        observable: String,
        #[arg(long, default_value_t = 0.05)]
        d_obs: f64,
        #[arg(long, default_value_t = 100_000_000)]
        n_iters: usize,
        #[arg(long, value_parser = ["birkhoff", "ulam", "both"], default_value = "birkhoff")]
        estimator: String,
        #[arg(long)]
        emit_svg: bool,
    },
    /// Three-term decomposition of the density difference at one sequence row.
    Decompose {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        t0_from: PathBuf,
        /// Row index into the constructed sequence (0 = nearest preperiod).
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 0.05)]
        d_obs: f64,
        #[arg(long, default_value_t = 44)]
        k_max: usize,
        #[arg(long, default_value_t = 1.6)]
        lambda_c: f64,
    },
    /// Run a full pipeline from a TOML configuration file.
    Pipeline {
        /// TOML file with sections per subcommand.
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    let started = Instant::now();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            println!("done in {:.2?}, artifacts in {}", started.elapsed(), cli.out.display());
        }
        Err(err) => {
            let payload = json!({
                "error": format!("{err:#}"),
                "kind": "validation-or-runtime",
            });
            eprintln!("{}", serde_json::to_string_pretty(&payload).unwrap());
            let _ = std::fs::create_dir_all(&cli.out);
            let _ = std::fs::write(
                cli.out.join("error.json"),
                serde_json::to_string_pretty(&payload).unwrap(),
            );
            std::process::exit(1);
        }
    }
}

fn write_meta(out: &Path, command: &Command, timings: &[(String, f64)]) -> Result<()> {
    let meta = json!({
        "tool": "srblab",
        "version": env!("CARGO_PKG_VERSION"),
        "config": command,
        "timings_seconds": timings.iter().map(|(k, v)| json!({"step": k, "seconds": v})).collect::<Vec<_>>(),
    });
    std::fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn load_mt(path: &Path) -> Result<MtParameter> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading MT parameter from {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn sequence_for(
    family: &MapFamily,
    t0: &MtParameter,
    count: usize,
    ca: f64,
    roots: usize,
    max_preperiod: usize,
    side: Option<i8>,
) -> Result<Vec<MtSequenceEntry>> {
    let cfg = MtSequenceConfig {
        ca,
        roots_per_preperiod: roots,
        max_preperiod,
        side,
        ..Default::default()
    };
    let (entries, warnings) = mt_sequence(family, t0, count, &cfg)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(entries)
}

fn run(cli: &Cli) -> Result<String> {
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    let mut timings: Vec<(String, f64)> = Vec::new();
    let mut step = |name: &str, t: Instant| {
        timings.push((name.to_string(), t.elapsed().as_secs_f64()));
    };

    let summary = match &cli.command {
        Command::CheckCe {
            family,
            t,
            lambda_c,
            h0,
            horizon,
        } => {
            let fam = family.build()?;
            let t0 = Instant::now();
            let report = check_collet_eckmann(&fam, *t, *lambda_c, *h0, *horizon)?;
            step("check-ce", t0);
            std::fs::write(out.join("check_ce.json"), serde_json::to_string_pretty(&report)?)?;
            format!(
                "CE at t={t}: ok={} worst margin {} (k={:?})",
                report.ce_ok, report.worst_ce_margin, report.worst_ce_k
            )
        }
        Command::CheckRecurrence {
            family,
            t,
            alpha,
            h0,
            horizon,
        } => {
            let fam = family.build()?;
            let t0 = Instant::now();
            let report = check_polynomial_recurrence(&fam, *t, *alpha, *h0, *horizon)?;
            step("check-recurrence", t0);
            std::fs::write(
                out.join("check_recurrence.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            format!(
                "recurrence at t={t}: ok={} worst distance {}",
                report.recurrence_ok, report.min_critical_distance
            )
        }
        Command::Expansion {
            family,
            t,
            rho,
            c0,
            delta,
            trials,
            seed,
        } => {
            let fam = family.build()?;
            let t0 = Instant::now();
            let report = check_expansion_conditions(&fam, *t, *rho, *c0, *delta, *trials, *seed)?;
            step("expansion", t0);
            std::fs::write(out.join("expansion.json"), serde_json::to_string_pretty(&report)?)?;
            format!(
                "expansion at t={t}: min outside margin {}, min return margin {}",
                report.min_outside_margin, report.min_return_margin
            )
        }
        Command::FindMt {
            family,
            bracket,
            preperiod,
            period,
            tol,
        } => {
            let fam = family.build()?;
            if bracket.len() != 2 {
                bail!("--bracket needs exactly two values");
            }
            let t0 = Instant::now();
            let mt = find_misiurewicz_thurston(&fam, (bracket[0], bracket[1]), *preperiod, *period, *tol)?;
            step("find-mt", t0);
            std::fs::write(out.join("mt.json"), serde_json::to_string_pretty(&mt)?)?;
            format!(
                "MT parameter t = {} (residual {:.3e}, multiplier log {:.6})",
                fmt_g17(mt.t_f64()),
                mt.residual,
                mt.multiplier_log
            )
        }
        Command::MtSequence {
            family,
            t0_from,
            count,
            ca,
            roots_per_preperiod,
            max_preperiod,
            side,
        } => {
            let fam = family.build()?;
            let mt = load_mt(t0_from)?;
            let t0 = Instant::now();
            let entries = sequence_for(&fam, &mt, *count, *ca, *roots_per_preperiod, *max_preperiod, *side)?;
            step("mt-sequence", t0);
            std::fs::write(out.join("sequence.json"), serde_json::to_string_pretty(&entries)?)?;
            let mut csv = String::from("preperiod,t,abs_dt,m,residual,comparability_c\n");
            for e in &entries {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    e.param.preperiod,
                    fmt_g17(e.param.t_f64()),
                    fmt_g17(e.abs_dt),
                    e.admissible.m,
                    fmt_g17(e.param.residual),
                    fmt_g17(e.comparability_c)
                ));
            }
            std::fs::write(out.join("sequence.csv"), csv)?;
            format!("{} sequence entries, |dt| in [{:.3e}, {:.3e}]",
                entries.len(),
                entries.iter().map(|e| e.abs_dt).fold(f64::INFINITY, f64::min),
                entries.iter().map(|e| e.abs_dt).fold(0.0, f64::max))
        }
        Command::Srb {
            family,
            t,
            bins,
            n_iters,
            burn_in,
            x0,
        } => {
            let fam = family.build()?;
            let t0 = Instant::now();
            let orbit = cache::cached_orbit(&fam, &family.family, *t, 1000)?;
            let _ = orbit;
            let p = build_ulam(&fam, *t, *bins, None)?;
            let density = stationary_density_from(&p, 1e-12, Some(support_hint(&fam, *t)))?;
            step("ulam", t0);
            let t1 = Instant::now();
            let birk = birkhoff_average(&fam, *t, |x| x, *n_iters, *burn_in, *x0)?;
            step("birkhoff", t1);
            std::fs::write(out.join("density.csv"), density.to_csv())?;
            let mean_ulam = integrate_observable(&density, |x| x);
            let report = json!({
                "t": t,
                "bins": bins,
                "mean_x_ulam": mean_ulam,
                "mean_x_birkhoff": birk.mean,
                "birkhoff_stderr": birk.stderr,
                "support_hint": density.support_hint,
            });
            std::fs::write(out.join("srb.json"), serde_json::to_string_pretty(&report)?)?;
            format!(
                "srb at t={t}: int x dmu = {:.6} (ulam) vs {:.6} +- {:.1e} (birkhoff)",
                mean_ulam, birk.mean, birk.stderr
            )
        }
        Command::Lyapunov {
            family,
            t,
            n_iters,
            burn_in,
            x0,
        } => {
            let fam = family.build()?;
            let t0 = Instant::now();
            let est = lyapunov(&fam, *t, *n_iters, *burn_in, *x0)?;
            step("lyapunov", t0);
            std::fs::write(out.join("lyapunov.json"), serde_json::to_string_pretty(&est)?)?;
            format!("lyapunov at t={t}: {:.6} ({} zero-derivative skips)", est.value, est.skipped_zero_derivs)
        }
        Command::Tower {
            family,
            t,
            delta,
            l_const,
            beta,
            k_max,
            lambda_c,
        } => {
            let fam = family.build()?;
            let spec = TowerSpec {
                delta: *delta,
                l_const: *l_const,
                beta: *beta,
                k_max: *k_max,
                lambda_c: *lambda_c,
                h0: 1,
                goodness_horizon: 60,
            };
            let t0 = Instant::now();
            let tower = build_tower(&fam, *t, &spec)?;
            step("tower", t0);
            std::fs::write(out.join("tower.json"), tower.to_json())?;
            format!(
                "tower at t={t}: H(delta)={}, {} levels resolved to {}",
                tower.h_delta, tower.k_max, tower.resolved_levels
            )
        }
        Command::Eigenpair {
            family,
            t,
            m,
            delta,
            l_const,
            k_max,
            lambda_c,
            lambda,
            tol,
        } => {
            let fam = family.build()?;
            let spec = TowerSpec {
                delta: *delta,
                l_const: *l_const,
                beta: 0.0,
                k_max: *k_max,
                lambda_c: *lambda_c,
                h0: 1,
                goodness_horizon: 60,
            };
            let t0 = Instant::now();
            let tower = build_tower(&fam, *t, &spec)?;
            let cuts = cutoff_family(&fam, &tower)?;
            let grid = GridSpec::default();
            let op = TowerOperator::new(&fam, &tower, &cuts, grid, *lambda)?;
            step("operator", t0);
            let t1 = Instant::now();
            let pair = cache::cached_eigenpair(&op, &family.family, *t, &spec, *lambda, *m, *tol)?;
            step("eigenpair", t1);
            std::fs::write(
                out.join("eigenpair.json"),
                serde_json::to_string_pretty(&json!({
                    "m": pair.m,
                    "kappa": pair.kappa,
                    "residual": pair.residual,
                    "tau_m": pair.tau_m,
                    "iterations": pair.iterations,
                }))?,
            )?;
            std::fs::write(out.join("eigenfunction.csv"), pair.phi.to_csv())?;
            format!("eigenpair at t={t}, M={m}: kappa = {:.12}, residual {:.2e}", pair.kappa, pair.residual)
        }
        Command::Spike {
            family,
            t0_from,
            count,
            d_obs,
            k_max,
            lambda_c,
        } => {
            let fam = family.build()?;
            let mt = load_mt(t0_from)?;
            let entries = sequence_for(&fam, &mt, *count, 10.0, 2, 60, None)?;
            let spec = TowerSpec {
                delta: 0.05,
                l_const: 4.0,
                beta: 0.0,
                k_max: *k_max,
                lambda_c: *lambda_c,
                h0: 1,
                goodness_horizon: 60,
            };
            let t0 = Instant::now();
            let mut tower = build_tower(&fam, mt.t_f64(), &spec)?;
            tower.multiplier = Some(mt.lambda);
            let cuts = cutoff_family(&fam, &tower)?;
            let op = TowerOperator::new(&fam, &tower, &cuts, GridSpec::default(), 1.25)?;
            let bump = BumpObservable::new(mt.periodic_point.to_f64(), *d_obs)?;
            step("setup", t0);
            let t1 = Instant::now();
            let mut csv = String::from("t,abs_dt,m,spike,ratio_sqrt\n");
            let mut cache_eig = std::collections::BTreeMap::new();
            for e in entries.iter() {
                let m2 = (2 * e.admissible.m).min(tower.k_max);
                let pair = match cache_eig.entry(m2) {
                    std::collections::btree_map::Entry::Occupied(o) => o.into_mut(),
                    std::collections::btree_map::Entry::Vacant(v) => v.insert(
                        leading_eigenpair(&op, m2, &EigenConfig::default())?,
                    ),
                };
                let rep = spike_displacement(&fam, &tower, e.param.t_f64(), &e.admissible, &pair.phi, &|x| bump.eval(x))?;
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_g17(e.param.t_f64()),
                    fmt_g17(e.abs_dt),
                    e.admissible.m,
                    fmt_g17(rep.value),
                    fmt_g17(rep.value.abs() / e.abs_dt.sqrt())
                ));
            }
            step("spike", t1);
            std::fs::write(out.join("spike.csv"), csv)?;
            format!("spike displacement over {} rows written", entries.len())
        }
        Command::Response {
            family,
            t0_from,
            count,
            observable,
            d_obs,
            n_iters,
            estimator,
            emit_svg,
        } => {
            let fam = family.build()?;
            let mt = load_mt(t0_from)?;
            let entries = sequence_for(&fam, &mt, *count, 10.0, 2, 60, None)?;
            let est = match estimator.as_str() {
                "birkhoff" => Estimator::Birkhoff,
                "ulam" => Estimator::Ulam,
                _ => Estimator::Both,
            };
            let rcfg = ResponseConfig {
                estimator: est,
                n_iters: *n_iters,
                ..Default::default()
            };
            let t1 = Instant::now();
            let curve = match observable.as_str() {
                "x" => response_curve(&fam, &mt, &entries, &|x: f64| x, &rcfg)?,
                _ => {
                    let bump = BumpObservable::new(mt.periodic_point.to_f64(), *d_obs)?;
                    response_curve(&fam, &mt, &entries, &move |x: f64| bump.eval(x), &rcfg)?
                }
            };
            step("response", t1);
            std::fs::write(out.join("response.csv"), curve.to_csv())?;
            let fit = fit_holder_exponent(&curve).ok();
            std::fs::write(
                out.join("fit.json"),
                serde_json::to_string_pretty(&json!({
                    "fit": fit,
                    "ratio_band": curve.ratio_band,
                    "base_value": curve.base_value,
                }))?,
            )?;
            if *emit_svg {
                std::fs::write(out.join("response.svg"), render_loglog_svg(&curve, 20.0))?;
            }
            match &fit {
                Some(f) => format!(
                    "response: {} rows, slope {:.4} +- {:.4}, r2 {:.4}",
                    curve.rows.len(),
                    f.slope,
                    f.slope_ci95,
                    f.r2
                ),
                None => format!(
                    "response: {} rows (not enough usable rows for a scaling fit)",
                    curve.rows.len()
                ),
            }
        }
        Command::Decompose {
            family,
            t0_from,
            row,
            count,
            d_obs,
            k_max,
            lambda_c,
        } => {
            let fam = family.build()?;
            let mt = load_mt(t0_from)?;
            let entries = sequence_for(&fam, &mt, *count, 10.0, 2, 60, None)?;
            let e = entries
                .get(*row)
                .with_context(|| format!("row {row} out of range (sequence has {})", entries.len()))?;
            let spec = TowerSpec {
                delta: 0.05,
                l_const: 4.0,
                beta: 0.0,
                k_max: *k_max,
                lambda_c: *lambda_c,
                h0: 1,
                goodness_horizon: 60,
            };
            let t1 = Instant::now();
            let tower0 = build_tower(&fam, mt.t_f64(), &spec)?;
            let cuts = cutoff_family(&fam, &tower0)?;
            let grid = GridSpec::default();
            let op0 = TowerOperator::new(&fam, &tower0, &cuts, grid, 1.25)?;
            let tw_t = shared_tower(&tower0, &fam, e.param.t_f64(), tower0.k_max)?;
            let op_t = TowerOperator::new(&fam, &tw_t, &cuts, grid, 1.25)?;
            let m2 = (2 * e.admissible.m).min(tower0.k_max);
            let ecfg = EigenConfig::default();
            let phi0_full = leading_eigenpair(&op0, tower0.k_max, &ecfg)?;
            let phit_full = leading_eigenpair(&op_t, tw_t.k_max, &ecfg)?;
            let phi0_2m = leading_eigenpair(&op0, m2, &ecfg)?;
            let phit_2m = leading_eigenpair(&op_t, m2, &ecfg)?;
            let bump = BumpObservable::new(mt.periodic_point.to_f64(), *d_obs)?;
            let rep = decomposition_report(
                &op0,
                &op_t,
                &phi0_full.phi,
                &phit_full.phi,
                &phi0_2m.phi,
                &phit_2m.phi,
                &|x| bump.eval(x),
            );
            step("decompose", t1);
            std::fs::write(out.join("decomposition.json"), serde_json::to_string_pretty(&rep)?)?;
            format!(
                "decomposition at |dt|={:.3e}: trunc {:+.3e}, shift {:+.3e}, spike {:+.3e} (telescoping residual {:.1e})",
                e.abs_dt, rep.truncation_term, rep.eigen_shift_term, rep.spike_term, rep.telescoping_residual
            )
        }
        Command::Pipeline { config } => {
            let text = std::fs::read_to_string(config)
                .with_context(|| format!("reading pipeline config {}", config.display()))?;
            let table: toml::Table = text.parse().context("parsing TOML")?;
            run_pipeline(&table, out)?
        }
    };

    write_meta(out, &cli.command, &timings)?;
    Ok(summary)
}

/// Pipeline: find-mt -> mt-sequence -> response (+ optional spike), with
/// sections `[find_mt]`, `[sequence]`, `[response]` in the TOML file.
fn run_pipeline(table: &toml::Table, out: &Path) -> Result<String> {
    let fam = MapFamily::logistic();
    let get = |section: &str, key: &str| -> Option<&toml::Value> {
        table.get(section).and_then(|s| s.get(key))
    };
    let f64_of = |v: &toml::Value| v.as_float().or(v.as_integer().map(|i| i as f64));

    let bracket = get("find_mt", "bracket")
        .and_then(|v| v.as_array())
        .map(|a| {
            (
                a[0].as_float().unwrap_or(3.9),
                a[1].as_float().unwrap_or(3.95),
            )
        })
        .unwrap_or((3.9, 3.95));
    let preperiod = get("find_mt", "preperiod").and_then(|v| v.as_integer()).unwrap_or(4) as usize;
    let period = get("find_mt", "period").and_then(|v| v.as_integer()).unwrap_or(1) as usize;
    let mt = find_misiurewicz_thurston(&fam, bracket, preperiod, period, 1e-12)?;
    std::fs::write(out.join("mt.json"), serde_json::to_string_pretty(&mt)?)?;

    let count = get("sequence", "count").and_then(|v| v.as_integer()).unwrap_or(12) as usize;
    let ca = get("sequence", "ca").and_then(f64_of).unwrap_or(10.0);
    let entries = sequence_for(&fam, &mt, count, ca, 2, 60, None)?;
    std::fs::write(out.join("sequence.json"), serde_json::to_string_pretty(&entries)?)?;

    let n_iters = get("response", "n_iters").and_then(|v| v.as_integer()).unwrap_or(10_000_000) as usize;
    let d_obs = get("response", "d_obs").and_then(f64_of).unwrap_or(0.05);
    let bump = BumpObservable::new(mt.periodic_point.to_f64(), d_obs)?;
    let rcfg = ResponseConfig {
        n_iters,
        ..Default::default()
    };
    let curve = response_curve(&fam, &mt, &entries, &move |x: f64| bump.eval(x), &rcfg)?;
    std::fs::write(out.join("response.csv"), curve.to_csv())?;
    std::fs::write(out.join("response.svg"), render_loglog_svg(&curve, 20.0))?;
    let fit = fit_holder_exponent(&curve).ok();
    std::fs::write(
        out.join("fit.json"),
        serde_json::to_string_pretty(&json!({"fit": fit, "ratio_band": curve.ratio_band}))?,
    )?;
    Ok(format!(
        "pipeline complete: t0 = {}, {} sequence rows, response written",
        fmt_g17(mt.t_f64()),
        entries.len()
    ))
}
