//! Command-line interface: solve, check, simulate, compare, tails and
//! scenarios subcommands over JSON scenario configs.
//!
//! All artifacts are RFC-4180 CSV files (CRLF line endings, 17 significant
//! digits), written deterministically: reruns with the same config and seed
//! produce byte-identical output. The exit status is 0 exactly when every
//! assertion in the config's `expected` block holds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::expr::ScalarFunction;
use crate::levy::Measure1D;
use crate::operator::{invariance_residual, standard_bump_family};
use crate::scenario::{builtin, builtin_names, ScenarioConfig};
use crate::sde::{self, SimParams};
use crate::vfie::{self, VfieSolution};

#[derive(Debug, Parser)]
#[command(
    name = "levyinv",
    about = "Invariant measures of 1-D Lévy-type operators: integral-equation solver, residual checks, Monte Carlo cross-validation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to a scenario config JSON, or the name of a built-in scenario.
    #[arg(long)]
    pub config: String,
    /// Output directory for artifacts (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the Monte Carlo seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long)]
    pub quiet: bool,
    /// Disable data parallelism.
    #[arg(long)]
    pub serial: bool,
    /// Reference state for the `tails` artifact.
    #[arg(long, default_value_t = 1.0)]
    pub x: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the integral equation and write solution.csv.
    Solve(CommonArgs),
    /// Apply the operator to the bump family against the (solved or
    /// configured) measure and write residuals.csv.
    Check(CommonArgs),
    /// Simulate the SDE and write histogram.csv.
    Simulate(CommonArgs),
    /// Solve, simulate and write distribution distance metrics.csv.
    Compare(CommonArgs),
    /// Tabulate radial tails of the jump measure at --x into tails.csv.
    Tails(CommonArgs),
    /// List built-in scenarios, writing their configs to --out.
    Scenarios {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const DEFAULT_SEED: u64 = 12345;

fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, String> {
    fs::create_dir_all(dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("writing {}: {e}", path.display()))?;
    Ok(path)
}

fn load_config(arg: &str) -> Result<ScenarioConfig, String> {
    let path = Path::new(arg);
    let cfg = if path.exists() {
        let text =
            fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
        ScenarioConfig::from_json(&text)?
    } else {
        builtin(arg).ok_or_else(|| {
            format!(
                "config '{arg}' is neither a file nor a built-in scenario (available: {})",
                builtin_names().join(", ")
            )
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Tracks expected-block assertions; the run passes when none failed.
struct Assertions {
    failures: Vec<String>,
    checked: usize,
}

impl Assertions {
    fn new() -> Self {
        Assertions {
            failures: Vec::new(),
            checked: 0,
        }
    }

    fn le(&mut self, name: &str, value: f64, bound: Option<f64>) {
        if let Some(b) = bound {
            self.checked += 1;
            if !(value <= b) {
                self.failures.push(format!("{name} = {value:.6e} > {b:.6e}"));
            }
        }
    }

    fn flag(&mut self, name: &str, value: bool, expect: Option<bool>) {
        if let Some(e) = expect {
            self.checked += 1;
            if value != e {
                self.failures.push(format!("{name} = {value}, expected {e}"));
            }
        }
    }
}

struct Ctx {
    cfg: ScenarioConfig,
    out: PathBuf,
    seed: u64,
    quiet: bool,
    par: bool,
}

impl Ctx {
    fn new(args: &CommonArgs) -> Result<Self, String> {
        Ok(Ctx {
            cfg: load_config(&args.config)?,
            out: args.out.clone(),
            seed: args.seed.unwrap_or(DEFAULT_SEED),
            quiet: args.quiet,
            par: !args.serial,
        })
    }

    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn solve(&self) -> Result<VfieSolution, String> {
        let v = self
            .cfg
            .vfie
            .ok_or_else(|| format!("scenario '{}' has no vfie block", self.cfg.name))?;
        let t = self.cfg.triplet()?;
        let d = self.cfg.decomposition()?;
        let sys =
            vfie::assemble(&t, &d, v.r, v.n, self.par).map_err(|e| e.to_string())?;
        vfie::solve(&sys, &v.options()).map_err(|e| e.to_string())
    }

    fn write_solution(&self, sol: &VfieSolution) -> Result<(), String> {
        let mut s = String::new();
        let _ = write!(s, "c1,{}\r\n", fmt17(sol.c1));
        let _ = write!(s, "c2,{}\r\n", fmt17(sol.c2));
        let _ = write!(s, "residual_norm,{}\r\n", fmt17(sol.residual_norm));
        let _ = write!(s, "mass_leak,{}\r\n", fmt17(sol.mass_leak));
        let _ = write!(s, "nullspace_dim,{}\r\n", sol.nullspace_dim);
        s.push_str("x,eta\r\n");
        for (x, e) in sol.grid.iter().zip(&sol.eta) {
            let _ = write!(s, "{},{}\r\n", fmt17(*x), fmt17(*e));
        }
        let p = write_file(&self.out, "solution.csv", &s)?;
        self.say(&format!("wrote {}", p.display()));
        Ok(())
    }

    fn assert_solution(&self, sol: &VfieSolution, asr: &mut Assertions) {
        let e = &self.cfg.expected;
        asr.le("residual_norm", sol.residual_norm, e.residual_norm_max);
        asr.le("|c1|", sol.c1.abs(), e.c1_abs_max);
        asr.le("mass_leak", sol.mass_leak, e.mass_leak_max);
        asr.flag(
            "non_normalizable",
            !sol.mass_leak.is_finite(),
            e.non_normalizable,
        );
    }

    fn fractional(&self, sol: &VfieSolution, asr: &mut Assertions) -> Result<Option<f64>, String> {
        let Some(f) = &self.cfg.fractional else {
            return Ok(None);
        };
        let phi = ScalarFunction::parse(&f.phi).map_err(|e| e.to_string())?;
        let rms = vfie::fractional_check(sol, f.alpha, &phi, sol.c1);
        // relative to the RMS of the drift term over the support side
        let mut scale = 0.0;
        let mut cnt = 0usize;
        for (x, e) in sol.grid.iter().zip(&sol.eta) {
            if *x > 0.0 {
                let v = phi.value(*x) * e;
                scale += v * v;
                cnt += 1;
            }
        }
        let scale = (scale / cnt.max(1) as f64).sqrt().max(1e-300);
        let rel = rms / scale;
        asr.le(
            "fractional_rms_rel",
            rel,
            self.cfg.expected.fractional_rms_rel_max,
        );
        Ok(Some(rel))
    }

    fn measure_for_check(&self) -> Result<Measure1D, String> {
        if let Some(e) = &self.cfg.eta {
            e.build()
        } else {
            let sol = self.solve()?;
            Ok(Measure1D::from_grid(sol.grid, sol.eta))
        }
    }

    fn simulate(&self) -> Result<sde::SimOutput, String> {
        let sc = self
            .cfg
            .sde
            .as_ref()
            .ok_or_else(|| format!("scenario '{}' has no sde block", self.cfg.name))?;
        let spec = sc.build()?;
        let params = SimParams {
            n_paths: sc.n_paths,
            t_final: sc.t_final,
            dt: sc.dt,
            seed: self.seed,
            par: self.par,
        };
        sde::simulate(&spec, &params).map_err(|e| e.to_string())
    }

    fn finish(&self, asr: &Assertions) -> bool {
        if asr.failures.is_empty() {
            self.say(&format!(
                "{}: PASS ({} assertions)",
                self.cfg.name, asr.checked
            ));
            true
        } else {
            for f in &asr.failures {
                eprintln!("{}: FAIL {f}", self.cfg.name);
            }
            false
        }
    }
}

fn cmd_solve(args: &CommonArgs) -> Result<bool, String> {
    let ctx = Ctx::new(args)?;
    let mut asr = Assertions::new();
    let sol = ctx.solve()?;
    ctx.write_solution(&sol)?;
    ctx.assert_solution(&sol, &mut asr);
    if let Some(rel) = ctx.fractional(&sol, &mut asr)? {
        ctx.say(&format!("fractional identity relative RMS: {rel:.3e}"));
    }
    Ok(ctx.finish(&asr))
}

fn cmd_check(args: &CommonArgs) -> Result<bool, String> {
    let ctx = Ctx::new(args)?;
    let mut asr = Assertions::new();
    let chk = ctx
        .cfg
        .check
        .ok_or_else(|| format!("scenario '{}' has no check block", ctx.cfg.name))?;
    let t = ctx.cfg.triplet()?;
    let eta = ctx.measure_for_check()?;
    let bumps = standard_bump_family(-chk.window, chk.window);
    let res = invariance_residual(&t, &eta, &bumps, chk.tolerance, ctx.par)
        .map_err(|e| e.to_string())?;
    let mut s = String::from("center,width,residual\r\n");
    let mut worst = 0.0f64;
    for (b, r) in bumps.iter().zip(&res) {
        let _ = write!(s, "{},{},{}\r\n", fmt17(b.center), fmt17(b.width), fmt17(*r));
        worst = worst.max(r.abs());
    }
    let p = write_file(&ctx.out, "residuals.csv", &s)?;
    ctx.say(&format!("wrote {} (max |residual| {worst:.3e})", p.display()));
    asr.le("max_residual", worst, ctx.cfg.expected.residual_max);
    Ok(ctx.finish(&asr))
}

fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    let w = (hi - lo) / bins as f64;
    for &x in samples {
        if x >= lo && x < hi {
            counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
        }
    }
    counts
}

fn cmd_simulate(args: &CommonArgs) -> Result<bool, String> {
    let ctx = Ctx::new(args)?;
    let asr = Assertions::new();
    let out = ctx.simulate()?;
    let (lo, hi, bins) = match ctx.cfg.vfie {
        Some(v) => (-v.r, v.r, v.n),
        None => (-8.0, 8.0, 200),
    };
    let counts = histogram(&out.at_final, lo, hi, bins);
    let w = (hi - lo) / bins as f64;
    let mut s = String::from("bin_lo,bin_hi,count\r\n");
    for (j, c) in counts.iter().enumerate() {
        let _ = write!(
            s,
            "{},{},{c}\r\n",
            fmt17(lo + j as f64 * w),
            fmt17(lo + (j + 1) as f64 * w)
        );
    }
    let p = write_file(&ctx.out, "histogram.csv", &s)?;
    let ks = sde::ks_two_sample(&out.at_half, &out.at_final);
    ctx.say(&format!(
        "wrote {} ({} paths, {} aborted, checkpoint KS {ks:.3e})",
        p.display(),
        out.at_final.len(),
        out.aborted
    ));
    Ok(ctx.finish(&asr))
}

fn cmd_compare(args: &CommonArgs) -> Result<bool, String> {
    let ctx = Ctx::new(args)?;
    let mut asr = Assertions::new();
    let sol = ctx.solve()?;
    let out = ctx.simulate()?;
    let m = sde::compare(&out.at_final, &sol.grid, sol.h, &sol.eta);
    let ks_stat = sde::ks_two_sample(&out.at_half, &out.at_final);
    let mut s = String::from("metric,value\r\n");
    let _ = write!(s, "l1,{}\r\n", fmt17(m.l1));
    let _ = write!(s, "ks,{}\r\n", fmt17(m.ks));
    let _ = write!(s, "checkpoint_ks,{}\r\n", fmt17(ks_stat));
    let _ = write!(s, "aborted,{}\r\n", out.aborted);
    let p = write_file(&ctx.out, "metrics.csv", &s)?;
    ctx.say(&format!(
        "wrote {} (L1 {:.4}, KS {:.4})",
        p.display(),
        m.l1,
        m.ks
    ));
    asr.le("l1", m.l1, ctx.cfg.expected.l1_max);
    asr.le("ks", m.ks, ctx.cfg.expected.ks_max);
    Ok(ctx.finish(&asr))
}

fn cmd_tails(args: &CommonArgs) -> Result<bool, String> {
    let ctx = Ctx::new(args)?;
    let t = ctx.cfg.triplet()?;
    let m = t.kernel.at(args.x);
    let mut s = String::from("z,tail,integrated_tail\r\n");
    for side in [-1.0, 1.0] {
        for k in 0..24 {
            let z = side * 0.01 * 2.0f64.powi(k);
            let tail = m.tail(z).map_err(|e| e.to_string())?;
            let it = m.integrated_tail(z).unwrap_or(f64::INFINITY);
            let _ = write!(s, "{},{},{}\r\n", fmt17(z), fmt17(tail), fmt17(it));
        }
    }
    let p = write_file(&ctx.out, "tails.csv", &s)?;
    ctx.say(&format!("wrote {}", p.display()));
    Ok(true)
}

fn cmd_scenarios(out: &Option<PathBuf>) -> Result<bool, String> {
    for name in builtin_names() {
        println!("{name}");
        if let Some(dir) = out {
            let cfg = builtin(name).expect("builtin");
            write_file(dir, &format!("{name}.json"), &cfg.to_json())?;
        }
    }
    Ok(true)
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Tails(a) => cmd_tails(a),
        Command::Scenarios { out } => cmd_scenarios(out),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
