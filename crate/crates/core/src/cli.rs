//! Command-line front end. Output goes to `--out` or stdout and is
//! byte-identical across runs with the same flags.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::common::{
    corner_rate_1, corner_rate_2, g_rates_from_corners, gk_common_information, residual_info_zero,
    wyner_common_information, ScalarReport,
};
use crate::crypto::bounds::TargetConstraint;
use crate::crypto::{
    aci_efficiency_bound, axis_intercepts, bit_ot_min_sum_zero, bit_ot_pair_min_sum_zero, bit_ot_sup_oracle,
    ot_channel, parse_constraints, ww_bound, Builtin, EfficiencyBound, Intercepts, MinSumDerivation,
    SupOracleResult,
};
use crate::error::{Error, Result};
use crate::optimize::{AuxChannel, CoordTag, OptimizerConfig};
use crate::pmf::{JointPmf, VarSet};
use crate::regions::{default_weight_grid, trace_region, RegionApprox};
use crate::verify::{run_suite, Suite, VerifyOptions};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CIREGIONS_THREADS";

/// Searches whose `support size × u_size` exceeds this are skipped by `info`.
pub const INFO_SEARCH_LIMIT: usize = 1 << 16;

const ORACLE_REFINE_STEP: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "ciregions", version, about = "Common information and rate regions of finite joint distributions")]
pub struct Cli {
    #[command(flatten)]
    pub flags: RunFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// Seed of every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Random restarts per search.
    #[arg(long, global = true, default_value_t = 32)]
    pub restarts: usize,
    /// Grid step: weight grid for `region` and `bound` (default 0.125), sup-oracle grid for the bit-OT lemma (default 0.05).
    #[arg(long, global = true)]
    pub grid: Option<f64>,
    /// Descent tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Add the channel Q = (C_A, C_B, S_{A,C_B}, S_{B,C_A}) when the input is a string-OT pair.
    #[arg(long = "inject-paper-channel", global = true)]
    pub inject_ot_channel: bool,
    /// Auxiliary alphabet size for searches (default |X||Y| + 2).
    #[arg(long, global = true)]
    pub u_size: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TagArg {
    Aci,
    Gw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Identities,
    MonotoneSteps,
    BitotLemma,
    Theorem1,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropies, common informations and corner rates of a pmf.
    Info {
        /// pmf file, or a builtin: ot:L, bitot, bitot-pair
        pmf: String,
    },
    /// Trace an inner approximation of a rate region.
    Region {
        pmf: String,
        #[arg(long, value_enum, default_value = "aci")]
        tag: TagArg,
    },
    /// Efficiency bounds for producing target copies from source copies.
    Bound {
        source: String,
        target: String,
        /// JSON list of target constraints {weights, rhs, face}.
        #[arg(long)]
        constraints: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Random instances per check.
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// Process exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::IdentityViolation { .. } => 1,
        Error::OptimizerDidNotConverge { .. } | Error::BudgetExceeded { .. } | Error::NegativeInformation(_) => 3,
        Error::NoPositiveConstraint | Error::OracleNotRun(_) | Error::ZeroTargetIntercept(_) => 4,
        _ => 2,
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Limit the global worker pool from the environment, if requested.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let flags = &cli.flags;
    let config = optimizer_config(flags)?;
    let (text, code) = match &cli.command {
        Command::Info { pmf } => (cmd_info(pmf, flags, &config)?, 0),
        Command::Region { pmf, tag } => (cmd_region(pmf, *tag, flags, &config)?, 0),
        Command::Bound {
            source,
            target,
            constraints,
        } => (cmd_bound(source, target, constraints.as_deref(), flags, &config)?, 0),
        Command::Verify { suite, trials } => cmd_verify(*suite, *trials, flags)?,
    };
    emit(flags, &text)?;
    Ok(code)
}

fn emit(flags: &RunFlags, text: &str) -> Result<()> {
    match &flags.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn optimizer_config(flags: &RunFlags) -> Result<OptimizerConfig> {
    let mut config = OptimizerConfig {
        restarts: flags.restarts,
        seed: flags.seed,
        u_size: flags.u_size,
        ..OptimizerConfig::default()
    };
    if let Some(tol) = flags.tol {
        config.tolerance = tol;
    }
    config.validate()?;
    Ok(config)
}

/// A builtin name or a pmf file.
pub fn load_input(spec: &str) -> Result<(JointPmf, Option<Builtin>)> {
    if spec == "bitot" || spec == "bitot-pair" || spec.starts_with("ot:") {
        let builtin: Builtin = spec.parse()?;
        return Ok((builtin.pmf()?, Some(builtin)));
    }
    let text = std::fs::read_to_string(spec)?;
    Ok((JointPmf::from_json(&text)?, None))
}

fn weight_grid(flags: &RunFlags) -> Result<Vec<crate::optimize::Weights3>> {
    let step = flags.grid.unwrap_or(0.125);
    let resolution = (1.0 / step).round();
    if !(step > 0.0) || resolution < 1.0 || (resolution * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("weight grid step {step} must be 1/m")));
    }
    Ok(default_weight_grid(resolution as usize))
}

/// The channel Q on a string-OT pair, recognized by its alphabet sizes.
fn injected_ot_channel(pmf: &JointPmf, flags: &RunFlags) -> Result<Vec<(String, AuxChannel)>> {
    if !flags.inject_ot_channel {
        return Ok(Vec::new());
    }
    let side = pmf.alphabet(0).len();
    let l = (1..=5u32).find(|l| 1usize << (3 * l + 1) == side && pmf.alphabet(1).len() == side);
    match l {
        Some(l) => Ok(vec![("ot-channel".to_string(), ot_channel(pmf, l)?)]),
        None => Err(Error::InvalidConfig(
            "--inject-paper-channel needs a string-OT pair input".into(),
        )),
    }
}

fn search_allowed(pmf: &JointPmf, config: &OptimizerConfig) -> bool {
    pmf.support_len().saturating_mul(config.u_size_for(pmf)) <= INFO_SEARCH_LIMIT
}

fn cmd_info(spec: &str, flags: &RunFlags, config: &OptimizerConfig) -> Result<String> {
    let (pmf, builtin) = load_input(spec)?;
    let (x, y) = (VarSet::single(0), VarSet::single(1));
    let entropies = [
        ("H(X)", pmf.entropy(x)),
        ("H(Y)", pmf.entropy(y)),
        ("H(X,Y)", pmf.entropy(x.union(y))),
        ("I(X;Y)", pmf.mutual_information(x, y)?),
    ];
    let searchable = search_allowed(&pmf, config);
    let searched = |f: &dyn Fn() -> Result<ScalarReport>| -> Result<Option<ScalarReport>> {
        if searchable { f().map(Some) } else { Ok(None) }
    };
    let (c1, c2) = match builtin {
        Some(b) => {
            let [a, c] = b.corner_rates();
            (Some(ScalarReport::exact(a)), Some(ScalarReport::exact(c)))
        }
        None => (
            searched(&|| corner_rate_1(&pmf, config))?,
            searched(&|| corner_rate_2(&pmf, config))?,
        ),
    };
    let g = match (&c1, &c2) {
        (Some(a), Some(b)) => {
            let (g1, g2) = g_rates_from_corners(&pmf, a.clone(), b.clone())?;
            (Some(g1), Some(g2))
        }
        _ => (None, None),
    };
    let quantities: Vec<(&str, Option<ScalarReport>)> = vec![
        ("C_GK", Some(gk_common_information(&pmf)?)),
        ("R_RD-0", Some(residual_info_zero(&pmf)?)),
        ("C_Wyner", searched(&|| wyner_common_information(&pmf, config))?),
        ("R_1-0", c1),
        ("R_2-0", c2),
        ("G(Y->X)", g.0),
        ("G(X->Y)", g.1),
    ];
    match flags.format.unwrap_or(Format::Text) {
        Format::Text => {
            let mut out = String::new();
            for (name, v) in entropies {
                let _ = writeln!(out, "{name} = {v:.9}");
            }
            for (name, r) in &quantities {
                match r {
                    Some(r) => {
                        let _ = writeln!(out, "{name} = {:.9} [{}]", r.value, r.certified);
                    }
                    None => {
                        let _ = writeln!(out, "{name} = skipped [search too large]");
                    }
                }
            }
            let _ = writeln!(out, "config = {}", config.hash());
            Ok(out)
        }
        Format::Json => {
            let mut map = serde_json::Map::new();
            for (name, v) in entropies {
                map.insert(name.to_string(), json!(v));
            }
            for (name, r) in quantities {
                map.insert(name.to_string(), serde_json::to_value(r)?);
            }
            map.insert("config_hash".into(), json!(config.hash()));
            Ok(serde_json::to_string_pretty(&map)? + "\n")
        }
        Format::Csv => Err(Error::InvalidConfig("info supports text and json output".into())),
    }
}

fn cmd_region(spec: &str, tag: TagArg, flags: &RunFlags, config: &OptimizerConfig) -> Result<String> {
    let (pmf, _) = load_input(spec)?;
    let tag = match tag {
        TagArg::Aci => CoordTag::Aci,
        TagArg::Gw => CoordTag::Gw,
    };
    let injected = injected_ot_channel(&pmf, flags)?;
    let region = trace_region(&pmf, tag, &weight_grid(flags)?, config, injected)?;
    let deviation = region
        .affine_deviations(&pmf)?
        .into_iter()
        .flatten()
        .fold(0.0, f64::max);
    eprintln!("max affine-map deviation: {deviation:e}");
    match flags.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(region.to_csv_with_check(&pmf)?.0),
        Format::Json => Ok(serde_json::to_string_pretty(&json!({
            "region": region,
            "max_affine_deviation": deviation,
        }))? + "\n"),
        Format::Text => Err(Error::InvalidConfig("region supports csv and json output".into())),
    }
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    source: String,
    target: String,
    ww_bound: EfficiencyBound,
    aci_bound: EfficiencyBound,
    source_intercepts: Intercepts,
    target_intercepts: Intercepts,
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_oracle: Option<SupOracleResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_sum: Option<MinSumDerivation>,
}

/// Outer constraints of a target: the exact `R_RD-0` axis plus builtin
/// closed forms and user-supplied constraints.
fn target_constraints(
    pmf: &JointPmf,
    builtin: Option<Builtin>,
    oracle: Option<&SupOracleResult>,
    extra: Vec<TargetConstraint>,
) -> Result<(Vec<TargetConstraint>, Option<MinSumDerivation>)> {
    let mut out = Vec::new();
    let mut min_sum = None;
    if let Some(b) = builtin {
        let derivation = match b {
            Builtin::BitOt => Some(bit_ot_min_sum_zero(oracle)?),
            Builtin::BitOtPair => Some(bit_ot_pair_min_sum_zero(oracle)?),
            Builtin::StringOtPair(_) => None,
        };
        if let Some(d) = derivation {
            out.push(TargetConstraint {
                weights: [1.0, 1.0, 0.0],
                rhs: d.report.value,
                face: [false, false, true],
                origin: "min-sum at zero residual information".into(),
            });
            min_sum = Some(d);
        }
        let [a, c] = b.corner_rates();
        out.push(TargetConstraint::axis(0, a, "closed-form R1-0"));
        out.push(TargetConstraint::axis(1, c, "closed-form R2-0"));
    }
    let rd = residual_info_zero(pmf)?.value;
    if rd > 0.0 {
        out.push(TargetConstraint::axis(2, rd, "exact R_RD-0 = I(X;Y) - C_GK"));
    }
    out.extend(extra);
    Ok((out, min_sum))
}

fn cmd_bound(
    source: &str,
    target: &str,
    constraints: Option<&Path>,
    flags: &RunFlags,
    config: &OptimizerConfig,
) -> Result<String> {
    if matches!(flags.format, Some(Format::Csv | Format::Text)) {
        return Err(Error::InvalidConfig("bound supports json output only".into()));
    }
    let (src, src_builtin) = load_input(source)?;
    let (tgt, tgt_builtin) = load_input(target)?;
    let extra = match constraints {
        Some(path) => parse_constraints(&std::fs::read_to_string(path)?)?,
        None => Vec::new(),
    };

    let oracle = match tgt_builtin {
        Some(Builtin::BitOt | Builtin::BitOtPair) => {
            Some(bit_ot_sup_oracle(flags.grid.unwrap_or(0.05), ORACLE_REFINE_STEP)?)
        }
        _ => None,
    };
    let (constraints, min_sum) = target_constraints(&tgt, tgt_builtin, oracle.as_ref(), extra)?;

    let mut region = match src_builtin {
        Some(b) => RegionApprox::from_channels(&src, CoordTag::Aci, b.analytic_channels(&src)?)?,
        None => trace_region(&src, CoordTag::Aci, &weight_grid(flags)?, config, Vec::new())?,
    };
    if src_builtin.is_none() {
        for (label, c) in injected_ot_channel(&src, flags)? {
            region.add_channel(&src, label, c)?;
        }
    }
    let aci = aci_efficiency_bound(&region, &constraints)?;

    let source_intercepts = axis_intercepts(&src, config, src_builtin.map(|b| b.corner_rates()))?;
    let target_intercepts = axis_intercepts(&tgt, config, tgt_builtin.map(|b| b.corner_rates()))?;
    let ww = ww_bound(&source_intercepts, &target_intercepts)?;

    let output = BoundOutput {
        source: source.to_string(),
        target: target.to_string(),
        ww_bound: ww,
        aci_bound: aci,
        source_intercepts,
        target_intercepts,
        sup_oracle: oracle,
        min_sum,
    };
    Ok(serde_json::to_string_pretty(&output)? + "\n")
}

fn cmd_verify(suite: SuiteArg, trials: Option<usize>, flags: &RunFlags) -> Result<(String, i32)> {
    let suite = match suite {
        SuiteArg::Identities => Suite::Identities,
        SuiteArg::MonotoneSteps => Suite::MonotoneSteps,
        SuiteArg::BitotLemma => Suite::BitotLemma,
        SuiteArg::Theorem1 => Suite::Theorem1,
    };
    let options = VerifyOptions {
        seed: flags.seed,
        trials,
        grid_step: flags.grid,
    };
    let report = run_suite(suite, &options)?;
    let code = if report.passed() { 0 } else { 1 };
    Ok((format!("{report}\n"), code))
}
