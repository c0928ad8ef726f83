//! Command-line driver: symbol-space summaries, verification suites with JSON
//! reports, and exact q-expansion printing. Reports are deterministic for a
//! fixed config and code version; timing is the one field allowed to vary.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use toricmf::arith::{cusp_count, default_prec, sturm_bound};
use toricmf::manin::{build_space, dual_basis, SpaceKind};
use toricmf::qseries::{
    eisenstein_basis, qx_mul, qx_scale, qx_sub, s2_series, s_series, tilde_s_series, QExpansion,
};
use toricmf::toric::{
    discrepancy_series, rank_zero_with, rho1_series, rho_series, EngineCache, ToricEngine,
};
use toricmf::{CycNum, Rat, Scalar, Subspace};

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "toricmf", version, about = "Weight-2 toric form toolkit for Gamma_1(l)")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// q-expansion precision (defaults to Sturm bound + 2 for the level)
    #[arg(long, global = true)]
    prec: Option<usize>,
    /// Hecke span budget for the winding pipeline (defaults to Sturm bound + 12)
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Directory for engine caches (or TORICMF_CACHE_DIR)
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Write the JSON report here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to available cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Proceed below the Sturm bound where the output is still meaningful
    #[arg(long, global = true)]
    allow_low_precision: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dimensions of the symbol spaces and the Eisenstein rank at a level
    Space {
        #[arg(long)]
        level: u32,
    },
    /// Run a verification suite and report pass/fail per check
    Verify {
        #[arg(value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long)]
        level: u32,
    },
    /// Print exact q-expansion coefficients in cyclotomic power-basis notation
    Qexp {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 1)]
        a: i64,
        #[arg(long)]
        b: Option<i64>,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Suite {
    Relation,
    Keytheorem,
    Muishecke,
    Main,
    Eiscodim,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    S,
    S2,
    Tilde,
    Product,
}

#[derive(Serialize)]
struct Report {
    schema: u32,
    command: String,
    config: ConfigEcho,
    checks: Vec<Check>,
    pass: bool,
    timing_ms: u128,
}

#[derive(Serialize)]
struct ConfigEcho {
    level: u32,
    prec: usize,
    budget: u64,
    cache: String,
    jobs: String,
    allow_low_precision: bool,
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    witness: String,
}

fn check(name: &str, pass: bool, witness: String) -> Check {
    Check { name: name.to_string(), pass, witness }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let cache_dir = cli
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os("TORICMF_CACHE_DIR").map(PathBuf::from));

    let level = match cli.cmd {
        Cmd::Space { level } | Cmd::Verify { level, .. } | Cmd::Qexp { level, .. } => level,
    };
    if level < 2 {
        bail!("level must be at least 2");
    }
    let prec = effective_prec(level, cli.prec, cli.allow_low_precision)?;
    let budget = cli.budget.unwrap_or((sturm_bound(level) + 12) as u64);

    let (command, checks) = match &cli.cmd {
        Cmd::Space { level } => ("space".to_string(), cmd_space(*level, prec)?),
        Cmd::Verify { suite, level } => (
            format!("verify {}", suite_name(*suite)),
            cmd_verify(*suite, *level, prec, budget, &cache_dir)?,
        ),
        Cmd::Qexp { kind, level, a, b } => (
            format!("qexp {}", kind_name(*kind)),
            cmd_qexp(*kind, *level, prec, *a, *b, &cache_dir)?,
        ),
    };

    let pass = checks.iter().all(|c| c.pass);
    let report = Report {
        schema: SCHEMA,
        command,
        config: ConfigEcho {
            level,
            prec,
            budget,
            cache: cache_dir
                .as_ref()
                .map_or_else(|| "disabled".to_string(), |d| d.display().to_string()),
            jobs: cli.jobs.map_or_else(|| "auto".to_string(), |j| j.to_string()),
            allow_low_precision: cli.allow_low_precision,
        },
        checks,
        pass,
        timing_ms: started.elapsed().as_millis(),
    };
    emit(&cli.out, &report)?;
    Ok(pass)
}

fn emit(out: &Option<PathBuf>, report: &Report) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    let summarize = |to_stdout: bool| {
        for c in &report.checks {
            let line =
                format!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.witness);
            if to_stdout {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
        }
        let tail = format!(
            "{} in {} ms",
            if report.pass { "PASS" } else { "FAIL" },
            report.timing_ms
        );
        if to_stdout {
            println!("{tail}");
        } else {
            eprintln!("{tail}");
        }
    };
    match out {
        Some(path) => {
            fs::write(path, json + "\n")
                .with_context(|| format!("writing report to {}", path.display()))?;
            summarize(true);
        }
        None => {
            println!("{json}");
            summarize(false);
        }
    }
    Ok(())
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Relation => "relation",
        Suite::Keytheorem => "keytheorem",
        Suite::Muishecke => "muishecke",
        Suite::Main => "main",
        Suite::Eiscodim => "eiscodim",
        Suite::All => "all",
    }
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::S => "s",
        Kind::S2 => "s2",
        Kind::Tilde => "tilde",
        Kind::Product => "product",
    }
}

fn effective_prec(l: u32, flag: Option<usize>, allow: bool) -> Result<usize> {
    let p = flag.unwrap_or_else(|| default_prec(l));
    if p < 2 {
        bail!("precision must be at least 2");
    }
    let sturm = sturm_bound(l);
    if p < sturm {
        if !allow {
            bail!(
                "precision {p} is below the Sturm bound {sturm} for level {l}; \
                 pass --allow-low-precision to proceed where that is meaningful"
            );
        }
        eprintln!(
            "warning: precision {p} is below the Sturm bound {sturm}; \
             span and residual computations are refused, series are printed as-is"
        );
    }
    Ok(p)
}

fn require_sturm(l: u32, prec: usize, what: &str) -> Result<()> {
    let sturm = sturm_bound(l);
    if prec < sturm {
        bail!("{what} requires precision >= the Sturm bound {sturm} at level {l}");
    }
    Ok(())
}

/// Engine lookup through the disk cache; stale or unreadable caches are
/// rebuilt and overwritten, never trusted.
fn get_engine(l: u32, prec: usize, cache_dir: &Option<PathBuf>) -> Result<ToricEngine> {
    let Some(dir) = cache_dir else {
        return Ok(ToricEngine::new(l, prec)?);
    };
    let path = dir.join(format!("engine-l{l}-n{prec}-v{}.json", toricmf::CODE_VERSION));
    if let Ok(text) = fs::read_to_string(&path) {
        match serde_json::from_str::<EngineCache>(&text) {
            Ok(cache) if cache.level == l && cache.prec == prec => {
                match ToricEngine::from_cache(cache) {
                    Ok(engine) => return Ok(engine),
                    Err(e) => eprintln!("warning: rebuilding {}: {e}", path.display()),
                }
            }
            _ => eprintln!("warning: rebuilding unreadable cache {}", path.display()),
        }
    }
    let engine = ToricEngine::new(l, prec)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string(&engine.to_cache())?)?;
    fs::rename(&tmp, &path)?;
    Ok(engine)
}

fn cmd_space(l: u32, prec: usize) -> Result<Vec<Check>> {
    let dim = |k: SpaceKind| build_space(l, k).dim();
    let (m, mp, mm) = (dim(SpaceKind::M), dim(SpaceKind::MPlus), dim(SpaceKind::MMinus));
    let (s, sp, sm) = (dim(SpaceKind::S), dim(SpaceKind::SPlus), dim(SpaceKind::SMinus));
    let cusps = cusp_count(l);
    let mut checks = vec![check(
        "dimensions",
        true,
        format!("M={m} M+={mp} M-={mm} S={s} S+={sp} S-={sm} cusps={cusps}"),
    )];
    checks.push(check(
        "plus_minus_split",
        m == mp + mm && s == sp + sm,
        format!("M: {mp}+{mm}={m} S: {sp}+{sm}={s}"),
    ));
    if prec >= sturm_bound(l) {
        let rank = eisenstein_basis(l, prec)?.rank();
        checks.push(check(
            "eisenstein_rank",
            rank == cusps - 1,
            format!("rank={rank} cusps={cusps}"),
        ));
    }
    Ok(checks)
}

fn cmd_verify(
    suite: Suite,
    l: u32,
    prec: usize,
    budget: u64,
    cache_dir: &Option<PathBuf>,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;
    if wants(Suite::Relation) {
        checks.push(suite_relation(l, prec));
    }
    if wants(Suite::Keytheorem) {
        checks.push(suite_keytheorem(l, prec));
    }
    if wants(Suite::Muishecke) {
        require_sturm(l, prec, "the muishecke suite")?;
        let engine = get_engine(l, prec, cache_dir)?;
        checks.push(suite_muishecke(l, &engine));
    }
    if wants(Suite::Main) {
        require_sturm(l, prec, "the main suite")?;
        let engine = get_engine(l, prec, cache_dir)?;
        checks.push(suite_main(&engine, budget)?);
    }
    if suite == Suite::Eiscodim {
        require_sturm(l, prec, "the eiscodim suite")?;
        checks.push(suite_eiscodim(l, prec)?);
    }
    Ok(checks)
}

fn suite_relation(l: u32, prec: usize) -> Check {
    let li = l as i64;
    let s: Vec<QExpansion> = (1..li).map(|a| s_series(a, l, prec)).collect();
    let s2: Vec<QExpansion> = (1..li).map(|a| s2_series(a, l, prec)).collect();
    let mut prod: HashMap<(i64, i64), QExpansion> = HashMap::new();
    for a in 1..li {
        for b in a..li {
            prod.insert((a, b), qx_mul(&s[(a - 1) as usize], &s[(b - 1) as usize]));
        }
    }
    let key = |a: i64, b: i64| if a <= b { (a, b) } else { (b, a) };
    let half = CycNum::from_rat(l, &Rat::from_frac(-1, 2));
    let mut triples = 0u64;
    for a in 1..li {
        for b in 1..li {
            let c = (-(a + b)).rem_euclid(li);
            if c == 0 {
                continue;
            }
            let lhs = toricmf::qseries::qx_add(
                &toricmf::qseries::qx_add(&prod[&key(a, b)], &prod[&key(b, c)]),
                &prod[&key(c, a)],
            );
            let mut rhs = QExpansion::zero(l, prec);
            for x in [a, b, c] {
                rhs = toricmf::qseries::qx_add(
                    &toricmf::qseries::qx_add(&rhs, &prod[&(x, x)]),
                    &s2[(x - 1) as usize],
                );
            }
            let rhs = qx_scale(&rhs, &half);
            if lhs != rhs {
                let i = (0..prec).find(|&i| lhs.coeff(i) != rhs.coeff(i)).unwrap();
                return check(
                    "relation",
                    false,
                    format!("triple ({a},{b},{c}) first differs at q^{i}"),
                );
            }
            triples += 1;
        }
    }
    check("relation", true, format!("triples={triples} prec={prec}"))
}

fn suite_keytheorem(l: u32, prec: usize) -> Check {
    let mplus = build_space(l, SpaceKind::MPlus);
    let duals = dual_basis(&mplus);
    for (k, phi) in duals.iter().enumerate() {
        let lhs = qx_sub(
            &qx_sub(&rho1_series(phi, prec), &rho_series(phi, prec)),
            &discrepancy_series(phi, prec),
        );
        if let Some(i) = (1..prec).find(|&i| !Scalar::is_zero(lhs.coeff(i))) {
            return check(
                "keytheorem",
                false,
                format!("dual {k}: first nonzero coefficient at q^{i}"),
            );
        }
    }
    check("keytheorem", true, format!("duals={} prec={prec}", duals.len()))
}

fn suite_muishecke(l: u32, engine: &ToricEngine) -> Check {
    let minus = build_space(l, SpaceKind::MMinus);
    let primes: Vec<i64> =
        [2i64, 3, 5, 7].iter().copied().filter(|&p| l % (p as u32) != 0).take(2).collect();
    for &p in &primes {
        for m in 0..l as i64 {
            for n in 0..l as i64 {
                let out = engine.hecke_toric_check(&minus, m, n, p);
                if !out.pass {
                    return check("muishecke", false, format!("p={p} pair=({m},{n})"));
                }
            }
        }
    }
    let plist: Vec<String> = primes.iter().map(|p| p.to_string()).collect();
    check(
        "muishecke",
        true,
        format!("pairs={} primes={}", (l as u64) * (l as u64), plist.join(",")),
    )
}

fn suite_main(engine: &ToricEngine, budget: u64) -> Result<Check> {
    let r = rank_zero_with(engine, budget)?;
    Ok(check(
        "main",
        r.agree,
        format!(
            "toricDim={} windingDim={} eisPrime={} spanReached={}",
            r.toric_dim, r.winding_dim, r.eis_prime, r.span_reached
        ),
    ))
}

fn suite_eiscodim(l: u32, prec: usize) -> Result<Check> {
    use rayon::prelude::*;
    let eis = eisenstein_basis(l, prec)?;
    let half = ((l - 1) / 2) as i64;
    let s: Vec<QExpansion> = (1..=half).map(|a| s_series(a, l, prec)).collect();
    let pairs: Vec<(usize, usize)> = (0..s.len())
        .flat_map(|a| (a..s.len()).map(move |b| (a, b)))
        .collect();
    let rows_t: Vec<Vec<CycNum>> =
        pairs.par_iter().map(|&(a, b)| qx_mul(&s[a], &s[b]).coeffs).collect();
    let rk_e = eis.rank() + 1;
    let rk_t = Subspace::from_rows(prec, rows_t.clone()).dim();
    let mut all = rows_t;
    all.extend(eis.rows().iter().cloned());
    let rk_et = Subspace::from_rows(prec, all).dim();
    // dimE = rkE - 1 discounts the constant device row; past the Sturm bound
    // a span of genuine forms never contains the constant series, so the
    // codimension of (Eisenstein ∩ products) inside Eisenstein is
    // (rkE - 1) - (rkE + rkT - rkET) = rkET - rkT - 1.
    Ok(check(
        "eiscodim",
        true,
        format!(
            "dimE={} dimT={rk_t} dimSum={} codim={}",
            rk_e - 1,
            rk_et - 1,
            rk_et - rk_t - 1
        ),
    ))
}

fn cmd_qexp(
    kind: Kind,
    l: u32,
    prec: usize,
    a: i64,
    b: Option<i64>,
    cache_dir: &Option<PathBuf>,
) -> Result<Vec<Check>> {
    let coeffs: Vec<CycNum> = match kind {
        Kind::S | Kind::S2 => {
            if a.rem_euclid(l as i64) == 0 {
                bail!("kind {} requires an index nonzero mod {l}", kind_name(kind));
            }
            if matches!(kind, Kind::S) {
                s_series(a, l, prec).coeffs
            } else {
                s2_series(a, l, prec).coeffs
            }
        }
        Kind::Tilde => tilde_s_series(a, l, prec).coeffs,
        Kind::Product => {
            require_sturm(l, prec, "the product kind (it reduces modulo the Eisenstein span)")?;
            let engine = get_engine(l, prec, cache_dir)?;
            engine.mu(a, b.unwrap_or(a)).residual
        }
    };
    let lines: Vec<String> =
        coeffs.iter().enumerate().map(|(n, c)| format!("q^{n}: {c}")).collect();
    Ok(vec![check(kind_name(kind), true, lines.join("; "))])
}
