//! `dsyk`: batch runs writing CSV files with a JSON manifest header.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsyk::analytic::{k_complexity_exact, tail_decay_rate, variance_exact, MeixnerParams};
use dsyk::diagrams::{arnoldi_large_n, lanczos_large_n, DiagramEngine, DiagramState, QMode};
use dsyk::dynamics::{evolve_chain, evolve_chain_auto, k_complexity_numeric, ChainState, EvolveOptions};
use dsyk::io::{fmt, hessenberg_table, read_csv, stamp, CsvTable};
use dsyk::krylov::{arnoldi, ArnoldiOptions};
use dsyk::lindbladian::DissipativeModel;
use dsyk::majorana::{validate_model, DenseOperator};
use dsyk::moments::{has_parity, moments_from_g};
use dsyk::{Complex64, Error, ErrorKind, HessenbergMatrix, MajoranaString, SykHamiltonian, TridiagonalCoeffs};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Largest N accepted by the finite-N Arnoldi run (2^N-dimensional operator space).
const MAX_FINITE_N: usize = 20;

#[derive(Parser)]
#[command(name = "dsyk", version, about = "Krylov complexity of the dissipative SYK model")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "DSYK_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Arnoldi iteration on sampled finite-N Hamiltonians.
    FiniteNArnoldi(FiniteNArgs),
    /// Large-N diagrammatic Lanczos/Arnoldi chain.
    LargeN(LargeNArgs),
    /// Exact moment polynomials of the order-1/q autocorrelation.
    Moments(MomentsArgs),
    /// Closed-form K(t) and variance on the exactly solvable chain.
    Meixner(MeixnerArgs),
    /// Numerical chain evolution.
    Evolve(EvolveArgs),
    /// Re-run the command recorded in an output file's manifest.
    Replay {
        file: PathBuf,
    },
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct FiniteNArgs {
    #[arg(long, default_value_t = 14)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    q: usize,
    /// Coupling J.
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    /// Dissipation strengths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    mu: Vec<f64>,
    /// Disorder seeds, comma separated; one realization per seed.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 30)]
    nmax: usize,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct LargeNArgs {
    #[arg(long, default_value_t = 4)]
    q: usize,
    /// Coupling 𝒥.
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 12)]
    nmax: usize,
    /// Cap on the number of distinct diagrams.
    #[arg(long, default_value_t = dsyk::diagrams::DEFAULT_MAX_TREES)]
    max_trees: usize,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct MomentsArgs {
    #[arg(long, default_value_t = 8)]
    nmax: usize,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct MeixnerArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.01,0.001")]
    u: Vec<f64>,
    #[arg(long, default_value_t = 1.5)]
    eta: f64,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    /// Output grid spacing.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct EvolveArgs {
    /// Chain coefficients (`n,re_a,im_a,b` CSV); the exactly solvable chain when absent.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    u: f64,
    #[arg(long, default_value_t = 1.5)]
    eta: f64,
    #[arg(long, default_value_t = 5.0)]
    tmax: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Relative tolerance of the adaptive integrator.
    #[arg(long, default_value_t = 1e-10)]
    dt_tol: f64,
    /// Largest chain length tried before giving up.
    #[arg(long, default_value_t = 16384)]
    ntrunc_cap: usize,
}

type Outcome = dsyk::Result<Vec<PathBuf>>;

fn manifest(subcommand: &str, params: &impl Serialize) -> Value {
    stamp(json!({ "subcommand": subcommand, "params": params }))
}

fn write(out: &Path, name: &str, table: &CsvTable, m: &Value) -> dsyk::Result<PathBuf> {
    let path = out.join(name);
    table.write_file(&path, m)?;
    Ok(path)
}

fn cmd_finite_n_arnoldi(a: &FiniteNArgs, out: &Path) -> Outcome {
    validate_model(a.n, a.q)?;
    if a.n > MAX_FINITE_N {
        return Err(Error::ResourceGuard(format!(
            "N = {} needs a 2^{} operator space; N ≤ {MAX_FINITE_N} is supported, use large-n for larger systems",
            a.n, a.n
        )));
    }
    if let Some(mu) = a.mu.iter().find(|m| !(**m >= 0.0)) {
        return Err(Error::InvalidModel(format!("mu must be non-negative, got {mu}")));
    }
    let runs: Vec<(f64, u64)> = a.mu.iter().flat_map(|&m| a.seed.iter().map(move |&s| (m, s))).collect();
    let results: Vec<dsyk::Result<(f64, u64, HessenbergMatrix)>> = runs
        .par_iter()
        .map(|&(mu, seed)| {
            let h = SykHamiltonian::sample(a.n, a.q, a.coupling, seed)?;
            let model = DissipativeModel::new(h, mu)?;
            let o0 = DenseOperator::basis(a.n, MajoranaString::single(0));
            let (hm, _) = arnoldi(&model.dense(), &o0, ArnoldiOptions::new(a.nmax))?;
            Ok((mu, seed, hm))
        })
        .collect();
    let mut files = Vec::new();
    let (lo, hi) = HessenbergMatrix::default_window(a.n, a.q);
    let mut fits = CsvTable::new(["mu", "seed", "lo", "hi", "slope", "intercept", "r2", "slope_over_mu"]);
    for r in results {
        let (mu, seed, hm) = r?;
        let run = json!({ "n": a.n, "q": a.q, "coupling": a.coupling, "mu": mu, "seed": seed, "nmax": a.nmax });
        let m = manifest("finite-n-arnoldi", a);
        let m = {
            let mut m = m;
            m["run"] = run;
            m
        };
        let tag = format!("N{}_q{}_mu{}_seed{}", a.n, a.q, mu, seed);
        files.push(write(out, &format!("hessenberg_{tag}.csv"), &hessenberg_table(&hm), &m)?);
        let eps = hm.hessenberg_error();
        let mut series = CsvTable::new(["n", "re_diag", "im_diag", "sub", "super_re", "super_im", "eps"]);
        for n in 0..hm.basis_dim {
            let d = hm.get(n, n);
            let sub = if n + 1 < hm.h.nrows() { hm.get(n + 1, n).re } else { f64::NAN };
            let sup = if n + 1 < hm.basis_dim { hm.get(n, n + 1) } else { Complex64::new(f64::NAN, f64::NAN) };
            let e = if n >= 1 { eps[n - 1] } else { 0.0 };
            series.push([n.to_string(), fmt(d.re), fmt(d.im), fmt(sub), fmt(sup.re), fmt(sup.im), fmt(e)]);
        }
        files.push(write(out, &format!("series_{tag}.csv"), &series, &m)?);
        if hi > lo {
            if let Ok(f) = hm.diagonal_slope_fit(lo, hi, 2) {
                let ratio = if mu > 0.0 { f.slope / mu } else { f64::NAN };
                fits.push([
                    fmt(mu),
                    seed.to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    fmt(f.slope),
                    fmt(f.intercept),
                    fmt(f.r2),
                    fmt(ratio),
                ]);
            }
        }
    }
    files.push(write(out, &format!("fits_N{}_q{}.csv", a.n, a.q), &fits, &manifest("finite-n-arnoldi", a))?);
    Ok(files)
}

fn cmd_large_n(a: &LargeNArgs, out: &Path) -> Outcome {
    if a.q < 4 || a.q % 2 == 1 {
        return Err(Error::InvalidModel(format!("q must be even and at least 4, got {}", a.q)));
    }
    if !(a.mu >= 0.0) {
        return Err(Error::InvalidModel(format!("mu must be non-negative, got {}", a.mu)));
    }
    let engine = DiagramEngine::build(QMode::Finite(a.q), a.nmax + 1, a.coupling * a.coupling, a.max_trees)?;
    let (coeffs, states): (TridiagonalCoeffs, Vec<DiagramState<Complex64>>) = if a.mu == 0.0 {
        let r = lanczos_large_n(&engine, a.nmax)?;
        (r.coeffs, r.states)
    } else {
        let (h, s) = arnoldi_large_n(&engine, a.nmax, a.mu)?;
        (h.tridiagonal(), s)
    };
    let m = manifest("large-n", a);
    let tag = format!("q{}_mu{}_n{}", a.q, a.mu, a.nmax);
    let mut chain = CsvTable::new(["n", "re_a", "im_a", "b"]);
    for (n, an) in coeffs.a.iter().enumerate() {
        let b = if n == 0 { 0.0 } else { coeffs.b_n(n).re };
        chain.push([n.to_string(), fmt(an.re), fmt(an.im), fmt(b)]);
    }
    let mut summary = CsvTable::new(["n", "mean_size", "std_size", "std_over_mean"]);
    let mut dist = CsvTable::new(["n", "size", "probability"]);
    for (n, s) in states.iter().enumerate() {
        let d = engine.size_distribution(s, a.q)?;
        summary.push([n.to_string(), fmt(d.mean), fmt(d.std), fmt(d.std / d.mean)]);
        for (size, p) in &d.p {
            dist.push([n.to_string(), size.to_string(), fmt(*p)]);
        }
    }
    Ok(vec![
        write(out, &format!("chain_{tag}.csv"), &chain, &m)?,
        write(out, &format!("sizes_{tag}.csv"), &summary, &m)?,
        write(out, &format!("size_distribution_{tag}.csv"), &dist, &m)?,
    ])
}

fn cmd_moments(a: &MomentsArgs, out: &Path) -> Outcome {
    let polys = moments_from_g(a.nmax);
    let mut t = CsvTable::new(["n", "polynomial", "parity_ok"]);
    for (n, p) in polys.iter().enumerate().skip(1) {
        t.push([n.to_string(), p.to_string(), has_parity(p, n).to_string()]);
    }
    Ok(vec![write(out, &format!("moments_n{}.csv", a.nmax), &t, &manifest("moments", a))?])
}

fn time_grid(tmax: f64, dt: f64) -> dsyk::Result<Vec<f64>> {
    if !(dt > 0.0) || !(tmax >= 0.0) {
        return Err(Error::InvalidModel(format!("need dt > 0 and tmax >= 0, got {dt}, {tmax}")));
    }
    let steps = (tmax / dt).round() as usize;
    Ok((0..=steps).map(|i| i as f64 * dt).collect())
}

fn cmd_meixner(a: &MeixnerArgs, out: &Path) -> Outcome {
    let grid = time_grid(a.tmax, a.dt)?;
    let mut t = CsvTable::new(["u", "t", "K", "variance"]);
    for &u in &a.u {
        let p = MeixnerParams::new(u, a.eta)?;
        for &tt in &grid {
            t.push([fmt(u), fmt(tt), fmt(k_complexity_exact(tt, &p)), fmt(variance_exact(tt, &p))]);
        }
    }
    Ok(vec![write(out, &format!("meixner_eta{}.csv", a.eta), &t, &manifest("meixner", a))?])
}

fn load_coeffs(path: &Path) -> dsyk::Result<TridiagonalCoeffs> {
    let (_, t) = read_csv(path)?;
    let col = |name: &str| {
        t.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidModel(format!("{}: missing column {name}", path.display())))
    };
    let (ra, ia, b) = (col("re_a")?, col("im_a")?, col("b")?);
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())));
    let mut av = Vec::new();
    let mut bv = Vec::new();
    for (n, row) in t.rows.iter().enumerate() {
        av.push(Complex64::new(num(&row[ra])?, num(&row[ia])?));
        if n > 0 {
            bv.push(Complex64::new(num(&row[b])?, 0.0));
        }
    }
    TridiagonalCoeffs::new(av, bv)
}

fn cmd_evolve(a: &EvolveArgs, out: &Path) -> Outcome {
    let grid = time_grid(a.tmax, a.dt)?;
    let opts = EvolveOptions { rtol: a.dt_tol, ..EvolveOptions::default() };
    let exact = if a.coeffs.is_none() { Some(MeixnerParams::new(a.u, a.eta)?) } else { None };
    let (n_trunc, states): (usize, Vec<ChainState>) = match (&a.coeffs, &exact) {
        (Some(path), _) => {
            let c = load_coeffs(path)?;
            let n = c.n_max();
            (n, evolve_chain(&c, &grid, n, &opts)?)
        }
        (None, Some(p)) => {
            let xi = (p.u > 0.0).then(|| 1.0 / tail_decay_rate(p));
            evolve_chain_auto(|n| p.coeffs(n), &grid, xi, a.ntrunc_cap, &opts)?
        }
        (None, None) => unreachable!(),
    };
    let mut t = CsvTable::new(["t", "K", "variance", "norm", "K_exact", "n_trunc"]);
    for s in &states {
        let (k, var, z) = k_complexity_numeric(s)?;
        let ke = exact.as_ref().map_or(f64::NAN, |p| k_complexity_exact(s.t, p));
        t.push([fmt(s.t), fmt(k), fmt(var), fmt(z), fmt(ke), n_trunc.to_string()]);
    }
    let name = match &a.coeffs {
        Some(_) => format!("evolve_file_tmax{}.csv", a.tmax),
        None => format!("evolve_u{}_eta{}.csv", a.u, a.eta),
    };
    Ok(vec![write(out, &name, &t, &manifest("evolve", a))?])
}

fn replay(file: &Path, out: &Path) -> Outcome {
    let (m, _) = read_csv(file)?;
    let params = m["params"].clone();
    let bad = |e: serde_json::Error| Error::InvalidModel(format!("{}: unreadable manifest: {e}", file.display()));
    match m["subcommand"].as_str() {
        Some("finite-n-arnoldi") => cmd_finite_n_arnoldi(&serde_json::from_value(params).map_err(bad)?, out),
        Some("large-n") => cmd_large_n(&serde_json::from_value(params).map_err(bad)?, out),
        Some("moments") => cmd_moments(&serde_json::from_value(params).map_err(bad)?, out),
        Some("meixner") => cmd_meixner(&serde_json::from_value(params).map_err(bad)?, out),
        Some("evolve") => cmd_evolve(&serde_json::from_value(params).map_err(bad)?, out),
        other => Err(Error::InvalidModel(format!("{}: unknown subcommand {other:?}", file.display()))),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Resource => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    }
    let out = cli.out.as_path();
    let result = std::fs::create_dir_all(out).map_err(Error::from).and_then(|_| match &cli.command {
        Command::FiniteNArnoldi(a) => cmd_finite_n_arnoldi(a, out),
        Command::LargeN(a) => cmd_large_n(a, out),
        Command::Moments(a) => cmd_moments(a, out),
        Command::Meixner(a) => cmd_meixner(a, out),
        Command::Evolve(a) => cmd_evolve(a, out),
        Command::Replay { file } => replay(file, out),
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
