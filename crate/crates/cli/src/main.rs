use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gwas_gls::datagen::{compare_results, gen_dataset, oracle_solve_all, GenSpec};
use gwas_gls::distgrid::{
    first_cause, run_dist_inproc, run_dist_rank, DistConfig, SocketTransport,
};
use gwas_gls::pipeline::{
    mem_budget_from_env, run_incore, run_ooc, DEFAULT_BLOCK_SIZE, DEFAULT_MEM_BUDGET,
};
use gwas_gls::{DatasetPaths, GlsError, PipelineConfig, RunSummary};

/// How long socket ranks wait for each other to come up.
const RENDEZVOUS_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Parser)]
#[command(
    name = "gwas-gls",
    version,
    about = "Per-SNP generalized least squares for association studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Solve every SNP and write a result file; prints a one-line summary.
    Solve(SolveArgs),
    /// Compare two result files on betas.
    Verify(VerifyArgs),
    /// Run a parameter sweep and write one summary record per run.
    Bench(BenchArgs),
    /// One rank of a socket-transport run.
    #[command(hide = true)]
    Worker(WorkerArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    p: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    maf_lo: f64,
    #[arg(long, default_value_t = 0.5)]
    maf_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Incore,
    Ooc,
    Dist,
    /// SNP-by-SNP reference solve; small inputs only.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TransportArg {
    Inproc,
    Socket,
}

#[derive(Args, Clone)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "ooc")]
    mode: ModeArg,
    /// SNPs per block. Defaults to 5000 for ooc and 256·np for dist.
    #[arg(long)]
    block_size: Option<usize>,
    /// Threads for the per-SNP loop (incore and ooc).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 1)]
    np: usize,
    #[arg(long, value_enum, default_value = "inproc")]
    transport: TransportArg,
    /// Also store the packed inverse of each SNP's normal-equations matrix.
    #[arg(long)]
    emit_sinv: bool,
}

#[derive(Args, Clone)]
struct InputArgs {
    #[arg(long)]
    cov: PathBuf,
    #[arg(long)]
    covariates: PathBuf,
    #[arg(long)]
    pheno: PathBuf,
    #[arg(long)]
    geno: PathBuf,
}

impl InputArgs {
    fn paths(&self) -> DatasetPaths {
        DatasetPaths {
            covariance: self.cov.clone(),
            covariates: self.covariates.clone(),
            phenotype: self.pheno.clone(),
            genotypes: self.geno.clone(),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    M,
    N,
    Np,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    sweep: SweepArg,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    #[arg(long)]
    report: PathBuf,
    /// Population size when not swept.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// SNP count when not swept.
    #[arg(long, default_value_t = 4096)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    p: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    engine: EngineArgs,
    /// Where generated datasets and results go; a temporary directory if unset.
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

#[derive(Args)]
struct WorkerArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    np: usize,
    #[arg(long)]
    rendezvous: PathBuf,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    emit_sinv: bool,
}

/// Exit status and error line for a failure.
fn exit_code(e: &GlsError) -> u8 {
    match e {
        GlsError::Config(_) => 2,
        e if e.is_numerical() => 4,
        _ => 3,
    }
}

fn report_error(e: &GlsError) -> ExitCode {
    let code = exit_code(e);
    let msg = e.to_string().replace(['\n', '\r'], " ");
    eprintln!("error: code={code} kind={} msg={msg}", e.kind());
    ExitCode::from(code)
}

fn mem_budget() -> gwas_gls::Result<u64> {
    Ok(mem_budget_from_env()?.unwrap_or(DEFAULT_MEM_BUDGET))
}

fn dist_config(engine: &EngineArgs, budget: u64) -> DistConfig {
    DistConfig {
        block_size: engine.block_size,
        emit_s_inv: engine.emit_sinv,
        mem_budget: budget,
        ..DistConfig::new(engine.np)
    }
}

fn run_engine(
    paths: &DatasetPaths,
    out: &Path,
    engine: &EngineArgs,
) -> gwas_gls::Result<RunSummary> {
    let budget = mem_budget()?;
    let pipeline = PipelineConfig {
        block_size: engine.block_size.unwrap_or(DEFAULT_BLOCK_SIZE),
        threads: engine.threads,
        emit_s_inv: engine.emit_sinv,
        mem_budget: budget,
    };
    if engine.threads == 0 {
        return Err(GlsError::Config("--threads must be at least 1".into()));
    }
    if engine.mode != ModeArg::Dist && engine.np != 1 {
        return Err(GlsError::Config("--np applies to --mode dist only".into()));
    }
    match engine.mode {
        ModeArg::Incore => run_incore(paths, out, &pipeline),
        ModeArg::Ooc => run_ooc(paths, out, &pipeline),
        ModeArg::Oracle => oracle_solve_all(paths, out),
        ModeArg::Dist => {
            let cfg = dist_config(engine, budget);
            match engine.transport {
                TransportArg::Inproc => run_dist_inproc(paths, out, &cfg),
                TransportArg::Socket => run_dist_socket(paths, out, &cfg),
            }
        }
    }
}

/// Rank 0 runs in this process; ranks 1.. are child processes of this binary.
fn run_dist_socket(
    paths: &DatasetPaths,
    out: &Path,
    cfg: &DistConfig,
) -> gwas_gls::Result<RunSummary> {
    cfg.m_blk()?;
    let rendezvous = tempfile::Builder::new().prefix("gwas-gls-").tempdir()?;
    let exe = std::env::current_exe()?;
    let mut children: Vec<Child> = Vec::new();
    for rank in 1..cfg.np {
        let mut cmd = Command::new(&exe);
        cmd.arg("worker")
            .arg("--cov")
            .arg(&paths.covariance)
            .arg("--covariates")
            .arg(&paths.covariates)
            .arg("--pheno")
            .arg(&paths.phenotype)
            .arg("--geno")
            .arg(&paths.genotypes)
            .arg("--out")
            .arg(out)
            .arg("--rank")
            .arg(rank.to_string())
            .arg("--np")
            .arg(cfg.np.to_string())
            .arg("--rendezvous")
            .arg(rendezvous.path());
        if let Some(b) = cfg.block_size {
            cmd.arg("--block-size").arg(b.to_string());
        }
        if cfg.emit_s_inv {
            cmd.arg("--emit-sinv");
        }
        match cmd.spawn() {
            Ok(child) => children.push(child),
            Err(e) => {
                for mut c in children {
                    let _ = c.kill();
                    let _ = c.wait();
                }
                return Err(e.into());
            }
        }
    }
    let own = SocketTransport::connect(0, cfg.np, rendezvous.path(), RENDEZVOUS_TIMEOUT)
        .and_then(|t| run_dist_rank(paths, out, cfg, &t));
    let mut outcomes = vec![own];
    for (i, mut child) in children.into_iter().enumerate() {
        let status = child.wait()?;
        outcomes.push(if status.success() {
            Ok(RunSummary::new(gwas_gls::Mode::Dist))
        } else {
            Err(GlsError::TransportFailure {
                rank: i + 1,
                reason: format!("worker exited with {status}"),
            })
        });
    }
    first_cause(outcomes)
}

fn run_worker(args: &WorkerArgs) -> gwas_gls::Result<()> {
    let cfg = DistConfig {
        block_size: args.block_size,
        emit_s_inv: args.emit_sinv,
        mem_budget: mem_budget()?,
        ..DistConfig::new(args.np)
    };
    let t = SocketTransport::connect(args.rank, args.np, &args.rendezvous, RENDEZVOUS_TIMEOUT)?;
    run_dist_rank(&args.inputs.paths(), &args.out, &cfg, &t).map(|_| ())
}

fn bench(args: &BenchArgs) -> gwas_gls::Result<usize> {
    let scratch;
    let work = match &args.work_dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            d.clone()
        }
        None => {
            scratch = tempfile::Builder::new()
                .prefix("gwas-gls-bench-")
                .tempdir()?;
            scratch.path().to_path_buf()
        }
    };
    let mut report = File::create(&args.report)?;
    for &v in &args.values {
        let (n, m, np) = match args.sweep {
            SweepArg::M => (args.n, v, args.engine.np),
            SweepArg::N => (v, args.m, args.engine.np),
            SweepArg::Np => (args.n, args.m, v),
        };
        let data = work.join(format!("data-n{n}-m{m}-p{}-s{}", args.p, args.seed));
        if !data.join("genotypes.bin").exists() {
            gen_dataset(&GenSpec::new(n, m, args.p, args.seed), &data)?;
        }
        let mut engine = args.engine.clone();
        engine.np = np;
        if args.sweep == SweepArg::Np {
            engine.mode = ModeArg::Dist;
        }
        let out = work.join(format!("results-{v}.bin"));
        let summary = run_engine(&DatasetPaths::in_dir(&data), &out, &engine)?;
        writeln!(report, "{summary}")?;
        println!("{summary}");
    }
    report.flush()?;
    Ok(args.values.len())
}

fn run(cli: Cli) -> Result<ExitCode, GlsError> {
    match cli.command {
        Cmd::Gen(a) => {
            let spec = GenSpec {
                maf_range: (a.maf_lo, a.maf_hi),
                delta: a.delta,
                ..GenSpec::new(a.n, a.m, a.p, a.seed)
            };
            let report = gen_dataset(&spec, &a.out)?;
            let planted: Vec<String> = report.planted.iter().map(|(i, _)| i.to_string()).collect();
            println!(
                "dir={} n={} m={} p={} seed={} planted={}",
                a.out.display(),
                a.n,
                a.m,
                a.p,
                a.seed,
                planted.join(",")
            );
        }
        Cmd::Solve(a) => {
            let summary = run_engine(&a.inputs.paths(), &a.out, &a.engine)?;
            println!("{summary}");
        }
        Cmd::Verify(a) => {
            let r = compare_results(&a.a, &a.b, a.tol)?;
            println!(
                "max_rel_diff={:e} worst_snp={} status_mismatches={} compared={} tol={:e} pass={}",
                r.max_rel_diff,
                r.worst_snp.map_or("none".to_string(), |i| i.to_string()),
                r.status_mismatches,
                r.compared,
                r.tol,
                r.passed() as u8
            );
            if !r.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Bench(a) => {
            bench(&a)?;
        }
        Cmd::Worker(a) => run_worker(&a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: code=2 kind=usage msg={msg}: {first}");
            return ExitCode::from(2);
        }
    };
    run(cli).unwrap_or_else(|e| report_error(&e))
}
