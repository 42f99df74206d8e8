use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lelab_core::cache::{cache_dir, load_or_solve, write_ground_state};
use lelab_core::config::{self, RunConfig, Stage};
use lelab_core::format::{human, machine};
use lelab_core::ground_state::SolverOptions;
use lelab_core::hyperbola::{Exponent, HyperbolaPoint};
use lelab_core::manifold::ModelManifold;
use lelab_core::pipeline::{self, RunReport, Verdict};
use lelab_core::Error;

#[derive(Parser)]
#[command(name = "lelab", version, about = "Bubble profiles, constants and reduced energies for critical Lane-Emden systems")]
struct Cli {
    /// Print the JSON schema of the run configuration and exit.
    #[arg(long)]
    print_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct PointArgs {
    /// Exponent p, as a fraction ("3/2") or decimal.
    #[arg(long)]
    p: String,
    /// Optional q; derived from the hyperbola when omitted.
    #[arg(long)]
    q: Option<String>,
    #[arg(long = "N")]
    n: u32,
}

impl PointArgs {
    fn point(&self) -> lelab_core::Result<HyperbolaPoint> {
        let p: Exponent = self.p.parse()?;
        match &self.q {
            Some(q) => HyperbolaPoint::new(p, q.parse()?, self.n),
            None => HyperbolaPoint::from_p(p, self.n),
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Outer radius of the profile grid.
    #[arg(long)]
    rmax: Option<f64>,
    /// Relative tolerance of the ODE stepper.
    #[arg(long)]
    tol: Option<f64>,
    /// Cache directory (LELAB_CACHE_DIR takes precedence).
    #[arg(long, default_value = "lelab-cache")]
    cache_dir: PathBuf,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(r) = self.rmax {
            o.r_max = r;
        }
        if let Some(t) = self.tol {
            o.rtol = t;
        }
        o
    }

    fn cache(&self) -> PathBuf {
        cache_dir(&self.cache_dir)
    }
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the exponent p of the configuration.
    #[arg(long)]
    p: Option<String>,
    /// Override the dimension N of the configuration.
    #[arg(long = "N")]
    n: Option<u32>,
    /// Override the number of peaks.
    #[arg(long)]
    k: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> lelab_core::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.p {
            c.hyperbola.p = p.clone();
            c.hyperbola.q = None;
        }
        if let Some(n) = self.n {
            c.hyperbola.n = n;
        }
        if let Some(k) = self.k {
            c.reduction.k = k;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sphere,
    FlatTorus,
}

#[derive(Subcommand)]
enum Command {
    /// q, regime and decay rates for a point on the critical hyperbola.
    Hyperbola {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        json: bool,
    },
    /// Solve (or load from cache) the radial ground state.
    GroundState {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also write the profile table (r, U, V, U', V') here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bubble constants L1..L7 with error estimates.
    Constants {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        json: bool,
    },
    /// Geodesic-sphere area ratio against -Scal/(6N).
    ManifoldCheck {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long = "N")]
        n: u32,
        /// Sphere radius or torus period.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Critical points of the reduced energy.
    Reduce {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        json: bool,
    },
    /// Sweep eps, fit a + b eps + c eps log eps, compare with the predicted coefficients.
    VerifyExpansion {
        #[command(flatten)]
        config: ConfigArgs,
        /// Write an SVG plot of J - a against eps.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Residuals of the linearized-kernel elements.
    KernelCheck {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the configured pipeline and write reports to the output directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Input(Error),
    Stage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidExponent(_)
            | Error::NotOnHyperbola(_)
            | Error::UnsupportedRegime(_)
            | Error::InvalidParameter(_)
            | Error::ChartViolation { .. }
            | Error::Separation(_) => Failure::Input(e),
            _ => Failure::Stage(e),
        }
    }
}

fn report_verdicts(verdicts: &[Verdict]) -> bool {
    for v in verdicts {
        eprintln!(
            "{} {}.{} {} {} {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.stage,
            v.name,
            human(v.value),
            v.relation,
            human(v.threshold)
        );
    }
    verdicts.iter().all(|v| v.pass)
}

fn csv(cells: &[String]) {
    println!("{}", cells.join(","));
}

fn json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn stage_report(cfg: &RunConfig, stage: Stage) -> Result<RunReport, Failure> {
    let mut cfg = cfg.clone();
    cfg.stages = vec![stage];
    let report = pipeline::execute(&cfg, &pipeline::cache_dir_for(&cfg))?;
    Ok(report)
}

fn finish(report: &RunReport) -> bool {
    let ok = report_verdicts(&report.verdicts);
    if let Some(f) = &report.failure {
        eprintln!("error in stage {}: {}", f.stage, f.error);
        return false;
    }
    ok
}

fn execute(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Hyperbola { point, json: as_json } => {
            let pt = point.point()?;
            let regime = pt.regime();
            let d = pt.decay_rates();
            if as_json {
                json(&serde_json::json!({
                    "point": pt, "p": pt.p(), "q": pt.q(), "regime": regime, "decay": d
                }));
            } else {
                println!("p,q,N,regime,minimum_dimension,v_rate,u_rate,u_log,dv_rate,du_rate,d2v_rate,d2u_rate");
                csv(&[
                    pt.p_exponent().to_string(),
                    pt.q_exponent().to_string(),
                    pt.n().to_string(),
                    regime.tag.to_string(),
                    regime.minimum_dimension.map_or("none".into(), |m| m.to_string()),
                    machine(d.v_rate),
                    machine(d.u_rate),
                    d.u_log_flag.to_string(),
                    machine(d.dv_rate),
                    machine(d.du_rate),
                    machine(d.d2v_rate),
                    machine(d.d2u_rate),
                ]);
            }
            Ok(true)
        }
        Command::GroundState { point, solver, out } => {
            let pt = point.point()?;
            let dir = solver.cache();
            create(&dir)?;
            let (gs, hit) = load_or_solve(&dir, &pt, &solver.options())?;
            if let Some(path) = out {
                write_ground_state(&gs, &path)?;
            }
            let n = gs.normalization();
            println!("p,q,N,U0,V0,U0_error,residual,r_max,decay_deviation");
            csv(&[
                pt.p_exponent().to_string(),
                pt.q_exponent().to_string(),
                pt.n().to_string(),
                machine(n.u_at_zero),
                machine(n.v_at_zero),
                machine(gs.u0_error()),
                machine(gs.residual()),
                machine(gs.r_max()),
                machine(gs.tail_fit().max_relative_deviation()),
            ]);
            eprintln!("{}", if hit { "loaded from cache" } else { "solved" });
            Ok(report_verdicts(&pipeline::ground_state_verdicts(&gs)))
        }
        Command::Constants { point, solver, json: as_json } => {
            let pt = point.point()?;
            let dir = solver.cache();
            create(&dir)?;
            let (gs, _) = load_or_solve(&dir, &pt, &solver.options())?;
            let c = lelab_core::constants::compute_constants(&gs)?;
            if as_json {
                json(&c);
            } else {
                let mut head: Vec<String> = (1..=7).map(|i| format!("L{i}")).collect();
                head.push("omega".into());
                head.extend((1..=7).map(|i| format!("err_L{i}")));
                println!("{}", head.join(","));
                let mut row: Vec<String> = c.values.iter().map(|v| machine(*v)).collect();
                row.push(machine(c.omega));
                row.extend(c.errors.iter().map(|v| machine(*v)));
                csv(&row);
            }
            let (_, verdicts) = pipeline::constants_verdicts(&c);
            Ok(report_verdicts(&verdicts))
        }
        Command::ManifoldCheck { kind, n, scale } => {
            let m = match kind {
                Kind::Sphere => ModelManifold::sphere(n, scale)?,
                Kind::FlatTorus => ModelManifold::cubic_torus(n, scale)?,
            };
            let (kappa, target) = pipeline::manifold_check(&m)?;
            println!("kind,N,scale,scal,injectivity_radius,kappa,kappa_target");
            csv(&[
                match kind {
                    Kind::Sphere => "sphere".into(),
                    Kind::FlatTorus => "flat_torus".into(),
                },
                n.to_string(),
                machine(scale),
                machine(m.scal(&[])),
                machine(m.injectivity_radius()),
                machine(kappa),
                machine(target),
            ]);
            Ok(report_verdicts(&pipeline::manifold_verdicts(&m, kappa, target)))
        }
        Command::Reduce { config, json: as_json } => {
            let cfg = config.load()?;
            let report = stage_report(&cfg, Stage::Reduce)?;
            if let Some(r) = &report.reduction {
                if as_json {
                    json(r);
                } else {
                    print!("{}", pipeline::critical_point_table(&r.critical_points));
                }
            }
            Ok(finish(&report))
        }
        Command::VerifyExpansion { config, svg, json: as_json } => {
            let cfg = config.load()?;
            let report = stage_report(&cfg, Stage::Expansion)?;
            if let Some(e) = &report.expansion {
                let f = &e.fit;
                if as_json {
                    json(e);
                } else {
                    print!("{}", pipeline::sweep_table(f));
                    println!();
                    println!("coefficient,fitted,predicted,relative_error");
                    for (name, got, want, err) in [
                        ("a", f.a, f.a_target, f.a_rel_error()),
                        ("b", f.b, f.b_target, f.b_rel_error()),
                        ("c", f.c, f.c_target, f.c_rel_error()),
                    ] {
                        csv(&[name.into(), machine(got), machine(want), machine(err)]);
                    }
                }
                eprintln!(
                    "condition number {}  monotone below eps {}",
                    human(f.condition_number),
                    human(f.monotone_below)
                );
                if let Some(path) = svg {
                    std::fs::write(&path, f.svg()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                }
            }
            Ok(finish(&report))
        }
        Command::KernelCheck { point, solver, seed } => {
            let pt = point.point()?;
            let dir = solver.cache();
            create(&dir)?;
            let (gs, _) = load_or_solve(&dir, &pt, &solver.options())?;
            let k = lelab_core::expansion::kernel_residual(&gs, seed);
            println!("r_lo,r_hi,mode0,mode1,control");
            csv(&[
                machine(k.window[0]),
                machine(k.window[1]),
                machine(k.mode0),
                machine(k.mode1),
                machine(k.control),
            ]);
            Ok(report_verdicts(&pipeline::kernel_verdicts(&k)))
        }
        Command::Run { config } => {
            let cfg = match config {
                Some(p) => RunConfig::from_file(&p)?,
                None => RunConfig::default(),
            };
            let report = pipeline::run(&cfg)?;
            print!("{}", report.summary());
            println!("report {}", report.hash());
            println!("written to {}", cfg.output_dir);
            Ok(report.passed())
        }
    }
}

fn create(dir: &Path) -> lelab_core::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        println!("{}", config::schema());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(2);
    };
    match execute(cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("invalid input: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

