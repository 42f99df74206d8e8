//! End-to-end run: ground state, constants, reduction, verification.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::{cache_dir, load_or_solve};
use crate::config::{hex, RunConfig, Stage};
use crate::constants::{c1_c2, c_tilde, compute_constants, BubbleConstants};
use crate::error::{Error, Result};
use crate::expansion::{default_eps_grid, kernel_residual, sweep_and_fit, ExpansionFit, KernelResidual};
use crate::format::{human, machine};
use crate::ground_state::{GroundState, TailModel};
use crate::hyperbola::{DecayRates, HyperbolaPoint, Regime};
use crate::manifold::{ManifoldKind, ModelManifold, Point};
use crate::reduced_energy::{find_critical_points, optimal_t, phi, ReducedCriticalPoint};

pub const TOOL: &str = "lelab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub stage: String,
    pub name: String,
    pub value: f64,
    /// "<=" or ">=".
    pub relation: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(stage: &str, name: &str, value: f64, threshold: f64) -> Self {
        Self {
            stage: stage.into(),
            name: name.into(),
            value,
            relation: "<=".into(),
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn at_least(stage: &str, name: &str, value: f64, threshold: f64) -> Self {
        Self {
            stage: stage.into(),
            name: name.into(),
            value,
            relation: ">=".into(),
            threshold,
            pass: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaReport {
    pub point: HyperbolaPoint,
    pub p: f64,
    pub q: f64,
    pub regime: Regime,
    pub decay: DecayRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub u_at_zero: f64,
    pub v_at_zero: f64,
    pub u0_error: f64,
    pub residual: f64,
    pub r_max: f64,
    pub grid_points: usize,
    pub tail: TailModel,
    pub decay_deviation: f64,
}

impl GroundStateReport {
    pub fn of(gs: &GroundState) -> Self {
        let n = gs.normalization();
        Self {
            u_at_zero: n.u_at_zero,
            v_at_zero: n.v_at_zero,
            u0_error: gs.u0_error(),
            residual: gs.residual(),
            r_max: gs.r_max(),
            grid_points: gs.grid().len(),
            tail: *gs.tail(),
            decay_deviation: gs.tail_fit().max_relative_deviation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub constants: BubbleConstants,
    pub phi_coefficient: f64,
    pub c_tilde: f64,
    pub c1: f64,
    pub c2: f64,
    /// Largest pairwise relative gap of the three L1 evaluations.
    pub l1_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldReport {
    pub scal: f64,
    pub injectivity_radius: f64,
    pub r0: f64,
    pub rho2: f64,
    pub kappa: f64,
    pub kappa_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub critical_points: Vec<ReducedCriticalPoint>,
    /// Closed-form optimal scales C / (L3 phi) at the first point's peaks.
    pub t0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub t: Vec<f64>,
    pub peaks: Vec<Point>,
    pub r0: f64,
    pub fit: ExpansionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub header: ReportHeader,
    pub config: RunConfig,
    pub hyperbola: Option<HyperbolaReport>,
    pub ground_state: Option<GroundStateReport>,
    pub constants: Option<ConstantsReport>,
    pub manifold: Option<ManifoldReport>,
    pub reduction: Option<ReductionReport>,
    pub expansion: Option<ExpansionReport>,
    pub kernel: Option<KernelResidual>,
    pub verdicts: Vec<Verdict>,
    pub failure: Option<StageFailure>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Hex sha256 of the JSON form.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let h = &self.header;
        let _ = writeln!(s, "{} {}  config {}", h.tool, h.version, &h.config_hash[..16]);
        if let Some(r) = &self.hyperbola {
            let _ = writeln!(
                s,
                "hyperbola  p = {}  q = {}  N = {}  regime {}",
                r.point.p_exponent(),
                r.point.q_exponent(),
                r.point.n(),
                r.regime.tag
            );
        }
        if let Some(g) = &self.ground_state {
            let _ = writeln!(
                s,
                "ground state  U(0) = {} (+- {})  residual {}",
                human(g.u_at_zero),
                human(g.u0_error),
                human(g.residual)
            );
        }
        if let Some(c) = &self.constants {
            for i in 1..=7 {
                let _ = writeln!(s, "  L{i} = {}", human(c.constants.l(i)));
            }
            let _ = writeln!(
                s,
                "  phi coefficient {}  C {}  c1 {}  c2 {}",
                human(c.phi_coefficient),
                human(c.c_tilde),
                human(c.c1),
                human(c.c2)
            );
        }
        if let Some(m) = &self.manifold {
            let _ = writeln!(
                s,
                "manifold  Scal {}  kappa {} (target {})  r0 {}",
                human(m.scal),
                human(m.kappa),
                human(m.kappa_target),
                human(m.r0)
            );
        }
        if let Some(r) = &self.reduction {
            let _ = writeln!(s, "reduction  {} critical point(s)", r.critical_points.len());
            for (i, cp) in r.critical_points.iter().take(5).enumerate() {
                let ts: Vec<String> = cp.t.iter().map(|t| human(*t)).collect();
                let _ = writeln!(
                    s,
                    "  #{i} value {}  t [{}]  |grad| {}  index {}{}",
                    human(cp.value),
                    ts.join(", "),
                    human(cp.gradient_norm),
                    cp.negative_eigenvalues,
                    if cp.degenerate { "  degenerate" } else { "" }
                );
            }
            let t0: Vec<String> = r.t0.iter().map(|t| human(*t)).collect();
            let _ = writeln!(s, "  t0 [{}]", t0.join(", "));
        }
        if let Some(e) = &self.expansion {
            let f = &e.fit;
            let _ = writeln!(s, "expansion  eps in [{}, {}]", human(f.eps[f.eps.len() - 1]), human(f.eps[0]));
            for (name, got, want, err) in [
                ("a", f.a, f.a_target, f.a_rel_error()),
                ("b", f.b, f.b_target, f.b_rel_error()),
                ("c", f.c, f.c_target, f.c_rel_error()),
            ] {
                let _ = writeln!(s, "  {name} = {}  target {}  rel err {}", human(got), human(want), human(err));
            }
        }
        if let Some(k) = &self.kernel {
            let _ = writeln!(
                s,
                "kernel  mode0 {}  mode1 {}  control {}",
                human(k.mode0),
                human(k.mode1),
                human(k.control)
            );
        }
        for v in &self.verdicts {
            let _ = writeln!(
                s,
                "{} {}.{}  {} {} {}",
                if v.pass { "PASS" } else { "FAIL" },
                v.stage,
                v.name,
                human(v.value),
                v.relation,
                human(v.threshold)
            );
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "FAILED in stage {}: {}", f.stage, f.error);
        }
        let _ = writeln!(s, "overall {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Comma-separated sweep table: eps, J, and the four energy terms.
pub fn sweep_table(fit: &ExpansionFit) -> String {
    let mut s = String::from("eps,J,grad_term,h_term,p_term,q_term,quadrature_error\n");
    for ((e, j), t) in fit.eps.iter().zip(&fit.j_values).zip(&fit.terms) {
        let row = [*e, *j, t.grad_term, t.h_term, t.p_term, t.q_term, t.error].map(machine);
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

/// Comma-separated critical-point table.
pub fn critical_point_table(points: &[ReducedCriticalPoint]) -> String {
    let mut s = String::from("index,peak,t,phi,value,gradient_norm,negative_eigenvalues,degenerate,coordinates\n");
    for (i, cp) in points.iter().enumerate() {
        for (j, (t, x)) in cp.t.iter().zip(&cp.peaks).enumerate() {
            let coords: Vec<String> = x.iter().map(|c| machine(*c)).collect();
            let _ = writeln!(
                s,
                "{i},{j},{},{},{},{},{},{},{}",
                machine(*t),
                machine(cp.phi[j]),
                machine(cp.value),
                machine(cp.gradient_norm),
                cp.negative_eigenvalues,
                cp.degenerate,
                coords.join(" ")
            );
        }
    }
    s
}

/// Kappa of the geodesic-sphere area ratio with its target -Scal/(6N).
pub fn manifold_check(m: &ModelManifold) -> Result<(f64, f64)> {
    let xi = m.random_point(&mut ChaCha8Rng::seed_from_u64(0));
    let kappa = m.sphere_area_ratio_check(&xi, &m.default_area_radii())?;
    Ok((kappa, -m.scal(&xi) / (6.0 * m.dim() as f64)))
}

pub fn manifold_verdicts(m: &ModelManifold, kappa: f64, target: f64) -> Vec<Verdict> {
    match m.kind() {
        ManifoldKind::Sphere { .. } => vec![Verdict::at_most(
            "manifold",
            "kappa_rel_error",
            ((kappa - target) / target).abs(),
            1e-2,
        )],
        ManifoldKind::FlatTorus { .. } => vec![Verdict::at_most("manifold", "kappa_abs", kappa.abs(), 1e-12)],
    }
}

pub fn ground_state_verdicts(gs: &GroundState) -> Vec<Verdict> {
    let o = gs.options();
    vec![
        Verdict::at_most("ground_state", "residual", gs.residual(), o.residual_tol),
        Verdict::at_most(
            "ground_state",
            "decay_deviation",
            gs.tail_fit().max_relative_deviation(),
            o.decay_band,
        ),
    ]
}

pub fn constants_verdicts(c: &BubbleConstants) -> (f64, Vec<Verdict>) {
    let l = [c.l(1), c.l1_via_v, c.l1_via_u];
    let mut spread: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            spread = spread.max(((l[i] - l[j]) / l[i]).abs());
        }
    }
    let min_positive = (1..=5).map(|i| c.l(i)).fold(f64::INFINITY, f64::min);
    (
        spread,
        vec![
            Verdict::at_most("constants", "l1_spread", spread, 1e-4),
            Verdict::at_least("constants", "min_l1_to_l5", min_positive, f64::MIN_POSITIVE),
        ],
    )
}

pub fn expansion_verdicts(f: &ExpansionFit) -> Vec<Verdict> {
    vec![
        Verdict::at_most("expansion", "a_rel_error", f.a_rel_error(), 1e-3),
        Verdict::at_most("expansion", "b_rel_error", f.b_rel_error(), 5e-2),
        Verdict::at_most("expansion", "c_rel_error", f.c_rel_error(), 5e-2),
    ]
}

pub fn kernel_verdicts(k: &KernelResidual) -> Vec<Verdict> {
    vec![
        Verdict::at_most("kernel", "mode0", k.mode0, 1e-5),
        Verdict::at_most("kernel", "mode1", k.mode1, 1e-5),
        Verdict::at_least("kernel", "control", k.control, 1e-1),
    ]
}

/// Cache directory for a config: LELAB_CACHE_DIR or `<output_dir>/cache`.
pub fn cache_dir_for(config: &RunConfig) -> PathBuf {
    cache_dir(&Path::new(&config.output_dir).join("cache"))
}

struct Context {
    point: Option<HyperbolaPoint>,
    gs: Option<GroundState>,
    constants: Option<BubbleConstants>,
}

/// Runs the requested stages. Invalid configs are rejected up front; a
/// failing stage ends the run with its partial results and a failure marker.
pub fn execute(config: &RunConfig, cache: &Path) -> Result<RunReport> {
    config.validate()?;
    let mut report = RunReport {
        header: ReportHeader {
            tool: TOOL.into(),
            version: VERSION.into(),
            config_hash: config.hash()?,
        },
        config: config.clone(),
        hyperbola: None,
        ground_state: None,
        constants: None,
        manifold: None,
        reduction: None,
        expansion: None,
        kernel: None,
        verdicts: Vec::new(),
        failure: None,
    };
    let mut ctx = Context {
        point: None,
        gs: None,
        constants: None,
    };
    for stage in config.stage_plan() {
        if let Err(e) = run_stage(stage, config, cache, &mut ctx, &mut report) {
            report.failure = Some(StageFailure {
                stage: stage.name().into(),
                error: e.to_string(),
            });
            break;
        }
    }
    Ok(report)
}

fn missing(what: &str) -> Error {
    Error::Config(format!("{what} unavailable"))
}

fn run_stage(
    stage: Stage,
    config: &RunConfig,
    cache: &Path,
    ctx: &mut Context,
    report: &mut RunReport,
) -> Result<()> {
    let red = &config.reduction;
    match stage {
        Stage::Hyperbola => {
            let point = config.hyperbola.point()?;
            report.hyperbola = Some(HyperbolaReport {
                point,
                p: point.p(),
                q: point.q(),
                regime: point.regime(),
                decay: point.decay_rates(),
            });
            ctx.point = Some(point);
        }
        Stage::GroundState => {
            let point = ctx.point.ok_or_else(|| missing("hyperbola point"))?;
            std::fs::create_dir_all(cache).map_err(|e| Error::Io(format!("{}: {e}", cache.display())))?;
            let (gs, _) = load_or_solve(cache, &point, &config.solver)?;
            report.ground_state = Some(GroundStateReport::of(&gs));
            report.verdicts.extend(ground_state_verdicts(&gs));
            ctx.gs = Some(gs);
        }
        Stage::Constants => {
            let gs = ctx.gs.as_ref().ok_or_else(|| missing("ground state"))?;
            let c = compute_constants(gs)?;
            let (c1, c2) = c1_c2(&c, red.alpha, red.beta, c.point.p(), c.point.q(), red.k)?;
            let (spread, verdicts) = constants_verdicts(&c);
            report.constants = Some(ConstantsReport {
                phi_coefficient: c.phi_coefficient(),
                c_tilde: c_tilde(&c, red.alpha, red.beta)?,
                c1,
                c2,
                l1_spread: spread,
                constants: c.clone(),
            });
            report.verdicts.extend(verdicts);
            ctx.constants = Some(c);
        }
        Stage::Manifold => {
            let point = config.hyperbola.point()?;
            let m = config.manifold.build(point.n())?;
            let (kappa, target) = manifold_check(&m)?;
            report.manifold = Some(ManifoldReport {
                scal: m.scal(&[]),
                injectivity_radius: m.injectivity_radius(),
                r0: config.manifold.r0(&m),
                rho2: config.manifold.rho2(&m),
                kappa,
                kappa_target: target,
            });
            report.verdicts.extend(manifold_verdicts(&m, kappa, target));
        }
        Stage::Reduce => {
            let c = ctx.constants.as_ref().ok_or_else(|| missing("constants"))?;
            let m = config.manifold.build(c.point.n())?;
            let points = find_critical_points(
                &m,
                &config.potential,
                c,
                red.alpha,
                red.beta,
                red.k,
                red.rho1,
                config.manifold.rho2(&m),
                &red.search(config.seed),
            )?;
            let best = &points[0];
            let t0 = best
                .peaks
                .iter()
                .map(|x| optimal_t(c, red.alpha, red.beta, phi(&m, &config.potential, c, x)?))
                .collect::<Result<Vec<_>>>()?;
            let t_gap = best
                .t
                .iter()
                .zip(&t0)
                .map(|(t, t0)| ((t - t0) / t0).abs())
                .fold(0.0, f64::max);
            report.verdicts.push(Verdict::at_least(
                "reduce",
                "critical_points",
                points.len() as f64,
                1.0,
            ));
            report.verdicts.push(Verdict::at_most("reduce", "t_vs_closed_form", t_gap, 1e-6));
            report.reduction = Some(ReductionReport {
                critical_points: points,
                t0,
            });
        }
        Stage::Expansion => {
            let gs = ctx.gs.as_ref().ok_or_else(|| missing("ground state"))?;
            let c = ctx.constants.as_ref().ok_or_else(|| missing("constants"))?;
            let cp = report
                .reduction
                .as_ref()
                .and_then(|r| r.critical_points.first())
                .ok_or_else(|| missing("critical point"))?;
            let m = config.manifold.build(c.point.n())?;
            let r0 = config.manifold.r0(&m);
            let eps = if config.expansion.eps.is_empty() {
                default_eps_grid(&cp.t, r0)
            } else {
                config.expansion.eps.clone()
            };
            let fit = sweep_and_fit(
                &m,
                &config.potential,
                gs,
                c,
                &cp.t,
                &cp.peaks,
                r0,
                red.alpha,
                red.beta,
                &eps,
                &config.quadrature,
            )?;
            report.verdicts.extend(expansion_verdicts(&fit));
            report.expansion = Some(ExpansionReport {
                t: cp.t.clone(),
                peaks: cp.peaks.clone(),
                r0,
                fit,
            });
        }
        Stage::Kernel => {
            let gs = ctx.gs.as_ref().ok_or_else(|| missing("ground state"))?;
            let k = kernel_residual(gs, config.seed);
            report.verdicts.extend(kernel_verdicts(&k));
            report.kernel = Some(k);
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes report.json, summary.txt and the tables and plot of the stages that ran.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        let p = dir.join(name);
        write(&p, text)?;
        files.push(p);
        Ok(())
    };
    put("report.json", &report.to_json())?;
    put("report.sha256", &format!("{}\n", report.hash()))?;
    put("summary.txt", &report.summary())?;
    if let Some(c) = &report.constants {
        let mut s = String::from("constant,value,error\n");
        for i in 1..=7 {
            let _ = writeln!(s, "L{i},{},{}", machine(c.constants.l(i)), machine(c.constants.errors[i - 1]));
        }
        let _ = writeln!(s, "omega,{},0", machine(c.constants.omega));
        put("constants.csv", &s)?;
    }
    if let Some(r) = &report.reduction {
        put("critical_points.csv", &critical_point_table(&r.critical_points))?;
    }
    if let Some(e) = &report.expansion {
        put("sweep.csv", &sweep_table(&e.fit))?;
        if report.config.expansion.plot {
            put("expansion.svg", &e.fit.svg())?;
        }
    }
    Ok(files)
}

/// Validates, executes against the configured cache, and writes outputs.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let report = execute(config, &cache_dir_for(config))?;
    write_outputs(&report, Path::new(&config.output_dir))?;
    Ok(report)
}
