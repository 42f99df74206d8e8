//! Glued bubbles on a model manifold, the energy J_eps evaluated term by
//! term, the eps-expansion fit, and the linearized-kernel residual check.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{c1_c2, BubbleConstants};
use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::manifold::{ModelManifold, Point};
use crate::numerics::{sphere_surface, stencil_derivative, GaussRule};
use crate::potential::{PotentialSpec, RadialPotential};
use crate::reduced_energy::psi_k;

/// Quintic smooth step: 1 on [0, r0/2], 0 beyond r0, C^2 in between.
/// Returns (chi, chi').
pub fn cutoff(r: f64, r0: f64) -> (f64, f64) {
    let half = 0.5 * r0;
    if r <= half {
        return (1.0, 0.0);
    }
    if r >= r0 {
        return (0.0, 0.0);
    }
    let x = (r - half) / half;
    let s = x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
    let ds = 30.0 * x * x * (1.0 - x) * (1.0 - x);
    ((1.0 - s).clamp(0.0, 1.0), -ds / half)
}

/// One bubble W = chi * delta^{-N/(q+1)} U(r/delta),
/// H = chi * delta^{-N/(p+1)} V(r/delta) centred at `peak`.
#[derive(Debug, Clone)]
pub struct Bubble<'a> {
    gs: &'a GroundState,
    pub peak: Point,
    pub delta: f64,
    pub r0: f64,
}

impl Bubble<'_> {
    /// (W, W', H, H') at geodesic distance r from the peak.
    pub fn eval(&self, r: f64) -> [f64; 4] {
        let (chi, dchi) = cutoff(r, self.r0);
        if chi == 0.0 {
            return [0.0; 4];
        }
        let (fu, fv) = self.gs.gauge_factors(self.delta);
        let [u, v, du, dv] = self.gs.eval(r / self.delta);
        [
            chi * fu * u,
            fu * (dchi * u + chi * du / self.delta),
            chi * fv * v,
            fv * (dchi * v + chi * dv / self.delta),
        ]
    }
}

pub fn assemble_bubble<'a>(
    m: &ModelManifold,
    gs: &'a GroundState,
    delta: f64,
    peak: &[f64],
    r0: f64,
) -> Result<Bubble<'a>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonpositiveScale(delta));
    }
    let bound = 0.5 * m.injectivity_radius();
    if !(r0 > 0.0 && r0 < bound) {
        return Err(Error::ChartViolation { r0, bound });
    }
    if m.dim() != gs.point().n() {
        return Err(Error::InvalidParameter(format!(
            "manifold dimension {} differs from ground-state dimension {}",
            m.dim(),
            gs.point().n()
        )));
    }
    Ok(Bubble {
        gs,
        peak: m.project(peak)?,
        delta,
        r0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub grad_term: f64,
    pub h_term: f64,
    pub p_term: f64,
    pub q_term: f64,
    /// Quadrature error estimate of the total.
    pub error: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.grad_term + self.h_term - self.p_term - self.q_term
    }

    fn add(&mut self, o: &EnergyBreakdown) {
        self.grad_term += o.grad_term;
        self.h_term += o.h_term;
        self.p_term += o.p_term;
        self.q_term += o.q_term;
        self.error += o.error;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureOptions {
    /// Gauss-Legendre order; the error estimate compares with order - 3.
    pub order: usize,
    /// Segments per unit of log(1 + s / 0.05) in the scaled radius s.
    pub segments_per_efold: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            order: 8,
            segments_per_efold: 4,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        if self.order < 4 || self.order > 64 || self.segments_per_efold == 0 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order {} / segments per e-fold {}",
                self.order, self.segments_per_efold
            )));
        }
        Ok(())
    }
}

const SEGMENT_SCALE: f64 = 0.05;

/// Breakpoints in s = r / delta: uniform in log(1 + s / 0.05), plus r_max
/// (where the profile switches to its tail model) and the cutoff edges.
fn breakpoints(gs: &GroundState, delta: f64, r0: f64, per_efold: usize) -> Vec<f64> {
    let s_half = 0.5 * r0 / delta;
    let s_end = r0 / delta;
    let top = (s_end / SEGMENT_SCALE).ln_1p();
    let count = (top * per_efold as f64).ceil() as usize;
    let mut b: Vec<f64> = (0..count)
        .map(|i| SEGMENT_SCALE * (i as f64 / per_efold as f64).exp_m1())
        .collect();
    b.extend([gs.r_max(), s_half, s_end]);
    b.retain(|&s| s <= s_end);
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() <= 1e-12 * c.abs());
    b
}

#[allow(clippy::too_many_arguments)]
fn bubble_energy(
    m: &ModelManifold,
    hr: &RadialPotential,
    b: &Bubble,
    eps: f64,
    alpha: f64,
    beta: f64,
    quad: &QuadratureOptions,
) -> Result<EnergyBreakdown> {
    let gs = b.gs;
    let (p, q, n) = (gs.point().p(), gs.point().q(), gs.point().dim());
    let omega = sphere_surface(gs.point().n());
    let delta = b.delta;
    let big_p = p + 1.0 - alpha * eps;
    let big_q = q + 1.0 - beta * eps;
    let ld = delta.ln();
    let pre_p = (n * alpha * eps / (p + 1.0) * ld).exp() / big_p;
    let pre_q = (n * beta * eps / (q + 1.0) * ld).exp() / big_q;
    let d2 = delta * delta;

    let integrand = |s: f64| -> Result<[f64; 4]> {
        let r = delta * s;
        let (chi, dchi) = cutoff(r, b.r0);
        if chi == 0.0 {
            return Ok([0.0; 4]);
        }
        let [u, v, du, dv] = gs.eval(s);
        let w = m.volume_density(r)? * s.powf(n - 1.0);
        let gu = chi * du + delta * dchi * u;
        let gv = chi * dv + delta * dchi * v;
        Ok([
            gu * gv * w,
            d2 * hr.at(r) * chi * chi * u * v * w,
            pre_p * (chi * v).powf(big_p) * w,
            pre_q * (chi * u).powf(big_q) * w,
        ])
    };

    let hi = GaussRule::new(quad.order);
    let lo = GaussRule::new(quad.order - 3);
    let mut acc_hi = [0.0; 4];
    let mut acc_lo = [0.0; 4];
    for seg in breakpoints(gs, delta, b.r0, quad.segments_per_efold).windows(2) {
        for (rule, acc) in [(&hi, &mut acc_hi), (&lo, &mut acc_lo)] {
            let (nodes, weights) = rule.nodes_weights();
            let half = 0.5 * (seg[1] - seg[0]);
            let mid = 0.5 * (seg[1] + seg[0]);
            for (x, wt) in nodes.iter().zip(weights) {
                let f = integrand(mid + half * x)?;
                for k in 0..4 {
                    acc[k] += wt * half * f[k];
                }
            }
        }
    }
    let e: f64 = (0..4).map(|k| omega * (acc_hi[k] - acc_lo[k]).abs()).sum();
    Ok(EnergyBreakdown {
        grad_term: omega * acc_hi[0],
        h_term: omega * acc_hi[1],
        p_term: omega * acc_hi[2],
        q_term: omega * acc_hi[3],
        error: e,
    })
}

fn check_supports(m: &ModelManifold, bubbles: &[Bubble]) -> Result<()> {
    for i in 0..bubbles.len() {
        for j in i + 1..bubbles.len() {
            let d = m.geodesic_distance(&bubbles[i].peak, &bubbles[j].peak);
            let twice = bubbles[i].r0 + bubbles[j].r0;
            if d < twice {
                return Err(Error::OverlappingSupports {
                    separation: d,
                    twice_r0: twice,
                });
            }
        }
    }
    Ok(())
}

/// Per-peak energy breakdowns; supports are disjoint so J is their sum.
#[allow(clippy::too_many_arguments)]
pub fn energy_per_peak(
    m: &ModelManifold,
    h: &PotentialSpec,
    bubbles: &[Bubble],
    eps: f64,
    alpha: f64,
    beta: f64,
    quad: &QuadratureOptions,
) -> Result<Vec<EnergyBreakdown>> {
    quad.validate()?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}")));
    }
    check_supports(m, bubbles)?;
    bubbles
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let hr = h.radial_about(m, &b.peak, b.r0, j)?;
            bubble_energy(m, &hr, b, eps, alpha, beta, quad)
        })
        .collect()
}

pub fn energy_terms(
    m: &ModelManifold,
    h: &PotentialSpec,
    bubbles: &[Bubble],
    eps: f64,
    alpha: f64,
    beta: f64,
    quad: &QuadratureOptions,
) -> Result<EnergyBreakdown> {
    let mut total = EnergyBreakdown::default();
    for e in energy_per_peak(m, h, bubbles, eps, alpha, beta, quad)? {
        total.add(&e);
    }
    Ok(total)
}

/// Least squares y ~ X beta with the condition number of the
/// column-normalized design.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64, f64)> {
    let mut xn = x.clone();
    let norms: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).norm()).collect();
    for (j, nj) in norms.iter().enumerate() {
        if *nj == 0.0 {
            return Err(Error::IllConditionedFit(f64::INFINITY));
        }
        xn.column_mut(j).scale_mut(1.0 / nj);
    }
    let svd = xn.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !(cond <= 1e10) {
        return Err(Error::IllConditionedFit(cond));
    }
    let coef_n = svd
        .solve(y, 0.0)
        .map_err(|e| Error::NoConvergence(e.to_string()))?;
    let coef = DVector::from_iterator(
        coef_n.len(),
        coef_n.iter().zip(&norms).map(|(c, nj)| c / nj),
    );
    let resid = (x * &coef - y).norm();
    Ok((coef, cond, resid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub deltas: Vec<f64>,
    pub terms: Vec<EnergyBreakdown>,
    /// Fits c0 + c2 delta^2 + c4 delta^4 of grad_term and h_term.
    pub grad_fit: [f64; 3],
    pub h_fit: [f64; 3],
}

/// Single-bubble energy terms at eps = 0 over a range of delta.
#[allow(clippy::too_many_arguments)]
pub fn delta_sweep(
    m: &ModelManifold,
    h: &PotentialSpec,
    gs: &GroundState,
    peak: &[f64],
    r0: f64,
    deltas: &[f64],
    quad: &QuadratureOptions,
) -> Result<DeltaSweep> {
    if deltas.len() < 4 {
        return Err(Error::InvalidParameter("delta sweep needs at least 4 points".into()));
    }
    let terms = deltas
        .par_iter()
        .map(|&d| {
            let b = assemble_bubble(m, gs, d, peak, r0)?;
            energy_terms(m, h, std::slice::from_ref(&b), 0.0, 1.0, 1.0, quad)
        })
        .collect::<Result<Vec<_>>>()?;
    let x = DMatrix::from_fn(deltas.len(), 3, |i, j| deltas[i].powi(2 * j as i32));
    let fit = |f: &dyn Fn(&EnergyBreakdown) -> f64| -> Result<[f64; 3]> {
        let y = DVector::from_iterator(terms.len(), terms.iter().map(f));
        let (c, _, _) = least_squares(&x, &y)?;
        Ok([c[0], c[1], c[2]])
    };
    Ok(DeltaSweep {
        deltas: deltas.to_vec(),
        grad_fit: fit(&|e| e.grad_term)?,
        h_fit: fit(&|e| e.h_term)?,
        terms,
    })
}

/// Geometric eps grid from `hi` down to `lo`.
pub fn geometric_grid(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    let r = (lo / hi).powf(1.0 / (points - 1) as f64);
    (0..points).map(|i| hi * r.powi(i as i32)).collect()
}

/// Largest delta / r0 the default eps grid allows. The glued bubble misses
/// the profile beyond r0 / (2 delta), an error of order (delta / r0)^(N-2)
/// with a large constant that otherwise swamps the eps log eps slope.
pub const MAX_DELTA_OVER_R0: f64 = 1e-3;

/// Default eps grid: 8 geometric points over two decades, starting at
/// 1e-5 or lower so that every sqrt(eps t_j) stays below 1e-3 r0.
pub fn default_eps_grid(ts: &[f64], r0: f64) -> Vec<f64> {
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let mut hi = 1e-5;
    if t_max > 0.0 {
        hi = f64::min(hi, (MAX_DELTA_OVER_R0 * r0).powi(2) / t_max);
    }
    geometric_grid(hi, 1e-2 * hi, 8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub eps: Vec<f64>,
    pub j_values: Vec<f64>,
    pub terms: Vec<EnergyBreakdown>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// 2 k L1 / N, c1 + Psi_k(t, xi), -c2.
    pub a_target: f64,
    pub b_target: f64,
    pub c_target: f64,
    pub residual_norm: f64,
    pub condition_number: f64,
    /// The fitted model is increasing on (0, eps) for eps below this.
    pub monotone_below: f64,
}

impl ExpansionFit {
    pub fn a_rel_error(&self) -> f64 {
        ((self.a - self.a_target) / self.a).abs()
    }

    pub fn b_rel_error(&self) -> f64 {
        ((self.b - self.b_target) / self.b).abs()
    }

    pub fn c_rel_error(&self) -> f64 {
        ((self.c - self.c_target) / self.c_target).abs()
    }

    pub fn model(&self, eps: f64) -> f64 {
        self.a + self.b * eps + self.c * eps * eps.ln()
    }

    /// SVG plot of J - a against eps (log axis) with the fitted curve.
    pub fn svg(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 60.0);
        let ys: Vec<f64> = self.j_values.iter().map(|j| j - self.a).collect();
        let lx: Vec<f64> = self.eps.iter().map(|e| e.log10()).collect();
        let (x0, x1) = lx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let curve: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let l = x0 + (x1 - x0) * i as f64 / 100.0;
                let e = 10f64.powf(l);
                (l, self.model(e) - self.a)
            })
            .collect();
        let (y0, y1) = ys
            .iter()
            .chain(curve.iter().map(|(_, y)| y))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let span_x = (x1 - x0).max(1e-12);
        let span_y = (y1 - y0).max(1e-300);
        let px = |l: f64| pad + (l - x0) / span_x * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y - y0) / span_y * (h - 2.0 * pad);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#,
            h - pad,
            w - pad,
            h - pad,
            h - pad
        );
        let path: Vec<String> = curve.iter().map(|(l, y)| format!("{:.2},{:.2}", px(*l), py(*y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
        for (l, y) in lx.iter().zip(&ys) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="crimson"/>"#, px(*l), py(*y));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">log10(eps)</text>"#, w / 2.0, h - 15.0);
        let _ = writeln!(s, r#"<text x="15" y="{}" font-size="14" transform="rotate(-90 15 {})" text-anchor="middle">J - a</text>"#, h / 2.0, h / 2.0);
        let _ = writeln!(s, r#"<text x="{pad}" y="{}" font-size="11">{:.3}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{:.3}</text>"#, h - pad + 15.0, x0, w - pad, h - pad + 15.0, x1);
        s.push_str("</svg>\n");
        s
    }
}

pub(crate) fn check_eps_grid(eps: &[f64]) -> Result<()> {
    if eps.len() < 6 {
        return Err(Error::InvalidParameter(format!(
            "eps grid has {} points, at least 6 needed",
            eps.len()
        )));
    }
    if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || !eps.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "eps grid must be strictly decreasing inside (0, 1)".into(),
        ));
    }
    if eps[0] / eps[eps.len() - 1] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter("eps grid must span at least 2 decades".into()));
    }
    Ok(())
}

/// Evaluates J_eps on the configuration (t, xi) with delta_j = sqrt(eps t_j)
/// over `eps` and fits a + b eps + c eps log eps.
#[allow(clippy::too_many_arguments)]
pub fn sweep_and_fit(
    m: &ModelManifold,
    h: &PotentialSpec,
    gs: &GroundState,
    c: &BubbleConstants,
    ts: &[f64],
    xis: &[Point],
    r0: f64,
    alpha: f64,
    beta: f64,
    eps: &[f64],
    quad: &QuadratureOptions,
) -> Result<ExpansionFit> {
    check_eps_grid(eps)?;
    if ts.len() != xis.len() || ts.is_empty() {
        return Err(Error::InvalidParameter("one scale per peak required".into()));
    }
    if c.point != *gs.point() || !c.normalization.matches(&gs.normalization()) {
        return Err(Error::NormalizationMismatch(
            "constants were computed from a different ground state".into(),
        ));
    }
    let k = ts.len();
    let (p, q) = (gs.point().p(), gs.point().q());
    let (c1, c2) = c1_c2(c, alpha, beta, p, q, k)?;
    let psi = psi_k(m, h, c, alpha, beta, ts, xis)?;

    let terms = eps
        .par_iter()
        .map(|&e| {
            let bubbles = ts
                .iter()
                .zip(xis)
                .map(|(&t, xi)| assemble_bubble(m, gs, (e * t).sqrt(), xi, r0))
                .collect::<Result<Vec<_>>>()?;
            energy_terms(m, h, &bubbles, e, alpha, beta, quad)
        })
        .collect::<Result<Vec<_>>>()?;
    let j_values: Vec<f64> = terms.iter().map(|t| t.total()).collect();

    let x = DMatrix::from_fn(eps.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => eps[i],
        _ => eps[i] * eps[i].ln(),
    });
    let y = DVector::from_column_slice(&j_values);
    let (coef, cond, resid) = least_squares(&x, &y)?;
    let (a, b, cc) = (coef[0], coef[1], coef[2]);
    // d/de (b e + c e log e) = b + c (log e + 1) > 0 for e < exp(-b/c - 1) when c < 0
    let monotone_below = if cc < 0.0 {
        (-b / cc - 1.0).exp()
    } else {
        0.0
    };
    Ok(ExpansionFit {
        eps: eps.to_vec(),
        j_values,
        terms,
        a,
        b,
        c: cc,
        a_target: 2.0 * k as f64 * c.l(1) / gs.point().dim(),
        b_target: c1 + psi,
        c_target: -c2,
        residual_norm: resid,
        condition_number: cond,
        monotone_below,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelResidual {
    pub window: [f64; 2],
    /// Dilation pair (r U' + N U/(q+1), r V' + N V/(p+1)).
    pub mode0: f64,
    /// Translation pair (U', V').
    pub mode1: f64,
    /// A random smooth pair, which must fail.
    pub control: f64,
}

/// Max relative residual of psi'' + (N-1)/r psi' - l/r^2 psi + p V^{p-1} phi
/// and its partner, with derivatives by 7-point differences on the grid.
fn linearized_residual(
    gs: &GroundState,
    psi: &[f64],
    phi: &[f64],
    ell: f64,
    lo: usize,
    hi: usize,
) -> f64 {
    let (p, q, n) = (gs.point().p(), gs.point().q(), gs.point().dim());
    let r = gs.grid();
    let mut worst: f64 = 0.0;
    for i in lo..hi {
        let ri = r[i];
        let (u, v) = (gs.u()[i], gs.v()[i]);
        for (f, g, pot) in [
            (psi, phi, p * v.powf(p - 1.0)),
            (phi, psi, q * u.powf(q - 1.0)),
        ] {
            let d1 = stencil_derivative(r, f, i, 3, 1);
            let d2 = stencil_derivative(r, f, i, 3, 2);
            let terms = [d2, (n - 1.0) / ri * d1, -ell / (ri * ri) * f[i], pot * g[i]];
            let sum: f64 = terms.iter().sum();
            let mag: f64 = terms.iter().map(|t| t.abs()).sum();
            worst = worst.max(sum.abs() / mag);
        }
    }
    worst
}

/// Residuals of the kernel elements of the linearized system on
/// r in [grid[3], 0.8 r_max].
pub fn kernel_residual(gs: &GroundState, seed: u64) -> KernelResidual {
    let (p, q, n) = (gs.point().p(), gs.point().q(), gs.point().dim());
    let r = gs.grid();
    let lo = 3;
    let hi = r.partition_point(|&x| x <= 0.8 * gs.r_max());
    let psi0: Vec<f64> = (0..r.len()).map(|i| r[i] * gs.du()[i] + n * gs.u()[i] / (q + 1.0)).collect();
    let phi0: Vec<f64> = (0..r.len()).map(|i| r[i] * gs.dv()[i] + n * gs.v()[i] / (p + 1.0)).collect();
    let mode0 = linearized_residual(gs, &psi0, &phi0, 0.0, lo, hi);
    let mode1 = linearized_residual(gs, gs.du(), gs.dv(), n - 1.0, lo, hi);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut smooth = || {
        let a = rng.random_range(0.5..2.0);
        let w = rng.random_range(0.5..3.0);
        let k = rng.random_range(0.2..2.0);
        move |x: f64| a * (-(x / w).powi(2)).exp() * (k * x).cos() + a / (1.0 + x * x)
    };
    let (f, g) = (smooth(), smooth());
    let cpsi: Vec<f64> = r.iter().map(|&x| f(x)).collect();
    let cphi: Vec<f64> = r.iter().map(|&x| g(x)).collect();
    let control = linearized_residual(gs, &cpsi, &cphi, 0.0, lo, hi);
    KernelResidual {
        window: [r[lo], r[hi - 1]],
        mode0,
        mode1,
        control,
    }
}
