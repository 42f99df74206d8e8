//! The reduced energy Psi_k(t, xi) = sum_j [L3 phi(xi_j) t_j - C log t_j],
//! its closed-form optimal scales, and a multi-start quasi-Newton search for
//! its critical points.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{c_tilde, BubbleConstants};
use crate::error::{Error, Result};
use crate::manifold::{ModelManifold, Point};
use crate::potential::PotentialSpec;

fn check_dims(m: &ModelManifold, c: &BubbleConstants) -> Result<()> {
    if m.dim() != c.point.n() {
        return Err(Error::InvalidParameter(format!(
            "manifold dimension {} differs from constants dimension {}",
            m.dim(),
            c.point.n()
        )));
    }
    Ok(())
}

/// phi(xi) = h(xi) - phi_coefficient * Scal(xi).
pub fn phi(m: &ModelManifold, h: &PotentialSpec, c: &BubbleConstants, xi: &[f64]) -> Result<f64> {
    check_dims(m, c)?;
    Ok(h.value(m, xi) - c.phi_coefficient() * m.scal(xi))
}

/// Psi_k at (t, xi); the peak count is `ts.len()`.
pub fn psi_k(
    m: &ModelManifold,
    h: &PotentialSpec,
    c: &BubbleConstants,
    alpha: f64,
    beta: f64,
    ts: &[f64],
    xis: &[Point],
) -> Result<f64> {
    Ok(psi_terms(m, h, c, alpha, beta, ts, xis)?.iter().sum())
}

/// The per-peak summands of Psi_k.
pub fn psi_terms(
    m: &ModelManifold,
    h: &PotentialSpec,
    c: &BubbleConstants,
    alpha: f64,
    beta: f64,
    ts: &[f64],
    xis: &[Point],
) -> Result<Vec<f64>> {
    if ts.len() != xis.len() || ts.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} scales for {} peaks",
            ts.len(),
            xis.len()
        )));
    }
    let ct = c_tilde(c, alpha, beta)?;
    ts.iter()
        .zip(xis)
        .map(|(&t, xi)| {
            if !(t > 0.0) {
                return Err(Error::NonpositiveScale(t));
            }
            Ok(c.l(3) * phi(m, h, c, xi)? * t - ct * t.ln())
        })
        .collect()
}

/// Gradient of Psi_k: d/dt_j, and d/dz_j in the normal chart at xi_j
/// spanned by `m.frame(xi_j)`.
pub fn psi_gradient(
    m: &ModelManifold,
    h: &PotentialSpec,
    c: &BubbleConstants,
    alpha: f64,
    beta: f64,
    ts: &[f64],
    xis: &[Point],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let ct = c_tilde(c, alpha, beta)?;
    let mut dt = Vec::with_capacity(ts.len());
    let mut dz = Vec::with_capacity(ts.len());
    for (&t, xi) in ts.iter().zip(xis) {
        if !(t > 0.0) {
            return Err(Error::NonpositiveScale(t));
        }
        dt.push(c.l(3) * phi(m, h, c, xi)? - ct / t);
        let g = h.gradient(m, xi, &m.frame(xi));
        dz.push(g.iter().map(|x| t * c.l(3) * x).collect());
    }
    Ok((dt, dz))
}

/// Minimizer C/(L3 phi) of -C log t + L3 phi t.
pub fn optimal_t(c: &BubbleConstants, alpha: f64, beta: f64, phi_value: f64) -> Result<f64> {
    if !(phi_value > 0.0) {
        return Err(Error::NonpositivePhi(phi_value));
    }
    Ok(c_tilde(c, alpha, beta)? / (c.l(3) * phi_value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Convergence threshold on the gradient of Psi_k / C.
    pub gtol: f64,
    /// Hessian eigenvalues below this fraction of the largest are zero.
    pub degeneracy_tol: f64,
    /// Peaks closer than this fraction of the length scale are the same.
    pub dedup_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            seed: 0,
            max_iter: 400,
            gtol: 1e-10,
            degeneracy_tol: 1e-6,
            dedup_tol: 1e-6,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter("starts and max_iter must be positive".into()));
        }
        if !(self.gtol > 0.0 && self.degeneracy_tol > 0.0 && self.dedup_tol > 0.0) {
            return Err(Error::InvalidParameter("search tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedCriticalPoint {
    pub t: Vec<f64>,
    pub peaks: Vec<Point>,
    pub value: f64,
    pub phi: Vec<f64>,
    /// Norm of grad Psi_k / C in (t, chart) coordinates.
    pub gradient_norm: f64,
    pub hessian_min_abs: f64,
    pub hessian_max_abs: f64,
    pub negative_eigenvalues: usize,
    pub zero_eigenvalues: usize,
    pub degenerate: bool,
}

struct Problem<'a> {
    m: &'a ModelManifold,
    h: &'a PotentialSpec,
    l3: f64,
    coef: f64,
    ct: f64,
    rho2: f64,
}

impl Problem<'_> {
    fn phi(&self, x: &[f64]) -> f64 {
        self.h.value(self.m, x) - self.coef * self.m.scal(x)
    }

    /// Psi_k / C at log-scales s.
    fn value(&self, s: &[f64], xs: &[Point]) -> f64 {
        s.iter()
            .zip(xs)
            .map(|(&sj, x)| self.l3 * self.phi(x) * sj.exp() / self.ct - sj)
            .sum()
    }

    /// Gradient of Psi_k / C in (s_j, z_j) blocks of length 1 + N.
    fn gradient(&self, s: &[f64], xs: &[Point], frames: &[Vec<Vec<f64>>]) -> DVector<f64> {
        let d = self.m.dim() as usize;
        let mut g = DVector::zeros(s.len() * (d + 1));
        for j in 0..s.len() {
            let t = s[j].exp();
            let b = j * (d + 1);
            g[b] = self.l3 * self.phi(&xs[j]) * t / self.ct - 1.0;
            let gh = self.h.gradient(self.m, &xs[j], &frames[j]);
            for i in 0..d {
                g[b + 1 + i] = t * self.l3 * gh[i] / self.ct;
            }
        }
        g
    }

    fn separated(&self, xs: &[Point]) -> bool {
        (0..xs.len()).all(|i| {
            (i + 1..xs.len()).all(|j| self.m.geodesic_distance(&xs[i], &xs[j]) >= self.rho2)
        })
    }

    /// Quasi-Newton descent with the chart re-centred at every iterate
    /// and frames carried along by parallel transport.
    fn descend(&self, mut s: Vec<f64>, mut xs: Vec<Point>, opts: &SearchOptions) -> Option<(Vec<f64>, Vec<Point>)> {
        let d = self.m.dim() as usize;
        let k = s.len();
        let dim = k * (d + 1);
        let mut frames: Vec<Vec<Vec<f64>>> = xs.iter().map(|x| self.m.frame(x)).collect();
        let mut hinv = DMatrix::<f64>::identity(dim, dim);
        let mut g = self.gradient(&s, &xs, &frames);
        let mut f = self.value(&s, &xs);
        let max_move = 0.25 * self.m.injectivity_radius();
        for _ in 0..opts.max_iter {
            if g.norm() < opts.gtol {
                return Some((s, xs));
            }
            let mut dir = -(&hinv * &g);
            if dir.dot(&g) >= 0.0 {
                hinv = DMatrix::identity(dim, dim);
                dir = -g.clone();
            }
            // Cap chart steps and log-scale steps.
            let mut cap: f64 = 1.0;
            for j in 0..k {
                let b = j * (d + 1);
                cap = cap.min(2.0 / dir[b].abs().max(1e-300));
                let zn = dir.rows(b + 1, d).norm();
                cap = cap.min(max_move / zn.max(1e-300));
            }
            let mut step = cap;
            let mut accepted = None;
            for _ in 0..60 {
                let trial = self.advance(&s, &xs, &frames, &dir, step);
                if let Some((s2, xs2, fr2)) = trial {
                    if self.separated(&xs2) {
                        let f2 = self.value(&s2, &xs2);
                        if f2.is_finite() && f2 <= f + 1e-4 * step * dir.dot(&g) {
                            accepted = Some((s2, xs2, fr2, f2));
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            let Some((s2, xs2, fr2, f2)) = accepted else {
                return (g.norm() < 1e3 * opts.gtol).then_some((s, xs));
            };
            let g2 = self.gradient(&s2, &xs2, &fr2);
            let sk = &dir * step;
            let yk = &g2 - &g;
            let sy = sk.dot(&yk);
            if sy > 1e-300 {
                let rho = 1.0 / sy;
                let eye = DMatrix::<f64>::identity(dim, dim);
                let a = &eye - rho * &sk * yk.transpose();
                let bm = &eye - rho * &yk * sk.transpose();
                hinv = &a * &hinv * &bm + rho * &sk * sk.transpose();
            }
            s = s2;
            xs = xs2;
            frames = fr2;
            g = g2;
            f = f2;
            if s.iter().any(|v| v.abs() > 60.0) {
                return None;
            }
        }
        (g.norm() < opts.gtol).then_some((s, xs))
    }

    #[allow(clippy::type_complexity)]
    fn advance(
        &self,
        s: &[f64],
        xs: &[Point],
        frames: &[Vec<Vec<f64>>],
        dir: &DVector<f64>,
        step: f64,
    ) -> Option<(Vec<f64>, Vec<Point>, Vec<Vec<Vec<f64>>>)> {
        let d = self.m.dim() as usize;
        let mut s2 = Vec::with_capacity(s.len());
        let mut xs2 = Vec::with_capacity(s.len());
        let mut fr2 = Vec::with_capacity(s.len());
        for j in 0..s.len() {
            let b = j * (d + 1);
            s2.push(s[j] + step * dir[b]);
            let z: Vec<f64> = (0..d).map(|i| step * dir[b + 1 + i]).collect();
            let v = ModelManifold::tangent(&frames[j], &z);
            xs2.push(self.m.exp_point(&xs[j], &v).ok()?);
            fr2.push(frames[j].iter().map(|e| self.m.transport(&xs[j], &v, e)).collect());
        }
        Some((s2, xs2, fr2))
    }

    /// Hessian of Psi_k / C in (t_j, z_j) coordinates.
    fn hessian(&self, ts: &[f64], xs: &[Point]) -> DMatrix<f64> {
        let d = self.m.dim() as usize;
        let dim = ts.len() * (d + 1);
        let mut hm = DMatrix::zeros(dim, dim);
        for j in 0..ts.len() {
            let b = j * (d + 1);
            let t = ts[j];
            let frame = self.m.frame(&xs[j]);
            let gh = self.h.gradient(self.m, &xs[j], &frame);
            let hh = self.h.hessian(self.m, &xs[j], &frame);
            hm[(b, b)] = 1.0 / (t * t);
            for i in 0..d {
                hm[(b, b + 1 + i)] = self.l3 * gh[i] / self.ct;
                hm[(b + 1 + i, b)] = hm[(b, b + 1 + i)];
                for l in 0..d {
                    hm[(b + 1 + i, b + 1 + l)] = t * self.l3 * hh[i][l] / self.ct;
                }
            }
        }
        hm
    }
}

fn sample_configuration(
    m: &ModelManifold,
    k: usize,
    rho2: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Point>> {
    'outer: for _ in 0..10_000 {
        let mut pts: Vec<Point> = Vec::with_capacity(k);
        for _ in 0..k {
            let x = m.random_point(rng);
            if pts.iter().any(|y| m.geodesic_distance(&x, y) < rho2) {
                continue 'outer;
            }
            pts.push(x);
        }
        return Some(pts);
    }
    None
}

/// Lexicographic order on coordinates, for deterministic output.
fn cmp_points(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Multi-start search for critical points of Psi_k with t in
/// (rho1, 1/rho1) and pairwise peak separation at least rho2.
#[allow(clippy::too_many_arguments)]
pub fn find_critical_points(
    m: &ModelManifold,
    h: &PotentialSpec,
    c: &BubbleConstants,
    alpha: f64,
    beta: f64,
    k: usize,
    rho1: f64,
    rho2: f64,
    opts: &SearchOptions,
) -> Result<Vec<ReducedCriticalPoint>> {
    check_dims(m, c)?;
    opts.validate()?;
    h.validate(m)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(rho1 > 0.0 && rho1 < 1.0) {
        return Err(Error::InvalidParameter(format!("rho1 = {rho1} must lie in (0, 1)")));
    }
    if !(rho2 > 0.0) {
        return Err(Error::InvalidParameter(format!("rho2 = {rho2} must be positive")));
    }
    if k > 1 && (rho2 > m.diameter() || k as f64 * m.ball_volume(0.5 * rho2) > m.volume()) {
        return Err(Error::SeparationUnsatisfiable { k, separation: rho2 });
    }
    let ct = c_tilde(c, alpha, beta)?;
    let prob = Problem {
        m,
        h,
        l3: c.l(3),
        coef: c.phi_coefficient(),
        ct,
        rho2,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = Vec::with_capacity(opts.starts);
    for _ in 0..opts.starts {
        let xs = sample_configuration(m, k, rho2, &mut rng)
            .ok_or(Error::SeparationUnsatisfiable { k, separation: rho2 })?;
        let s: Vec<f64> = xs
            .iter()
            .map(|x| {
                let ph = prob.phi(x);
                if ph > 0.0 {
                    (ct / (prob.l3 * ph)).ln()
                } else {
                    0.0
                }
            })
            .collect();
        starts.push((s, xs));
    }
    let finished: Vec<Option<(Vec<f64>, Vec<Point>)>> = starts
        .into_par_iter()
        .map(|(s, xs)| prob.descend(s, xs, opts))
        .collect();

    let scale = m.length_scale();
    let mut found: Vec<ReducedCriticalPoint> = Vec::new();
    for (s, xs) in finished.into_iter().flatten() {
        let ts: Vec<f64> = s.iter().map(|v| v.exp()).collect();
        if ts.iter().any(|&t| !(t > rho1 && t < 1.0 / rho1)) {
            continue;
        }
        let phis: Vec<f64> = xs.iter().map(|x| prob.phi(x)).collect();
        if phis.iter().any(|&p| !(p > 0.0)) {
            continue;
        }
        // canonical peak order
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| cmp_points(&xs[a], &xs[b]));
        let ts: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
        let xs: Vec<Point> = order.iter().map(|&i| xs[i].clone()).collect();
        let phis: Vec<f64> = order.iter().map(|&i| phis[i]).collect();

        let duplicate = found.iter().any(|q| {
            let mut used = vec![false; k];
            (0..k).all(|a| {
                (0..k).any(|b| {
                    let same = !used[b]
                        && m.geodesic_distance(&xs[a], &q.peaks[b]) < opts.dedup_tol * scale
                        && (ts[a] - q.t[b]).abs() < opts.dedup_tol * ts[a].max(1.0);
                    if same {
                        used[b] = true;
                    }
                    same
                })
            })
        });
        if duplicate {
            continue;
        }
        let s: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let frames: Vec<Vec<Vec<f64>>> = xs.iter().map(|x| m.frame(x)).collect();
        // gradient in (t, z): d/dt = (d/ds) / t
        let gs = prob.gradient(&s, &xs, &frames);
        let d = m.dim() as usize;
        let mut gt = gs.clone();
        for j in 0..k {
            gt[j * (d + 1)] /= ts[j];
        }
        let hess = prob.hessian(&ts, &xs);
        let eig = SymmetricEigen::new(hess).eigenvalues;
        let max_abs = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min_abs = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let zero = eig.iter().filter(|v| v.abs() <= opts.degeneracy_tol * max_abs).count();
        let neg = eig
            .iter()
            .filter(|v| **v < 0.0 && v.abs() > opts.degeneracy_tol * max_abs)
            .count();
        found.push(ReducedCriticalPoint {
            value: prob.value(&s, &xs) * ct,
            t: ts,
            peaks: xs,
            phi: phis,
            gradient_norm: gt.norm(),
            hessian_min_abs: min_abs,
            hessian_max_abs: max_abs,
            negative_eigenvalues: neg,
            zero_eigenvalues: zero,
            degenerate: zero > 0,
        });
    }
    if found.is_empty() {
        return Err(Error::NoCriticalPointFound { starts: opts.starts });
    }
    found.sort_by(|a, b| {
        a.value.total_cmp(&b.value).then_with(|| {
            a.peaks
                .iter()
                .zip(&b.peaks)
                .map(|(x, y)| cmp_points(x, y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{Normalization, SolverOptions};
    use crate::hyperbola::{Exponent, HyperbolaPoint};
    use std::f64::consts::PI;

    /// Constants with the Aubin-Talenti values at N = 8 (p = q = 5/3).
    fn talenti8() -> BubbleConstants {
        let _ = SolverOptions::default();
        BubbleConstants {
            point: HyperbolaPoint::from_p(Exponent::rational(5, 3).unwrap(), 8).unwrap(),
            values: [
                615580.9254646928,
                73869711.05576248,
                4309066.47825282,
                39397179.22974002,
                39397179.22974002,
                -1402645.1087373847,
                -1402645.1087373847,
            ],
            errors: [0.0; 7],
            tail: [0.0; 7],
            omega: PI.powi(4) / 3.0,
            l1_via_v: 615580.9254646928,
            l1_via_u: 615580.9254646928,
            normalization: Normalization {
                v_at_zero: 1.0,
                u_at_zero: 1.0,
                scale: 1.0,
            },
        }
    }

    fn torus() -> ModelManifold {
        ModelManifold::cubic_torus(8, 2.0 * PI).unwrap()
    }

    fn cosine(frequency: f64) -> PotentialSpec {
        PotentialSpec::Cosine {
            offset: 2.0,
            amplitude: 1.0,
            frequency,
            axes: vec![0],
        }
    }

    #[test]
    fn phi_examples() {
        let c = talenti8();
        let s1 = ModelManifold::sphere(8, 1.0).unwrap();
        let mut x = vec![0.0; 9];
        x[0] = 1.0;
        let got = phi(&s1, &PotentialSpec::Constant { value: 20.0 }, &c, &x).unwrap();
        assert!((got - (20.0 - c.phi_coefficient() * 56.0)).abs() < 1e-12);
        assert!((got - 8.0).abs() < 56.0 * 3.0 / 14.0 * 1e-3);
        let h = cosine(1.0);
        let y = vec![0.3; 8];
        assert_eq!(phi(&torus(), &h, &c, &y).unwrap(), h.value(&torus(), &y));
        let cancel = PotentialSpec::Constant {
            value: c.phi_coefficient() * 56.0,
        };
        assert!(phi(&s1, &cancel, &c, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn psi_separability_and_unit_scales() {
        let c = talenti8();
        let m = torus();
        let h = cosine(1.0);
        let xs = vec![vec![0.5; 8], vec![3.0; 8]];
        let ts = [0.7, 1.9];
        let both = psi_k(&m, &h, &c, 1.0, 2.0, &ts, &xs).unwrap();
        let one = psi_k(&m, &h, &c, 1.0, 2.0, &ts[..1], &xs[..1]).unwrap();
        let two = psi_k(&m, &h, &c, 1.0, 2.0, &ts[1..], &xs[1..]).unwrap();
        assert_eq!(both - (one + two), 0.0);
        let unit = psi_k(&m, &h, &c, 1.0, 2.0, &[1.0, 1.0], &xs).unwrap();
        let want: f64 = xs.iter().map(|x| c.l(3) * phi(&m, &h, &c, x).unwrap()).sum();
        assert!((unit - want).abs() < 1e-9 * want);
        assert_eq!(
            psi_k(&m, &h, &c, 1.0, 1.0, &[0.0], &xs[..1]).unwrap_err(),
            Error::NonpositiveScale(0.0)
        );
    }

    #[test]
    fn optimal_t_closed_form_and_newton_oracle() {
        let c = talenti8();
        let ph = 1.7;
        let t0 = optimal_t(&c, 1.0, 1.0, ph).unwrap();
        assert!(((t0 - 9.0 / 8.0 * c.l(1) / (c.l(3) * ph)) / t0).abs() < 1e-14);
        assert!((optimal_t(&c, 1.0, 1.0, 2.0 * ph).unwrap() - t0 / 2.0).abs() < 1e-14 * t0);
        assert_eq!(optimal_t(&c, 1.0, 1.0, 0.0).unwrap_err(), Error::NonpositivePhi(0.0));

        // Newton on f'(t) = L3 phi - C / t, f'' = C / t^2
        let ct = c_tilde(&c, 1.0, 1.0).unwrap();
        let mut t = 1.0;
        for _ in 0..100 {
            let g = c.l(3) * ph - ct / t;
            let step = g / (ct / (t * t));
            t = (t - step).max(0.1 * t);
            if step.abs() < 1e-15 * t {
                break;
            }
        }
        assert!(((t - t0) / t0).abs() < 1e-10);

        let m = torus();
        let h = PotentialSpec::Constant { value: ph };
        let xi = vec![vec![1.0; 8]];
        let (dt, _) = psi_gradient(&m, &h, &c, 1.0, 1.0, &[t0], &xi).unwrap();
        assert!(dt[0].abs() < 1e-10 * c.l(3) * ph);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let c = talenti8();
        let m = ModelManifold::sphere(8, 1.0).unwrap();
        let h = PotentialSpec::Cosine {
            offset: 30.0,
            amplitude: 2.0,
            frequency: 1.5,
            axes: vec![0, 3],
        };
        let mut x = vec![0.2; 9];
        x[0] = 0.7;
        let xs = vec![m.project(&x).unwrap()];
        let ts = [1.3];
        let (dt, dz) = psi_gradient(&m, &h, &c, 1.0, 1.0, &ts, &xs).unwrap();
        let f = |t: f64, x: &Point| psi_k(&m, &h, &c, 1.0, 1.0, &[t], std::slice::from_ref(x)).unwrap();
        let e = 1e-6;
        let fd = (f(ts[0] + e, &xs[0]) - f(ts[0] - e, &xs[0])) / (2.0 * e);
        assert!(((fd - dt[0]) / dt[0]).abs() < 1e-6);
        let frame = m.frame(&xs[0]);
        for i in 0..8 {
            let mut z = vec![0.0; 8];
            z[i] = e;
            let up = m.exp_point(&xs[0], &ModelManifold::tangent(&frame, &z)).unwrap();
            z[i] = -e;
            let dn = m.exp_point(&xs[0], &ModelManifold::tangent(&frame, &z)).unwrap();
            let fd = (f(ts[0], &up) - f(ts[0], &dn)) / (2.0 * e);
            let scale = dz[0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!((fd - dz[0][i]).abs() < 1e-6 * scale, "{i}");
        }
    }

    #[test]
    fn torus_cosine_single_peak() {
        let c = talenti8();
        let m = torus();
        let h = cosine(1.0);
        let opts = SearchOptions {
            starts: 16,
            ..Default::default()
        };
        let found = find_critical_points(&m, &h, &c, 1.0, 1.0, 1, 1e-3, 1.0, &opts).unwrap();
        let best = &found[0];
        assert!((best.peaks[0][0] - PI).abs() < 1e-6, "{:?}", best.peaks[0]);
        let ct = c_tilde(&c, 1.0, 1.0).unwrap();
        assert!(((best.t[0] - ct / (c.l(3) * 1.0)) / best.t[0]).abs() < 1e-8);
        assert!(best.gradient_norm < 1e-6);
        // flat in the seven other chart directions
        assert!(best.degenerate);
        assert_eq!(best.zero_eigenvalues, 7);
        assert_eq!(best.negative_eigenvalues, 0);
    }

    #[test]
    fn two_peaks_concatenate_single_answers() {
        let c = talenti8();
        let m = torus();
        let h = cosine(2.0);
        let opts = SearchOptions {
            starts: 24,
            seed: 5,
            ..Default::default()
        };
        let single = find_critical_points(&m, &h, &c, 1.0, 1.0, 1, 1e-3, 1.0, &opts).unwrap();
        let pair = find_critical_points(&m, &h, &c, 1.0, 1.0, 2, 1e-3, 2.5, &opts).unwrap();
        let v1 = single[0].value;
        // the minimizing set of cos(2x) is x = pi/2 and x = 3 pi/2; any
        // separated pair on it is critical with twice the single value
        let hit = pair.iter().find(|cp| {
            let a = cp.peaks[0][0];
            let b = cp.peaks[1][0];
            ((a - b).abs() - PI).abs() < 1e-6
        });
        let hit = hit.expect("pair on the two cosine minima");
        assert!(((hit.value - 2.0 * v1) / v1).abs() < 1e-10);
        for cp in &pair {
            assert!(m.geodesic_distance(&cp.peaks[0], &cp.peaks[1]) >= 2.5);
        }
    }

    #[test]
    fn constant_potential_on_sphere_is_degenerate() {
        let c = talenti8();
        let m = ModelManifold::sphere(8, 1.0).unwrap();
        let h = PotentialSpec::Constant { value: 20.0 };
        let opts = SearchOptions {
            starts: 4,
            ..Default::default()
        };
        let found = find_critical_points(&m, &h, &c, 1.0, 1.0, 1, 1e-3, 1.0, &opts).unwrap();
        assert!(found.iter().all(|cp| cp.degenerate && cp.zero_eigenvalues == 8));
    }

    #[test]
    fn separation_and_phi_errors() {
        let c = talenti8();
        let m = torus();
        let opts = SearchOptions {
            starts: 4,
            ..Default::default()
        };
        assert!(matches!(
            find_critical_points(&m, &cosine(1.0), &c, 1.0, 1.0, 3, 1e-3, 20.0, &opts),
            Err(Error::SeparationUnsatisfiable { .. })
        ));
        // phi < 0 everywhere: no admissible critical point
        let neg = PotentialSpec::Constant { value: -1.0 };
        assert!(matches!(
            find_critical_points(&m, &neg, &c, 1.0, 1.0, 1, 1e-3, 1.0, &opts),
            Err(Error::NoCriticalPointFound { .. })
        ));
        assert!(find_critical_points(&m, &cosine(1.0), &c, 0.0, 1.0, 1, 1e-3, 1.0, &opts).is_err());
    }
}
