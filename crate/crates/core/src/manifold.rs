//! Model compact manifolds with closed-form geometry: the round sphere of
//! radius rho embedded in R^{N+1}, and the flat torus R^N / (L_1 Z x .. x L_N Z).
//!
//! Points are ambient coordinates (unit-norm times rho on the sphere,
//! coordinates in [0, L_i) on the torus). Tangent vectors are ambient too.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::sphere_surface;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldKind {
    Sphere { radius: f64 },
    FlatTorus { periods: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifold {
    kind: ManifoldKind,
    n: u32,
}

pub type Point = Vec<f64>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn wrap(x: f64, period: f64) -> f64 {
    let w = x.rem_euclid(period);
    if w >= period {
        0.0
    } else {
        w
    }
}

/// Minimal-image difference in (-L/2, L/2].
fn wrap_diff(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

impl ModelManifold {
    pub fn sphere(n: u32, radius: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("dimension {n} < 2")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("sphere radius {radius}")));
        }
        Ok(Self {
            kind: ManifoldKind::Sphere { radius },
            n,
        })
    }

    pub fn torus(periods: Vec<f64>) -> Result<Self> {
        if periods.len() < 2 {
            return Err(Error::InvalidParameter("torus needs at least 2 periods".into()));
        }
        if periods.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!("torus periods {periods:?}")));
        }
        let n = periods.len() as u32;
        Ok(Self {
            kind: ManifoldKind::FlatTorus { periods },
            n,
        })
    }

    /// Square torus with every period equal to `period`.
    pub fn cubic_torus(n: u32, period: f64) -> Result<Self> {
        Self::torus(vec![period; n as usize])
    }

    pub fn from_kind(kind: ManifoldKind, n: u32) -> Result<Self> {
        match kind {
            ManifoldKind::Sphere { radius } => Self::sphere(n, radius),
            ManifoldKind::FlatTorus { periods } => {
                if periods.len() != n as usize {
                    return Err(Error::InvalidParameter(format!(
                        "{} torus periods for dimension {n}",
                        periods.len()
                    )));
                }
                Self::torus(periods)
            }
        }
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere { .. } => self.n as usize + 1,
            ManifoldKind::FlatTorus { .. } => self.n as usize,
        }
    }

    /// Natural length scale: rho, or the shortest period.
    pub fn length_scale(&self) -> f64 {
        match &self.kind {
            ManifoldKind::Sphere { radius } => *radius,
            ManifoldKind::FlatTorus { periods } => periods.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match &self.kind {
            ManifoldKind::Sphere { radius } => PI * radius,
            ManifoldKind::FlatTorus { .. } => 0.5 * self.length_scale(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            ManifoldKind::Sphere { radius } => PI * radius,
            ManifoldKind::FlatTorus { periods } => {
                0.5 * periods.iter().map(|l| l * l).sum::<f64>().sqrt()
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match &self.kind {
            ManifoldKind::Sphere { radius } => sphere_surface(self.n + 1) * radius.powi(self.n as i32),
            ManifoldKind::FlatTorus { periods } => periods.iter().product(),
        }
    }

    /// Default cutoff radius: a quarter of the injectivity radius.
    pub fn default_r0(&self) -> f64 {
        0.25 * self.injectivity_radius()
    }

    pub fn scal(&self, _xi: &[f64]) -> f64 {
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let n = self.n as f64;
                n * (n - 1.0) / (radius * radius)
            }
            ManifoldKind::FlatTorus { .. } => 0.0,
        }
    }

    /// sqrt(det g) in normal coordinates at geodesic distance r.
    pub fn volume_density(&self, r: f64) -> Result<f64> {
        let inj = self.injectivity_radius();
        let r = r.abs();
        if r >= inj {
            return Err(Error::OutOfChart {
                radius: r,
                injectivity: inj,
            });
        }
        Ok(match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let x = r / radius;
                // sin(x)/x, with its series near zero
                let sinc = if x < 1e-4 {
                    1.0 - x * x / 6.0 + x.powi(4) / 120.0
                } else {
                    x.sin() / x
                };
                sinc.powi(self.n as i32 - 1)
            }
            ManifoldKind::FlatTorus { .. } => 1.0,
        })
    }

    /// Fits area(dB(xi, r)) / (omega r^{N-1}) = 1 + kappa r^2 over `radii`
    /// and returns kappa.
    pub fn sphere_area_ratio_check(&self, _xi: &[f64], radii: &[f64]) -> Result<f64> {
        let bound = 0.25 * self.injectivity_radius();
        if radii.is_empty() {
            return Err(Error::InvalidParameter("empty radius list".into()));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for &r in radii {
            if !(r > 0.0 && r < bound) {
                return Err(Error::OutOfChart {
                    radius: r,
                    injectivity: self.injectivity_radius(),
                });
            }
            let ratio = self.volume_density(r)?;
            num += r * r * (ratio - 1.0);
            den += r.powi(4);
        }
        Ok(num / den)
    }

    /// Ten radii spread over (0, inj/50], small enough for the quadratic
    /// fit to sit well inside 1% of the curvature term.
    pub fn default_area_radii(&self) -> Vec<f64> {
        let top = 0.02 * self.injectivity_radius();
        (1..=10).map(|i| top * i as f64 / 10.0).collect()
    }

    /// Brings an ambient point back onto the manifold.
    pub fn project(&self, x: &[f64]) -> Result<Point> {
        if x.len() != self.ambient_dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "point of length {} for ambient dimension {}",
                x.len(),
                self.ambient_dim()
            )));
        }
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let nx = norm(x);
                if nx == 0.0 {
                    return Err(Error::InvalidParameter("zero vector is not on the sphere".into()));
                }
                Ok(x.iter().map(|v| v * radius / nx).collect())
            }
            ManifoldKind::FlatTorus { periods } => {
                Ok(x.iter().zip(periods).map(|(v, l)| wrap(*v, *l)).collect())
            }
        }
    }

    pub fn geodesic_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                2.0 * radius * norm(&diff).atan2(norm(&sum))
            }
            ManifoldKind::FlatTorus { periods } => a
                .iter()
                .zip(b)
                .zip(periods)
                .map(|((x, y), l)| wrap_diff(x - y, *l).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// exp_xi(v) for |v| below the injectivity radius.
    pub fn exp_point(&self, xi: &[f64], v: &[f64]) -> Result<Point> {
        let len = norm(v);
        let inj = self.injectivity_radius();
        if len >= inj {
            return Err(Error::OutOfChart {
                radius: len,
                injectivity: inj,
            });
        }
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                if len == 0.0 {
                    return Ok(xi.to_vec());
                }
                let th = len / radius;
                let mut y: Vec<f64> = xi.iter().map(|x| x * th.cos()).collect();
                axpy(&mut y, radius * th.sin() / len, v);
                self.project(&y)
            }
            ManifoldKind::FlatTorus { .. } => {
                let y: Vec<f64> = xi.iter().zip(v).map(|(x, d)| x + d).collect();
                self.project(&y)
            }
        }
    }

    /// Inverse of `exp_point` on the normal chart at xi.
    pub fn log_point(&self, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        let d = self.geodesic_distance(xi, eta);
        let inj = self.injectivity_radius();
        if d >= inj * (1.0 - 1e-12) {
            return Err(Error::OutOfChart {
                radius: d,
                injectivity: inj,
            });
        }
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let r2 = radius * radius;
                let c = dot(xi, eta) / r2;
                let mut w = eta.to_vec();
                axpy(&mut w, -c, xi);
                let nw = norm(&w);
                if nw == 0.0 {
                    return Ok(vec![0.0; xi.len()]);
                }
                Ok(w.iter().map(|x| x * d / nw).collect())
            }
            ManifoldKind::FlatTorus { periods } => Ok(xi
                .iter()
                .zip(eta)
                .zip(periods)
                .map(|((x, y), l)| wrap_diff(y - x, *l))
                .collect()),
        }
    }

    /// Orthonormal basis of the tangent space at xi, as ambient vectors.
    pub fn frame(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        let m = self.ambient_dim();
        match &self.kind {
            ManifoldKind::Sphere { .. } => {
                let nx = norm(xi);
                let xhat: Vec<f64> = xi.iter().map(|x| x / nx).collect();
                // Skip the coordinate axis closest to the normal.
                let skip = (0..m)
                    .max_by(|&i, &j| xhat[i].abs().total_cmp(&xhat[j].abs()))
                    .unwrap_or(0);
                let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
                for i in (0..m).filter(|&i| i != skip) {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    let c = dot(&e, &xhat);
                    axpy(&mut e, -c, &xhat);
                    for b in &basis {
                        let c = dot(&e, b);
                        axpy(&mut e, -c, b);
                    }
                    let ne = norm(&e);
                    e.iter_mut().for_each(|v| *v /= ne);
                    basis.push(e);
                }
                basis
            }
            ManifoldKind::FlatTorus { .. } => (0..m)
                .map(|i| {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    e
                })
                .collect(),
        }
    }

    /// Tangent vector with coordinates z in the given frame.
    pub fn tangent(frame: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; frame[0].len()];
        for (e, zi) in frame.iter().zip(z) {
            axpy(&mut v, *zi, e);
        }
        v
    }

    /// Coordinates of an ambient tangent vector in an orthonormal frame.
    pub fn coordinates(frame: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        frame.iter().map(|e| dot(e, v)).collect()
    }

    /// Parallel transport of `w` (tangent at xi) along the geodesic
    /// t -> exp_xi(t v), t in [0, 1].
    pub fn transport(&self, xi: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let len = norm(v);
                if len == 0.0 {
                    return w.to_vec();
                }
                let th = len / radius;
                let u: Vec<f64> = v.iter().map(|x| x / len).collect();
                let xhat: Vec<f64> = xi.iter().map(|x| x / radius).collect();
                let wu = dot(w, &u);
                let mut out = w.to_vec();
                axpy(&mut out, wu * (th.cos() - 1.0), &u);
                axpy(&mut out, -wu * th.sin(), &xhat);
                out
            }
            ManifoldKind::FlatTorus { .. } => w.to_vec(),
        }
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            ManifoldKind::Sphere { radius } => loop {
                let g: Vec<f64> = (0..self.ambient_dim())
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let ng = norm(&g);
                if ng > 1e-8 {
                    break g.iter().map(|x| x * radius / ng).collect();
                }
            },
            ManifoldKind::FlatTorus { periods } => {
                periods.iter().map(|l| rng.random::<f64>() * l).collect()
            }
        }
    }

    /// Volume of the geodesic ball of radius s (s below the injectivity radius).
    pub fn ball_volume(&self, s: f64) -> f64 {
        let s = s.min(self.injectivity_radius());
        let omega = sphere_surface(self.n);
        let n = self.n as i32;
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                let rule = crate::numerics::GaussRule::new(16);
                let breaks: Vec<f64> = (0..=16).map(|i| s * i as f64 / 16.0).collect();
                omega * rule.composite(&breaks, |r| (radius * (r / radius).sin()).powi(n - 1))
            }
            ManifoldKind::FlatTorus { .. } => omega * s.powi(n) / n as f64,
        }
    }
}

/// Peak points with the separation data of the admissible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakConfiguration {
    points: Vec<Point>,
    separations: Vec<f64>,
    r0: f64,
    rho2: f64,
}

impl PeakConfiguration {
    /// Validates r0 < inj/2, rho2 > 2 r0 and pairwise distances >= rho2.
    pub fn new(m: &ModelManifold, points: Vec<Point>, r0: f64, rho2: f64) -> Result<Self> {
        let bound = 0.5 * m.injectivity_radius();
        if !(r0 > 0.0 && r0 < bound) {
            return Err(Error::ChartViolation { r0, bound });
        }
        if !(rho2 > 2.0 * r0) {
            return Err(Error::Separation(format!(
                "rho2 = {rho2} must exceed 2 r0 = {}",
                2.0 * r0
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidParameter("no peaks".into()));
        }
        let points = points
            .iter()
            .map(|p| m.project(p))
            .collect::<Result<Vec<_>>>()?;
        let mut separations = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = m.geodesic_distance(&points[i], &points[j]);
                if d < rho2 {
                    return Err(Error::Separation(format!(
                        "peaks {i} and {j} are {d} apart, below rho2 = {rho2}"
                    )));
                }
                separations.push(d);
            }
        }
        Ok(Self {
            points,
            separations,
            r0,
            rho2,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pairwise distances in (0,1), (0,2), .., (1,2), .. order.
    pub fn separations(&self) -> &[f64] {
        &self.separations
    }

    pub fn min_separation(&self) -> f64 {
        self.separations.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }
}
