//! Potentials h on a model manifold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ModelManifold, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: f64,
    },
    /// base + amplitude * sum_a exp(-d(x, a)^2 / width^2).
    RadialAboutAnchors {
        base: f64,
        amplitude: f64,
        width: f64,
        anchors: Vec<Point>,
    },
    /// offset + amplitude * sum_{i in axes} cos(frequency * x_i) in ambient
    /// coordinates (the global chart on the torus, heights on the sphere).
    Cosine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        axes: Vec<usize>,
    },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Constant { value: 20.0 }
    }
}

/// Relative central-difference step, in units of the manifold length scale.
const FD_STEP: f64 = 1e-5;

impl PotentialSpec {
    pub fn validate(&self, m: &ModelManifold) -> Result<()> {
        match self {
            PotentialSpec::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidParameter(format!("constant potential {value}")))
            }
            PotentialSpec::RadialAboutAnchors {
                width, anchors, base, amplitude, ..
            } => {
                if !(*width > 0.0) || !base.is_finite() || !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("radial potential parameters".into()));
                }
                for a in anchors {
                    m.project(a)?;
                }
                Ok(())
            }
            PotentialSpec::Cosine {
                axes, frequency, offset, amplitude,
            } => {
                if axes.iter().any(|&a| a >= m.ambient_dim()) {
                    return Err(Error::InvalidParameter(format!(
                        "cosine axes {axes:?} exceed ambient dimension {}",
                        m.ambient_dim()
                    )));
                }
                if !frequency.is_finite() || !offset.is_finite() || !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("cosine potential parameters".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, m: &ModelManifold, x: &[f64]) -> f64 {
        match self {
            PotentialSpec::Constant { value } => *value,
            PotentialSpec::RadialAboutAnchors {
                base,
                amplitude,
                width,
                anchors,
            } => {
                base + amplitude
                    * anchors
                        .iter()
                        .map(|a| (-(m.geodesic_distance(x, a) / width).powi(2)).exp())
                        .sum::<f64>()
            }
            PotentialSpec::Cosine {
                offset,
                amplitude,
                frequency,
                axes,
            } => offset + amplitude * axes.iter().map(|&i| (frequency * x[i]).cos()).sum::<f64>(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, PotentialSpec::Constant { .. })
    }

    /// Gradient at x in the normal chart spanned by `frame`.
    pub fn gradient(&self, m: &ModelManifold, x: &[f64], frame: &[Vec<f64>]) -> Vec<f64> {
        match self {
            PotentialSpec::Constant { .. } => vec![0.0; frame.len()],
            PotentialSpec::Cosine {
                amplitude,
                frequency,
                axes,
                ..
            } => {
                let mut amb = vec![0.0; x.len()];
                for &i in axes {
                    amb[i] -= amplitude * frequency * (frequency * x[i]).sin();
                }
                ModelManifold::coordinates(frame, &amb)
            }
            PotentialSpec::RadialAboutAnchors { .. } => {
                let h = FD_STEP * m.length_scale();
                (0..frame.len())
                    .map(|i| {
                        let up = m.exp_point(x, &scaled(&frame[i], h)).expect("small step");
                        let dn = m.exp_point(x, &scaled(&frame[i], -h)).expect("small step");
                        (self.value(m, &up) - self.value(m, &dn)) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    /// Hessian at x in normal coordinates, by central differences of values.
    pub fn hessian(&self, m: &ModelManifold, x: &[f64], frame: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = frame.len();
        if self.is_constant() {
            return vec![vec![0.0; d]; d];
        }
        let h = 1e-4 * m.length_scale();
        let at = |z: &[f64]| {
            let v = ModelManifold::tangent(frame, z);
            self.value(m, &m.exp_point(x, &v).expect("small step"))
        };
        let f0 = self.value(m, x);
        let mut out = vec![vec![0.0; d]; d];
        let mut z = vec![0.0; d];
        for i in 0..d {
            z[i] = h;
            let fp = at(&z);
            z[i] = -h;
            let fm = at(&z);
            z[i] = 0.0;
            out[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in 0..i {
                let mut acc = 0.0;
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    z[i] = si * h;
                    z[j] = sj * h;
                    acc += si * sj * at(&z);
                }
                z[i] = 0.0;
                z[j] = 0.0;
                out[i][j] = acc / (4.0 * h * h);
                out[j][i] = out[i][j];
            }
        }
        out
    }

    /// h as a function of the geodesic distance to `peak`, when h is
    /// constant or radial about it up to rounding. Radiality is probed at
    /// eight radii up to `reach` along 2N directions.
    pub fn radial_about(
        &self,
        m: &ModelManifold,
        peak: &[f64],
        reach: f64,
        index: usize,
    ) -> Result<RadialPotential> {
        if let PotentialSpec::Constant { value } = self {
            return Ok(RadialPotential::Constant(*value));
        }
        let frame = m.frame(peak);
        let d = frame.len();
        let dirs: Vec<Vec<f64>> = (0..d)
            .map(|i| frame[i].clone())
            .chain((0..d).map(|i| {
                let mut v = frame[i].clone();
                let w = &frame[(i + 1) % d];
                v.iter_mut().zip(w).for_each(|(a, b)| *a = -(*a + b) / 2f64.sqrt());
                v
            }))
            .collect();
        let scale = self.value(m, peak).abs().max(1.0);
        for k in 1..=8 {
            let r = reach * k as f64 / 8.0;
            let vals: Vec<f64> = dirs
                .iter()
                .map(|u| self.value(m, &m.exp_point(peak, &scaled(u, r)).expect("inside chart")))
                .collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 1e-12 * scale {
                return Err(Error::NonRadialPotential(index));
            }
        }
        Ok(RadialPotential::Along {
            spec: self.clone(),
            manifold: m.clone(),
            peak: peak.to_vec(),
            direction: frame[0].clone(),
        })
    }
}

fn scaled(v: &[f64], a: f64) -> Vec<f64> {
    v.iter().map(|x| x * a).collect()
}

/// Potential restricted to geodesic rays from a peak.
#[derive(Debug, Clone)]
pub enum RadialPotential {
    Constant(f64),
    Along {
        spec: PotentialSpec,
        manifold: ModelManifold,
        peak: Point,
        direction: Vec<f64>,
    },
}

impl RadialPotential {
    pub fn at(&self, r: f64) -> f64 {
        match self {
            RadialPotential::Constant(v) => *v,
            RadialPotential::Along {
                spec,
                manifold,
                peak,
                direction,
            } => {
                let x = manifold
                    .exp_point(peak, &scaled(direction, r))
                    .expect("radius inside chart");
                spec.value(manifold, &x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine() -> PotentialSpec {
        PotentialSpec::Cosine {
            offset: 2.0,
            amplitude: 1.0,
            frequency: 1.0,
            axes: vec![0],
        }
    }

    #[test]
    fn cosine_gradient_matches_differences() {
        let m = ModelManifold::sphere(4, 1.5).unwrap();
        let h = PotentialSpec::Cosine {
            offset: 1.0,
            amplitude: 0.7,
            frequency: 2.0,
            axes: vec![0, 2],
        };
        let x = m.project(&[0.3, -0.4, 0.5, 0.2, 0.9]).unwrap();
        let f = m.frame(&x);
        let g = h.gradient(&m, &x, &f);
        let step = 1e-6;
        for i in 0..4 {
            let up = m.exp_point(&x, &scaled(&f[i], step)).unwrap();
            let dn = m.exp_point(&x, &scaled(&f[i], -step)).unwrap();
            let fd = (h.value(&m, &up) - h.value(&m, &dn)) / (2.0 * step);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn torus_cosine_hessian() {
        let m = ModelManifold::cubic_torus(3, 2.0 * PI).unwrap();
        let x = vec![PI, 1.0, 2.0];
        let hs = cosine().hessian(&m, &x, &m.frame(&x));
        assert!((hs[0][0] - 1.0).abs() < 1e-6, "{hs:?}");
        assert!(hs[1][1].abs() < 1e-9 && hs[0][1].abs() < 1e-9);
    }

    #[test]
    fn radiality_detection() {
        let m = ModelManifold::cubic_torus(3, 2.0 * PI).unwrap();
        let peak = vec![1.0, 1.0, 1.0];
        let radial = PotentialSpec::RadialAboutAnchors {
            base: 1.0,
            amplitude: 2.0,
            width: 0.7,
            anchors: vec![peak.clone()],
        };
        let rp = radial.radial_about(&m, &peak, 1.0, 0).unwrap();
        assert!((rp.at(0.5) - (1.0 + 2.0 * (-(0.5f64 / 0.7).powi(2)).exp())).abs() < 1e-14);
        assert_eq!(
            cosine().radial_about(&m, &peak, 1.0, 3).unwrap_err(),
            Error::NonRadialPotential(3)
        );
        let c = PotentialSpec::Constant { value: 4.0 };
        assert_eq!(c.radial_about(&m, &peak, 1.0, 0).unwrap().at(0.9), 4.0);
    }

    #[test]
    fn validation() {
        let m = ModelManifold::cubic_torus(3, 1.0).unwrap();
        let bad = PotentialSpec::Cosine {
            offset: 0.0,
            amplitude: 1.0,
            frequency: 1.0,
            axes: vec![3],
        };
        assert!(bad.validate(&m).is_err());
        assert!(cosine().validate(&m).is_ok());
    }
}
