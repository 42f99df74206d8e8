//! The bubble constants L1..L7 as radial integrals of a ground state, the
//! geometric coefficient of phi, and the reduced-energy coefficients c1, c2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::{GroundState, Normalization};
use crate::hyperbola::HyperbolaPoint;
use crate::numerics::{sphere_surface, GaussRule};

const HIGH_ORDER: usize = 8;
const LOW_ORDER: usize = 5;
/// The tail model is integrated numerically out to this multiple of r_max;
/// beyond it only the leading power law is kept.
const TAIL_REACH: f64 = 1e3;
const TAIL_SEGMENTS: usize = 48;

pub const NAMES: [&str; 7] = ["L1", "L2", "L3", "L4", "L5", "L6", "L7"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleConstants {
    pub point: HyperbolaPoint,
    /// L1..L7 in order.
    pub values: [f64; 7],
    /// Absolute error estimates for `values`.
    pub errors: [f64; 7],
    /// Share of each value coming from r > r_max.
    pub tail: [f64; 7],
    pub omega: f64,
    /// omega * int V^{p+1} r^{N-1} dr and omega * int U^{q+1} r^{N-1} dr.
    pub l1_via_v: f64,
    pub l1_via_u: f64,
    pub normalization: Normalization,
}

impl BubbleConstants {
    pub fn l(&self, i: usize) -> f64 {
        assert!((1..=7).contains(&i), "constants are L1..L7");
        self.values[i - 1]
    }

    pub fn phi_coefficient(&self) -> f64 {
        phi_coefficient(self, self.point.p(), self.point.q(), self.point.n())
    }

    /// Refuses to combine constants computed under different gauges.
    pub fn ensure_compatible(&self, other: &BubbleConstants) -> Result<()> {
        if self.point != other.point || !self.normalization.matches(&other.normalization) {
            return Err(Error::NormalizationMismatch(format!(
                "{:?} vs {:?}",
                self.normalization, other.normalization
            )));
        }
        Ok(())
    }
}

/// The integrands in the order L1..L7, then the two L1 alternatives.
fn integrands(y: [f64; 4], r: f64, p: f64, q: f64) -> [f64; 9] {
    let [u, v, du, dv] = y;
    let vp = v.powf(p + 1.0);
    let uq = u.powf(q + 1.0);
    let r2 = r * r;
    [
        du * dv,
        r2 * du * dv,
        u * v,
        r2 * vp,
        r2 * uq,
        vp * v.ln(),
        uq * u.ln(),
        vp,
        uq,
    ]
}

/// Leading power law r^e of each quantity (U, V, U', V') in the tail.
fn leading_exponents(gs: &GroundState) -> [f64; 4] {
    let t = gs.tail();
    let base = 2.0 - t.n;
    let eu = if t.c_coef != 0.0 && t.mu > base { t.mu } else { base };
    let ev = if t.d_coef != 0.0 && t.mv > base { t.mv } else { base };
    [eu, ev, eu - 1.0, ev - 1.0]
}

/// Integral of C r^s (a + b log r) over [R, inf) for s < -1.
fn power_log_tail(c: f64, s: f64, a: f64, b: f64, big_r: f64) -> f64 {
    let k = -(s + 1.0);
    let rk = big_r.powf(-k);
    c * rk * (a / k + b * (big_r.ln() / k + 1.0 / (k * k)))
}

pub fn compute_constants(gs: &GroundState) -> Result<BubbleConstants> {
    let point = *gs.point();
    let (p, q, n) = (point.p(), point.q(), point.dim());
    let omega = sphere_surface(point.n());
    let r_max = gs.r_max();
    let w = n - 1.0;

    // Leading-order exponents of the weighted integrands beyond r_max.
    let [eu, ev, edu, edv] = leading_exponents(gs);
    let exps = [
        edu + edv,
        2.0 + edu + edv,
        eu + ev,
        2.0 + (p + 1.0) * ev,
        2.0 + (q + 1.0) * eu,
        (p + 1.0) * ev,
        (q + 1.0) * eu,
        (p + 1.0) * ev,
        (q + 1.0) * eu,
    ];
    for (i, e) in exps.iter().enumerate() {
        if e + w >= -1.0 {
            let constant = if i < 7 { NAMES[i] } else { "L1" };
            return Err(Error::DivergentTail {
                constant,
                exponent: e + w,
            });
        }
    }

    let hi = GaussRule::new(HIGH_ORDER);
    let lo = GaussRule::new(LOW_ORDER);
    let integrate = |rule: &GaussRule, a: f64, b: f64, acc: &mut [f64; 9], abs: &mut [f64; 9]| {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let (nodes, weights) = rule.nodes_weights();
        for (x, wt) in nodes.iter().zip(weights) {
            let r = mid + half * x;
            let g = integrands(gs.eval(r), r, p, q);
            let jac = wt * half * r.powf(w);
            for k in 0..9 {
                acc[k] += jac * g[k];
                abs[k] += (jac * g[k]).abs();
            }
        }
    };

    // Sampled region: one segment per grid interval, where the interpolant
    // is a single polynomial piece.
    let mut body_hi = [0.0; 9];
    let mut body_lo = [0.0; 9];
    let mut body_abs = [0.0; 9];
    let mut scratch = [0.0; 9];
    for seg in gs.grid().windows(2) {
        integrate(&hi, seg[0], seg[1], &mut body_hi, &mut body_abs);
        integrate(&lo, seg[0], seg[1], &mut body_lo, &mut scratch);
    }

    // Tail model from r_max to TAIL_REACH * r_max on a logarithmic mesh.
    let mut tail_hi = [0.0; 9];
    let mut tail_lo = [0.0; 9];
    let far = r_max * TAIL_REACH;
    let ratio = TAIL_REACH.powf(1.0 / TAIL_SEGMENTS as f64);
    let mut a = r_max;
    for _ in 0..TAIL_SEGMENTS {
        let b = (a * ratio).min(far);
        integrate(&hi, a, b, &mut tail_hi, &mut scratch);
        integrate(&lo, a, b, &mut tail_lo, &mut scratch);
        a = b;
    }

    // Leading power law beyond `far`, with amplitudes read off the model.
    let y = gs.eval(far);
    let amp = [
        y[0] / far.powf(eu),
        y[1] / far.powf(ev),
        y[2] / far.powf(edu),
        y[3] / far.powf(edv),
    ];
    let rest = {
        let pl = |c: f64, s: f64| power_log_tail(c, s + w, 1.0, 0.0, far);
        let vp = amp[1].powf(p + 1.0);
        let uq = amp[0].powf(q + 1.0);
        [
            pl(amp[2] * amp[3], exps[0]),
            pl(amp[2] * amp[3], exps[1]),
            pl(amp[0] * amp[1], exps[2]),
            pl(vp, exps[3]),
            pl(uq, exps[4]),
            power_log_tail(vp, exps[5] + w, amp[1].ln(), ev, far),
            power_log_tail(uq, exps[6] + w, amp[0].ln(), eu, far),
            pl(vp, exps[7]),
            pl(uq, exps[8]),
        ]
    };

    let profile_rel = (100.0 * gs.options().rtol).max(if gs.u0_error().is_finite() {
        gs.u0_error() / gs.normalization().u_at_zero
    } else {
        0.0
    });
    let mut total = [0.0; 9];
    let mut err = [0.0; 9];
    let mut tail_share = [0.0; 9];
    for k in 0..9 {
        let tail = tail_hi[k] + rest[k];
        total[k] = omega * (body_hi[k] + tail);
        err[k] = omega
            * ((body_hi[k] - body_lo[k]).abs()
                + (tail_hi[k] - tail_lo[k]).abs()
                + rest[k].abs()
                + profile_rel * body_abs[k]);
        tail_share[k] = omega * tail;
    }
    let mut values = [0.0; 7];
    let mut errors = [0.0; 7];
    let mut tail = [0.0; 7];
    values.copy_from_slice(&total[..7]);
    errors.copy_from_slice(&err[..7]);
    tail.copy_from_slice(&tail_share[..7]);
    for i in 0..5 {
        if !(values[i] > 0.0) {
            return Err(Error::NoConvergence(format!(
                "{} = {} is not positive",
                NAMES[i], values[i]
            )));
        }
    }
    Ok(BubbleConstants {
        point,
        values,
        errors,
        tail,
        omega,
        l1_via_v: total[7],
        l1_via_u: total[8],
        normalization: gs.normalization(),
    })
}

/// Coefficient of Scal_g in phi: (L2 - L4/(p+1) - L5/(q+1)) / (6 N L3).
pub fn phi_coefficient(c: &BubbleConstants, p: f64, q: f64, n: u32) -> f64 {
    (c.l(2) - c.l(4) / (p + 1.0) - c.l(5) / (q + 1.0)) / (6.0 * n as f64 * c.l(3))
}

fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha and beta must be positive, got {alpha}, {beta}"
        )));
    }
    Ok(())
}

/// Per-bubble logarithmic coefficient (N L1 / 2)(alpha/(p+1)^2 + beta/(q+1)^2).
pub fn c_tilde(c: &BubbleConstants, alpha: f64, beta: f64) -> Result<f64> {
    check_weights(alpha, beta)?;
    let (p, q) = (c.point.p(), c.point.q());
    let n = c.point.dim();
    Ok(0.5 * n * c.l(1) * (alpha / (p + 1.0).powi(2) + beta / (q + 1.0).powi(2)))
}

/// (c1, c2) of the reduced energy for k bubbles.
pub fn c1_c2(
    c: &BubbleConstants,
    alpha: f64,
    beta: f64,
    p: f64,
    q: f64,
    k: usize,
) -> Result<(f64, f64)> {
    check_weights(alpha, beta)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let kf = k as f64;
    let n = c.point.dim();
    let mix = alpha / (p + 1.0).powi(2) + beta / (q + 1.0).powi(2);
    let c1 = (c.l(6) * alpha / (p + 1.0) + c.l(7) * beta / (q + 1.0) - mix * c.l(1)) * kf;
    let c2 = 0.5 * n * c.l(1) * kf * mix;
    Ok((c1, c2))
}
