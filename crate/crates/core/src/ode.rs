//! Embedded Dormand-Prince 5(4) integrator with step-size control, used for
//! both the outward and inward radial integrations.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Stepper {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-30,
            max_steps: 2_000_000,
        }
    }
}

/// Result of one `advance` call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance<const D: usize> {
    Reached,
    /// The event predicate fired on the step that started at `x_prev`.
    Event { x_prev: f64, y_prev: [f64; D] },
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

impl Stepper {
    pub fn new(rtol: f64) -> Self {
        Self {
            rtol,
            ..Self::default()
        }
    }

    /// Integrates from `*x` to `x_end` (either direction), updating `x`, `y`
    /// and the step-size hint `h`. Stops early when `event` returns true for
    /// an accepted state.
    pub fn advance<const D: usize, F, E>(
        &self,
        f: &F,
        x: &mut f64,
        y: &mut [f64; D],
        x_end: f64,
        h: &mut f64,
        mut event: E,
    ) -> Result<Advance<D>>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
        E: FnMut(f64, &[f64; D]) -> bool,
    {
        let dir = if x_end >= *x { 1.0 } else { -1.0 };
        let span = (x_end - *x).abs();
        if span == 0.0 {
            return Ok(Advance::Reached);
        }
        if *h == 0.0 || !h.is_finite() {
            *h = span * 1e-3;
        }
        let mut hh = h.abs().min(span);
        let mut k1 = f(*x, y);
        let mut steps = 0usize;
        loop {
            let remaining = (x_end - *x).abs();
            if remaining <= 4.0 * f64::EPSILON * x_end.abs().max(x.abs()).max(1e-300) {
                *x = x_end;
                return Ok(Advance::Reached);
            }
            let last = hh >= remaining;
            if last {
                hh = remaining;
            }
            let hs = dir * hh;
            let x0 = *x;
            let k2 = f(x0 + C2 * hs, &axpy(y, hs, &[(A21, &k1)]));
            let k3 = f(x0 + C3 * hs, &axpy(y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(x0 + C4 * hs, &axpy(y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                x0 + C5 * hs,
                &axpy(y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let x1 = if last { x_end } else { x0 + hs };
            let k6 = f(
                x1,
                &axpy(y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y1 = axpy(y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(x1, &y1);
            let mut err = 0.0f64;
            for i in 0..D {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
                hh *= 0.25;
                if hh < 1e-14 * x0.abs().max(1e-300) {
                    return Err(Error::NoConvergence(format!("step size underflow at x = {x0}")));
                }
                continue;
            }
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::NoConvergence(format!(
                    "more than {} steps before reaching x = {x_end}",
                    self.max_steps
                )));
            }
            if err <= 1.0 {
                let y_prev = *y;
                *x = x1;
                *y = y1;
                k1 = k7;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    *h = hh * grow;
                }
                hh *= grow;
                if event(*x, y) {
                    return Ok(Advance::Event { x_prev: x0, y_prev });
                }
                if last {
                    return Ok(Advance::Reached);
                }
            } else {
                hh *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if hh < 1e-14 * x0.abs().max(1e-300) {
                    return Err(Error::NoConvergence(format!("step size underflow at x = {x0}")));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let st = Stepper::new(1e-12);
        let f = |_x: f64, y: &[f64; 1]| [-y[0]];
        let (mut x, mut y, mut h) = (0.0, [1.0], 0.0);
        st.advance(&f, &mut x, &mut y, 5.0, &mut h, |_, _| false).unwrap();
        assert_eq!(x, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn backward_harmonic_oscillator() {
        let st = Stepper::new(1e-12);
        let f = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let (mut x, mut y, mut h) = (3.0, [3.0f64.sin(), 3.0f64.cos()], 0.0);
        st.advance(&f, &mut x, &mut y, 0.0, &mut h, |_, _| false).unwrap();
        assert!(y[0].abs() < 1e-11);
        assert!((y[1] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn event_stops_at_sign_change() {
        let st = Stepper::new(1e-10);
        let f = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let (mut x, mut y, mut h) = (0.0, [1.0, 0.0], 0.0);
        let out = st
            .advance(&f, &mut x, &mut y, 10.0, &mut h, |_, y| y[0] < 0.0)
            .unwrap();
        match out {
            Advance::Event { x_prev, y_prev } => {
                assert!(x_prev < std::f64::consts::FRAC_PI_2);
                assert!(x > std::f64::consts::FRAC_PI_2);
                assert!(y_prev[0] >= 0.0);
            }
            Advance::Reached => panic!("event missed"),
        }
    }
}
