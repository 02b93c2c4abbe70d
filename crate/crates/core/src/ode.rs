//! Adaptive Dormand–Prince 5(4) integrator for scalar ODEs `y′ = g(t, y)`.
//!
//! Integration may run in either direction of `t`. A state predicate lets
//! the caller reject stages that leave the admissible region (for example a
//! squared quantity going negative); a step that keeps producing such states
//! down to the minimum step size ends the integration with
//! [`Termination::LeftDomain`].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    /// Smallest step relative to `max(1, |t|)` before giving up.
    pub min_step_rel: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            atol: 1e-12,
            rtol: 1e-9,
            min_step_rel: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Reached,
    /// The callback asked to stop at this point.
    Stopped {
        t: f64,
        y: f64,
    },
    /// No admissible step could be taken from `t`.
    LeftDomain {
        t: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub t: f64,
    pub y: f64,
    pub steps: usize,
    pub rejected: usize,
    pub termination: Termination,
}

// Dormand–Prince coefficients.
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
// b − b* (error weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Integrates from `(t0, y0)` to `t1`. `on_step(t, y, dy)` is called after
/// every accepted step (and once at the start); returning `false` stops the
/// integration. `admissible(y)` must hold for every stage value.
#[allow(clippy::too_many_arguments)]
pub fn integrate<G, A, S>(
    mut g: G,
    t0: f64,
    y0: f64,
    t1: f64,
    h0: f64,
    tol: &Tolerances,
    admissible: A,
    mut on_step: S,
) -> Result<Outcome>
where
    G: FnMut(f64, f64) -> Result<f64>,
    A: Fn(f64) -> bool,
    S: FnMut(f64, f64, f64) -> bool,
{
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = g(t, y)?;
    let mut h = h0.abs().min(span).max(f64::MIN_POSITIVE);
    let mut steps = 0;
    let mut rejected = 0;

    if !on_step(t, y, k1) {
        return Ok(Outcome {
            t,
            y,
            steps,
            rejected,
            termination: Termination::Stopped { t, y },
        });
    }

    while (t1 - t) * dir > 0.0 {
        if steps + rejected >= tol.max_steps {
            return Err(Error::StepUnderflow { at: t });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;
        let h_min = tol.min_step_rel * t.abs().max(1.0);

        match try_step(&mut g, t, y, k1, hs, &admissible)? {
            None => {
                // inadmissible stage: shrink
                rejected += 1;
                if hs.abs() <= h_min {
                    return Ok(Outcome {
                        t,
                        y,
                        steps,
                        rejected,
                        termination: Termination::LeftDomain { t, y },
                    });
                }
                h = (hs.abs() * 0.25).max(h_min);
            }
            Some((y_new, k7, err)) => {
                let scale = tol.atol + tol.rtol * y.abs().max(y_new.abs());
                let ratio = (err / scale).abs();
                if ratio <= 1.0 {
                    t = if last { t1 } else { t + hs };
                    y = y_new;
                    k1 = k7;
                    steps += 1;
                    let factor = if ratio == 0.0 {
                        MAX_FACTOR
                    } else {
                        (SAFETY * ratio.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                    };
                    h = hs.abs() * factor;
                    if !on_step(t, y, k1) {
                        return Ok(Outcome {
                            t,
                            y,
                            steps,
                            rejected,
                            termination: Termination::Stopped { t, y },
                        });
                    }
                } else {
                    rejected += 1;
                    if hs.abs() <= h_min {
                        return Err(Error::StepUnderflow { at: t });
                    }
                    let factor = (SAFETY * ratio.powf(-0.25)).clamp(MIN_FACTOR, 1.0);
                    h = (hs.abs() * factor).max(h_min);
                }
            }
        }
    }
    Ok(Outcome {
        t,
        y,
        steps,
        rejected,
        termination: Termination::Reached,
    })
}

/// One Dormand–Prince step; `None` if any stage is inadmissible.
fn try_step<G, A>(g: &mut G, t: f64, y: f64, k1: f64, h: f64, admissible: &A) -> Result<Option<(f64, f64, f64)>>
where
    G: FnMut(f64, f64) -> Result<f64>,
    A: Fn(f64) -> bool,
{
    macro_rules! stage {
        ($c:expr, $y:expr) => {{
            let ys = $y;
            if !admissible(ys) {
                return Ok(None);
            }
            g(t + $c * h, ys)?
        }};
    }
    let k2 = stage!(C2, y + h * A21 * k1);
    let k3 = stage!(C3, y + h * (A31 * k1 + A32 * k2));
    let k4 = stage!(C4, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
    let k5 = stage!(C5, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
    let k6 = stage!(1.0, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
    let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    let k7 = stage!(1.0, y_new);
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    Ok(Some((y_new, k7, err)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_forward_and_backward() {
        let tol = Tolerances::default();
        let out = integrate(|_, y| Ok(-y), 0.0, 1.0, 3.0, 0.1, &tol, |_| true, |_, _, _| true).unwrap();
        assert_eq!(out.termination, Termination::Reached);
        assert!((out.y - (-3f64).exp()).abs() < 1e-9);

        let out = integrate(
            |_, y| Ok(-y),
            3.0,
            (-3f64).exp(),
            0.0,
            0.1,
            &tol,
            |_| true,
            |_, _, _| true,
        )
        .unwrap();
        assert!((out.y - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fifth_order_accuracy_on_oscillator_component() {
        // y' = cos t, y(0) = 0 → y = sin t
        let tol = Tolerances {
            atol: 1e-13,
            rtol: 1e-12,
            ..Default::default()
        };
        let out = integrate(|t, _| Ok(t.cos()), 0.0, 0.0, 10.0, 0.01, &tol, |_| true, |_, _, _| true).unwrap();
        assert!((out.y - 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn left_domain_is_reported() {
        // y' = -1 from y = 1 hits zero at t = 1
        let tol = Tolerances::default();
        let out = integrate(|_, _| Ok(-1.0), 0.0, 1.0, 2.0, 0.3, &tol, |y| y >= 0.0, |_, _, _| true).unwrap();
        match out.termination {
            Termination::LeftDomain { t, .. } => assert!((t - 1.0).abs() < 1e-10, "t = {t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn callback_can_stop() {
        let tol = Tolerances::default();
        let out = integrate(|_, _| Ok(1.0), 0.0, 0.0, 10.0, 0.5, &tol, |_| true, |t, _, _| t < 2.0).unwrap();
        assert!(matches!(out.termination, Termination::Stopped { .. }));
        assert!(out.t >= 2.0);
    }
}
