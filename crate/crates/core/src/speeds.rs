//! Closed-form speeds of a solvable family and the minimality-exchange point.
//!
//! * linear speed `c_l = 2√(A − B)` (from f′(0) = A − B),
//! * nonlinear speed `c_nl = A/√B` of the explicit front `F = γh`, `γ = √B`,
//! * exchange where `A(β*) = 2B(β*)`, i.e. where `c_l` and `c_nl` meet.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::SolvableFamily;

/// Default regime-classification threshold in speed units.
pub const CLASSIFY_TOL: f64 = 1e-4;

const ROOT_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 200;
const SLOPE_STEP: f64 = 1e-5;
const NONDEGENERATE_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Pulled,
    Pushed,
    Degenerate,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Pulled => "pulled",
            Regime::Pushed => "pushed",
            Regime::Degenerate => "degenerate",
        }
    }
}

/// Which result (if any) predicts the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionBasis {
    /// A < 2B: the explicit front is the minimal one.
    ExplicitFrontDecay,
    /// A = 2B: c_l = c_nl.
    Tangency,
    /// A > 2B and sup h′ = 1.
    ConcaveProfileBound,
    /// A > 2B, A and B non-decreasing, A − B non-increasing.
    MonotoneCoefficients,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub regime: Regime,
    pub basis: PredictionBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub regime: Regime,
    pub prediction: Option<Prediction>,
}

impl Classification {
    /// True when the numeric regime is consistent with the prediction. A
    /// degenerate numeric regime is consistent with either side.
    pub fn agrees(&self) -> bool {
        match self.prediction {
            None => true,
            Some(p) => {
                self.regime == Regime::Degenerate
                    || p.regime == self.regime
                    || (p.regime == Regime::Pulled && p.basis == PredictionBasis::Tangency)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MonotonicityFlags {
    pub a_nondecreasing: bool,
    pub b_nondecreasing: bool,
    pub a_minus_b_nonincreasing: bool,
}

impl MonotonicityFlags {
    pub fn all(&self) -> bool {
        self.a_nondecreasing && self.b_nondecreasing && self.a_minus_b_nonincreasing
    }
}

/// Family-wide facts the regime prediction depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryContext {
    pub hprime_sup: f64,
    pub hypotheses: Option<MonotonicityFlags>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExchangePoint {
    pub beta_star: f64,
    pub nondegenerate: bool,
    /// d/dβ (A − 2B) at β*.
    pub slope: f64,
    /// More than one sign change of A − 2B was found on the scan.
    pub multiple_roots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedReport {
    pub beta: f64,
    pub c_l: f64,
    pub c_nl: f64,
    pub gamma: f64,
    pub c_min: f64,
    pub regime: Regime,
    pub bounds: Vec<Bound>,
}

pub fn linear_speed(fam: &SolvableFamily, beta: f64) -> Result<f64> {
    let (a, b) = fam.coefficients(beta)?;
    if a <= b {
        return Err(Error::InvalidFamily(format!(
            "A(β) = {a} must exceed B(β) = {b} for a positive linear speed"
        )));
    }
    Ok(2.0 * (a - b).sqrt())
}

pub fn nonlinear_speed(fam: &SolvableFamily, beta: f64) -> Result<f64> {
    let (a, b) = fam.coefficients(beta)?;
    positive_b(b)?;
    Ok(a / b.sqrt())
}

/// Slope factor of the explicit front `F(U) = γ h(U)`.
pub fn gamma(fam: &SolvableFamily, beta: f64) -> Result<f64> {
    let b = fam.b_at(beta)?;
    positive_b(b)?;
    Ok(b.sqrt())
}

fn positive_b(b: f64) -> Result<()> {
    if b > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidFamily(format!("B(β) = {b} must be positive")))
    }
}

fn exchange_gap(fam: &SolvableFamily, beta: f64) -> Result<f64> {
    let (a, b) = fam.coefficients(beta)?;
    Ok(a - 2.0 * b)
}

/// Locates a root of `A − 2B` on `[lo, hi]` by a coarse scan and bisection.
pub fn exchange_candidate(fam: &SolvableFamily, lo: f64, hi: f64) -> Result<ExchangePoint> {
    if !(lo < hi) {
        return Err(Error::Precondition(format!("empty β interval [{lo}, {hi}]")));
    }
    let xs: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / SCAN_POINTS as f64)
        .collect();
    let ds: Vec<f64> = xs.iter().map(|&x| exchange_gap(fam, x)).collect::<Result<_>>()?;

    let mut brackets = Vec::new();
    for i in 0..SCAN_POINTS {
        if ds[i] == 0.0 {
            brackets.push((xs[i], xs[i]));
        } else if ds[i] * ds[i + 1] < 0.0 {
            brackets.push((xs[i], xs[i + 1]));
        }
    }
    if ds[SCAN_POINTS] == 0.0 {
        brackets.push((xs[SCAN_POINTS], xs[SCAN_POINTS]));
    }
    let &(mut a, mut b) = brackets.first().ok_or(Error::NoSignChange { lo, hi })?;

    let mut da = exchange_gap(fam, a)?;
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        let dm = exchange_gap(fam, m)?;
        if dm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if da * dm < 0.0 {
            b = m;
        } else {
            a = m;
            da = dm;
        }
    }
    let beta_star = 0.5 * (a + b);
    let slope =
        (exchange_gap(fam, beta_star + SLOPE_STEP)? - exchange_gap(fam, beta_star - SLOPE_STEP)?) / (2.0 * SLOPE_STEP);
    Ok(ExchangePoint {
        beta_star,
        nondegenerate: slope.abs() > NONDEGENERATE_SLOPE,
        slope,
        multiple_roots: brackets.len() > 1,
    })
}

/// Grid test of the coefficient monotonicity hypotheses on `[lo, hi]`.
pub fn monotonicity_hypotheses(fam: &SolvableFamily, lo: f64, hi: f64, grid_n: usize) -> Result<MonotonicityFlags> {
    let n = grid_n.max(2);
    let coeffs: Vec<(f64, f64)> = (0..=n)
        .map(|i| fam.coefficients(lo + (hi - lo) * i as f64 / n as f64))
        .collect::<Result<_>>()?;
    const SLACK: f64 = 1e-12;
    let mut flags = MonotonicityFlags {
        a_nondecreasing: true,
        b_nondecreasing: true,
        a_minus_b_nonincreasing: true,
    };
    for w in coeffs.windows(2) {
        let ((a0, b0), (a1, b1)) = (w[0], w[1]);
        flags.a_nondecreasing &= a1 >= a0 - SLACK;
        flags.b_nondecreasing &= b1 >= b0 - SLACK;
        flags.a_minus_b_nonincreasing &= (a1 - b1) <= (a0 - b0) + SLACK;
    }
    Ok(flags)
}

/// Classifies a numerically computed minimal speed against `c_l`/`c_nl`
/// and attaches the theoretical prediction when one applies.
pub fn classify(fam: &SolvableFamily, beta: f64, c_min: f64, tol: f64, ctx: &TheoryContext) -> Result<Classification> {
    let c_l = linear_speed(fam, beta)?;
    let c_nl = nonlinear_speed(fam, beta)?;
    let regime = if c_min - c_l > tol {
        Regime::Pushed
    } else if (c_l - c_nl).abs() <= tol {
        Regime::Degenerate
    } else {
        Regime::Pulled
    };
    Ok(Classification {
        regime,
        prediction: predict(fam, beta, ctx)?,
    })
}

/// Regime predicted by the theory alone, without shooting.
pub fn predict(fam: &SolvableFamily, beta: f64, ctx: &TheoryContext) -> Result<Option<Prediction>> {
    let gap = exchange_gap(fam, beta)?;
    let scale = fam.a_at(beta)?.abs().max(1.0);
    let prediction = if gap.abs() <= 1e-12 * scale {
        Some(Prediction {
            regime: Regime::Pulled,
            basis: PredictionBasis::Tangency,
        })
    } else if gap < 0.0 {
        Some(Prediction {
            regime: Regime::Pushed,
            basis: PredictionBasis::ExplicitFrontDecay,
        })
    } else if (ctx.hprime_sup - 1.0).abs() <= 1e-9 {
        Some(Prediction {
            regime: Regime::Pulled,
            basis: PredictionBasis::ConcaveProfileBound,
        })
    } else if ctx.hypotheses.is_some_and(|h| h.all()) {
        Some(Prediction {
            regime: Regime::Pulled,
            basis: PredictionBasis::MonotoneCoefficients,
        })
    } else {
        None
    };
    Ok(prediction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fam(name: &str) -> SolvableFamily {
        SolvableFamily::builtin(name).unwrap()
    }

    #[test]
    fn linear_speeds() {
        let hr = fam("hadeler_rothe");
        for beta in [0.1, 1.0, 2.0, 7.5] {
            assert_relative_eq!(linear_speed(&hr, beta).unwrap(), 2.0, epsilon = 1e-15);
        }
        let ex = fam("exp_demo");
        for beta in [0.2, 1.0, 1.2] {
            assert_relative_eq!(
                linear_speed(&ex, beta).unwrap(),
                (4.0 - 2.0 * beta).sqrt(),
                epsilon = 1e-15
            );
        }
        assert_relative_eq!(
            linear_speed(&fam("cgm_sine"), 0.25).unwrap(),
            1.5f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(linear_speed(&fam("cgm_sine"), 1.5).is_err());
    }

    #[test]
    fn nonlinear_speeds_and_gamma() {
        assert_relative_eq!(
            nonlinear_speed(&fam("hadeler_rothe"), 2.0).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(nonlinear_speed(&fam("cgm_sine"), 0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            nonlinear_speed(&fam("exp_demo"), 1.0).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(gamma(&fam("hadeler_rothe"), 2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(gamma(&fam("hadeler_rothe"), 8.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(gamma(&fam("cgm_sine"), 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert!(gamma(&fam("hadeler_rothe"), -1.0).is_err());
        assert!(nonlinear_speed(&fam("hadeler_rothe"), 0.0).is_err());
    }

    #[test]
    fn exchange_points_of_builtins() {
        for (name, lo, hi, expect) in [
            ("hadeler_rothe", 0.1, 10.0, 2.0),
            ("cgm_sine", 0.1, 0.99, 0.5),
            ("exp_demo", 0.1, 1.9, 1.0),
        ] {
            let f = fam(name);
            let x = exchange_candidate(&f, lo, hi).unwrap();
            assert!((x.beta_star - expect).abs() < 1e-9, "{name}: {x:?}");
            assert!(x.nondegenerate && !x.multiple_roots);
            let (a, b) = f.coefficients(x.beta_star).unwrap();
            assert!((a - 2.0 * b).abs() <= 1e-9);
            let gap = linear_speed(&f, x.beta_star).unwrap() - nonlinear_speed(&f, x.beta_star).unwrap();
            assert!(gap.abs() <= 1e-9);
        }
    }

    #[test]
    fn no_exchange_when_a_is_2b_plus_one() {
        let f = SolvableFamily::from_sources("shifted", "u*(1-u)", "2*beta + 1", "beta").unwrap();
        assert!(matches!(
            exchange_candidate(&f, 0.0, 2.0),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn multiple_roots_are_flagged() {
        let f = SolvableFamily::from_sources("wavy", "u*(1-u)", "2*beta + sin(6*beta)", "beta").unwrap();
        let x = exchange_candidate(&f, 0.1, 3.0).unwrap();
        assert!(x.multiple_roots);
        assert!((x.beta_star - std::f64::consts::PI / 6.0).abs() < 1e-9);
    }

    #[test]
    fn monotonicity_flags() {
        let all = MonotonicityFlags {
            a_nondecreasing: true,
            b_nondecreasing: true,
            a_minus_b_nonincreasing: true,
        };
        assert_eq!(
            monotonicity_hypotheses(&fam("hadeler_rothe"), 0.0, 10.0, 200).unwrap(),
            all
        );
        assert_eq!(monotonicity_hypotheses(&fam("exp_demo"), 0.0, 2.0, 200).unwrap(), all);
        let f = SolvableFamily::from_sources("dec", "u*(1-u)", "2 - beta", "beta/2").unwrap();
        assert!(!monotonicity_hypotheses(&f, 0.0, 1.0, 50).unwrap().a_nondecreasing);
    }

    #[test]
    fn predictions() {
        let hr = fam("hadeler_rothe");
        let ctx = TheoryContext {
            hprime_sup: 1.0,
            hypotheses: None,
        };
        let c = classify(&hr, 4.0, 3.0 / 2f64.sqrt(), CLASSIFY_TOL, &ctx).unwrap();
        assert_eq!(c.regime, Regime::Pushed);
        assert_eq!(c.prediction.unwrap().regime, Regime::Pushed);
        let c = classify(&hr, 1.0, 2.0, CLASSIFY_TOL, &ctx).unwrap();
        assert_eq!(c.regime, Regime::Pulled);
        assert_eq!(c.prediction.unwrap().basis, PredictionBasis::ConcaveProfileBound);
        assert!(c.agrees());

        let ex = fam("exp_demo");
        let no_hyp = TheoryContext {
            hprime_sup: 1.52218,
            hypotheses: None,
        };
        assert!(predict(&ex, 0.5, &no_hyp).unwrap().is_none());
        let with_hyp = TheoryContext {
            hprime_sup: 1.52218,
            hypotheses: Some(monotonicity_hypotheses(&ex, 0.0, 1.3, 100).unwrap()),
        };
        let c = classify(&ex, 0.5, linear_speed(&ex, 0.5).unwrap(), CLASSIFY_TOL, &with_hyp).unwrap();
        assert_eq!(c.regime, Regime::Pulled);
        assert_eq!(c.prediction.unwrap().basis, PredictionBasis::MonotoneCoefficients);
    }

    #[test]
    fn degenerate_at_tangency() {
        let hr = fam("hadeler_rothe");
        let ctx = TheoryContext {
            hprime_sup: 1.0,
            hypotheses: None,
        };
        let c = classify(&hr, 2.0, 2.0, CLASSIFY_TOL, &ctx).unwrap();
        assert_eq!(c.regime, Regime::Degenerate);
        assert!(c.agrees());
    }

    #[test]
    fn nonlinear_speed_dominates_linear_speed() {
        // A/√B − 2√(A − B) ≥ 0 with equality iff A = 2B
        for name in ["hadeler_rothe", "cgm_sine", "exp_demo"] {
            let f = fam(name);
            for i in 1..60 {
                let beta = match name {
                    "hadeler_rothe" => i as f64 * 0.15,
                    "cgm_sine" => i as f64 / 61.0,
                    _ => i as f64 * 0.03,
                };
                let (a, b) = f.coefficients(beta).unwrap();
                let gap = nonlinear_speed(&f, beta).unwrap() - linear_speed(&f, beta).unwrap();
                assert!(gap >= -1e-12, "{name} β={beta}");
                if (a - 2.0 * b).abs() > 1e-6 {
                    assert!(gap > 0.0);
                }
            }
        }
    }
}
