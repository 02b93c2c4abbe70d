//! Minimal front speed by phase-plane shooting.
//!
//! With `F(U) = −U′` the front equation `U″ + cU′ + f(U) = 0` becomes
//! `F dF/dU − cF + f(U) = 0` with `F(0) = F(1) = 0`. We integrate
//! `P = F²`, which satisfies `dP/dU = 2c√P − 2f(U)`, from the saddle at
//! `U = 1` down to `U = δ` along its unstable manifold.
//!
//! A speed admits a monotone front when the trajectory reaches the origin
//! with `F > 0`. It fails in one of three ways: `F` vanishes first
//! (crossing), the trajectory arrives above the strong stable manifold of the
//! origin and overshoots it, or `c < c_l` so the origin is a focus.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::SolvableFamily;
use crate::ode::{self, Termination, Tolerances};

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    /// Start offset below U = 1.
    pub eps: f64,
    /// Stop point above U = 0.
    pub delta: f64,
    pub tolerances: Tolerances,
    /// Relative slack above λ+ before an arrival counts as overshoot.
    pub overshoot_margin: f64,
    /// Bisection tolerance on c.
    pub c_tol: f64,
    pub record_trajectory: bool,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            eps: 1e-6,
            delta: 1e-6,
            tolerances: Tolerances {
                atol: 1e-20,
                rtol: 1e-9,
                ..Tolerances::default()
            },
            overshoot_margin: 1e-3,
            c_tol: 1e-6,
            record_trajectory: true,
        }
    }
}

/// A scalar monostable reaction term with its endpoint slopes.
#[derive(Clone, Copy)]
pub struct Reaction<F> {
    pub f: F,
    pub fprime0: f64,
    pub fprime1: f64,
}

impl<F: Fn(f64) -> Result<f64>> Reaction<F> {
    pub fn new(f: F, fprime0: f64, fprime1: f64) -> Self {
        Reaction { f, fprime0, fprime1 }
    }

    pub fn linear_speed(&self) -> f64 {
        2.0 * self.fprime0.max(0.0).sqrt()
    }

    /// Slopes λ∓ = (c ∓ √(c² − 4f′(0)))/2 of the linearization at the origin,
    /// or `None` when the origin is a focus.
    pub fn origin_slopes(&self, c: f64) -> Option<(f64, f64)> {
        let disc = c * c - 4.0 * self.fprime0;
        (disc >= 0.0).then(|| {
            let r = disc.sqrt();
            (0.5 * (c - r), 0.5 * (c + r))
        })
    }

    /// Positive slope μ of the unstable manifold at the saddle (1, 0).
    pub fn saddle_slope(&self, c: f64) -> f64 {
        0.5 * (-c + (c * c - 4.0 * self.fprime1).sqrt())
    }
}

/// Builds the reaction `f(·, β)` of a family.
pub fn family_reaction(
    fam: &SolvableFamily,
    beta: f64,
) -> Result<Reaction<impl Fn(f64) -> Result<f64> + Clone + Send + Sync + '_>> {
    let r = fam.reaction(beta)?;
    let (fprime0, fprime1) = (r.fprime0()?, r.fprime1()?);
    let (a, b) = (r.a, r.b);
    Ok(Reaction::new(move |u| fam.eval_f_with(u, a, b), fprime0, fprime1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub u: f64,
    pub f: f64,
    /// dF/dU = c − f(U)/F.
    pub df: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShootFailure {
    Crossing { u: f64 },
    Overshoot { slope: f64, lambda_plus: f64 },
    Oscillatory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootOutcome {
    pub c: f64,
    pub success: bool,
    pub failure: Option<ShootFailure>,
    pub crossing_u: Option<f64>,
    /// Sampled (U, F) pairs in decreasing U.
    pub trajectory: Vec<TrajectoryPoint>,
    /// F(δ)/δ when the trajectory reaches δ.
    pub slope_at_zero: Option<f64>,
}

impl ShootOutcome {
    /// Cubic Hermite interpolation of F at `u`, if `u` lies inside the
    /// sampled range.
    pub fn f_at(&self, u: f64) -> Option<f64> {
        let tr = &self.trajectory;
        if tr.len() < 2 || u > tr[0].u || u < tr[tr.len() - 1].u {
            return None;
        }
        // trajectory is sorted by decreasing u
        let idx = tr.partition_point(|p| p.u > u);
        let i = idx.clamp(1, tr.len() - 1);
        let (p0, p1) = (&tr[i - 1], &tr[i]);
        Some(crate::interp::hermite(p1.u, p0.u, p1.f, p0.f, p1.df, p0.df, u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    FastLambdaPlus,
    SlowLambdaMinus,
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CminResult {
    pub c_min: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    pub decay: Decay,
    /// True when the front at `c_l` was found directly.
    pub pulled: bool,
}

pub fn shoot_once<F>(reaction: &Reaction<F>, c: f64, opts: &ShootOptions) -> Result<ShootOutcome>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("speed must be positive, got {c}")));
    }
    if !(reaction.fprime1 < 0.0) {
        return Err(Error::Precondition(format!(
            "f'(1) = {} must be negative",
            reaction.fprime1
        )));
    }
    let (eps, delta) = (opts.eps, opts.delta);
    let u_start = 1.0 - eps;
    let mu = reaction.saddle_slope(c);
    let p0 = (mu * eps).powi(2);

    let f = &reaction.f;
    let mut trajectory = Vec::new();
    let rhs = |u: f64, p: f64| -> Result<f64> { Ok(2.0 * c * p.max(0.0).sqrt() - 2.0 * f(u)?) };
    let mut record = |u: f64, p: f64, dp: f64| {
        if opts.record_trajectory {
            let fv = p.max(0.0).sqrt();
            let df = if fv > 0.0 { dp / (2.0 * fv) } else { mu };
            trajectory.push(TrajectoryPoint { u, f: fv, df });
        }
        p > 0.0
    };

    let out = ode::integrate(
        rhs,
        u_start,
        p0,
        delta,
        0.1 * eps,
        &opts.tolerances,
        |p| p >= 0.0,
        &mut record,
    )?;

    let reached_zero = |u: f64| u <= 10.0 * delta;
    let crossing = match out.termination {
        Termination::Reached => None,
        Termination::Stopped { t, .. } | Termination::LeftDomain { t, .. } => Some(t),
    };
    if let Some(u) = crossing {
        if !reached_zero(u) {
            return Ok(ShootOutcome {
                c,
                success: false,
                failure: Some(ShootFailure::Crossing { u }),
                crossing_u: Some(u),
                trajectory,
                slope_at_zero: None,
            });
        }
    }

    let slope = out.y.max(0.0).sqrt() / out.t;
    let failure = match reaction.origin_slopes(c) {
        None => Some(ShootFailure::Oscillatory),
        Some((_, lambda_plus)) if slope > lambda_plus * (1.0 + opts.overshoot_margin) => {
            Some(ShootFailure::Overshoot { slope, lambda_plus })
        }
        Some(_) => None,
    };
    Ok(ShootOutcome {
        c,
        success: failure.is_none(),
        failure,
        crossing_u: None,
        trajectory,
        slope_at_zero: Some(slope),
    })
}

/// Minimal speed: checks `c_l` directly, otherwise bisects on shooting
/// success over `[c_l, c_upper]`.
pub fn minimal_speed<F>(reaction: &Reaction<F>, c_upper: f64, opts: &ShootOptions) -> Result<CminResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(reaction.fprime0 > 0.0) {
        return Err(Error::Precondition(format!(
            "f'(0) = {} must be positive",
            reaction.fprime0
        )));
    }
    let c_l = reaction.linear_speed();
    if c_upper < c_l {
        return Err(Error::Precondition(format!(
            "upper speed {c_upper} is below the linear speed {c_l}"
        )));
    }
    let quiet = ShootOptions {
        record_trajectory: false,
        ..*opts
    };

    let c_probe = c_l * (1.0 + 1e-6);
    if shoot_once(reaction, c_probe, &quiet)?.success {
        return Ok(CminResult {
            c_min: c_l,
            iterations: 1,
            bracket: (c_l, c_probe),
            decay: Decay::SlowLambdaMinus,
            pulled: true,
        });
    }
    let top = shoot_once(reaction, c_upper, &quiet)?;
    if !top.success {
        return Err(Error::BracketInvalid { c_upper });
    }
    let (mut lo, mut hi) = (c_probe, c_upper);
    let mut hi_slope = top.slope_at_zero;
    let mut iterations = 2;
    while hi - lo > opts.c_tol {
        let mid = 0.5 * (lo + hi);
        let out = shoot_once(reaction, mid, &quiet)?;
        iterations += 1;
        if out.success {
            hi = mid;
            hi_slope = out.slope_at_zero;
        } else {
            lo = mid;
        }
    }
    let c_min = 0.5 * (lo + hi);
    let decay = match (hi_slope, reaction.origin_slopes(hi)) {
        (Some(s), Some((minus, plus))) => classify_decay(s, minus, plus),
        _ => Decay::Ambiguous,
    };
    Ok(CminResult {
        c_min,
        iterations,
        bracket: (lo, hi),
        decay,
        pulled: false,
    })
}

/// Nearest of λ−/λ+ to the observed slope; ambiguous if the two rates are
/// within 10% of each other or the slope sits near their midpoint.
pub fn classify_decay(slope: f64, lambda_minus: f64, lambda_plus: f64) -> Decay {
    let gap = lambda_plus - lambda_minus;
    if gap < 0.1 * lambda_plus {
        return Decay::Ambiguous;
    }
    let (d_minus, d_plus) = ((slope - lambda_minus).abs(), (slope - lambda_plus).abs());
    if (d_minus - d_plus).abs() < 0.1 * gap {
        Decay::Ambiguous
    } else if d_plus < d_minus {
        Decay::FastLambdaPlus
    } else {
        Decay::SlowLambdaMinus
    }
}

/// Minimal speed of a solvable family, bracketing with the explicit front
/// speed `c_nl`.
pub fn family_minimal_speed(fam: &SolvableFamily, beta: f64, opts: &ShootOptions) -> Result<CminResult> {
    let c_nl = crate::speeds::nonlinear_speed(fam, beta)?;
    let c_l = crate::speeds::linear_speed(fam, beta)?;
    let reaction = family_reaction(fam, beta)?;
    minimal_speed(&reaction, c_nl.max(c_l), opts)
}
