//! β-sweeps: one speed report per β, the empirical exchange point and its
//! comparison with the root of `A − 2B`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{HprimeExtrema, SolvableFamily};
use crate::lmn::pushed_certificate;
use crate::profile::{explicit_profile, DEFAULT_Z_SPAN};
use crate::shoot::{family_minimal_speed, CminResult, ShootOptions};
use crate::speeds::{
    classify, exchange_candidate, gamma, linear_speed, monotonicity_hypotheses, nonlinear_speed, Bound, Classification,
    ExchangePoint, Regime, SpeedReport, TheoryContext, CLASSIFY_TOL,
};
use crate::variational::hr_bound_nu_family;

pub const HR_BOUND_LABEL: &str = "hr_nu_family";
pub const CSV_HEADER: &str = "beta,c_l,c_nl,gamma,c_min,regime,hr_bound,phi_cert";

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub shoot: ShootOptions,
    pub classify_tol: f64,
    /// Rows this close to the analytic β* are flagged.
    pub near_exchange: f64,
    pub validation_grid: usize,
    pub profile_nodes: usize,
    pub z_span: f64,
    /// Evaluate the Φ certificate on the explicit front.
    pub certificate: bool,
    /// β tolerance of [`refine_exchange`].
    pub refine_tol: f64,
    /// Refinement predicate threshold on `c_min − c_l`.
    pub refine_speed_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            shoot: ShootOptions {
                record_trajectory: false,
                ..ShootOptions::default()
            },
            classify_tol: CLASSIFY_TOL,
            near_exchange: 0.02,
            validation_grid: 1000,
            profile_nodes: 4001,
            z_span: DEFAULT_Z_SPAN,
            certificate: true,
            refine_tol: 1e-3,
            refine_speed_tol: 0.0,
        }
    }
}

/// Everything computed for one β.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDetail {
    pub report: SpeedReport,
    pub cmin: CminResult,
    pub classification: Classification,
    pub hr_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    #[serde(flatten)]
    pub detail: Option<RowDetail>,
    pub phi_cert: Option<bool>,
    pub near_exchange: bool,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn regime(&self) -> Option<Regime> {
        self.detail.as_ref().map(|d| d.report.regime)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exchange {
    pub empirical: Option<f64>,
    pub analytic: Option<ExchangePoint>,
    /// `|empirical − analytic β*|`.
    pub agreement: Option<f64>,
    /// Consecutive rows bracketing the first pulled → pushed flip.
    pub bracket: Option<(f64, f64)>,
    pub refined: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub family: String,
    pub rows: Vec<SweepRow>,
    pub exchange: Exchange,
    /// β pairs where the regime goes from pushed back to pulled.
    pub regime_reversals: Vec<(f64, f64)>,
}

/// Theory context for classification on `[lo, hi]`.
pub fn theory_context(fam: &SolvableFamily, lo: f64, hi: f64, ext: &HprimeExtrema) -> Result<TheoryContext> {
    let hypotheses = if hi > lo {
        Some(monotonicity_hypotheses(fam, lo, hi, 200)?)
    } else {
        None
    };
    Ok(TheoryContext {
        hprime_sup: ext.sup,
        hypotheses,
    })
}

/// Speeds, shooting minimum, regime and the ν-family bound at one β.
pub fn compute_report(
    fam: &SolvableFamily,
    beta: f64,
    ext: &HprimeExtrema,
    ctx: &TheoryContext,
    opts: &SweepOptions,
) -> Result<RowDetail> {
    let fam = &fam.validate(beta, opts.validation_grid)?.into_result()?;
    let c_l = linear_speed(fam, beta)?;
    let c_nl = nonlinear_speed(fam, beta)?;
    let g = gamma(fam, beta)?;
    let cmin = family_minimal_speed(fam, beta, &opts.shoot)?;
    let classification = classify(fam, beta, cmin.c_min, opts.classify_tol, ctx)?;
    let hr = hr_bound_nu_family(fam, beta, ext)?;
    Ok(RowDetail {
        report: SpeedReport {
            beta,
            c_l,
            c_nl,
            gamma: g,
            c_min: cmin.c_min,
            regime: classification.regime,
            bounds: vec![
                Bound {
                    label: "c_nl".into(),
                    value: c_nl,
                },
                Bound {
                    label: HR_BOUND_LABEL.into(),
                    value: hr.value,
                },
            ],
        },
        cmin,
        classification,
        hr_bound: hr.value,
    })
}

/// Φ certificate on the explicit front at `c_nl`.
pub fn explicit_certificate(fam: &SolvableFamily, beta: f64, opts: &SweepOptions) -> Result<bool> {
    let profile = explicit_profile(fam, beta, opts.z_span, opts.profile_nodes)?;
    Ok(pushed_certificate(fam, beta, profile.c, &profile, opts.classify_tol)?.certified)
}

pub fn run_sweep(fam: &SolvableFamily, betas: &[f64], opts: &SweepOptions) -> Result<SweepTable> {
    if betas.is_empty() {
        return Err(Error::Precondition("empty β grid".into()));
    }
    if betas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("β grid must be strictly increasing".into()));
    }
    let fam = &fam.with_unit_slope()?;
    let (lo, hi) = (betas[0], betas[betas.len() - 1]);
    let ext = fam.hprime_extrema(opts.validation_grid, 1e-12)?;
    let ctx = theory_context(fam, lo, hi, &ext)?;
    let analytic = if hi > lo {
        exchange_candidate(fam, lo, hi).ok()
    } else {
        None
    };

    let rows: Vec<SweepRow> = betas
        .par_iter()
        .map(|&beta| {
            let near_exchange = analytic.is_some_and(|x| (beta - x.beta_star).abs() < opts.near_exchange);
            match compute_report(fam, beta, &ext, &ctx, opts) {
                Ok(detail) => {
                    let phi_cert = if opts.certificate {
                        explicit_certificate(fam, beta, opts).ok()
                    } else {
                        None
                    };
                    SweepRow {
                        beta,
                        detail: Some(detail),
                        phi_cert,
                        near_exchange,
                        error: None,
                    }
                }
                Err(e) => SweepRow {
                    beta,
                    detail: None,
                    phi_cert: None,
                    near_exchange,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let regimes: Vec<(f64, Regime)> = rows.iter().filter_map(|r| r.regime().map(|g| (r.beta, g))).collect();
    let (empirical, bracket) = first_flip(&regimes);
    let regime_reversals = regimes
        .windows(2)
        .filter(|w| w[0].1 == Regime::Pushed && w[1].1 == Regime::Pulled)
        .map(|w| (w[0].0, w[1].0))
        .collect();
    let agreement = match (empirical, analytic) {
        (Some(e), Some(a)) => Some((e - a.beta_star).abs()),
        _ => None,
    };
    Ok(SweepTable {
        family: fam.name.clone(),
        rows,
        exchange: Exchange {
            empirical,
            analytic,
            agreement,
            bracket,
            refined: None,
        },
        regime_reversals,
    })
}

/// First non-pushed → pushed step. A degenerate row right before the flip
/// is itself the estimate; otherwise the midpoint of the two rows. The
/// bracket runs from the last pulled row to the first pushed one.
fn first_flip(regimes: &[(f64, Regime)]) -> (Option<f64>, Option<(f64, f64)>) {
    for i in 1..regimes.len() {
        let (b0, r0) = regimes[i - 1];
        let (b1, r1) = regimes[i];
        if r1 != Regime::Pushed || r0 == Regime::Pushed {
            continue;
        }
        let estimate = if r0 == Regime::Degenerate { b0 } else { 0.5 * (b0 + b1) };
        let lo = regimes[..i]
            .iter()
            .rev()
            .find(|(_, r)| *r == Regime::Pulled)
            .map(|p| p.0);
        return (Some(estimate), lo.map(|lo| (lo, b1)));
    }
    (None, None)
}

/// Bisection on `c_min − c_l > speed_tol` over `bracket`. The predicate is
/// sampled at five points first; a non-step pattern is an error.
pub fn refine_exchange(fam: &SolvableFamily, bracket: (f64, f64), opts: &SweepOptions) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Precondition(format!("empty bracket ({lo}, {hi})")));
    }
    let fam = &fam.with_unit_slope()?;
    let pushed = |beta: f64| -> Result<bool> {
        let c_l = linear_speed(fam, beta)?;
        let r = family_minimal_speed(fam, beta, &opts.shoot)?;
        Ok(r.c_min - c_l > opts.refine_speed_tol)
    };
    let samples: Vec<(f64, bool)> = (0..=4)
        .map(|i| {
            let b = lo + (hi - lo) * i as f64 / 4.0;
            pushed(b).map(|p| (b, p))
        })
        .collect::<Result<_>>()?;
    let first_true = samples.iter().position(|s| s.1);
    let step = first_true.is_some_and(|k| k > 0 && samples[k..].iter().all(|s| s.1));
    if !step {
        let shown = samples
            .iter()
            .map(|(b, p)| format!("β={b}: {}", if *p { "pushed" } else { "pulled" }))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::NonMonotone(shown));
    }
    let k = first_true.unwrap();
    lo = samples[k - 1].0;
    hi = samples[k].0;
    while hi - lo > opts.refine_tol {
        let mid = 0.5 * (lo + hi);
        if pushed(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Runs [`refine_exchange`] on the table's bracket, if it has one.
pub fn refine_table(fam: &SolvableFamily, table: &mut SweepTable, opts: &SweepOptions) -> Result<Option<f64>> {
    let Some(bracket) = table.exchange.bracket else {
        return Ok(None);
    };
    let refined = refine_exchange(fam, bracket, opts)?;
    table.exchange.refined = Some(refined);
    if let Some(a) = table.exchange.analytic {
        table.exchange.agreement = Some((refined - a.beta_star).abs());
    }
    Ok(Some(refined))
}

/// Evenly spaced grid with `steps` points from `from` to `to`.
pub fn linspace(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            let cert = row.phi_cert.map(|c| c.to_string()).unwrap_or_default();
            match &row.detail {
                Some(d) => {
                    let r = &d.report;
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        num(r.beta),
                        num(r.c_l),
                        num(r.c_nl),
                        num(r.gamma),
                        num(r.c_min),
                        r.regime.as_str(),
                        num(d.hr_bound),
                        cert
                    )?;
                }
                None => writeln!(w, "{},,,,,error,,", num(row.beta))?,
            }
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(name: &str) -> SolvableFamily {
        SolvableFamily::builtin(name).unwrap()
    }

    #[test]
    fn hadeler_rothe_sweep() {
        let hr = fam("hadeler_rothe");
        let betas = [0.5, 1.0, 1.5, 1.9, 2.1, 3.0, 4.0, 8.0];
        let t = run_sweep(&hr, &betas, &SweepOptions::default()).unwrap();
        assert_eq!(t.rows.iter().map(|r| r.beta).collect::<Vec<_>>(), betas);
        assert_eq!(t.exchange.bracket, Some((1.9, 2.1)));
        let emp = t.exchange.empirical.unwrap();
        assert!((emp - 2.0).abs() < 1e-12);
        assert!((t.exchange.analytic.unwrap().beta_star - 2.0).abs() < 1e-9);
        assert!(t.exchange.agreement.unwrap() <= 0.1);
        assert!(t.regime_reversals.is_empty());
        for row in &t.rows {
            let d = row.detail.as_ref().unwrap();
            let r = &d.report;
            assert!(r.c_l - 1e-6 <= r.c_min && r.c_min <= r.c_nl + 1e-6);
            assert!(d.hr_bound >= r.c_min - 1e-6);
            assert_eq!(row.phi_cert, Some(row.beta > 2.0));
        }
    }

    #[test]
    fn invalid_rows_do_not_abort() {
        let cgm = fam("cgm_sine");
        let t = run_sweep(&cgm, &[0.3, 0.7, 1.5], &SweepOptions::default()).unwrap();
        assert!(t.rows[2].error.is_some());
        assert!(t.rows[0].detail.is_some() && t.rows[1].detail.is_some());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].contains(",error,"));
        assert_eq!(lines[1].split(',').count(), 8);
    }

    #[test]
    fn refinement_brackets() {
        let opts = SweepOptions::default();
        for (name, bracket, expect, tol) in [
            ("hadeler_rothe", (1.9, 2.1), 2.0, 0.01),
            ("cgm_sine", (0.4, 0.6), 0.5, 0.01),
            ("exp_demo", (0.8, 1.2), 1.0, 0.02),
        ] {
            let r = refine_exchange(&fam(name), bracket, &opts).unwrap();
            assert!((r - expect).abs() <= tol, "{name}: {r}");
        }
    }

    #[test]
    fn non_step_predicate_is_reported() {
        // exp_demo is pushed at small β, pulled near 0.8, pushed above 1
        let err = refine_exchange(&fam("exp_demo"), (0.2, 1.2), &SweepOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonMonotone(_)), "{err}");
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.1, 0.9, 9).len(), 9);
        assert_eq!(linspace(0.1, 0.9, 9)[8], 0.9);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }
}
