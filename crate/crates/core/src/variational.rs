//! Hadeler–Rothe upper bounds
//! `c_min ≤ sup_{0<U<1} ( g′(U) + f(U)/g(U) )` for any `g > 0` on (0, 1)
//! with `g(0) = 0`, `g′(0) > 0`, with equality after taking the infimum over
//! such `g`.
//!
//! Two routes: the closed form for the one-parameter trial `g = νh`, and a
//! Nelder–Mead search over `g(U) = U(p₀ + p₁U + p₂U² + p₃U³)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{HprimeExtrema, SolvableFamily};
use crate::optim::{nelder_mead, NelderMeadOptions};

pub const DEFAULT_GRID_N: usize = 4001;
/// Objective value for infeasible trial functions.
pub const PENALTY: f64 = 1e6;

/// Where the ν-family optimum sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundCase {
    /// ν² ≤ B: the sup is attained at inf h′.
    #[serde(rename = "case_i")]
    CaseI,
    /// ν² ≥ B with the minimizer pinned at ν = √B (A ≤ 2LB).
    #[serde(rename = "case_ii_a")]
    CaseIIa,
    /// ν² ≥ B with an interior minimizer ν₀ = √((A − LB)/L) (A > 2LB).
    #[serde(rename = "case_ii_b")]
    CaseIIb,
}

impl BoundCase {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundCase::CaseI => "case_i",
            BoundCase::CaseIIa => "case_ii_a",
            BoundCase::CaseIIb => "case_ii_b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub value: f64,
    /// Optimal ν for the ν-family; `None` for polynomial trials.
    pub arg_nu: Option<f64>,
    pub case_label: Option<BoundCase>,
    pub trial_description: String,
    /// Coefficients p₀.. of the best polynomial trial (empty for the ν-family).
    pub params: Vec<f64>,
}

/// Closed-form bound from the trial `g = νh`, minimized over ν.
///
/// With `q(ν) = (A − LB)/ν + Lν` on ν² ≥ B: if A ≤ 2LB the minimum is
/// `A/√B` at `ν = √B`, otherwise `2√L·√(A − LB)` at `ν₀ = √((A − LB)/L)`.
pub fn hr_bound_nu_family(fam: &SolvableFamily, beta: f64, ext: &HprimeExtrema) -> Result<BoundResult> {
    let (a, b) = fam.coefficients(beta)?;
    let l_sup = ext.sup;
    if a <= 2.0 * l_sup * b {
        let nu = b.sqrt();
        Ok(BoundResult {
            value: a / nu,
            arg_nu: Some(nu),
            case_label: Some(BoundCase::CaseIIa),
            trial_description: format!("g = nu*h with nu = sqrt(B) = {nu:.12}"),
            params: Vec::new(),
        })
    } else {
        let nu0 = ((a - l_sup * b) / l_sup).sqrt();
        Ok(BoundResult {
            value: 2.0 * l_sup.sqrt() * (a - l_sup * b).sqrt(),
            arg_nu: Some(nu0),
            case_label: Some(BoundCase::CaseIIb),
            trial_description: format!("g = nu*h with nu = sqrt((A - L*B)/L) = {nu0:.12}"),
            params: Vec::new(),
        })
    }
}

/// The piecewise closed form of `sup (g′ + f/g)` for `g = νh`:
/// `(A − lB)/ν + lν` when ν² ≤ B and `(A − LB)/ν + Lν` when ν² ≥ B.
pub fn nu_family_sup(a: f64, b: f64, ext: &HprimeExtrema, nu: f64) -> (f64, BoundCase) {
    if nu * nu <= b {
        ((a - ext.inf * b) / nu + ext.inf * nu, BoundCase::CaseI)
    } else {
        ((a - ext.sup * b) / nu + ext.sup * nu, BoundCase::CaseIIb)
    }
}

/// A trial function g with its derivative.
pub trait Trial {
    fn value(&self, u: f64) -> Result<f64>;
    fn slope(&self, u: f64) -> Result<f64>;
}

/// `g = νh`.
pub struct ScaledProfile<'a> {
    pub family: &'a SolvableFamily,
    pub nu: f64,
}

impl Trial for ScaledProfile<'_> {
    fn value(&self, u: f64) -> Result<f64> {
        Ok(self.nu * self.family.h.eval(u)?)
    }
    fn slope(&self, u: f64) -> Result<f64> {
        Ok(self.nu * self.family.hprime.eval(u)?)
    }
}

/// `g(U) = U·(p₀ + p₁U + …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialTrial {
    pub params: Vec<f64>,
}

impl PolynomialTrial {
    fn poly(&self, u: f64) -> f64 {
        self.params.iter().rev().fold(0.0, |acc, &p| acc * u + p)
    }
}

impl Trial for PolynomialTrial {
    fn value(&self, u: f64) -> Result<f64> {
        Ok(u * self.poly(u))
    }
    fn slope(&self, u: f64) -> Result<f64> {
        // d/du Σ p_k u^{k+1} = Σ (k+1) p_k u^k
        let s = self
            .params
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &p)| acc * u + (k + 1) as f64 * p);
        Ok(s)
    }
}

/// Closures `(g, g′)` as a trial.
pub struct FnTrial<G, D> {
    pub g: G,
    pub dg: D,
}

impl<G: Fn(f64) -> f64, D: Fn(f64) -> f64> Trial for FnTrial<G, D> {
    fn value(&self, u: f64) -> Result<f64> {
        Ok((self.g)(u))
    }
    fn slope(&self, u: f64) -> Result<f64> {
        Ok((self.dg)(u))
    }
}

/// `f(·, β)` sampled on a uniform grid of [0, 1], reused across trials.
#[derive(Debug, Clone)]
pub struct SupGrid {
    us: Vec<f64>,
    fs: Vec<f64>,
    fprime0: f64,
    fprime1: f64,
}

impl SupGrid {
    pub fn new(fam: &SolvableFamily, beta: f64, grid_n: usize) -> Result<SupGrid> {
        if grid_n < 3 {
            return Err(Error::Precondition(format!("grid size {grid_n} must be at least 3")));
        }
        let r = fam.reaction(beta)?;
        let us: Vec<f64> = (1..grid_n - 1).map(|i| i as f64 / (grid_n - 1) as f64).collect();
        let fs = us.iter().map(|&u| r.f(u)).collect::<Result<Vec<_>>>()?;
        Ok(SupGrid {
            us,
            fs,
            fprime0: r.fprime0()?,
            fprime1: r.fprime1()?,
        })
    }

    /// `sup (g′ + f/g)` over the interior grid and the analytic endpoint limits.
    pub fn sup(&self, g: &dyn Trial) -> Result<f64> {
        let g0 = g.value(0.0)?;
        let d0 = g.slope(0.0)?;
        let d1 = g.slope(1.0)?;
        let g1 = g.value(1.0)?;
        if g0.abs() > 1e-12 {
            return Err(Error::InvalidTrial(format!("g(0) = {g0} is not 0")));
        }
        if !(d0 > 0.0) {
            return Err(Error::InvalidTrial(format!("g'(0) = {d0} is not positive")));
        }
        let mut best = d0 + self.fprime0 / d0;
        for (&u, &f) in self.us.iter().zip(&self.fs) {
            let gu = g.value(u)?;
            if !(gu > 0.0) {
                return Err(Error::InvalidTrial(format!("g({u}) = {gu} is not positive")));
            }
            let v = g.slope(u)? + f / gu;
            if v > best {
                best = v;
            }
        }
        // U → 1: f(1) = 0, so the limit is g′(1) unless g vanishes there too.
        let end = if g1.abs() > 1e-12 * d1.abs().max(1.0) {
            Some(d1)
        } else if d1 != 0.0 {
            Some(d1 + self.fprime1 / d1)
        } else {
            None
        };
        if let Some(v) = end {
            best = best.max(v);
        }
        if !best.is_finite() {
            return Err(Error::InvalidTrial(format!("sup is not finite ({best})")));
        }
        Ok(best)
    }
}

pub fn numeric_sup(fam: &SolvableFamily, beta: f64, g: &dyn Trial, grid_n: usize) -> Result<f64> {
    SupGrid::new(fam, beta, grid_n)?.sup(g)
}

#[derive(Debug, Clone, Copy)]
pub struct MinmaxOptions {
    /// Number of polynomial coefficients, 1 to 4.
    pub param_count: usize,
    /// Nelder–Mead iterations per restart.
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub grid_n: usize,
}

impl Default for MinmaxOptions {
    fn default() -> Self {
        MinmaxOptions {
            param_count: 4,
            iterations: 2000,
            restarts: 8,
            seed: 0,
            grid_n: DEFAULT_GRID_N,
        }
    }
}

/// Minimizes the Hadeler–Rothe sup over polynomial trials. Restart 0 starts
/// from `g = ν*·U(1 − U)` with ν* the ν-family optimum; the others perturb it
/// with a ChaCha stream seeded by `seed + restart`.
pub fn numeric_minmax(fam: &SolvableFamily, beta: f64, opts: &MinmaxOptions) -> Result<BoundResult> {
    let k = opts.param_count;
    if !(1..=4).contains(&k) {
        return Err(Error::Precondition(format!("param count {k} must be between 1 and 4")));
    }
    let grid = SupGrid::new(fam, beta, opts.grid_n)?;
    let ext = fam.hprime_extrema(2000, 1e-12)?;
    let nu = hr_bound_nu_family(fam, beta, &ext)?.arg_nu.unwrap_or(1.0);
    let mut base = vec![0.0; k];
    base[0] = nu;
    if k > 1 {
        base[1] = -nu;
    }
    let objective = |p: &[f64]| -> f64 { grid.sup(&PolynomialTrial { params: p.to_vec() }).unwrap_or(PENALTY) };
    let nm = NelderMeadOptions {
        max_iter: opts.iterations,
        step: 0.1,
        ..Default::default()
    };
    let scale = nu.abs().max(1.0);

    let runs: Vec<_> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut start = base.clone();
            if i > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
                for _ in 0..50 {
                    let cand: Vec<f64> = base.iter().map(|b| b + scale * rng.gen_range(-0.5..0.5)).collect();
                    if objective(&cand) < PENALTY {
                        start = cand;
                        break;
                    }
                }
            }
            let first = nelder_mead(objective, &start, &nm);
            // one restart from the best vertex to escape a collapsed simplex
            let second = nelder_mead(objective, &first.x, &nm);
            if second.value <= first.value {
                second
            } else {
                first
            }
        })
        .collect();

    let best = runs
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one restart");
    if best.value >= PENALTY {
        return Err(Error::InvalidTrial("no feasible polynomial trial found".into()));
    }
    let mut desc = format!(
        "g = U*({}) over {} restarts",
        best.x
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{p:.9}*U^{i}"))
            .collect::<Vec<_>>()
            .join(" + "),
        runs.len()
    );
    if !best.converged {
        desc.push_str(" (not converged)");
    }
    Ok(BoundResult {
        value: best.value,
        arg_nu: None,
        case_label: None,
        trial_description: desc,
        params: best.x.clone(),
    })
}
