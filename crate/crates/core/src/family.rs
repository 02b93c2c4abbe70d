//! Solvable monostable nonlinearities `f(u, β) = h(u)(A(β) − B(β)h′(u))`.
//!
//! A family is stored as the three user formulas plus the symbolic derivative
//! of `h`; `f` itself is always derived. Families admit the explicit front
//! `−U′ = √B·h(U)` travelling at `A/√B`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::ExprTree;

pub const BUILTIN_NAMES: [&str; 3] = ["hadeler_rothe", "cgm_sine", "exp_demo"];

/// Tolerances used by [`SolvableFamily::validate`].
const ENDPOINT_TOL: f64 = 1e-10;
const SLOPE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SolvableFamily {
    pub name: String,
    pub h: ExprTree,
    pub hprime: ExprTree,
    pub a: ExprTree,
    pub b: ExprTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HprimeExtrema {
    /// sup of h′ over (0, 1), endpoint limits included.
    pub sup: f64,
    /// inf of h′ over (0, 1), endpoint limits included.
    pub inf: f64,
    pub argmax_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub normalized: bool,
    /// Rescaling factor α = h′(0) applied during normalization (1 if none).
    pub scale: f64,
    pub checks: Vec<Check>,
    pub beta_tested: f64,
    #[serde(skip)]
    pub family: SolvableFamily,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn into_result(self) -> Result<SolvableFamily> {
        if self.ok {
            return Ok(self.family);
        }
        let msg = self
            .failures()
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidFamily(msg))
    }
}

impl SolvableFamily {
    pub fn new(name: &str, h: ExprTree, a: ExprTree, b: ExprTree) -> Result<SolvableFamily> {
        if h.variable() != "u" {
            return Err(Error::InvalidFamily(format!(
                "h must be an expression in u, not {}",
                h.variable()
            )));
        }
        for (label, t) in [("A", &a), ("B", &b)] {
            if t.variable() != "beta" {
                return Err(Error::InvalidFamily(format!(
                    "{label} must be an expression in beta, not {}",
                    t.variable()
                )));
            }
        }
        let hprime = h.differentiate("u");
        Ok(SolvableFamily {
            name: name.to_string(),
            h,
            hprime,
            a,
            b,
        })
    }

    /// Builds a family from the three formula strings (`h` in `u`, `A` and `B`
    /// in `beta`).
    pub fn from_sources(name: &str, h: &str, a: &str, b: &str) -> Result<SolvableFamily> {
        SolvableFamily::new(
            name,
            ExprTree::parse(h, "u")?,
            ExprTree::parse(a, "beta")?,
            ExprTree::parse(b, "beta")?,
        )
    }

    pub fn builtin(name: &str) -> Result<SolvableFamily> {
        let (h, a, b) = builtin_sources(name).ok_or_else(|| Error::UnknownBuiltin(name.into()))?;
        SolvableFamily::from_sources(name, h, a, b)
    }

    pub fn a_at(&self, beta: f64) -> Result<f64> {
        self.a.eval(beta)
    }

    pub fn b_at(&self, beta: f64) -> Result<f64> {
        self.b.eval(beta)
    }

    pub fn coefficients(&self, beta: f64) -> Result<(f64, f64)> {
        Ok((self.a_at(beta)?, self.b_at(beta)?))
    }

    pub fn eval_f(&self, u: f64, beta: f64) -> Result<f64> {
        let (a, b) = self.coefficients(beta)?;
        self.eval_f_with(u, a, b)
    }

    /// `f` with the β-coefficients already evaluated.
    pub fn eval_f_with(&self, u: f64, a: f64, b: f64) -> Result<f64> {
        Ok(self.h.eval(u)? * (a - b * self.hprime.eval(u)?))
    }

    /// f′(u) = h′(A − Bh′) − B·h·h″, evaluated symbolically.
    pub fn eval_fprime(&self, u: f64, beta: f64) -> Result<f64> {
        let (a, b) = self.coefficients(beta)?;
        let hp = self.hprime.eval(u)?;
        let hpp = self.hprime.differentiate("u").eval(u)?;
        Ok(hp * (a - b * hp) - b * self.h.eval(u)? * hpp)
    }

    /// Freezes A(β), B(β) so `f` can be evaluated repeatedly.
    pub fn reaction(&self, beta: f64) -> Result<Reaction<'_>> {
        let (a, b) = self.coefficients(beta)?;
        Ok(Reaction { family: self, a, b })
    }

    /// Rescales `h ↦ h/α`, `A ↦ αA`, `B ↦ α²B` so that h′(0) = 1. Leaves
    /// `f` pointwise unchanged.
    pub fn normalized(&self, alpha: f64) -> SolvableFamily {
        let h = self.h.scaled(1.0 / alpha);
        SolvableFamily {
            name: self.name.clone(),
            hprime: h.differentiate("u"),
            h,
            a: self.a.scaled(alpha),
            b: self.b.scaled(alpha * alpha),
        }
    }

    /// The family rescaled so that h′(0) = 1, or a copy if it already is.
    pub fn with_unit_slope(&self) -> Result<SolvableFamily> {
        let slope = self.hprime.eval(0.0)?;
        if (slope - 1.0).abs() <= SLOPE_TOL {
            Ok(self.clone())
        } else if slope > 0.0 && slope.is_finite() {
            Ok(self.normalized(slope))
        } else {
            Err(Error::InvalidFamily(format!("h'(0) = {slope} is not positive")))
        }
    }

    /// Grid-based check of the solvability and monostability hypotheses at
    /// one β. Evaluation failures are reported as failed checks. When
    /// h′(0) ≠ 1 but positive, the family is normalized first and the checks
    /// run on the rescaled family.
    pub fn validate(&self, beta: f64, grid_n: usize) -> Result<ValidationReport> {
        if grid_n < 100 {
            return Err(Error::Precondition(format!(
                "validation grid needs ≥ 100 points, got {grid_n}"
            )));
        }
        let mut checks = Vec::new();
        let mut push = |name: &str, pass: bool, detail: String| {
            checks.push(Check {
                name: name.into(),
                pass,
                detail,
            })
        };

        let mut family = self.clone();
        let mut scale = 1.0;
        match self.hprime.eval(0.0) {
            Ok(slope) if (slope - 1.0).abs() <= SLOPE_TOL => {
                push("h'(0)=1", true, format!("h'(0) = {slope}"));
            }
            Ok(slope) if slope > 0.0 && slope.is_finite() => {
                scale = slope;
                family = self.normalized(slope);
                push("h'(0)=1", true, format!("normalized by alpha = {slope}"));
            }
            Ok(slope) => push("h'(0)=1", false, format!("h'(0) = {slope} is not positive")),
            Err(e) => push("h'(0)=1", false, e.to_string()),
        }
        let fam = &family;

        for (label, u) in [("h(0)=0", 0.0), ("h(1)=0", 1.0)] {
            match fam.h.eval(u) {
                Ok(v) => push(label, v.abs() <= ENDPOINT_TOL, format!("h({u}) = {v}")),
                Err(e) => push(label, false, e.to_string()),
            }
        }

        let interior: Vec<f64> = (1..grid_n).map(|i| i as f64 / grid_n as f64).collect();
        let h_vals: Result<Vec<f64>> = interior.iter().map(|&u| fam.h.eval(u)).collect();
        let hp_vals: Result<Vec<f64>> = std::iter::once(0.0)
            .chain(interior.iter().copied())
            .chain(std::iter::once(1.0))
            .map(|u| fam.hprime.eval(u))
            .collect();
        match &h_vals {
            Ok(vals) => {
                let worst = interior
                    .iter()
                    .zip(vals)
                    .min_by(|x, y| x.1.total_cmp(y.1))
                    .map(|(&u, &v)| (u, v))
                    .unwrap_or((0.5, 1.0));
                push(
                    "h>0 on (0,1)",
                    worst.1 > 0.0,
                    format!("min h = {} at u = {}", worst.1, worst.0),
                );
            }
            Err(e) => push("h>0 on (0,1)", false, e.to_string()),
        }

        let coeffs = fam.coefficients(beta);
        match coeffs {
            Ok((a, b)) => {
                push("A(beta)>0", a > 0.0, format!("A = {a}"));
                push("B(beta)>0", b > 0.0, format!("B = {b}"));
                match &hp_vals {
                    Ok(hp) => {
                        let min_margin = hp.iter().map(|&d| a - b * d).fold(f64::INFINITY, f64::min);
                        push(
                            "A-B*h'(u)>0",
                            min_margin > 0.0,
                            format!("min over grid of A - B h' = {min_margin}"),
                        );
                        let f0 = hp[0] * (a - b * hp[0]);
                        let last = *hp.last().unwrap();
                        let f1 = last * (a - b * last);
                        push("f'(0)>0", f0 > 0.0, format!("f'(0) = {f0}"));
                        push("f'(1)<0", f1 < 0.0, format!("f'(1) = {f1}"));
                    }
                    Err(e) => push("A-B*h'(u)>0", false, e.to_string()),
                }
            }
            Err(e) => push("A(beta), B(beta) evaluate", false, e.to_string()),
        }

        let ok = checks.iter().all(|c| c.pass);
        Ok(ValidationReport {
            ok,
            normalized: scale != 1.0,
            scale,
            checks,
            beta_tested: beta,
            family,
        })
    }

    /// sup and inf of h′ over (0, 1): grid scan followed by golden-section
    /// refinement around the best cells. Endpoint values count as limits.
    pub fn hprime_extrema(&self, grid_n: usize, refine_tol: f64) -> Result<HprimeExtrema> {
        let n = grid_n.max(2);
        let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&u| self.hprime.eval(u)).collect::<Result<_>>()?;

        let imax = argbest(&vals, |a, b| a > b);
        let imin = argbest(&vals, |a, b| a < b);
        let hp = |u: f64| self.hprime.eval(u);

        let (argmax_u, sup) = refine(&hp, &xs, imax, refine_tol)?;
        let (_, neg_inf) = refine(&|u| hp(u).map(|v| -v), &xs, imin, refine_tol)?;
        Ok(HprimeExtrema {
            sup: sup.max(vals[imax]),
            inf: (-neg_inf).min(vals[imin]),
            argmax_u,
        })
    }
}

fn argbest(vals: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate() {
        if better(v, vals[best]) {
            best = i;
        }
    }
    best
}

/// Golden-section maximization of `g` on the cells adjacent to grid index `i`.
fn refine(g: &dyn Fn(f64) -> Result<f64>, xs: &[f64], i: usize, tol: f64) -> Result<(f64, f64)> {
    let lo = xs[i.saturating_sub(1)];
    let hi = xs[(i + 1).min(xs.len() - 1)];
    let (mut a, mut b) = (lo, hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    let tol = tol.max(1e-15);
    while (b - a).abs() > tol {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let gx = g(x)?;
    let (x_best, g_best) = [(xs[i], g(xs[i])?), (x, gx)]
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap();
    Ok((x_best, g_best))
}

fn builtin_sources(name: &str) -> Option<(&'static str, &'static str, &'static str)> {
    Some(match name {
        "hadeler_rothe" => ("u*(1-u)", "1 + beta/2", "beta/2"),
        "cgm_sine" => ("sin(pi*u)/pi", "1/2", "beta/2"),
        "exp_demo" => ("exp(2*u)*u*(1-u)", "1", "beta/2"),
        _ => return None,
    })
}

/// Formula strings `(h, A, B)` for a builtin family.
pub fn builtin_formulas(name: &str) -> Option<(&'static str, &'static str, &'static str)> {
    builtin_sources(name)
}

/// `f(·, β)` with the coefficients frozen.
#[derive(Debug, Clone, Copy)]
pub struct Reaction<'a> {
    family: &'a SolvableFamily,
    pub a: f64,
    pub b: f64,
}

impl Reaction<'_> {
    pub fn f(&self, u: f64) -> Result<f64> {
        self.family.eval_f_with(u, self.a, self.b)
    }

    /// f′(0) = h′(0)(A − Bh′(0)).
    pub fn fprime0(&self) -> Result<f64> {
        let hp = self.family.hprime.eval(0.0)?;
        Ok(hp * (self.a - self.b * hp))
    }

    /// f′(1) = h′(1)(A − Bh′(1)); uses h(1) = 0.
    pub fn fprime1(&self) -> Result<f64> {
        let hp = self.family.hprime.eval(1.0)?;
        Ok(hp * (self.a - self.b * hp))
    }

    pub fn family(&self) -> &SolvableFamily {
        self.family
    }

    /// Samples f on `n + 1` equispaced points of [0, 1] into a lookup table.
    pub fn tabulate(&self, n: usize) -> Result<ReactionTable> {
        let values = (0..=n)
            .map(|i| self.f(i as f64 / n as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReactionTable {
            values,
            slope0: self.fprime0()?,
            slope1: self.fprime1()?,
        })
    }
}

/// Piecewise-linear table of `f` on [0, 1] with linear extension outside
/// using the endpoint derivatives. Cheap enough for the PDE inner loop.
#[derive(Debug, Clone)]
pub struct ReactionTable {
    values: Vec<f64>,
    slope0: f64,
    slope1: f64,
}

impl ReactionTable {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let n = self.values.len() - 1;
        if u <= 0.0 {
            return self.values[0] + self.slope0 * u;
        }
        if u >= 1.0 {
            return self.values[n] + self.slope1 * (u - 1.0);
        }
        let x = u * n as f64;
        let i = (x as usize).min(n - 1);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn builtin_coefficients() {
        let hr = SolvableFamily::builtin("hadeler_rothe").unwrap();
        assert_eq!(hr.coefficients(2.0).unwrap(), (2.0, 1.0));
        let cgm = SolvableFamily::builtin("cgm_sine").unwrap();
        assert_eq!(cgm.coefficients(0.5).unwrap(), (0.5, 0.25));
        assert!(matches!(
            SolvableFamily::builtin("fisher"),
            Err(Error::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn validate_hadeler_rothe() {
        let hr = SolvableFamily::builtin("hadeler_rothe").unwrap();
        let rep = hr.validate(2.0, 1000).unwrap();
        assert!(rep.ok, "{:?}", rep.checks);
        assert!(!rep.normalized);

        let rep = hr.validate(-0.5, 1000).unwrap();
        assert!(!rep.ok);
        let failed: Vec<_> = rep.failures().map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"B(beta)>0"), "{failed:?}");
    }

    #[test]
    fn validate_rejects_small_grid() {
        let hr = SolvableFamily::builtin("hadeler_rothe").unwrap();
        assert!(matches!(hr.validate(2.0, 10), Err(Error::Precondition(_))));
    }

    #[test]
    fn validate_reports_domain_error_as_failure() {
        let fam = SolvableFamily::from_sources("bad", "u*(1-u)", "1 + log(beta)", "beta/2").unwrap();
        let rep = fam.validate(-1.0, 200).unwrap();
        assert!(!rep.ok);
    }

    #[test]
    fn auto_normalization_preserves_f() {
        let fam = SolvableFamily::from_sources("scaled", "2*u*(1-u)", "1 + beta/2", "beta/2").unwrap();
        let rep = fam.validate(1.0, 1000).unwrap();
        assert!(rep.ok, "{:?}", rep.checks);
        assert!(rep.normalized);
        assert_eq!(rep.scale, 2.0);
        let norm = &rep.family;
        assert_relative_eq!(norm.hprime.eval(0.0).unwrap(), 1.0, epsilon = 1e-15);
        for i in 0..=1000 {
            let u = i as f64 / 1000.0;
            for beta in [0.3, 1.0, 4.0] {
                let d = (fam.eval_f(u, beta).unwrap() - norm.eval_f(u, beta).unwrap()).abs();
                assert!(d <= 1e-12, "u={u} beta={beta} diff={d}");
            }
        }
    }

    #[test]
    fn eval_f_values() {
        let hr = SolvableFamily::builtin("hadeler_rothe").unwrap();
        assert_relative_eq!(hr.eval_f(0.5, 2.0).unwrap(), 0.5, epsilon = 1e-15);
        for name in BUILTIN_NAMES {
            let fam = SolvableFamily::builtin(name).unwrap();
            assert_eq!(fam.eval_f(0.0, 0.7).unwrap(), 0.0);
            assert!(fam.eval_f(1.0, 0.7).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn fprime_matches_reaction_endpoints() {
        let hr = SolvableFamily::builtin("hadeler_rothe").unwrap();
        let r = hr.reaction(2.0).unwrap();
        assert_relative_eq!(r.fprime1().unwrap(), -3.0, epsilon = 1e-14);
        assert_relative_eq!(r.fprime0().unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(hr.eval_fprime(1.0, 2.0).unwrap(), -3.0, epsilon = 1e-14);
    }

    #[test]
    fn extrema_of_builtins() {
        let hr = SolvableFamily::builtin("hadeler_rothe")
            .unwrap()
            .hprime_extrema(1000, 1e-12)
            .unwrap();
        assert_relative_eq!(hr.sup, 1.0, epsilon = 1e-12);
        assert_relative_eq!(hr.inf, -1.0, epsilon = 1e-12);
        let cgm = SolvableFamily::builtin("cgm_sine")
            .unwrap()
            .hprime_extrema(1000, 1e-12)
            .unwrap();
        assert_relative_eq!(cgm.sup, 1.0, epsilon = 1e-12);
        assert_relative_eq!(cgm.inf, -1.0, epsilon = 1e-12);
        let ex = SolvableFamily::builtin("exp_demo")
            .unwrap()
            .hprime_extrema(1000, 1e-12)
            .unwrap();
        // maximizer solves u² + u − 1/2 = 0
        let u_star = (3f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(ex.argmax_u, u_star, epsilon = 1e-6);
        assert_relative_eq!(
            ex.sup,
            (2.0 * u_star).exp() * (1.0 - 2.0 * u_star * u_star),
            epsilon = 1e-12
        );
        assert!((ex.sup - 1.52218).abs() < 1e-5);
        assert_relative_eq!(ex.inf, -std::f64::consts::E.powi(2), epsilon = 1e-12);
    }

    #[test]
    fn reaction_table_interpolates() {
        let hr = SolvableFamily::builtin("hadeler_rothe").unwrap();
        let r = hr.reaction(4.0).unwrap();
        let t = r.tabulate(100_000).unwrap();
        for i in 0..=97 {
            let u = i as f64 / 97.0;
            assert!((t.eval(u) - r.f(u).unwrap()).abs() < 1e-9);
        }
        assert_relative_eq!(t.eval(-0.01), -0.01 * r.fprime0().unwrap(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn builtins_are_monostable(idx in 0usize..3, t in 0.0f64..1.0) {
            let name = BUILTIN_NAMES[idx];
            // valid ranges: HR β > 0, CGM β ∈ (0, 1), exp_demo β ∈ (0, 2/L)
            // since A − Bh′ > 0 needs B·L < A.
            let beta = match name {
                "hadeler_rothe" => 0.05 + 9.0 * t,
                "cgm_sine" => 0.02 + 0.96 * t,
                _ => 0.02 + 1.2 * t,
            };
            let fam = SolvableFamily::builtin(name).unwrap();
            let rep = fam.validate(beta, 1000).unwrap();
            prop_assert!(rep.ok, "{} β={} {:?}", name, beta, rep.failures().collect::<Vec<_>>());
            prop_assert_eq!(fam.eval_f(0.0, beta).unwrap(), 0.0);
            prop_assert!(fam.eval_f(1.0, beta).unwrap().abs() < 1e-12);
            for i in 1..1000 {
                prop_assert!(fam.eval_f(i as f64 / 1000.0, beta).unwrap() > 0.0);
            }
        }

        #[test]
        fn sup_of_hprime_at_least_one(idx in 0usize..3) {
            let fam = SolvableFamily::builtin(BUILTIN_NAMES[idx]).unwrap();
            prop_assert!(fam.hprime_extrema(500, 1e-10).unwrap().sup >= 1.0 - 1e-9);
        }
    }
}
