//! Front profiles `U(z)` from an F-curve by quadrature.
//!
//! Since `U′ = −F(U)`, `z(U) = −∫_{1/2}^{U} dV/F(V)` with the pivot
//! `U(0) = 1/2`. Nodes are placed by marching the logit `s = ln((1 − U)/U)`
//! outwards from the pivot with steps sized for roughly uniform spacing in z.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::SolvableFamily;
use crate::interp::MonotoneCubic;
use crate::quadrature;
use crate::shoot::ShootOutcome;

pub const DEFAULT_Z_SPAN: f64 = 40.0;
/// Closest approach to U = 1 before the table is cut.
const ONE_GAP: f64 = 1e-14;
const ZERO_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Explicit,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontProfile {
    /// Increasing.
    pub z: Vec<f64>,
    /// Decreasing, `u(0) = 0.5`.
    pub u: Vec<f64>,
    /// `du/dz = −F(u)` at the nodes.
    pub slopes: Vec<f64>,
    pub c: f64,
    pub source: ProfileSource,
    /// The table stops short of `|z| = zSpan/2` on at least one side.
    pub truncated: bool,
}

impl FrontProfile {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn interpolant(&self) -> MonotoneCubic {
        MonotoneCubic::with_slopes(self.z.clone(), self.u.clone(), self.slopes.clone())
    }

    /// Values on the uniform grid `z₀, z₀ + dz, …` covering the table.
    pub fn resample(&self, dz: f64) -> (Vec<f64>, Vec<f64>) {
        let interp = self.interpolant();
        let (lo, hi) = interp.domain();
        let n = ((hi - lo) / dz).floor() as usize;
        let zs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * dz).collect();
        let us = zs.iter().map(|&z| interp.eval(z)).collect();
        (zs, us)
    }

    /// Same profile with `u` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> FrontProfile {
        FrontProfile {
            u: self.u.iter().map(|u| u * factor).collect(),
            slopes: self.slopes.iter().map(|d| d * factor).collect(),
            ..self.clone()
        }
    }

    /// Decay rate `k` in `u ~ e^{−kz}`: least-squares slope of `ln u` over
    /// the last quarter of the nodes with `u > 1e−12`.
    pub fn decay_rate(&self) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .z
            .iter()
            .zip(&self.u)
            .filter(|(_, &u)| u > 1e-12)
            .map(|(&z, &u)| (z, u.ln()))
            .collect();
        let tail = &pts[pts.len() - pts.len() / 4..];
        if tail.len() < 3 {
            return Err(Error::Precondition("too few tail points to fit a decay rate".into()));
        }
        Ok(-least_squares_slope(tail))
    }

    /// CSV with header `z,u`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "z,u")?;
        for (z, u) in self.z.iter().zip(&self.u) {
            writeln!(w, "{z:.16e},{u:.16e}")?;
        }
        Ok(())
    }
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Tabulates the front with `U′ = −F(U)` over `|z| ≤ zSpan/2` using about
/// `n` nodes. Where `F` cannot be evaluated (outside a numeric trajectory)
/// or `U` gets within 1e−14 of 1, the table is cut and flagged.
pub fn profile_from_f(
    fcurve: &dyn Fn(f64) -> Result<f64>,
    c: f64,
    z_span: f64,
    n: usize,
    source: ProfileSource,
) -> Result<FrontProfile> {
    if n < 100 {
        return Err(Error::Precondition(format!("node count {n} must be at least 100")));
    }
    if !(z_span > 0.0) {
        return Err(Error::Precondition(format!("zSpan {z_span} must be positive")));
    }
    let dz = z_span / (n - 1) as f64;
    let f_half = positive(fcurve, 0.5)?;
    let (ahead, cut_ahead) = march(fcurve, 1.0, dz, 0.5 * z_span)?;
    let (behind, cut_behind) = march(fcurve, -1.0, dz, 0.5 * z_span)?;

    let mut z = Vec::with_capacity(ahead.len() + behind.len() + 1);
    let mut u = Vec::with_capacity(z.capacity());
    let mut slopes = Vec::with_capacity(z.capacity());
    for &(zi, ui, fi) in behind.iter().rev() {
        z.push(zi);
        u.push(ui);
        slopes.push(-fi);
    }
    z.push(0.0);
    u.push(0.5);
    slopes.push(-f_half);
    for &(zi, ui, fi) in &ahead {
        z.push(zi);
        u.push(ui);
        slopes.push(-fi);
    }
    Ok(FrontProfile {
        z,
        u,
        slopes,
        c,
        source,
        truncated: cut_ahead || cut_behind,
    })
}

fn positive(fcurve: &dyn Fn(f64) -> Result<f64>, u: f64) -> Result<f64> {
    let v = fcurve(u)?;
    if !(v > 0.0) {
        return Err(Error::Precondition(format!("F({u}) = {v} must be positive on (0, 1)")));
    }
    Ok(v)
}

/// Marches from the pivot. `dir = 1` goes ahead (U ↓ 0, z ↑), `dir = −1`
/// behind (U ↑ 1, z ↓). Returns nodes `(z, U, F(U))` and the cut flag.
#[allow(clippy::type_complexity)]
fn march(fcurve: &dyn Fn(f64) -> Result<f64>, dir: f64, dz: f64, z_max: f64) -> Result<(Vec<(f64, f64, f64)>, bool)> {
    let mut out = Vec::new();
    let (mut s, mut u, mut z) = (0.0f64, 0.5f64, 0.0f64);
    let mut fu = positive(fcurve, u)?;
    let recip = |v: f64| -> Result<f64> { Ok(1.0 / positive(fcurve, v)?) };
    while z.abs() < z_max {
        // dz/ds = U(1 − U)/F
        let ds = (dz * fu / (u * (1.0 - u))).clamp(1e-6, 0.5);
        let s_new = s + dir * ds;
        let u_new = 1.0 / (1.0 + s_new.exp());
        if 1.0 - u_new < ONE_GAP || u_new < ZERO_FLOOR {
            return Ok((out, true));
        }
        let f_new = match fcurve(u_new) {
            Ok(v) if v > 0.0 => v,
            _ => return Ok((out, true)),
        };
        // F(U) near U = 1 carries rounding noise of relative size ε/(1 − U)
        let (lo, hi) = (u_new.min(u), u_new.max(u));
        let rel = (64.0 * f64::EPSILON / (1.0 - hi)).max(1e-13);
        let step = match quadrature::integrate(recip, lo, hi, 0.0, rel) {
            Ok(v) => v,
            Err(_) => return Ok((out, true)),
        };
        z += dir * step;
        s = s_new;
        u = u_new;
        fu = f_new;
        out.push((z, u, fu));
    }
    Ok((out, false))
}

/// Explicit front `F = γh` at `c = c_nl`.
pub fn explicit_profile(fam: &SolvableFamily, beta: f64, z_span: f64, n: usize) -> Result<FrontProfile> {
    let (a, b) = fam.coefficients(beta)?;
    if !(b > 0.0) {
        return Err(Error::InvalidFamily(format!("B(β) = {b} must be positive")));
    }
    let gamma = b.sqrt();
    let f = |u: f64| -> Result<f64> { Ok(gamma * fam.h.eval(u)?) };
    profile_from_f(&f, a / gamma, z_span, n, ProfileSource::Explicit)
}

/// Profile from a successful shooting trajectory (defined on [δ, 1 − ε]).
pub fn numeric_profile(outcome: &ShootOutcome, z_span: f64, n: usize) -> Result<FrontProfile> {
    if !outcome.success {
        return Err(Error::Precondition(format!(
            "shooting at c = {} did not reach the origin",
            outcome.c
        )));
    }
    let f = |u: f64| -> Result<f64> {
        outcome
            .f_at(u)
            .ok_or_else(|| Error::Domain(format!("U = {u} outside the shooting trajectory")))
    };
    profile_from_f(&f, outcome.c, z_span, n, ProfileSource::Numeric)
}

/// Max over the interior of a uniform grid of step `dz` of
/// `|U″ + cU′ + f(U)|` with second-order central differences.
pub fn residual(profile: &FrontProfile, f: &dyn Fn(f64) -> Result<f64>, c: f64, dz: f64) -> Result<f64> {
    let (_, us) = profile.resample(dz);
    if us.len() < 3 {
        return Err(Error::Precondition("profile too short for the residual".into()));
    }
    let mut worst = 0.0f64;
    for w in us.windows(3) {
        let d2 = (w[2] - 2.0 * w[1] + w[0]) / (dz * dz);
        let d1 = (w[2] - w[0]) / (2.0 * dz);
        worst = worst.max((d2 + c * d1 + f(w[1])?).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shoot::{family_reaction, shoot_once, ShootOptions};

    fn fam(name: &str) -> SolvableFamily {
        SolvableFamily::builtin(name).unwrap()
    }

    #[test]
    fn logistic_profiles() {
        let hr = fam("hadeler_rothe");
        let p = explicit_profile(&hr, 2.0, DEFAULT_Z_SPAN, 4001).unwrap();
        assert!(!p.truncated);
        let i0 = p.z.iter().position(|&z| z == 0.0).unwrap();
        assert_eq!(p.u[i0], 0.5);
        let interp = p.interpolant();
        assert!((interp.eval(1.0) - 0.26894142137).abs() < 1e-9);
        for (&z, &u) in p.z.iter().zip(&p.u) {
            assert!((u - 1.0 / (1.0 + z.exp())).abs() < 1e-10, "z={z}");
        }
        assert!(p.z.windows(2).all(|w| w[1] > w[0]));
        assert!(p.u.windows(2).all(|w| w[1] < w[0]));

        let p = explicit_profile(&hr, 8.0, DEFAULT_Z_SPAN, 4001).unwrap();
        for (&z, &u) in p.z.iter().zip(&p.u) {
            assert!((u - 1.0 / (1.0 + (2.0 * z).exp())).abs() < 1e-10, "z={z}");
        }
        assert_eq!(p.c, 2.5);
    }

    #[test]
    fn residuals_and_refinement() {
        for (name, beta) in [("hadeler_rothe", 2.0), ("cgm_sine", 0.8)] {
            let f = fam(name);
            let p = explicit_profile(&f, beta, DEFAULT_Z_SPAN, 16001).unwrap();
            let r = f.reaction(beta).unwrap();
            let fr = |u: f64| r.f(u);
            let r1 = residual(&p, &fr, p.c, 0.01).unwrap();
            let r2 = residual(&p, &fr, p.c, 0.005).unwrap();
            assert!(r1 <= 1e-3, "{name}: {r1}");
            assert!(r1 / r2 >= 3.5, "{name}: ratio {}", r1 / r2);

            let bad = p.scaled(1.1);
            assert!(residual(&bad, &fr, p.c, 0.01).unwrap() > 0.01);
        }
    }

    #[test]
    fn explicit_decay_rate_is_gamma() {
        for (name, beta) in [("hadeler_rothe", 4.0), ("cgm_sine", 0.8), ("exp_demo", 1.2)] {
            let f = fam(name);
            let gamma = f.b_at(beta).unwrap().sqrt();
            let p = explicit_profile(&f, beta, DEFAULT_Z_SPAN, 4001).unwrap();
            let k = p.decay_rate().unwrap();
            assert!((k - gamma).abs() <= 0.02 * gamma, "{name}: {k} vs {gamma}");
        }
    }

    #[test]
    fn numeric_and_explicit_agree() {
        let hr = fam("hadeler_rothe");
        let beta = 4.0;
        let exact = explicit_profile(&hr, beta, DEFAULT_Z_SPAN, 4001).unwrap();
        let r = family_reaction(&hr, beta).unwrap();
        let out = shoot_once(&r, exact.c, &ShootOptions::default()).unwrap();
        let num = numeric_profile(&out, DEFAULT_Z_SPAN, 4001).unwrap();
        let e = exact.interpolant();
        let (lo, hi) = (num.z[0], num.z[num.len() - 1]);
        for (&z, &u) in num.z.iter().zip(&num.u) {
            if z >= lo && z <= hi {
                assert!((u - e.eval(z)).abs() <= 1e-4, "z={z}");
            }
        }
    }

    #[test]
    fn csv_format() {
        let hr = fam("hadeler_rothe");
        let p = explicit_profile(&hr, 2.0, 10.0, 101).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("z,u"));
        let row = lines.next().unwrap();
        let parts: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parts[0], p.z[0]);
        assert_eq!(parts[1], p.u[0]);
    }

    #[test]
    fn rejects_bad_input() {
        let f = |u: f64| Ok(u * (1.0 - u));
        assert!(profile_from_f(&f, 2.0, 40.0, 50, ProfileSource::Explicit).is_err());
        let g = |u: f64| Ok(u - 0.75);
        assert!(profile_from_f(&g, 2.0, 40.0, 200, ProfileSource::Explicit).is_err());
    }
}
