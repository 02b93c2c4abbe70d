//! The exponentially weighted energy
//! `Φ_c[u] = ∫ e^{cz}(½u_z² − G(u)) dz`, `G(u) = ∫₀^u f(s) ds`.
//!
//! For the solvable form `G = A·H − (B/2)h²` with `H = ∫₀^u h`. A trial `u`
//! with `Φ_c[u] ≤ 0` for some `c > c_l`, decaying faster than `e^{−cz/2}`,
//! certifies that the minimal speed exceeds `c_l`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::SolvableFamily;
use crate::interp::hermite;
use crate::profile::FrontProfile;
use crate::quadrature::gauss_legendre;
use crate::speeds::linear_speed;

/// Default tolerance on the normalized Φ for certificates.
pub const PHI_TOL: f64 = 1e-4;
const TABLE_CELLS: usize = 1024;
const GL_NODES: usize = 12;
/// Largest exponent used before the weight is shifted.
const EXP_LIMIT: f64 = 700.0;

/// `G(u) = A·H(u) − (B/2)h(u)²` with `H` tabulated once per family.
#[derive(Debug, Clone)]
pub struct Potential {
    a: f64,
    b: f64,
    /// H at the cell edges u = i/TABLE_CELLS.
    big_h: Vec<f64>,
    h: Vec<f64>,
    fam: SolvableFamily,
}

impl Potential {
    pub fn new(fam: &SolvableFamily, beta: f64) -> Result<Potential> {
        let (a, b) = fam.coefficients(beta)?;
        let (nodes, weights) = gauss_legendre(GL_NODES);
        let dx = 1.0 / TABLE_CELLS as f64;
        let mut big_h = Vec::with_capacity(TABLE_CELLS + 1);
        let mut h = Vec::with_capacity(TABLE_CELLS + 1);
        let mut acc = 0.0;
        big_h.push(0.0);
        h.push(fam.h.eval(0.0)?);
        for i in 0..TABLE_CELLS {
            let lo = i as f64 * dx;
            let mut cell = 0.0;
            for (x, w) in nodes.iter().zip(&weights) {
                cell += w * fam.h.eval(lo + 0.5 * dx * (x + 1.0))?;
            }
            acc += 0.5 * dx * cell;
            big_h.push(acc);
            h.push(fam.h.eval((i + 1) as f64 * dx)?);
        }
        Ok(Potential {
            a,
            b,
            big_h,
            h,
            fam: fam.clone(),
        })
    }

    /// `H(u) = ∫₀^u h`, cubic Hermite between table edges using `H′ = h`.
    /// Outside [0, 1] it falls back to direct quadrature from the nearest end.
    pub fn big_h(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            let (start, h_start) = if u < 0.0 {
                (0.0, 0.0)
            } else {
                (1.0, self.big_h[TABLE_CELLS])
            };
            return Ok(h_start + self.segment(start, u)?);
        }
        let x = u * TABLE_CELLS as f64;
        let i = (x as usize).min(TABLE_CELLS - 1);
        let (x0, x1) = (i as f64 / TABLE_CELLS as f64, (i + 1) as f64 / TABLE_CELLS as f64);
        Ok(hermite(
            x0,
            x1,
            self.big_h[i],
            self.big_h[i + 1],
            self.h[i],
            self.h[i + 1],
            u,
        ))
    }

    fn segment(&self, from: f64, to: f64) -> Result<f64> {
        let (nodes, weights) = gauss_legendre(GL_NODES);
        let half = 0.5 * (to - from);
        let mut s = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            s += w * self.fam.h.eval(from + half * (x + 1.0))?;
        }
        Ok(half * s)
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        let hu = self.fam.h.eval(u)?;
        Ok(self.a * self.big_h(u)? - 0.5 * self.b * hu * hu)
    }
}

/// `G(u)` for one call; see [`Potential`] for repeated use.
pub fn potential_g(fam: &SolvableFamily, beta: f64, u: f64) -> Result<f64> {
    Potential::new(fam, beta)?.eval(u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiResult {
    pub value: f64,
    /// Integration limits after trimming negligible ends.
    pub truncation_z: (f64, f64),
    /// The weight `e^{cz}` was rescaled to avoid overflow.
    pub weight_overflow_guard: bool,
    /// `∫ e^{cz} u² dz`.
    pub normalization: f64,
    /// `value / normalization`.
    pub normalized: f64,
    /// Fitted decay rate of the trial at +∞.
    pub decay: f64,
}

/// Strict: `c < 2·decay`.
pub fn h1c_member(decay: f64, c: f64) -> bool {
    c < 2.0 * decay
}

/// Trapezoid evaluation of `Φ_c` on the profile nodes, with `u_z` from
/// three-point differences, plus exponential tail corrections at both ends.
pub fn phi(profile: &FrontProfile, c: f64, fam: &SolvableFamily, beta: f64) -> Result<PhiResult> {
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("speed c = {c} must be positive")));
    }
    let n = profile.len();
    if n < 3 {
        return Err(Error::Precondition("profile too short".into()));
    }
    let decay = profile.decay_rate()?;
    if !h1c_member(decay, c) {
        return Err(Error::Divergence { decay, half_c: 0.5 * c });
    }
    let pot = Potential::new(fam, beta)?;
    let (z, u) = (&profile.z, &profile.u);
    let du = three_point_derivative(z, u);

    let z_max = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let guard = c * z_max > EXP_LIMIT;
    let shift = if guard { c * z[n - 1] - EXP_LIMIT } else { 0.0 };

    let mut energy = Vec::with_capacity(n);
    let mut mass = Vec::with_capacity(n);
    for i in 0..n {
        let w = (c * z[i] - shift).exp();
        energy.push(w * (0.5 * du[i] * du[i] - pot.eval(u[i])?));
        mass.push(w * u[i] * u[i]);
    }

    let peak = energy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = 1e-14 * peak;
    let first = energy.iter().position(|v| v.abs() >= cut).unwrap_or(0);
    let last = energy.iter().rposition(|v| v.abs() >= cut).unwrap_or(n - 1);
    if last <= first {
        return Err(Error::Precondition("integrand vanishes on the profile".into()));
    }

    let trap = |vals: &[f64]| -> f64 {
        (first..last)
            .map(|i| 0.5 * (vals[i] + vals[i + 1]) * (z[i + 1] - z[i]))
            .sum::<f64>()
    };
    // left tail: u ≈ const, integrand ~ e^{cz}; right tail: ~ e^{(c − 2k)z}
    let right_rate = 2.0 * decay - c;
    let tails = |vals: &[f64]| -> f64 { vals[first] / c + vals[last] / right_rate };
    let mut value = trap(&energy) + tails(&energy);
    let mut normalization = trap(&mass) + tails(&mass);
    if shift != 0.0 {
        value *= shift.exp();
        normalization *= shift.exp();
    }
    let normalized = if guard {
        (trap(&energy) + tails(&energy)) / (trap(&mass) + tails(&mass))
    } else {
        value / normalization
    };
    if !normalized.is_finite() {
        return Err(Error::Domain(format!("Φ is not finite ({value} / {normalization})")));
    }
    Ok(PhiResult {
        value,
        truncation_z: (z[first], z[last]),
        weight_overflow_guard: guard,
        normalization,
        normalized,
        decay,
    })
}

/// Second-order derivative on a non-uniform grid.
fn three_point_derivative(z: &[f64], u: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (z[i] - z[i - 1], z[i + 1] - z[i]);
        d[i] =
            (-h1 / (h0 * (h0 + h1))) * u[i - 1] + ((h1 - h0) / (h0 * h1)) * u[i] + (h0 / (h1 * (h0 + h1))) * u[i + 1];
    }
    let (h0, h1) = (z[1] - z[0], z[2] - z[1]);
    d[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * u[0] + (h0 + h1) / (h0 * h1) * u[1] - h0 / (h1 * (h0 + h1)) * u[2];
    let (h0, h1) = (z[n - 2] - z[n - 3], z[n - 1] - z[n - 2]);
    d[n - 1] = h1 / (h0 * (h0 + h1)) * u[n - 3] - (h0 + h1) / (h0 * h1) * u[n - 2]
        + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * u[n - 1];
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub certified: bool,
    pub c: f64,
    pub c_l: f64,
    pub member: bool,
    /// `None` when membership fails and Φ diverges.
    pub phi: Option<PhiResult>,
}

/// True iff `c > c_l + tol`, the profile lies in `H¹_c` and the normalized
/// Φ is at most [`PHI_TOL`].
pub fn pushed_certificate(
    fam: &SolvableFamily,
    beta: f64,
    c: f64,
    profile: &FrontProfile,
    tol: f64,
) -> Result<Certificate> {
    let c_l = linear_speed(fam, beta)?;
    let decay = profile.decay_rate()?;
    let member = h1c_member(decay, c);
    let phi = if member {
        Some(phi(profile, c, fam, beta)?)
    } else {
        None
    };
    let certified = c > c_l + tol && phi.as_ref().is_some_and(|p| p.normalized <= PHI_TOL);
    Ok(Certificate {
        certified,
        c,
        c_l,
        member,
        phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{explicit_profile, DEFAULT_Z_SPAN};
    use crate::speeds::CLASSIFY_TOL;
    use statrs::function::beta::beta as beta_fn;

    fn fam(name: &str) -> SolvableFamily {
        SolvableFamily::builtin(name).unwrap()
    }

    #[test]
    fn potential_values() {
        let hr = fam("hadeler_rothe");
        assert!((potential_g(&hr, 4.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        // ∫₀^u s(1 − s)(1 + 4s) ds = u²/2 + u³ − u⁴
        assert!((potential_g(&hr, 4.0, 0.5).unwrap() - 0.1875).abs() < 1e-14);
        let p = Potential::new(&hr, 4.0).unwrap();
        for i in 0..=37 {
            let u = i as f64 / 37.0;
            let exact = 0.5 * u * u + u.powi(3) - u.powi(4);
            assert!((p.eval(u).unwrap() - exact).abs() < 1e-14, "u={u}");
        }
        for name in ["hadeler_rothe", "cgm_sine", "exp_demo"] {
            assert_eq!(potential_g(&fam(name), 0.5, 0.0).unwrap(), 0.0);
        }
        // cgm: A(1 − cos πu)/π² − (B/2) sin²(πu)/π²
        let cgm = fam("cgm_sine");
        let pi = std::f64::consts::PI;
        let u: f64 = 0.3;
        let exact = 0.5 * (1.0 - (pi * u).cos()) / (pi * pi) - 0.5 * 0.4 * ((pi * u).sin() / pi).powi(2);
        assert!((potential_g(&cgm, 0.8, u).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn phi_vanishes_on_explicit_front() {
        // With u = 1/(1 + e^{√2 z}) and c = 3/√2 the substitution U = u turns
        // √2·Φ into ½B(½,3/2) − 3B(3/2,3/2) + 2B(5/2,3/2).
        let oracle = 0.5 * beta_fn(0.5, 1.5) - 3.0 * beta_fn(1.5, 1.5) + 2.0 * beta_fn(2.5, 1.5);
        assert!(oracle.abs() < 1e-12, "{oracle}");

        let hr = fam("hadeler_rothe");
        let p = explicit_profile(&hr, 4.0, DEFAULT_Z_SPAN, 4001).unwrap();
        let r = phi(&p, p.c, &hr, 4.0).unwrap();
        assert!(r.normalized.abs() <= 1e-4, "{r:?}");
        assert!((r.decay - 2f64.sqrt()).abs() < 1e-3);

        let r5 = phi(&p, p.c, &hr, 5.0).unwrap();
        assert!(r5.value < 0.0);

        let small = p.scaled(0.1);
        let r = phi(&small, p.c, &hr, 4.0).unwrap();
        assert!(r.value > 0.0);
    }

    #[test]
    fn membership() {
        assert!(h1c_member(2f64.sqrt(), 3.0 / 2f64.sqrt()));
        assert!(!h1c_member(0.5, 2.0));
        assert!(!h1c_member(0.5, 1.0));
    }

    #[test]
    fn divergence_is_an_error() {
        let hr = fam("hadeler_rothe");
        let p = explicit_profile(&hr, 1.0, DEFAULT_Z_SPAN, 4001).unwrap();
        assert!(matches!(phi(&p, p.c, &hr, 1.0), Err(Error::Divergence { .. })));
    }

    #[test]
    fn certificates() {
        for (name, beta, expect) in [
            ("hadeler_rothe", 4.0, true),
            ("hadeler_rothe", 1.0, false),
            ("cgm_sine", 0.8, true),
            ("exp_demo", 1.2, true),
            ("exp_demo", 0.8, false),
        ] {
            let f = fam(name);
            let p = explicit_profile(&f, beta, DEFAULT_Z_SPAN, 4001).unwrap();
            let cert = pushed_certificate(&f, beta, p.c, &p, CLASSIFY_TOL).unwrap();
            assert_eq!(cert.certified, expect, "{name} beta={beta}: {cert:?}");
        }
    }
}
