//! Direct simulation of `u_t = u_xx + f(u)` on `[0, L]` with `u(0) = 1`,
//! `u(L) = 0`: method of lines, second-order Laplacian, classical RK4.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::SolvableFamily;
use crate::profile::least_squares_slope;

const TABLE_POINTS: usize = 16384;
/// Distance from the right boundary at which the front counts as arrived.
const BOUNDARY_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `u = 1` for `x < x0`, else 0.
    Step { x0: f64 },
    /// `u = 1` on `|x − center| < half_width`, else 0 (left boundary still 1).
    Bump { center: f64, half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub domain_length: f64,
    pub dx: f64,
    /// `None` means `0.2·dx²`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub initial: InitialCondition,
    pub track_level: f64,
    /// Time between recorded front positions.
    pub record_every: f64,
    /// Start of the fit window as a fraction of `t_end`.
    pub fit_from: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            domain_length: 300.0,
            dx: 0.1,
            dt: None,
            t_end: 60.0,
            initial: InitialCondition::Step { x0: 20.0 },
            track_level: 0.5,
            record_every: 0.1,
            fit_from: 0.5,
        }
    }
}

impl SimConfig {
    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(0.2 * self.dx * self.dx)
    }

    /// Checks stability and that a front moving at `c_estimate` stays inside.
    pub fn validate(&self, c_estimate: f64) -> Result<()> {
        let dt = self.time_step();
        if !(self.dx > 0.0 && dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::Config("dx, dt and tEnd must be positive".into()));
        }
        if dt > 0.5 * self.dx * self.dx {
            return Err(Error::Config(format!(
                "dt = {dt} exceeds the explicit stability limit 0.5·dx² = {}",
                0.5 * self.dx * self.dx
            )));
        }
        if self.domain_length <= c_estimate * self.t_end + 50.0 {
            return Err(Error::Config(format!(
                "domain length {} must exceed c·tEnd + 50 = {}",
                self.domain_length,
                c_estimate * self.t_end + 50.0
            )));
        }
        if !(0.0 < self.track_level && self.track_level < 1.0) {
            return Err(Error::Config(format!(
                "track level {} must lie in (0, 1)",
                self.track_level
            )));
        }
        if !(0.0..1.0).contains(&self.fit_from) {
            return Err(Error::Config(format!("fit start {} must lie in [0, 1)", self.fit_from)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedMeasurement {
    pub speed: f64,
    pub fit_window: (f64, f64),
    /// Root-mean-square deviation of the track from the fitted line.
    pub fit_residual: f64,
    pub front_track: Vec<(f64, f64)>,
    pub dx: f64,
    /// Final state on the grid `x_i = i·dx`.
    pub final_u: Vec<f64>,
}

impl SpeedMeasurement {
    pub fn write_track_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x_front")?;
        for (t, x) in &self.front_track {
            writeln!(w, "{t:.16e},{x:.16e}")?;
        }
        Ok(())
    }

    pub fn write_snapshot_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,u")?;
        for (i, u) in self.final_u.iter().enumerate() {
            writeln!(w, "{:.16e},{u:.16e}", i as f64 * self.dx)?;
        }
        Ok(())
    }
}

/// Runs the simulation with reaction `f`. The domain check uses only the
/// stability and level conditions; callers with a speed estimate should call
/// [`SimConfig::validate`] first.
pub fn simulate<F: Fn(f64) -> f64>(f: F, cfg: &SimConfig) -> Result<SpeedMeasurement> {
    cfg.validate(0.0)?;
    let dx = cfg.dx;
    let dt = cfg.time_step();
    let n = (cfg.domain_length / dx).round() as usize + 1;
    if n < 5 {
        return Err(Error::Config("domain has fewer than 5 grid points".into()));
    }
    let mut u: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 * dx;
            match cfg.initial {
                InitialCondition::Step { x0 } => f64::from(x < x0),
                InitialCondition::Bump { center, half_width } => f64::from((x - center).abs() < half_width),
            }
        })
        .collect();
    u[0] = 1.0;
    u[n - 1] = 0.0;

    let steps = (cfg.t_end / dt).ceil() as usize;
    let dt = cfg.t_end / steps as f64;
    let record_stride = ((cfg.record_every / dt).round() as usize).max(1);
    let inv_dx2 = 1.0 / (dx * dx);

    let rhs = |v: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv_dx2 + f(v[i]);
        }
    };
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];

    let mut track = Vec::new();
    if let Some(x) = front_position(&u, dx, cfg.track_level) {
        track.push((0.0, x));
    }
    let x_limit = cfg.domain_length - BOUNDARY_MARGIN;
    for step in 1..=steps {
        rhs(&u, &mut k1);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = u[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }

        if step % record_stride == 0 || step == steps {
            let t = step as f64 * dt;
            if let Some(&bad) = u.iter().find(|v| !(-0.1..=1.1).contains(*v)) {
                return Err(Error::Instability { t, u: bad });
            }
            if let Some(x) = front_position(&u, dx, cfg.track_level) {
                if x > x_limit {
                    return Err(Error::FrontAtBoundary { t });
                }
                track.push((t, x));
            }
        }
    }

    let t0 = cfg.fit_from * cfg.t_end;
    let window: Vec<(f64, f64)> = track.iter().copied().filter(|p| p.0 >= t0).collect();
    if window.len() < 3 {
        return Err(Error::Precondition("too few front positions in the fit window".into()));
    }
    let speed = least_squares_slope(&window);
    let n_w = window.len() as f64;
    let mt = window.iter().map(|p| p.0).sum::<f64>() / n_w;
    let mx = window.iter().map(|p| p.1).sum::<f64>() / n_w;
    let rms = (window
        .iter()
        .map(|p| (p.1 - (mx + speed * (p.0 - mt))).powi(2))
        .sum::<f64>()
        / n_w)
        .sqrt();
    Ok(SpeedMeasurement {
        speed,
        fit_window: (t0, cfg.t_end),
        fit_residual: rms,
        front_track: track,
        dx,
        final_u: u,
    })
}

/// Rightmost crossing of `level`, linearly interpolated.
fn front_position(u: &[f64], dx: f64, level: f64) -> Option<f64> {
    let i = u.iter().rposition(|&v| v >= level)?;
    if i + 1 >= u.len() {
        return None;
    }
    let (a, b) = (u[i], u[i + 1]);
    Some((i as f64 + (a - level) / (a - b)) * dx)
}

/// Simulates a family at `β`, checking the domain against `c_nl`.
pub fn simulate_family(fam: &SolvableFamily, beta: f64, cfg: &SimConfig) -> Result<SpeedMeasurement> {
    let (a, b) = fam.coefficients(beta)?;
    let c_est = if b > 0.0 { a / b.sqrt() } else { 0.0 };
    cfg.validate(c_est)?;
    let table = fam.reaction(beta)?.tabulate(TABLE_POINTS)?;
    simulate(|v| table.eval(v), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_diffusion_has_no_front_speed() {
        let cfg = SimConfig {
            domain_length: 100.0,
            t_end: 40.0,
            ..Default::default()
        };
        let m = simulate(|_| 0.0, &cfg).unwrap();
        assert!(m.speed.abs() < 0.02, "{}", m.speed);
    }

    #[test]
    fn fisher_front_is_fast_enough() {
        // f = u(1 − u): c_min = 2, approached from below
        let cfg = SimConfig {
            domain_length: 200.0,
            t_end: 40.0,
            dx: 0.2,
            ..Default::default()
        };
        let m = simulate(|u| u * (1.0 - u), &cfg).unwrap();
        assert!(m.speed > 1.85 && m.speed < 2.0, "{}", m.speed);
        assert!(m.front_track.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9));
    }

    #[test]
    fn config_checks() {
        let cfg = SimConfig {
            dt: Some(0.01),
            ..Default::default()
        };
        assert!(matches!(cfg.validate(2.0), Err(Error::Config(_))));
        let cfg = SimConfig {
            domain_length: 100.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(2.0), Err(Error::Config(_))));
    }

    #[test]
    fn boundary_arrival_is_reported() {
        let cfg = SimConfig {
            domain_length: 60.0,
            t_end: 40.0,
            dx: 0.2,
            ..Default::default()
        };
        assert!(matches!(
            simulate(|u| u * (1.0 - u), &cfg),
            Err(Error::FrontAtBoundary { .. })
        ));
    }

    #[test]
    fn csv_dumps() {
        let cfg = SimConfig {
            domain_length: 60.0,
            t_end: 2.0,
            dx: 0.5,
            ..Default::default()
        };
        let m = simulate(|u| u * (1.0 - u), &cfg).unwrap();
        let mut buf = Vec::new();
        m.write_track_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,x_front\n"));
        let mut buf = Vec::new();
        m.write_snapshot_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,u\n"));
        assert_eq!(text.lines().count(), m.final_u.len() + 1);
    }
}
