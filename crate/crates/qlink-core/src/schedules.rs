//! Coupling programs g1(t), g2(t) for the adiabatic and relay protocols.
//!
//! Times are in ns, couplings in rad/s.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Below this value of ∫ḡ dt the passage is not adiabatic.
pub const ADIABATIC_THRESHOLD: f64 = 1.5 * PI;

/// Slack allowed when a time lands marginally past the end of a schedule.
const TIME_SLACK_NS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    AdiabaticTransfer,
    AdiabaticHalf,
    RelayTransfer,
    RelayHalf,
}

impl Protocol {
    pub fn is_adiabatic(self) -> bool {
        matches!(self, Protocol::AdiabaticTransfer | Protocol::AdiabaticHalf)
    }

    pub fn is_half(self) -> bool {
        matches!(self, Protocol::AdiabaticHalf | Protocol::RelayHalf)
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::AdiabaticTransfer => "adiabatic_transfer",
            Protocol::AdiabaticHalf => "adiabatic_half",
            Protocol::RelayTransfer => "relay_transfer",
            Protocol::RelayHalf => "relay_half",
        }
    }
}

/// Time-dependent coupling pair with protocol tag.
///
/// Half protocols may end with a release ramp: after the program stops, both
/// couplings fall together as `cos(π s / 2 t_r)`, keeping their ratio (and so
/// the mixing angle) fixed while the channel photon admixture drains back into
/// the qubits. `release_ns = 0` stops the program abruptly.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    protocol: Protocol,
    gbar: f64,
    t_f: f64,
    relay_g: f64,
    release_ns: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameters(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

impl Schedule {
    pub fn adiabatic_transfer(gbar: f64, t_f: f64) -> Result<Self> {
        positive("gbar", gbar)?;
        positive("t_f", t_f)?;
        Ok(Self { protocol: Protocol::AdiabaticTransfer, gbar, t_f, relay_g: 0.0, release_ns: 0.0 })
    }

    pub fn adiabatic_half(gbar: f64, t_f: f64) -> Result<Self> {
        positive("gbar", gbar)?;
        positive("t_f", t_f)?;
        Ok(Self { protocol: Protocol::AdiabaticHalf, gbar, t_f, relay_g: 0.0, release_ns: 0.0 })
    }

    pub fn relay_transfer(g: f64) -> Result<Self> {
        positive("relay_g", g)?;
        Ok(Self { protocol: Protocol::RelayTransfer, gbar: 0.0, t_f: 0.0, relay_g: g, release_ns: 0.0 })
    }

    pub fn relay_half(g: f64) -> Result<Self> {
        positive("relay_g", g)?;
        Ok(Self { protocol: Protocol::RelayHalf, gbar: 0.0, t_f: 0.0, relay_g: g, release_ns: 0.0 })
    }

    /// Adds a release ramp of `release_ns` after the program (half protocols).
    pub fn with_release(mut self, release_ns: f64) -> Result<Self> {
        if !(release_ns.is_finite() && release_ns >= 0.0) {
            return Err(Error::InvalidParameters(format!("release_ns must be ≥ 0, got {release_ns}")));
        }
        if release_ns > 0.0 && !self.protocol.is_half() {
            return Err(Error::InvalidParameters(format!(
                "release ramp only applies to half protocols, not {}",
                self.protocol.name()
            )));
        }
        self.release_ns = release_ns;
        Ok(self)
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn gbar(&self) -> f64 {
        self.gbar
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn relay_g(&self) -> f64 {
        self.relay_g
    }

    pub fn release_ns(&self) -> f64 {
        self.release_ns
    }

    /// End of the coupling program, before any release ramp.
    pub fn program_duration(&self) -> f64 {
        match self.protocol {
            Protocol::AdiabaticTransfer => self.t_f,
            Protocol::AdiabaticHalf => 0.5 * self.t_f,
            Protocol::RelayTransfer => 2.0 * tau_swap(self.relay_g),
            Protocol::RelayHalf => 1.5 * tau_swap(self.relay_g),
        }
    }

    pub fn duration(&self) -> f64 {
        self.program_duration() + self.release_ns
    }

    /// Interior times where the couplings are not smooth. Integration is
    /// split there.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self.protocol {
            Protocol::RelayTransfer => out.push(tau_swap(self.relay_g)),
            Protocol::RelayHalf => out.push(0.5 * tau_swap(self.relay_g)),
            _ => {}
        }
        if self.release_ns > 0.0 {
            out.push(self.program_duration());
        }
        out
    }

    /// (g1, g2) in rad/s at time `t` ns.
    pub fn couplings(&self, t: f64) -> Result<(f64, f64)> {
        let end = self.duration();
        if !(t >= -TIME_SLACK_NS && t <= end + TIME_SLACK_NS) {
            return Err(Error::TimeOutOfRange { t, duration: end });
        }
        let t = t.clamp(0.0, end);
        let tp = self.program_duration();
        if t > tp {
            let (g1, g2) = self.program_couplings(tp);
            let s = libm::cos(FRAC_PI_2 * (t - tp) / self.release_ns);
            return Ok((g1 * s, g2 * s));
        }
        Ok(self.program_couplings(t))
    }

    fn program_couplings(&self, t: f64) -> (f64, f64) {
        match self.protocol {
            Protocol::AdiabaticTransfer | Protocol::AdiabaticHalf => sine_cosine(self.gbar, self.t_f, t),
            Protocol::RelayTransfer => relay_program(self.relay_g, t, false),
            Protocol::RelayHalf => relay_program(self.relay_g, t, true),
        }
    }

    /// Uniform sample grid from 0 to the schedule end, both ends included.
    pub fn sample_times(&self, spacing_ns: f64) -> Vec<f64> {
        uniform_grid(self.duration(), spacing_ns)
    }
}

/// Grid `0, s, 2s, …` ending exactly at `end`.
pub fn uniform_grid(end: f64, spacing: f64) -> Vec<f64> {
    if !(spacing > 0.0) || end <= 0.0 {
        return alloc::vec![0.0, end.max(0.0)];
    }
    let n = libm::ceil(end / spacing - 1e-9) as usize;
    let mut out: Vec<f64> = (0..n).map(|k| k as f64 * spacing).collect();
    out.push(end);
    out
}

fn sine_cosine(gbar: f64, t_f: f64, t: f64) -> (f64, f64) {
    let arg = FRAC_PI_2 * t / t_f;
    (gbar * libm::sin(arg), gbar * libm::cos(arg))
}

fn relay_program(g: f64, t: f64, half: bool) -> (f64, f64) {
    let tau = tau_swap(g);
    let first = if half { 0.5 * tau } else { tau };
    if t < first {
        (g, 0.0)
    } else {
        (0.0, g)
    }
}

/// g1 = ḡ sin(πt/2t_f), g2 = ḡ cos(πt/2t_f).
pub fn adiabatic_couplings(gbar: f64, t_f: f64, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0 && t <= t_f) {
        return Err(Error::TimeOutOfRange { t, duration: t_f });
    }
    Ok(sine_cosine(gbar, t_f, t))
}

/// Piecewise-constant relay program. The first segment lasts τ_swap (full
/// swap) or τ_swap/2 (half swap), the second τ_swap.
pub fn relay_couplings(g: f64, t: f64, half: bool) -> Result<(f64, f64)> {
    let tau = tau_swap(g);
    let total = if half { 1.5 * tau } else { 2.0 * tau };
    if !(t >= 0.0 && t <= total) {
        return Err(Error::TimeOutOfRange { t, duration: total });
    }
    Ok(relay_program(g, t, half))
}

/// Vacuum-Rabi swap time π/(2g) in ns for `g` in rad/s.
pub fn tau_swap(g: f64) -> f64 {
    FRAC_PI_2 / g * 1e9
}

/// ∫ ḡ dt over the full sine/cosine program, in radians. For the PAP
/// envelope this is ḡ·t_f. Half protocols report the same value since they
/// share the sweep rate of the full program.
pub fn adiabaticity_integral(schedule: &Schedule) -> Result<f64> {
    if !schedule.protocol.is_adiabatic() {
        return Err(Error::NotAdiabatic);
    }
    let value = schedule.gbar * schedule.t_f * 1e-9;
    if value < ADIABATIC_THRESHOLD {
        log::warn!("adiabaticity integral {:.3}π is below the 3π/2 threshold", value / PI);
    }
    Ok(value)
}

/// `true` when ∫ḡ dt meets the 3π/2 threshold.
pub fn is_adiabatic_enough(schedule: &Schedule) -> Result<bool> {
    Ok(adiabaticity_integral(schedule)? >= ADIABATIC_THRESHOLD)
}

/// Composite Simpson quadrature of ∫₀^{t_f} ḡ(t) dt with ḡ in rad/s and t
/// in ns. `intervals` is rounded up to an even count.
pub fn adiabaticity_integral_numeric(gbar_of_t: impl Fn(f64) -> f64, t_f: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = t_f / n as f64;
    let mut acc = gbar_of_t(0.0) + gbar_of_t(t_f);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * gbar_of_t(k as f64 * h);
    }
    acc * h / 3.0 * 1e-9
}

/// Transfer times at which the dark state returns, t_f = (2π/ḡ)·√(n² − 1/16),
/// for n = 1..=n_max. Returned in ns.
pub fn dark_state_return_times(gbar: f64, n_max: usize) -> Vec<f64> {
    (1..=n_max)
        .map(|n| {
            let n = n as f64;
            2.0 * PI / gbar * libm::sqrt(n * n - 1.0 / 16.0) * 1e9
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz;

    #[test]
    fn adiabatic_endpoints() {
        let g = mhz(15.0);
        let (g1, g2) = adiabatic_couplings(g, 132.0, 0.0).unwrap();
        assert_eq!((g1, g2), (0.0, g));
        let (g1, g2) = adiabatic_couplings(g, 132.0, 66.0).unwrap();
        let s = g / libm::sqrt(2.0);
        assert!((g1 - s).abs() < 1e-6 && (g2 - s).abs() < 1e-6);
        let s = Schedule::adiabatic_transfer(g, 132.0).unwrap();
        let (g1, g2) = s.couplings(132.0).unwrap();
        assert!((g1 - g).abs() < 1e-6 && g2.abs() < 1e-6);
        assert!(adiabatic_couplings(g, 132.0, 133.0).is_err());
    }

    #[test]
    fn quarter_point_value() {
        let (g1, _) = adiabatic_couplings(mhz(15.0), 132.0, 33.0).unwrap();
        let expected = 15.0 * libm::sin(PI / 8.0);
        assert!((g1 / mhz(1.0) - expected).abs() < 1e-12);
        assert!((g1 / mhz(1.0) - 5.74).abs() < 5e-3);
    }

    #[test]
    fn relay_timing() {
        let g = mhz(5.0);
        assert!((tau_swap(g) - 50.0).abs() < 1e-9);
        let s = Schedule::relay_transfer(g).unwrap();
        assert!((s.duration() - 100.0).abs() < 1e-9);
        assert_eq!(relay_couplings(g, 20.0, false).unwrap(), (g, 0.0));
        // Right-continuous at the boundary.
        assert_eq!(relay_couplings(g, tau_swap(g), false).unwrap(), (0.0, g));
        let h = Schedule::relay_half(g).unwrap();
        assert!((h.duration() - 75.0).abs() < 1e-9);
        assert_eq!(h.couplings(24.0).unwrap(), (g, 0.0));
        assert_eq!(h.couplings(25.0).unwrap(), (0.0, g));
        assert!(relay_couplings(g, 101.0, false).is_err());
    }

    #[test]
    fn release_ramp_keeps_ratio() {
        let g = mhz(15.0);
        let s = Schedule::adiabatic_half(g, 132.0).unwrap().with_release(10.0).unwrap();
        assert_eq!(s.duration(), 76.0);
        assert_eq!(s.breakpoints(), alloc::vec![66.0]);
        let (a, b) = s.couplings(71.0).unwrap();
        assert!((a / b - 1.0).abs() < 1e-12);
        let (a, b) = s.couplings(76.0).unwrap();
        assert!(a.abs() < 1e-6 * g && b.abs() < 1e-6 * g);
        assert!(Schedule::adiabatic_transfer(g, 132.0).unwrap().with_release(5.0).is_err());
    }

    #[test]
    fn adiabaticity_integral_values() {
        let s = Schedule::adiabatic_transfer(mhz(15.0), 132.0).unwrap();
        let v = adiabaticity_integral(&s).unwrap();
        assert!((v - 3.96 * PI).abs() < 1e-9);
        let g = mhz(15.0);
        let t_f = ADIABATIC_THRESHOLD / g * 1e9;
        let s = Schedule::adiabatic_transfer(g, t_f).unwrap();
        assert!((adiabaticity_integral(&s).unwrap() - ADIABATIC_THRESHOLD).abs() < 1e-12);
        assert!(is_adiabatic_enough(&s).unwrap());
        let short = Schedule::adiabatic_transfer(g, 0.5 * t_f).unwrap();
        assert!(!is_adiabatic_enough(&short).unwrap());
        let relay = Schedule::relay_transfer(g).unwrap();
        assert_eq!(adiabaticity_integral(&relay), Err(Error::NotAdiabatic));
    }

    #[test]
    fn numeric_quadrature_matches_antiderivative() {
        // ḡ(t) = a + b·sin(ωt): ∫ = a·T + (b/ω)(1 − cos ωT).
        let (a, b, w, t_f) = (mhz(10.0), mhz(3.0), 0.05, 100.0);
        let numeric = adiabaticity_integral_numeric(|t| a + b * libm::sin(w * t), t_f, 2000);
        let exact = (a * t_f + b / w * (1.0 - libm::cos(w * t_f))) * 1e-9;
        assert!((numeric - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn return_times() {
        let t = dark_state_return_times(mhz(15.0), 2);
        assert!((t[0] - 64.5).abs() < 0.05);
        assert!((t[1] - 132.3).abs() < 0.05);
        let t2 = dark_state_return_times(mhz(30.0), 2);
        assert!((t2[1] * 2.0 - t[1]).abs() < 1e-9);
    }

    #[test]
    fn uniform_grid_hits_end() {
        let g = uniform_grid(10.0, 3.0);
        assert_eq!(g, alloc::vec![0.0, 3.0, 6.0, 9.0, 10.0]);
        assert_eq!(uniform_grid(2.0, 1.0), alloc::vec![0.0, 1.0, 2.0]);
    }
}
