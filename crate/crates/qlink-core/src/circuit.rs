//! Lumped-element channel models: standing-mode RLC equivalents, the
//! external load implied by a measured mode lifetime, and the parasitic
//! loading of Q1 through its coupler.
//!
//! Element values are SI (Ω, H, F); frequencies rad/s; times ns.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::LN_10;

use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::model::DeviceParams;
use crate::units::ghz;

/// dB per neper, 20/ln 10 ≈ 8.6859.
pub const DB_PER_NEPER: f64 = 20.0 / LN_10;

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel {
    pub z0_ohm: f64,
    pub alpha_db_per_m: f64,
    pub inductance_per_m: f64,
    pub length_m: f64,
    pub fsr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeRlc {
    pub r_ohm: f64,
    pub l_h: f64,
    pub c_f: f64,
}

impl ModeRlc {
    /// Energy lifetime L/R in ns.
    pub fn lifetime_ns(&self) -> f64 {
        self.l_h / self.r_ohm * 1e9
    }
}

impl ChannelModel {
    pub fn from_device(device: &DeviceParams) -> Self {
        let ch = &device.channel;
        Self {
            z0_ohm: ch.z0_ohm,
            alpha_db_per_m: ch.alpha_db_per_m,
            inductance_per_m: ch.inductance_nh_per_m * 1e-9,
            length_m: ch.length_m,
            fsr: device.fsr(),
        }
    }

    pub fn mode_frequency(&self, n: u32) -> f64 {
        n as f64 * self.fsr
    }

    /// Series RLC equivalent of standing mode `n`.
    pub fn mode_rlc(&self, n: u32) -> Result<ModeRlc> {
        if n == 0 {
            return Err(Error::InvalidParameters(format!("mode index must be ≥ 1, got {n}")));
        }
        let alpha_np = self.alpha_db_per_m / DB_PER_NEPER;
        let r = self.z0_ohm * alpha_np * self.length_m;
        let l = 0.5 * self.inductance_per_m * self.length_m;
        let w = self.mode_frequency(n);
        Ok(ModeRlc { r_ohm: r, l_h: l, c_f: 1.0 / (w * w * l) })
    }

    /// Mode index closest to angular frequency `omega`.
    pub fn nearest_mode(&self, omega: f64) -> u32 {
        libm::round(omega / self.fsr).max(1.0) as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveLoad {
    /// External lifetime in ns, `f64::INFINITY` without external loss.
    pub t1r_ext_ns: f64,
    pub r_load_ohm: f64,
}

/// External lifetime and the equivalent load resistance that reproduce a
/// measured mode lifetime `t1r_ns` on top of the intrinsic one.
pub fn effective_load(t1r_ns: f64, t1r_int_ns: f64, l_r_h: f64) -> Result<EffectiveLoad> {
    if !(t1r_ns > 0.0 && t1r_int_ns > 0.0 && l_r_h > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "lifetimes and inductance must be positive (t1r {t1r_ns}, t1r_int {t1r_int_ns}, l_r {l_r_h})"
        )));
    }
    if t1r_ns > t1r_int_ns {
        return Err(Error::InvalidParameters(format!(
            "t1r {t1r_ns} ns exceeds the intrinsic lifetime {t1r_int_ns} ns (negative external loss)"
        )));
    }
    let rate = 1.0 / t1r_ns - 1.0 / t1r_int_ns;
    if rate <= 0.0 {
        return Ok(EffectiveLoad { t1r_ext_ns: f64::INFINITY, r_load_ohm: 0.0 });
    }
    let t_ext = 1.0 / rate;
    Ok(EffectiveLoad { t1r_ext_ns: t_ext, r_load_ohm: l_r_h / (t_ext * 1e-9) })
}

/// Q1 branch, coupler bridge, stub to the switch and the loaded mode.
///
/// Topology: the qubit (series C_q–L_q) drives node A; the π-bridge is shunt
/// L_g at A, series L_T from A to B, shunt L_g at B; a series stub L_s joins
/// B to node C; at C the load R sits in parallel with the series L_r–C_r mode
/// branch to ground.
///
/// `l_t_h` may be negative (a junction biased past π/2), but the bridge
/// requires `2·L_g + L_T > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadingNetwork {
    pub c_q_f: f64,
    pub l_q_h: f64,
    pub l_g_h: f64,
    pub l_t_h: f64,
    pub l_s_h: f64,
    pub l_r_h: f64,
    pub c_r_f: f64,
    pub r_load_ohm: f64,
}

/// Reactances of the lossless bridge-plus-stub two-port, port 1 at A and
/// port 2 at C, per unit ω (i.e. effective inductances in H).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeInductances {
    pub l11: f64,
    pub l12: f64,
    pub l22: f64,
}

impl LoadingNetwork {
    /// Network for the device at a given mode lifetime. L_T starts at the
    /// device value and is normally recalibrated with [`with_coupling`].
    ///
    /// [`with_coupling`]: LoadingNetwork::with_coupling
    pub fn from_device(device: &DeviceParams, t1r_ns: f64) -> Result<Self> {
        let channel = ChannelModel::from_device(device);
        let omega_r = ghz(device.channel.mode_freq_ghz);
        let l_r = 0.5 * channel.inductance_per_m * channel.length_m;
        let load = effective_load(t1r_ns, device.channel.t1r_int_ns, l_r)?;
        let net = Self {
            c_q_f: device.q1.c_q_ff * 1e-15,
            l_q_h: device.q1.l_q_nh * 1e-9,
            l_g_h: device.coupler1.l_g_nh * 1e-9,
            l_t_h: device.coupler1.l_t_nh * 1e-9,
            l_s_h: device.channel.inductance_nh_per_m * 1e-9 * device.channel.switch_offset_mm * 1e-3,
            l_r_h: l_r,
            c_r_f: 1.0 / (omega_r * omega_r * l_r),
            r_load_ohm: load.r_load_ohm,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_q", self.c_q_f),
            ("l_q", self.l_q_h),
            ("l_g", self.l_g_h),
            ("l_s", self.l_s_h),
            ("l_r", self.l_r_h),
            ("c_r", self.c_r_f),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Circuit(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.r_load_ohm.is_finite() && self.r_load_ohm >= 0.0) {
            return Err(Error::Circuit(format!("load resistance must be ≥ 0, got {}", self.r_load_ohm)));
        }
        if !(2.0 * self.l_g_h + self.l_t_h > 0.0) {
            return Err(Error::Circuit(format!(
                "bridge is singular: 2·L_g + L_T = {:.4e} H",
                2.0 * self.l_g_h + self.l_t_h
            )));
        }
        Ok(())
    }

    /// Mode resonance 1/√(L_r C_r).
    pub fn mode_frequency(&self) -> f64 {
        1.0 / libm::sqrt(self.l_r_h * self.c_r_f)
    }

    pub fn bridge(&self) -> BridgeInductances {
        let (lg, lt, ls) = (self.l_g_h, self.l_t_h, self.l_s_h);
        let den = 2.0 * lg + lt;
        let shunt = lg * (lt + lg) / den;
        BridgeInductances { l11: shunt, l12: lg * lg / den, l22: ls + shunt }
    }

    /// (X12/X22)²: the impedance transformation from node C to node A.
    /// Frequency independent because the two-port is purely inductive.
    pub fn transfer_ratio(&self) -> f64 {
        let b = self.bridge();
        let r = b.l12 / b.l22;
        r * r
    }

    /// Load node impedance R ∥ (j·2L_r·Δ), the series L_r–C_r branch taken to
    /// first order in the detuning Δ from its resonance.
    pub fn node_impedance(&self, detuning: f64) -> C64 {
        if self.r_load_ohm == 0.0 {
            return c(0.0, 0.0);
        }
        let zr = c(self.r_load_ohm, 0.0);
        let zx = c(0.0, 2.0 * self.l_r_h * detuning);
        if zx.norm() == 0.0 {
            return c(0.0, 0.0);
        }
        zr * zx / (zr + zx)
    }

    /// Impedance seen from the qubit branch at the mode frequency offset by
    /// `detuning`, linearised in the (weak) load: Z_A ≈ Z_A(0) + T²·Z_C.
    pub fn input_impedance(&self, detuning: f64) -> C64 {
        let w = self.mode_frequency() + detuning;
        let b = self.bridge();
        let lossless = c(0.0, w * (b.l11 - b.l12 * b.l12 / b.l22));
        lossless + self.node_impedance(detuning) * self.transfer_ratio()
    }

    /// Vacuum-Rabi coupling (rad/s) between the qubit and the mode through
    /// the lossless network, with the qubit tuned into resonance with the
    /// loaded mode.
    ///
    /// Two LC loops with effective inductances L_a, L_b and shared mutual M
    /// resonate at ω₀/√(1 ∓ k), k = M/√(L_a L_b); g is half the splitting.
    pub fn vacuum_rabi_coupling(&self) -> f64 {
        let b = self.bridge();
        let lb = b.l22 + self.l_r_h;
        let w0 = 1.0 / libm::sqrt(lb * self.c_r_f);
        // Qubit loop tuned so 1/(L_a C_q) = ω₀².
        let la = 1.0 / (w0 * w0 * self.c_q_f);
        let k = b.l12 / libm::sqrt(la * lb);
        if k >= 1.0 {
            return f64::INFINITY;
        }
        0.5 * w0 * (1.0 / libm::sqrt(1.0 - k) - 1.0 / libm::sqrt(1.0 + k))
    }

    /// Copy of the network with L_T chosen so the vacuum-Rabi coupling is `g`.
    pub fn with_coupling(&self, g: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Circuit(format!("coupling must be positive, got {g}")));
        }
        let mut net = self.clone();
        let eval = |lt: f64, net: &mut Self| {
            net.l_t_h = lt;
            net.vacuum_rabi_coupling()
        };
        // g falls monotonically as L_T grows from −2L_g.
        let floor = -2.0 * self.l_g_h;
        let mut lo = floor + 1e-6 * self.l_g_h;
        let mut hi = self.l_g_h;
        while eval(hi, &mut net) > g {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::Circuit(format!("coupling {g:.4e} rad/s is below the reachable range")));
            }
        }
        if eval(lo, &mut net) < g {
            return Err(Error::Circuit(format!("coupling {g:.4e} rad/s exceeds the reachable range")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eval(mid, &mut net) > g {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * self.l_g_h {
                break;
            }
        }
        net.l_t_h = 0.5 * (lo + hi);
        Ok(net)
    }
}

/// Loaded Q1 lifetime in ns, T1 = L_q / Re Z(Δω₁), with the bridge set to
/// produce coupling `g1`. Returns `f64::INFINITY` without dissipation.
pub fn loaded_q1_t1(network: &LoadingNetwork, detuning: f64, g1: f64) -> Result<f64> {
    network.validate()?;
    if g1 == 0.0 || network.r_load_ohm == 0.0 {
        return Ok(f64::INFINITY);
    }
    let net = network.with_coupling(g1.abs())?;
    let re = net.input_impedance(detuning).re;
    if re < 0.0 || re.is_nan() {
        return Err(Error::Circuit(format!("non-physical input resistance {re:.4e} Ω")));
    }
    if re == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(net.l_q_h / re * 1e9)
}

/// Tabulated loaded T1(g1, Δω₁). Queries interpolate the decay rate 1/T1
/// bilinearly and clamp to the grid edges.
#[derive(Clone, Debug, PartialEq)]
pub struct T1Table {
    couplings: Vec<f64>,
    detunings: Vec<f64>,
    /// Row-major over couplings, then detunings.
    t1_ns: Vec<f64>,
}

impl T1Table {
    pub fn build(network: &LoadingNetwork, couplings: &[f64], detunings: &[f64]) -> Result<Self> {
        let mut t1 = Vec::with_capacity(couplings.len() * detunings.len());
        for &g in couplings {
            for &d in detunings {
                let v = loaded_q1_t1(network, d, g)
                    .map_err(|e| Error::Circuit(format!("cell (g1 = {g:.4e}, detuning = {d:.4e}): {e}")))?;
                t1.push(v);
            }
        }
        Self::from_parts(couplings.to_vec(), detunings.to_vec(), t1)
    }

    pub fn from_parts(couplings: Vec<f64>, detunings: Vec<f64>, t1_ns: Vec<f64>) -> Result<Self> {
        if couplings.is_empty() || detunings.is_empty() {
            return Err(Error::InvalidParameters("T1 table grids must be non-empty".into()));
        }
        if t1_ns.len() != couplings.len() * detunings.len() {
            return Err(Error::DimensionMismatch { expected: couplings.len() * detunings.len(), got: t1_ns.len() });
        }
        for grid in [&couplings, &detunings] {
            if grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameters("T1 table grid must be strictly increasing".into()));
            }
        }
        if t1_ns.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidParameters("T1 table values must be positive".into()));
        }
        Ok(Self { couplings, detunings, t1_ns })
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn values(&self) -> &[f64] {
        &self.t1_ns
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.t1_ns[i * self.detunings.len() + j]
    }

    /// Interpolated decay rate in 1/ns.
    pub fn rate(&self, g1: f64, detuning: f64) -> f64 {
        let (i0, i1, u) = bracket(&self.couplings, g1);
        let (j0, j1, v) = bracket(&self.detunings, detuning);
        let r = |i, j| 1.0 / self.node(i, j);
        (1.0 - u) * ((1.0 - v) * r(i0, j0) + v * r(i0, j1)) + u * ((1.0 - v) * r(i1, j0) + v * r(i1, j1))
    }

    /// Interpolated T1 in ns; exact at grid nodes.
    pub fn t1(&self, g1: f64, detuning: f64) -> f64 {
        let (i0, i1, u) = bracket(&self.couplings, g1);
        let (j0, j1, v) = bracket(&self.detunings, detuning);
        if (u == 0.0 || i0 == i1) && (v == 0.0 || j0 == j1) {
            return self.node(i0, j0);
        }
        1.0 / self.rate(g1, detuning)
    }
}

/// Indices and weight of `x` within a sorted grid, clamped at the ends.
fn bracket(grid: &[f64], x: f64) -> (usize, usize, f64) {
    let n = grid.len();
    if n == 1 || x <= grid[0] {
        return (0, 0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let u = (x - grid[lo]) / (grid[hi] - grid[lo]);
    (lo, hi, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz;

    fn device() -> DeviceParams {
        DeviceParams::reference()
    }

    #[test]
    fn mode_rlc_values() {
        let ch = ChannelModel::from_device(&device());
        let rlc = ch.mode_rlc(64).unwrap();
        assert!((rlc.l_h * 1e9 - 0.5 * 402.0 * 0.73).abs() < 1e-9);
        let r_expected = 50.0 * (0.010 / 8.6859) * 0.73;
        assert!((rlc.r_ohm - r_expected).abs() < 1e-5 * r_expected);
        assert!((rlc.r_ohm - 0.0420).abs() < 5e-5);
        let w = ch.mode_frequency(64);
        assert!((w * w * rlc.l_h * rlc.c_f - 1.0).abs() < 1e-12);
        assert!((rlc.lifetime_ns() - 3490.0).abs() < 10.0);
        assert!(ch.mode_rlc(0).is_err());
    }

    #[test]
    fn effective_load_values() {
        let lr = 146.73e-9;
        let none = effective_load(3410.0, 3410.0, lr).unwrap();
        assert!(none.t1r_ext_ns.is_infinite() && none.r_load_ohm == 0.0);
        let max = effective_load(28.7, 3410.0, lr).unwrap();
        assert!((max.t1r_ext_ns - 28.94).abs() < 0.01);
        assert!((max.r_load_ohm - 5.07).abs() < 0.01);
        let mid = effective_load(503.0, 3410.0, lr).unwrap();
        assert!((mid.t1r_ext_ns - 590.0).abs() < 1.0);
        assert!(effective_load(4000.0, 3410.0, lr).is_err());
    }

    #[test]
    fn bridge_matches_nodal_inversion() {
        // Z-parameters of the three-node ladder from a direct nodal solve.
        let net = LoadingNetwork::from_device(&device(), 28.7).unwrap();
        let w = net.mode_frequency();
        let (lg, lt, ls) = (net.l_g_h, net.l_t_h, net.l_s_h);
        let y = |l: f64| 1.0 / (w * l);
        // Susceptance matrix (the j factors cancel in the Z/Y pairing).
        let b = nalgebra::Matrix3::new(
            y(lg) + y(lt),
            -y(lt),
            0.0,
            -y(lt),
            y(lt) + y(lg) + y(ls),
            -y(ls),
            0.0,
            -y(ls),
            y(ls),
        );
        let z = b.try_inverse().unwrap();
        let br = net.bridge();
        assert!((z[(0, 0)] / w - br.l11).abs() < 1e-9 * br.l11.abs());
        assert!((z[(0, 2)] / w - br.l12).abs() < 1e-9 * br.l12.abs());
        assert!((z[(2, 2)] / w - br.l22).abs() < 1e-9 * br.l22.abs());
    }

    #[test]
    fn coupling_calibration_round_trip() {
        let net = LoadingNetwork::from_device(&device(), 28.7).unwrap();
        for g_mhz in [0.5, 5.0, 15.0, 20.0] {
            let cal = net.with_coupling(mhz(g_mhz)).unwrap();
            assert!((cal.vacuum_rabi_coupling() / mhz(g_mhz) - 1.0).abs() < 1e-9);
        }
        let cal = net.with_coupling(mhz(15.0)).unwrap();
        assert!(cal.l_t_h < 0.0 && cal.l_t_h > -0.4e-9);
    }

    #[test]
    fn coupling_is_monotone_in_bridge_inductance() {
        let mut net = LoadingNetwork::from_device(&device(), 28.7).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            net.l_t_h = -0.4e-9 + k as f64 * 0.01e-9;
            let g = net.vacuum_rabi_coupling();
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn loaded_t1_anchor() {
        let net = LoadingNetwork::from_device(&device(), 28.7).unwrap();
        let t1 = loaded_q1_t1(&net, mhz(0.4), mhz(15.0)).unwrap();
        assert!((t1 - 500.0).abs() <= 150.0, "{t1}");
    }

    #[test]
    fn loaded_t1_even_and_maximal_at_zero() {
        let net = LoadingNetwork::from_device(&device(), 28.7).unwrap();
        let g = mhz(10.0);
        assert!(loaded_q1_t1(&net, 0.0, g).unwrap().is_infinite());
        for d in [0.1, 0.4, 1.0, 3.0] {
            let a = loaded_q1_t1(&net, mhz(d), g).unwrap();
            let b = loaded_q1_t1(&net, mhz(-d), g).unwrap();
            assert!((a / b - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lossless_network_never_loads() {
        let net = LoadingNetwork::from_device(&device(), 3410.0).unwrap();
        assert_eq!(net.r_load_ohm, 0.0);
        for (d, g) in [(0.4, 15.0), (2.0, 1.0), (0.0, 5.0)] {
            assert!(loaded_q1_t1(&net, mhz(d), mhz(g)).unwrap().is_infinite());
        }
    }

    #[test]
    fn t1_decreases_with_coupling() {
        let net = LoadingNetwork::from_device(&device(), 28.7).unwrap();
        let gs: Vec<f64> = (1..=20).map(|k| mhz(k as f64)).collect();
        let table = T1Table::build(&net, &gs, &[mhz(0.4)]).unwrap();
        assert!(table.values().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn table_interpolation_contract() {
        let t = T1Table::from_parts(alloc::vec![0.0, 1.0], alloc::vec![0.0, 2.0], alloc::vec![100.0, 50.0, 25.0, 10.0])
            .unwrap();
        assert_eq!(t.t1(1.0, 0.0), 25.0);
        assert_eq!(t.t1(0.0, 2.0), 50.0);
        let mid = t.rate(0.5, 1.0);
        let expected = 0.25 * (1.0 / 100.0 + 1.0 / 50.0 + 1.0 / 25.0 + 1.0 / 10.0);
        assert!((mid - expected).abs() < 1e-15);
        assert_eq!(t.t1(5.0, 5.0), 10.0);
        let single = T1Table::from_parts(alloc::vec![1.0], alloc::vec![0.5], alloc::vec![42.0]).unwrap();
        assert_eq!(single.t1(0.0, 0.0), 42.0);
        assert_eq!(single.t1(9.0, -3.0), 42.0);
        assert!(T1Table::from_parts(alloc::vec![], alloc::vec![0.0], alloc::vec![]).is_err());
    }

    #[test]
    fn infinite_cells_interpolate_to_zero_rate() {
        let t =
            T1Table::from_parts(alloc::vec![0.0, 1.0], alloc::vec![0.0], alloc::vec![f64::INFINITY, 100.0]).unwrap();
        assert_eq!(t.rate(0.0, 0.0), 0.0);
        assert!((t.rate(0.5, 0.0) - 0.005).abs() < 1e-15);
        assert!(t.t1(0.0, 0.0).is_infinite());
    }
}
