//! Device constants, the multimode qubit–channel–qubit Hamiltonian and the
//! three-level dark/bright structure.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::schedules::Schedule;
use crate::statespace::{Operator, Representation, Space, SpaceLayout};
use crate::units::mhz;

/// Per-qubit constants. Units are carried in the field names.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitParams {
    pub max_freq_ghz: f64,
    pub idle_freq_ghz: f64,
    pub c_q_ff: f64,
    pub l_q_nh: f64,
    pub anharmonicity_mhz: f64,
    pub t1_int_us: f64,
    pub t2_ramsey_us: f64,
    pub t2_echo_us: f64,
    pub readout_fg: f64,
    pub readout_fe: f64,
}

/// Coupler between a qubit and the channel.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplerParams {
    pub l_t_nh: f64,
    pub l_g_nh: f64,
}

/// Transmission-line channel constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub z0_ohm: f64,
    pub alpha_db_per_m: f64,
    pub inductance_nh_per_m: f64,
    pub length_m: f64,
    pub fsr_mhz: f64,
    pub t1r_int_ns: f64,
    /// Frequency of the standing mode used for communication.
    pub mode_freq_ghz: f64,
    /// Distance from the Q1 coupler to the loss switch.
    pub switch_offset_mm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceParams {
    pub q1: QubitParams,
    pub q2: QubitParams,
    pub coupler1: CouplerParams,
    pub coupler2: CouplerParams,
    pub channel: ChannelParams,
}

impl DeviceParams {
    /// Measured parameters of the two-qubit device.
    pub fn reference() -> Self {
        Self {
            q1: QubitParams {
                max_freq_ghz: 6.239,
                idle_freq_ghz: 5.504,
                c_q_ff: 90.0,
                l_q_nh: 7.2,
                anharmonicity_mhz: -168.0,
                t1_int_us: 11.5,
                t2_ramsey_us: 1.11,
                t2_echo_us: 4.09,
                readout_fg: 0.966,
                readout_fe: 0.881,
            },
            q2: QubitParams {
                max_freq_ghz: 6.132,
                idle_freq_ghz: 5.419,
                c_q_ff: 90.0,
                l_q_nh: 7.5,
                anharmonicity_mhz: -171.0,
                t1_int_us: 9.1,
                t2_ramsey_us: 1.15,
                t2_echo_us: 3.54,
                readout_fg: 0.959,
                readout_fe: 0.888,
            },
            coupler1: CouplerParams { l_t_nh: 0.61, l_g_nh: 0.2 },
            coupler2: CouplerParams { l_t_nh: 0.61, l_g_nh: 0.2 },
            channel: ChannelParams {
                z0_ohm: 50.0,
                alpha_db_per_m: 0.010,
                inductance_nh_per_m: 402.0,
                length_m: 0.73,
                fsr_mhz: 84.0,
                t1r_int_ns: 3410.0,
                mode_freq_ghz: 5.351,
                switch_offset_mm: 1.6,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut positives: Vec<(&str, f64)> = Vec::new();
        for (tag, q) in [("q1", &self.q1), ("q2", &self.q2)] {
            positives.extend([
                ("max_freq_ghz", q.max_freq_ghz),
                ("idle_freq_ghz", q.idle_freq_ghz),
                ("c_q_ff", q.c_q_ff),
                ("l_q_nh", q.l_q_nh),
                ("t1_int_us", q.t1_int_us),
                ("t2_ramsey_us", q.t2_ramsey_us),
                ("t2_echo_us", q.t2_echo_us),
            ]);
            for (name, p) in [("readout_fg", q.readout_fg), ("readout_fe", q.readout_fe)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameters(format!("{tag}.{name} = {p} is not a probability")));
                }
            }
        }
        for cp in [&self.coupler1, &self.coupler2] {
            positives.push(("l_g_nh", cp.l_g_nh));
        }
        let ch = &self.channel;
        positives.extend([
            ("z0_ohm", ch.z0_ohm),
            ("alpha_db_per_m", ch.alpha_db_per_m),
            ("inductance_nh_per_m", ch.inductance_nh_per_m),
            ("length_m", ch.length_m),
            ("fsr_mhz", ch.fsr_mhz),
            ("t1r_int_ns", ch.t1r_int_ns),
            ("mode_freq_ghz", ch.mode_freq_ghz),
            ("switch_offset_mm", ch.switch_offset_mm),
        ]);
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Free spectral range in rad/s.
    pub fn fsr(&self) -> f64 {
        mhz(self.channel.fsr_mhz)
    }
}

/// H(t) = H₀ + g1(t)·V₁ + g2(t)·V₂, all in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianParts {
    pub static_part: CMat,
    pub coupling_q1: CMat,
    pub coupling_q2: CMat,
}

impl HamiltonianParts {
    pub fn at(&self, g1: f64, g2: f64) -> CMat {
        &self.static_part + self.coupling_q1.scale(g1) + self.coupling_q2.scale(g2)
    }
}

/// Multimode Jaynes–Cummings model: Q1 couples to every mode with g1(t), Q2
/// with (−1)ⁿ·g2(t). Mode n sits at detuning n·ω_FSR from the central mode.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianModel {
    space: Space,
    detuning_q1: f64,
    detuning_q2: f64,
    fsr: f64,
    schedule: Schedule,
}

impl HamiltonianModel {
    pub fn new(space: Space, fsr: f64, schedule: Schedule) -> Self {
        Self { space, detuning_q1: 0.0, detuning_q2: 0.0, fsr, schedule }
    }

    pub fn with_detunings(mut self, detuning_q1: f64, detuning_q2: f64) -> Self {
        self.detuning_q1 = detuning_q1;
        self.detuning_q2 = detuning_q2;
        self
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn layout(&self) -> SpaceLayout {
        self.space.layout()
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn fsr(&self) -> f64 {
        self.fsr
    }

    pub fn detunings(&self) -> (f64, f64) {
        (self.detuning_q1, self.detuning_q2)
    }

    /// (n, Δₙ = n·ω_FSR) for every mode.
    pub fn mode_detunings(&self) -> Vec<(i32, f64)> {
        self.layout().mode_numbers().map(|n| (n, n as f64 * self.fsr)).collect()
    }

    pub fn parts(&self) -> Result<HamiltonianParts> {
        let space = self.space;
        let l = space.layout();
        let (q1, q2) = (l.qubit1(), l.qubit2());
        let mut h0 = space.number(q1)?.scale(self.detuning_q1) + space.number(q2)?.scale(self.detuning_q2);
        let d = space.dim();
        let mut v1 = CMat::zeros(d, d);
        let mut v2 = CMat::zeros(d, d);
        for (n, delta) in self.mode_detunings() {
            let k = l.mode(n)?;
            if delta != 0.0 {
                h0 += space.number(k)?.scale(delta);
            }
            v1 += space.exchange(q1, k)?;
            let parity = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            v2 += space.exchange(q2, k)?.scale(parity);
        }
        Ok(HamiltonianParts { static_part: h0, coupling_q1: v1, coupling_q2: v2 })
    }

    /// H(t) in rad/s on the model's space.
    pub fn hamiltonian_matrix(&self, t: f64) -> Result<CMat> {
        let (g1, g2) = self.schedule.couplings(t)?;
        Ok(self.parts()?.at(g1, g2))
    }

    /// H(t) as an operator on the full layout.
    pub fn build_hamiltonian(&self, t: f64) -> Result<Operator> {
        if self.space.representation() != Representation::Full {
            return Err(Error::InvalidParameters(format!(
                "build_hamiltonian needs the full representation, model uses {:?}",
                self.space.representation()
            )));
        }
        Operator::new(self.layout(), self.hamiltonian_matrix(t)?)
    }
}

/// Three-level Hamiltonian on {|e0g⟩, |g1g⟩, |g0e⟩}.
pub fn single_excitation_hamiltonian(g1: f64, g2: f64) -> CMat {
    linalg::real_mat(3, 3, &[0.0, g1, 0.0, g1, 0.0, g2, 0.0, g2, 0.0])
}

/// tan θ = g1/g2, θ ∈ [0, π/2] for non-negative couplings.
pub fn mixing_angle(g1: f64, g2: f64) -> f64 {
    libm::atan2(g1, g2)
}

/// cos θ·|e0g⟩ − sin θ·|g0e⟩.
pub fn dark_state(theta: f64) -> CVec {
    CVec::from_vec(alloc::vec![c(libm::cos(theta), 0.0), c(0.0, 0.0), c(-libm::sin(theta), 0.0)])
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenStructure {
    /// Ascending: −ḡ, 0, +ḡ on resonance.
    pub energies: Vec<f64>,
    pub states: Vec<CVec>,
    pub mixing_angle: f64,
}

impl EigenStructure {
    /// Splitting of the bright states from the dark state.
    pub fn gbar(&self) -> f64 {
        0.5 * (self.energies[2] - self.energies[0])
    }
}

pub fn eigen_splitting(g1: f64, g2: f64) -> EigenStructure {
    let h = single_excitation_hamiltonian(g1, g2);
    let (energies, vecs) = linalg::eigh(&h);
    let states = (0..3).map(|k| vecs.column(k).into_owned()).collect();
    EigenStructure { energies, states, mixing_angle: mixing_angle(g1, g2) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, ONE};
    use crate::schedules::Schedule;
    use crate::statespace::build_layout;
    use crate::units::to_mhz;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn overlap(a: &CVec, b: &CVec) -> f64 {
        a.dotc(b).norm()
    }

    #[test]
    fn reference_device_is_valid() {
        DeviceParams::reference().validate().unwrap();
        let mut d = DeviceParams::reference();
        d.q1.readout_fg = 1.2;
        assert!(d.validate().is_err());
        let mut d = DeviceParams::reference();
        d.channel.length_m = 0.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn zero_couplings_give_zero_hamiltonian() {
        let parts =
            HamiltonianModel::new(Space::full(build_layout(1)), 0.0, Schedule::adiabatic_transfer(1.0, 1.0).unwrap())
                .parts()
                .unwrap();
        assert_eq!(max_abs(&parts.at(0.0, 0.0)), 0.0);
    }

    #[test]
    fn odd_mode_sign_flip() {
        let l = build_layout(1);
        let space = Space::full(l);
        let model = HamiltonianModel::new(space, mhz(84.0), Schedule::adiabatic_transfer(1.0, 1.0).unwrap());
        let h = model.parts().unwrap().at(2.0, 3.0);
        let g1g = space.excited_index(Some(l.mode(1).unwrap()));
        let g0e = space.excited_index(Some(l.qubit2()));
        assert_eq!(h[(g1g, g0e)], c(-3.0, 0.0));
        let g0_1 = space.excited_index(Some(l.mode(0).unwrap()));
        assert_eq!(h[(g0_1, g0e)], c(3.0, 0.0));
        let e0g = space.excited_index(Some(0));
        assert_eq!(h[(g1g, e0g)], c(2.0, 0.0));
        assert_eq!(h[(g1g, g1g)], c(mhz(84.0), 0.0));
    }

    #[test]
    fn n0_reduces_to_three_level_model() {
        let l = build_layout(0);
        let space = Space::full(l);
        let model = HamiltonianModel::new(space, mhz(84.0), Schedule::adiabatic_transfer(1.0, 1.0).unwrap());
        let (g1, g2) = (0.7, 1.3);
        let h = model.parts().unwrap().at(g1, g2);
        let idx = [space.excited_index(Some(0)), space.excited_index(Some(1)), space.excited_index(Some(2))];
        let three = single_excitation_hamiltonian(g1, g2);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(h[(idx[a], idx[b])], three[(a, b)]);
            }
        }
    }

    #[test]
    fn resonant_single_mode_spectrum() {
        let gbar = mhz(15.0);
        let g = gbar / libm::sqrt(2.0);
        let l = build_layout(0);
        let space = Space::single_excitation(l);
        let model = HamiltonianModel::new(space, 0.0, Schedule::adiabatic_transfer(gbar, 132.0).unwrap());
        let h = model.hamiltonian_matrix(66.0).unwrap();
        let (vals, _) = linalg::eigh(&h);
        // Ground state adds one extra zero.
        let expected = [-gbar, 0.0, 0.0, gbar];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12 * gbar, "{v} vs {e}");
        }
        let es = eigen_splitting(g, g);
        assert!((es.energies[0] + gbar).abs() < 1e-12 * gbar);
        assert!(es.energies[1].abs() < 1e-12 * gbar);
        assert!((es.energies[2] - gbar).abs() < 1e-12 * gbar);
    }

    #[test]
    fn decoupled_q2_is_dark() {
        let es = eigen_splitting(1.0, 0.0);
        assert!((es.energies[0] + 1.0).abs() < 1e-12 && (es.energies[2] - 1.0).abs() < 1e-12);
        let dark = &es.states[1];
        assert!((overlap(dark, &CVec::from_vec(alloc::vec![c(0.0, 0.0), c(0.0, 0.0), ONE])) - 1.0).abs() < 1e-12);
        assert!((overlap(&dark_state(FRAC_PI_2), dark) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_couplings_give_singlet_dark_state() {
        let es = eigen_splitting(1.0, 1.0);
        let s = 1.0 / libm::sqrt(2.0);
        let singlet = CVec::from_vec(alloc::vec![c(s, 0.0), c(0.0, 0.0), c(-s, 0.0)]);
        assert!((overlap(&es.states[1], &singlet) - 1.0).abs() < 1e-12);
        assert!((es.mixing_angle - FRAC_PI_4).abs() < 1e-15);
        assert!((overlap(&dark_state(FRAC_PI_4), &singlet) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_coupling_splittings() {
        let es = eigen_splitting(mhz(5.9), mhz(5.9));
        assert!((to_mhz(es.gbar()) - 8.34).abs() < 5e-3);
        let es = eigen_splitting(mhz(20.0), mhz(20.0));
        assert!((to_mhz(es.gbar()) - 28.28).abs() < 5e-3);
        let es = eigen_splitting(mhz(7.0), 0.0);
        assert!((to_mhz(es.gbar()) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn dark_state_endpoints() {
        assert_eq!(dark_state(0.0), CVec::from_vec(alloc::vec![ONE, c(0.0, 0.0), c(0.0, 0.0)]));
        let d = dark_state(FRAC_PI_2);
        assert!((d[2] + ONE).norm() < 1e-15 && d[0].norm() < 1e-15);
    }

    #[test]
    fn build_hamiltonian_requires_full_space() {
        let model = HamiltonianModel::new(
            Space::single_excitation(build_layout(1)),
            0.0,
            Schedule::adiabatic_transfer(1.0, 1.0).unwrap(),
        );
        assert!(model.build_hamiltonian(0.5).is_err());
        let full =
            HamiltonianModel::new(Space::full(build_layout(1)), 0.0, Schedule::adiabatic_transfer(1.0, 1.0).unwrap());
        assert!(full.build_hamiltonian(0.5).is_ok());
        assert!(matches!(full.build_hamiltonian(1.5), Err(Error::TimeOutOfRange { .. })));
    }
}
