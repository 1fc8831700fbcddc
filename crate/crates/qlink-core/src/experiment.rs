//! End-to-end pipelines: build the model for a device and protocol, integrate,
//! and reduce the result to transfer, process and entanglement metrics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{LoadingNetwork, T1Table};
use crate::error::{Error, Result};
use crate::integrator::{
    self, compute_tphi, Decoherence, LindbladProblem, SpuriousLoading, StepControl, SweepParameter, SweepRow,
    Trajectory,
};
use crate::model::{DeviceParams, HamiltonianModel};
use crate::schedules::{dark_state_return_times, Protocol, Schedule};
use crate::statespace::{build_layout, partial_trace, DensityMatrix, Representation, Space};
use crate::tomography::{
    self, correct_readout, AssignmentMatrix, ProcessMatrix, ReadoutCorrection, TomographyData, TomographySettings,
};
use crate::units::mhz;

/// Source of the pure-dephasing time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dephasing {
    /// Tφ from the spin-echo T2.
    Echo,
    /// Tφ from the Ramsey T2.
    Ramsey,
    Off,
}

impl Dephasing {
    pub fn name(self) -> &'static str {
        match self {
            Dephasing::Echo => "echo",
            Dephasing::Ramsey => "ramsey",
            Dephasing::Off => "off",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "echo" => Some(Dephasing::Echo),
            "ramsey" => Some(Dephasing::Ramsey),
            "off" | "none" => Some(Dephasing::Off),
            _ => None,
        }
    }
}

/// Simulated readout applied to synthesized tomography data.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutModel {
    pub assignment: AssignmentMatrix,
    pub correction: ReadoutCorrection,
    /// Shots per tomography setting; `None` keeps exact probabilities.
    pub shots: Option<u64>,
    pub seed: u64,
}

/// Everything needed to run one protocol on one device.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub device: DeviceParams,
    pub protocol: Protocol,
    pub gbar_mhz: f64,
    pub t_f_ns: f64,
    pub relay_g_mhz: f64,
    /// Coupler release ramp after a half protocol.
    pub release_ns: f64,
    pub n_side_modes: usize,
    pub representation: Representation,
    /// Channel-mode lifetime; `None` makes the modes lossless.
    pub t1r_ns: Option<f64>,
    /// Disables every dissipative channel.
    pub lossless: bool,
    pub spurious_loading: bool,
    /// Q1 detuning from the loaded mode that sets the spurious-loading rate.
    pub loading_detuning_mhz: f64,
    /// Precomputed loaded-Q1 T1 table; built from the circuit model when absent.
    pub t1_table: Option<T1Table>,
    pub dephasing: Dephasing,
    pub step: StepControl,
    pub sample_spacing_ns: f64,
    /// Q2 azimuthal correction used in tomography; `None` picks π for
    /// transfers and 0 for half protocols.
    pub phase_q2: Option<f64>,
    pub readout: Option<ReadoutModel>,
}

impl ExperimentSpec {
    /// Reference device, N = 2, intrinsic channel loss.
    pub fn reference(protocol: Protocol) -> Self {
        let device = DeviceParams::reference();
        let t1r = device.channel.t1r_int_ns;
        Self {
            device,
            protocol,
            gbar_mhz: 15.0,
            t_f_ns: 132.0,
            relay_g_mhz: 5.0,
            release_ns: if protocol.is_half() { 10.0 } else { 0.0 },
            n_side_modes: 2,
            representation: Representation::Full,
            t1r_ns: Some(t1r),
            lossless: false,
            spurious_loading: true,
            loading_detuning_mhz: 1.0,
            t1_table: None,
            dephasing: Dephasing::Echo,
            step: StepControl::default(),
            sample_spacing_ns: 1.0,
            phase_q2: None,
            readout: None,
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let s = match self.protocol {
            Protocol::AdiabaticTransfer => Schedule::adiabatic_transfer(mhz(self.gbar_mhz), self.t_f_ns)?,
            Protocol::AdiabaticHalf => Schedule::adiabatic_half(mhz(self.gbar_mhz), self.t_f_ns)?,
            Protocol::RelayTransfer => Schedule::relay_transfer(mhz(self.relay_g_mhz))?,
            Protocol::RelayHalf => Schedule::relay_half(mhz(self.relay_g_mhz))?,
        };
        if self.protocol.is_half() && self.release_ns > 0.0 {
            return s.with_release(self.release_ns);
        }
        Ok(s)
    }

    pub fn space(&self) -> Space {
        Space::new(build_layout(self.n_side_modes), self.representation)
    }

    pub fn model(&self) -> Result<HamiltonianModel> {
        let space = self.space();
        space.check_dense()?;
        Ok(HamiltonianModel::new(space, self.device.fsr(), self.schedule()?))
    }

    pub fn phase_q2(&self) -> f64 {
        self.phase_q2.unwrap_or(if self.protocol.is_half() { 0.0 } else { PI })
    }

    /// Largest |g1| reached by the schedule, rad/s.
    fn peak_g1(&self) -> f64 {
        if self.protocol.is_adiabatic() {
            mhz(self.gbar_mhz)
        } else {
            mhz(self.relay_g_mhz)
        }
    }

    /// Loaded-Q1 T1 table over |g1| ∈ [0, peak] at the loading detuning.
    pub fn loading_table(&self, t1r_ns: f64) -> Result<T1Table> {
        const POINTS: usize = 33;
        let net = LoadingNetwork::from_device(&self.device, t1r_ns)?;
        let peak = self.peak_g1();
        let gs: Vec<f64> = (0..POINTS).map(|k| peak * k as f64 / (POINTS - 1) as f64).collect();
        T1Table::build(&net, &gs, &[mhz(self.loading_detuning_mhz)])
    }

    pub fn decoherence(&self) -> Result<Decoherence> {
        if self.lossless {
            return Ok(Decoherence::lossless());
        }
        let (q1, q2) = (&self.device.q1, &self.device.q2);
        let t1 = [q1.t1_int_us * 1e3, q2.t1_int_us * 1e3];
        let tphi = |t1: f64, ramsey: f64, echo: f64| -> Result<Option<f64>> {
            match self.dephasing {
                Dephasing::Echo => compute_tphi(t1, echo * 1e3).map(Some),
                Dephasing::Ramsey => compute_tphi(t1, ramsey * 1e3).map(Some),
                Dephasing::Off => Ok(None),
            }
        };
        let q1_loading = match self.t1r_ns {
            Some(t1r) if self.spurious_loading => {
                let table = match &self.t1_table {
                    Some(t) => t.clone(),
                    None => self.loading_table(t1r)?,
                };
                Some(SpuriousLoading { table, detuning: mhz(self.loading_detuning_mhz) })
            }
            _ => None,
        };
        if let Some(t1r) = self.t1r_ns {
            if !(t1r > 0.0) {
                return Err(Error::InvalidParameters(format!("t1r must be positive, got {t1r}")));
            }
        }
        Ok(Decoherence {
            q1_t1_ns: Some(t1[0]),
            q2_t1_ns: Some(t1[1]),
            q1_tphi_ns: tphi(t1[0], q1.t2_ramsey_us, q1.t2_echo_us)?,
            q2_tphi_ns: tphi(t1[1], q2.t2_ramsey_us, q2.t2_echo_us)?,
            mode_t1_ns: self.t1r_ns,
            q1_loading,
        })
    }

    /// Lindblad problem starting from Q1 in `q1_state`, channel empty, Q2 in |g⟩.
    pub fn problem(&self, q1_state: &crate::linalg::CMat) -> Result<LindbladProblem> {
        let model = self.model()?;
        let space = model.space();
        let collapse = integrator::standard_collapse_ops(space, &self.decoherence()?)?;
        let initial = space.prepare_q1(q1_state)?;
        Ok(LindbladProblem::new(model, collapse, initial).with_step(self.step))
    }

    fn sample_times(&self) -> Result<Vec<f64>> {
        Ok(self.schedule()?.sample_times(self.sample_spacing_ns))
    }

    /// Trajectory starting from Q1 in |e⟩.
    pub fn excited_trajectory(&self) -> Result<Trajectory> {
        let excited = tomography::qpt_input_states()[3].clone();
        integrator::evolve(&self.problem(&excited)?, &self.sample_times()?)
    }

    /// Simulated measurement record of `rho`: lab-frame outcome
    /// probabilities after readout errors and optional shot noise.
    pub fn raw_tomography_data(&self, rho: &DensityMatrix) -> Result<TomographyData> {
        let data = tomography::synthesize_state_data(rho, &TomographySettings::default())?;
        let Some(ro) = &self.readout else {
            return Ok(data);
        };
        let mut raw =
            TomographyData { entries: data.entries.iter().map(|(g, p)| (*g, ro.assignment.forward(p))).collect() };
        if let Some(shots) = ro.shots {
            let mut rng = ChaCha8Rng::seed_from_u64(ro.seed);
            raw = tomography::sample_shots(&raw, shots, &mut rng)?;
        }
        Ok(raw)
    }

    /// Readout correction (if a readout model is set) and linear inversion
    /// with the Q2 frame correction applied.
    pub fn estimate_state(&self, raw: &TomographyData) -> Result<DensityMatrix> {
        let corrected;
        let data = match &self.readout {
            Some(ro) => {
                let entries = raw
                    .entries
                    .iter()
                    .map(|(g, p)| Ok((*g, correct_readout(p, &ro.assignment, ro.correction)?)))
                    .collect::<Result<Vec<_>>>()?;
                corrected = TomographyData { entries };
                &corrected
            }
            None => raw,
        };
        tomography::state_tomography(data, &TomographySettings::with_phase(self.phase_q2()))
    }

    /// Two-qubit state recovered by simulated tomography.
    pub fn measured_qubits(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.estimate_state(&self.raw_tomography_data(rho)?)
    }
}

/// Result of a state transfer.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferOutcome {
    pub trajectory: Trajectory,
    pub efficiency: f64,
    pub process: ProcessMatrix,
    pub process_fidelity: f64,
    /// Distance of χ from the identity process.
    pub process_distance: f64,
    /// Smallest eigenvalue over the final states of all runs.
    pub min_eigenvalue: f64,
    /// Final two-qubit states (channel traced out) for each input of
    /// [`tomography::qpt_inputs`].
    pub qubit_states: Vec<DensityMatrix>,
}

/// Result of a half protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct EntangleOutcome {
    pub trajectory: Trajectory,
    pub state: DensityMatrix,
    pub state_fidelity: f64,
    pub concurrence: f64,
    pub pauli: [[f64; 4]; 4],
    pub min_eigenvalue: f64,
}

fn check_transfer(spec: &ExperimentSpec) -> Result<()> {
    if spec.protocol.is_half() {
        return Err(Error::InvalidParameters(format!("{} is not a transfer protocol", spec.protocol.name())));
    }
    Ok(())
}

/// η only; no process tomography.
pub fn run_efficiency(spec: &ExperimentSpec) -> Result<(Trajectory, f64)> {
    let traj = spec.excited_trajectory()?;
    let eta = integrator::transfer_efficiency(&traj)?;
    Ok((traj, eta))
}

/// Transfer from |e⟩ for η and the trajectory, then process tomography of
/// Q1 → Q2 from the four standard inputs.
pub fn run_transfer(spec: &ExperimentSpec) -> Result<TransferOutcome> {
    check_transfer(spec)?;
    let (trajectory, efficiency) = run_efficiency(spec)?;
    let inputs = tomography::qpt_input_states();
    let times = [0.0, spec.schedule()?.duration()];
    let mut outputs = Vec::with_capacity(4);
    let mut qubit_states = Vec::with_capacity(4);
    let mut min_eig = trajectory.final_state.min_eigenvalue();
    for (k, input) in inputs.iter().enumerate() {
        let final_state = if k == 3 {
            trajectory.final_state.clone()
        } else {
            let t = integrator::evolve(&spec.problem(input)?, &times)?;
            min_eig = min_eig.min(t.final_state.min_eigenvalue());
            t.final_state
        };
        let qubits = spec.space().reduce_to_qubits(&final_state)?;
        let measured = spec.measured_qubits(&qubits)?;
        outputs.push(partial_trace(&measured, &[1])?);
        qubit_states.push(qubits);
    }
    let process = tomography::process_tomography(&outputs)?;
    let ideal = ProcessMatrix::identity();
    Ok(TransferOutcome {
        process_fidelity: tomography::process_fidelity(&process, &ideal),
        process_distance: tomography::trace_distance_chi(&process, &ideal),
        trajectory,
        efficiency,
        process,
        min_eigenvalue: min_eig,
        qubit_states,
    })
}

/// Half protocol from |e⟩; the channel is traced out and the two-qubit state
/// compared with |ψ⁻⟩.
pub fn run_entangle(spec: &ExperimentSpec) -> Result<EntangleOutcome> {
    if !spec.protocol.is_half() {
        return Err(Error::InvalidParameters(format!("{} is not a half protocol", spec.protocol.name())));
    }
    let trajectory = spec.excited_trajectory()?;
    let min_eigenvalue = trajectory.final_state.min_eigenvalue();
    let state = spec.measured_qubits(&trajectory.final_qubits()?)?;
    Ok(EntangleOutcome {
        state_fidelity: tomography::state_fidelity(&state, &tomography::singlet())?,
        concurrence: tomography::concurrence(&state)?,
        pauli: tomography::pauli_expectations(&state)?,
        state,
        trajectory,
        min_eigenvalue,
    })
}

/// Runs independent jobs and returns results in input order.
pub trait Executor {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

/// How t_f follows ḡ in a coupling sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferTimeRule {
    Fixed,
    /// t_f at the n-th dark-state return time of each ḡ.
    DarkStateReturn(usize),
}

/// What each sweep point reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMetric {
    /// η only.
    Efficiency,
    /// η with process fidelity for transfers; F_s and C for half protocols.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub metric: SweepMetric,
    pub t_f_rule: TransferTimeRule,
}

/// Metrics at one sweep value. Fields that the metric does not produce are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepPoint {
    /// Program length: t_f for adiabatic schedules, the swap sequence for relays.
    pub t_f_ns: f64,
    pub efficiency: Option<f64>,
    pub process_fidelity: Option<f64>,
    pub state_fidelity: Option<f64>,
    pub concurrence: Option<f64>,
}

impl SweepPoint {
    /// The headline figure of merit: η if present, else F_s.
    pub fn primary(&self) -> Option<f64> {
        self.efficiency.or(self.state_fidelity)
    }
}

/// `base` with the swept parameter set to `value`. Sweep values use the
/// config units: ns for t_f and T1r, MHz (/2π) for couplings.
pub fn apply_sweep_value(base: &ExperimentSpec, sweep: &SweepSpec, value: f64) -> Result<ExperimentSpec> {
    if !value.is_finite() {
        return Err(Error::InvalidParameters(format!("non-finite sweep value {value}")));
    }
    let mut spec = base.clone();
    match sweep.parameter {
        SweepParameter::TransferTime => spec.t_f_ns = value,
        SweepParameter::Gbar => {
            spec.gbar_mhz = value;
            if let TransferTimeRule::DarkStateReturn(n) = sweep.t_f_rule {
                let times = dark_state_return_times(mhz(value), n);
                spec.t_f_ns = *times.last().ok_or(Error::InvalidParameters("return index must be ≥ 1".into()))?;
            }
        }
        SweepParameter::T1r => spec.t1r_ns = Some(value),
        SweepParameter::RelayG => spec.relay_g_mhz = value,
    }
    Ok(spec)
}

pub fn run_point(spec: &ExperimentSpec, metric: SweepMetric) -> Result<SweepPoint> {
    // Relay schedules ignore t_f; report their actual program length.
    let t_f_ns = if spec.protocol.is_adiabatic() { spec.t_f_ns } else { spec.schedule()?.program_duration() };
    let mut p = SweepPoint { t_f_ns, ..SweepPoint::default() };
    match (metric, spec.protocol.is_half()) {
        (SweepMetric::Efficiency, false) => p.efficiency = Some(run_efficiency(spec)?.1),
        (SweepMetric::Full, false) => {
            let o = run_transfer(spec)?;
            p.efficiency = Some(o.efficiency);
            p.process_fidelity = Some(o.process_fidelity);
        }
        (_, true) => {
            let o = run_entangle(spec)?;
            p.state_fidelity = Some(o.state_fidelity);
            p.concurrence = Some(o.concurrence);
        }
    }
    Ok(p)
}

/// One independent run per value; rows come back in input order whatever
/// the executor, and failures stay attached to their row.
pub fn run_sweep<E: Executor>(executor: &E, base: &ExperimentSpec, sweep: &SweepSpec) -> Vec<SweepRow<SweepPoint>> {
    let metric = sweep.metric;
    executor.map(sweep.values.clone(), |value| SweepRow {
        value,
        result: apply_sweep_value(base, sweep, value).and_then(|spec| run_point(&spec, metric)),
    })
}

/// Argmax and interior local maxima of a sweep curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub argmax: f64,
    pub max: f64,
    pub local_maxima: Vec<(f64, f64)>,
    pub failures: usize,
}

/// Summary over the rows that succeeded, using [`SweepPoint::primary`].
pub fn summarize(rows: &[SweepRow<SweepPoint>]) -> Option<SweepSummary> {
    let ok: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.result.as_ref().ok().and_then(|p| p.primary()).map(|v| (r.value, v))).collect();
    let failures = rows.len() - ok.len();
    let &(argmax, max) = ok.iter().max_by(|a, b| a.1.total_cmp(&b.1))?;
    let local_maxima = local_maxima(&ok);
    Some(SweepSummary { argmax, max, local_maxima, failures })
}

/// Interior points strictly above both neighbours.
pub fn local_maxima(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    curve.windows(3).filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1).map(|w| w[1]).collect()
}

/// Values `start, start + step, …` up to `end` inclusive (within 1e-9 of a step).
pub fn linspace_step(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return vec![];
    }
    let n = libm::floor((end - start) / step + 1e-9) as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless(protocol: Protocol, n: usize) -> ExperimentSpec {
        let mut s = ExperimentSpec::reference(protocol);
        s.lossless = true;
        s.n_side_modes = n;
        s.representation = Representation::SingleExcitation;
        s
    }

    #[test]
    fn lossless_single_mode_transfer_is_identity_up_to_frame() {
        let o = run_transfer(&lossless(Protocol::AdiabaticTransfer, 0)).unwrap();
        assert!(o.efficiency > 0.995, "η = {}", o.efficiency);
        assert!(o.process_fidelity > 0.99, "F_p = {}", o.process_fidelity);
    }

    #[test]
    fn wrong_phase_correction_loses_coherence_not_population() {
        let mut s = lossless(Protocol::AdiabaticTransfer, 0);
        s.phase_q2 = Some(0.0);
        let o = run_transfer(&s).unwrap();
        assert!(o.efficiency > 0.995);
        // |e⟩ → −|e⟩ without correction is a Z flip: χ concentrated on σz.
        assert!(o.process_fidelity < 0.05, "F_p = {}", o.process_fidelity);
    }

    #[test]
    fn lossless_single_mode_half_gives_singlet() {
        let mut s = lossless(Protocol::AdiabaticHalf, 0);
        s.release_ns = 0.0;
        let o = run_entangle(&s).unwrap();
        assert!(o.state_fidelity > 1.0 - 1e-4, "F_s = {}", o.state_fidelity);
        assert!(o.concurrence > 0.999);
    }

    #[test]
    fn protocol_mismatch_rejected() {
        assert!(run_transfer(&lossless(Protocol::AdiabaticHalf, 0)).is_err());
        assert!(run_entangle(&lossless(Protocol::RelayTransfer, 0)).is_err());
    }

    #[test]
    fn sweep_keeps_order_and_failures() {
        let base = lossless(Protocol::AdiabaticTransfer, 0);
        let sweep = SweepSpec {
            parameter: SweepParameter::TransferTime,
            values: vec![100.0, -5.0, 132.0],
            metric: SweepMetric::Efficiency,
            t_f_rule: TransferTimeRule::Fixed,
        };
        let rows = run_sweep(&Sequential, &base, &sweep);
        assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![100.0, -5.0, 132.0]);
        assert!(rows[0].result.is_ok() && rows[1].result.is_err() && rows[2].result.is_ok());
        let s = summarize(&rows).unwrap();
        assert_eq!(s.failures, 1);
    }

    #[test]
    fn empty_sweep_is_empty() {
        let sweep = SweepSpec {
            parameter: SweepParameter::T1r,
            values: vec![],
            metric: SweepMetric::Efficiency,
            t_f_rule: TransferTimeRule::Fixed,
        };
        assert!(run_sweep(&Sequential, &lossless(Protocol::RelayTransfer, 0), &sweep).is_empty());
    }

    #[test]
    fn gbar_sweep_follows_return_time() {
        let base = lossless(Protocol::AdiabaticTransfer, 0);
        let sweep = SweepSpec {
            parameter: SweepParameter::Gbar,
            values: vec![30.0],
            metric: SweepMetric::Efficiency,
            t_f_rule: TransferTimeRule::DarkStateReturn(2),
        };
        let s = apply_sweep_value(&base, &sweep, 30.0).unwrap();
        assert!((s.t_f_ns - 0.5 * 132.287).abs() < 0.05, "{}", s.t_f_ns);
    }

    #[test]
    fn local_maxima_interior_only() {
        let c = [(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (3.0, 2.5), (4.0, 2.4), (5.0, 9.0)];
        assert_eq!(local_maxima(&c), vec![(1.0, 3.0), (3.0, 2.5)]);
    }

    #[test]
    fn linspace_includes_end() {
        assert_eq!(linspace_step(60.0, 70.0, 2.5), vec![60.0, 62.5, 65.0, 67.5, 70.0]);
        assert!(linspace_step(1.0, 0.0, 1.0).is_empty());
    }

    #[test]
    fn intrinsic_loading_vanishes() {
        let s = ExperimentSpec::reference(Protocol::AdiabaticTransfer);
        let d = s.decoherence().unwrap();
        let loading = d.q1_loading.unwrap();
        assert_eq!(loading.rate(mhz(15.0)), 0.0);
    }
}
