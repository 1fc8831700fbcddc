//! Fixed-step RK4 integration of the Lindblad master equation
//!
//! dρ/dt = −i[H(t), ρ] + Σₖ γₖ(t)·(cₖ ρ cₖ† − ½{cₖ†cₖ, ρ}).
//!
//! Times are ns and H is converted to rad/ns. The right-hand side is applied
//! through row-sparse copies of H and the collapse operators, using
//! H_eff = H − (i/2)Σγ c†c so that dρ = −i(H_eff ρ − (H_eff ρ)†) + Σγ cρc†.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::T1Table;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RowSparse, C64, I, ONE, ZERO};
use crate::model::HamiltonianModel;
use crate::schedules::Schedule;
use crate::statespace::{DensityMatrix, Space};
use crate::units::per_ns;

/// Trace drift beyond which an integration is declared failed.
pub const TRACE_FAILURE_TOL: f64 = 1e-6;
/// Most negative eigenvalue accepted in the final state.
pub const POSITIVITY_FAILURE_TOL: f64 = 1e-7;

/// Pure-dephasing time from T1 and a T2 measurement:
/// 1/Tφ = 1/T2 − 1/(2·T1). Returns `f64::INFINITY` when T2 = 2·T1.
pub fn compute_tphi(t1_int: f64, t2: f64) -> Result<f64> {
    if !(t1_int > 0.0 && t2 > 0.0) {
        return Err(Error::InvalidParameters(format!("T1 and T2 must be positive (T1 {t1_int}, T2 {t2})")));
    }
    if t2 > 2.0 * t1_int {
        return Err(Error::InvalidParameters(format!("T2 = {t2} exceeds 2·T1 = {}", 2.0 * t1_int)));
    }
    let rate = 1.0 / t2 - 1.0 / (2.0 * t1_int);
    if rate <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / rate)
}

/// Q1 loading by the lossy channel through its coupler: an extra decay
/// rate looked up from `table` at |g1(t)| and a fixed detuning.
#[derive(Clone, Debug, PartialEq)]
pub struct SpuriousLoading {
    pub table: T1Table,
    pub detuning: f64,
}

impl SpuriousLoading {
    /// Extra decay rate in 1/ns.
    pub fn rate(&self, g1: f64) -> f64 {
        self.table.rate(g1.abs(), self.detuning)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rate {
    /// Constant rate in 1/ns.
    Constant(f64),
    /// Intrinsic rate plus coupling-dependent loading, in 1/ns.
    LoadedQ1 { intrinsic: f64, loading: SpuriousLoading },
}

impl Rate {
    pub fn at(&self, g1: f64) -> f64 {
        match self {
            Rate::Constant(r) => *r,
            Rate::LoadedQ1 { intrinsic, loading } => intrinsic + loading.rate(g1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseChannel {
    pub label: String,
    pub op: CMat,
    pub rate: Rate,
}

/// Lifetimes in ns; `None` disables a channel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decoherence {
    pub q1_t1_ns: Option<f64>,
    pub q2_t1_ns: Option<f64>,
    pub q1_tphi_ns: Option<f64>,
    pub q2_tphi_ns: Option<f64>,
    pub mode_t1_ns: Option<f64>,
    pub q1_loading: Option<SpuriousLoading>,
}

impl Decoherence {
    pub fn lossless() -> Self {
        Self::default()
    }
}

fn finite_rate(t: Option<f64>) -> Option<f64> {
    t.filter(|v| v.is_finite() && *v > 0.0).map(|v| 1.0 / v)
}

/// Collapse set: σᵢ at 1/T1ᵢ (Q1 optionally loaded), σz,ᵢ at 1/(2Tφ,ᵢ), and
/// every mode's aₙ at 1/T1r. Channels with infinite lifetime are omitted.
pub fn standard_collapse_ops(space: Space, d: &Decoherence) -> Result<Vec<CollapseChannel>> {
    let l = space.layout();
    let mut out = Vec::new();
    let q1_rate = finite_rate(d.q1_t1_ns);
    match (&d.q1_loading, q1_rate) {
        (Some(loading), r) => out.push(CollapseChannel {
            label: String::from("q1_decay"),
            op: space.lowering(l.qubit1())?,
            rate: Rate::LoadedQ1 { intrinsic: r.unwrap_or(0.0), loading: loading.clone() },
        }),
        (None, Some(r)) => out.push(CollapseChannel {
            label: String::from("q1_decay"),
            op: space.lowering(l.qubit1())?,
            rate: Rate::Constant(r),
        }),
        (None, None) => {}
    }
    if let Some(r) = finite_rate(d.q1_tphi_ns) {
        out.push(CollapseChannel {
            label: String::from("q1_dephasing"),
            op: space.sigma_z(l.qubit1())?,
            rate: Rate::Constant(0.5 * r),
        });
    }
    if let Some(r) = finite_rate(d.q2_t1_ns) {
        out.push(CollapseChannel {
            label: String::from("q2_decay"),
            op: space.lowering(l.qubit2())?,
            rate: Rate::Constant(r),
        });
    }
    if let Some(r) = finite_rate(d.q2_tphi_ns) {
        out.push(CollapseChannel {
            label: String::from("q2_dephasing"),
            op: space.sigma_z(l.qubit2())?,
            rate: Rate::Constant(0.5 * r),
        });
    }
    if let Some(r) = finite_rate(d.mode_t1_ns) {
        for n in l.mode_numbers() {
            out.push(CollapseChannel {
                label: format!("mode_{n}_decay"),
                op: space.lowering(l.mode(n)?)?,
                rate: Rate::Constant(r),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub max_step_ns: f64,
    /// Step-doubling error bound (max elementwise); `None` keeps fixed steps.
    pub tolerance: Option<f64>,
    pub min_step_ns: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { max_step_ns: 0.05, tolerance: None, min_step_ns: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladProblem {
    pub model: HamiltonianModel,
    pub collapse: Vec<CollapseChannel>,
    pub initial: DensityMatrix,
    pub duration: f64,
    pub step: StepControl,
}

impl LindbladProblem {
    /// Problem over the full schedule duration with default stepping.
    pub fn new(model: HamiltonianModel, collapse: Vec<CollapseChannel>, initial: DensityMatrix) -> Self {
        let duration = model.schedule().duration();
        Self { model, collapse, initial, duration, step: StepControl::default() }
    }

    pub fn with_step(mut self, step: StepControl) -> Self {
        self.step = step;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub space: Space,
    pub times: Vec<f64>,
    pub pe_q1: Vec<f64>,
    pub pe_q2: Vec<f64>,
    /// Per sample, populations of modes `−N..=N`.
    pub modes: Vec<Vec<f64>>,
    pub trace_error: Vec<f64>,
    pub final_state: DensityMatrix,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Two-qubit state at the end, channel traced out.
    pub fn final_qubits(&self) -> Result<DensityMatrix> {
        self.space.reduce_to_qubits(&self.final_state)
    }
}

struct Channel {
    op: RowSparse,
    gram: RowSparse,
    rate: Rate,
}

struct Generator<'a> {
    /// Dimension of the active block.
    n: usize,
    /// Full-space indices of the active block.
    active: Vec<usize>,
    schedule: &'a Schedule,
    h0: RowSparse,
    v1: RowSparse,
    v2: RowSparse,
    channels: Vec<Channel>,
    x: Vec<C64>,
    y: Vec<C64>,
}

impl<'a> Generator<'a> {
    fn new(problem: &'a LindbladProblem) -> Result<Self> {
        let parts = problem.model.parts()?;
        let full = parts.static_part.nrows();
        let mut grams = Vec::with_capacity(problem.collapse.len());
        for ch in &problem.collapse {
            if ch.op.nrows() != full || ch.op.ncols() != full {
                return Err(Error::DimensionMismatch { expected: full, got: ch.op.nrows() });
            }
            grams.push(ch.op.adjoint() * &ch.op);
        }
        let mut graph: Vec<&CMat> = vec![&parts.static_part, &parts.coupling_q1, &parts.coupling_q2];
        graph.extend(problem.collapse.iter().map(|ch| &ch.op));
        let active = reachable_set(problem.initial.matrix(), &graph);
        let n = active.len();
        let sub = |m: &CMat| RowSparse::from_dense(&restrict(m, &active));
        let channels = problem
            .collapse
            .iter()
            .zip(&grams)
            .map(|(ch, gram)| Channel { op: sub(&ch.op), gram: sub(gram), rate: ch.rate.clone() })
            .collect();
        let h0 = sub(&parts.static_part.scale(per_ns(1.0)));
        let v1 = sub(&parts.coupling_q1);
        let v2 = sub(&parts.coupling_q2);
        Ok(Self {
            n,
            active,
            schedule: problem.model.schedule(),
            h0,
            v1,
            v2,
            channels,
            x: vec![ZERO; n * n],
            y: vec![ZERO; n * n],
        })
    }

    fn rhs(&mut self, t: f64, rho: &[C64], out: &mut [C64]) -> Result<()> {
        let n = self.n;
        let (g1, g2) = self.schedule.couplings(t)?;
        self.x.fill(ZERO);
        self.h0.mul_dense_acc(rho, ONE, &mut self.x);
        if g1 != 0.0 {
            self.v1.mul_dense_acc(rho, c(per_ns(g1), 0.0), &mut self.x);
        }
        if g2 != 0.0 {
            self.v2.mul_dense_acc(rho, c(per_ns(g2), 0.0), &mut self.x);
        }
        let mut rates = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let gamma = ch.rate.at(g1);
            rates.push(gamma);
            if gamma != 0.0 {
                ch.gram.mul_dense_acc(rho, c(0.0, -0.5 * gamma), &mut self.x);
            }
        }
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = -I * self.x[i * n + j] + I * self.x[j * n + i].conj();
            }
        }
        for (ch, &gamma) in self.channels.iter().zip(&rates) {
            if gamma == 0.0 {
                continue;
            }
            self.y.fill(ZERO);
            ch.op.mul_dense_acc(rho, ONE, &mut self.y);
            ch.op.dense_mul_adjoint_acc(&self.y, c(gamma, 0.0), out);
        }
        hermitize(n, out);
        Ok(())
    }
}

/// Basis states reachable from the support of ρ₀ through the operator
/// graphs. Every term of the generator maps this set into itself, so entries
/// of ρ outside it stay exactly zero and integration can be restricted to it.
fn reachable_set(initial: &CMat, ops: &[&CMat]) -> Vec<usize> {
    let n = initial.nrows();
    let mut seen: Vec<bool> = (0..n).map(|i| (0..n).any(|j| initial[(i, j)] != ZERO)).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
    while let Some(k) = stack.pop() {
        for op in ops {
            for j in 0..n {
                if !seen[j] && op[(j, k)] != ZERO {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

fn restrict(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Row-major active block back to a full matrix.
fn expand(full: usize, idx: &[usize], block: &[C64]) -> CMat {
    let k = idx.len();
    let mut m = CMat::zeros(full, full);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            m[(i, j)] = block[a * k + b];
        }
    }
    m
}

/// Replaces `m` by (m + m†)/2 in place, exactly Hermitian in floating point.
fn hermitize(n: usize, m: &mut [C64]) {
    for i in 0..n {
        m[i * n + i].im = 0.0;
        for j in i + 1..n {
            let a = m[i * n + j];
            let b = m[j * n + i];
            let v = (a + b.conj()) * 0.5;
            m[i * n + j] = v;
            m[j * n + i] = v.conj();
        }
    }
}

fn trace_re(n: usize, m: &[C64]) -> f64 {
    (0..n).map(|i| m[i * n + i].re).sum()
}

struct Stepper<'a> {
    gen: Generator<'a>,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl<'a> Stepper<'a> {
    fn new(gen: Generator<'a>) -> Self {
        let nn = gen.n * gen.n;
        Self {
            gen,
            k1: vec![ZERO; nn],
            k2: vec![ZERO; nn],
            k3: vec![ZERO; nn],
            k4: vec![ZERO; nn],
            tmp: vec![ZERO; nn],
        }
    }

    /// One classical RK4 step of size `h` from `t`. Stage times are kept
    /// strictly below `seg_end` so piecewise schedules are sampled from the
    /// left inside the current segment.
    fn step(&mut self, t: f64, h: f64, seg_end: f64, rho: &mut [C64]) -> Result<()> {
        let nudge = seg_end - h * 1e-9;
        let at = |s: f64| if s >= seg_end { nudge } else { s };
        self.gen.rhs(at(t), rho, &mut self.k1)?;
        for ((o, r), k) in self.tmp.iter_mut().zip(rho.iter()).zip(&self.k1) {
            *o = r + k * (0.5 * h);
        }
        self.gen.rhs(at(t + 0.5 * h), &self.tmp, &mut self.k2)?;
        for ((o, r), k) in self.tmp.iter_mut().zip(rho.iter()).zip(&self.k2) {
            *o = r + k * (0.5 * h);
        }
        self.gen.rhs(at(t + 0.5 * h), &self.tmp, &mut self.k3)?;
        for ((o, r), k) in self.tmp.iter_mut().zip(rho.iter()).zip(&self.k3) {
            *o = r + k * h;
        }
        self.gen.rhs(at(t + h), &self.tmp, &mut self.k4)?;
        let w = h / 6.0;
        for i in 0..rho.len() {
            rho[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
        }
        Ok(())
    }
}

fn check_state(n: usize, rho: &[C64], t: f64) -> Result<f64> {
    let tr = trace_re(n, rho);
    if !tr.is_finite() || rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Integration { t, reason: String::from("state became non-finite") });
    }
    let err = tr - 1.0;
    if err.abs() > TRACE_FAILURE_TOL {
        return Err(Error::Integration { t, reason: format!("trace drifted by {err:.3e}") });
    }
    Ok(err)
}

/// Integrates from t = 0 to `problem.duration` and samples at `sample_times`
/// (ascending, within the duration). Times past the end by no more than
/// round-off, as from `duration * k / n`, are clamped to the end.
pub fn evolve(problem: &LindbladProblem, sample_times: &[f64]) -> Result<Trajectory> {
    let space = problem.model.space();
    let duration = problem.duration;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameters(format!("duration must be positive, got {duration}")));
    }
    if problem.initial.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: problem.initial.dim() });
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameters(String::from("sample times must be ascending")));
    }
    let slack = duration * 4.0 * f64::EPSILON;
    if let Some(&bad) = sample_times.iter().find(|&&s| !(s >= 0.0 && s <= duration + slack)) {
        return Err(Error::TimeOutOfRange { t: bad, duration });
    }
    let clamped: Vec<f64> = sample_times.iter().map(|&s| s.min(duration)).collect();
    let sample_times = clamped.as_slice();
    let step = problem.step;
    if !(step.max_step_ns > 0.0) {
        return Err(Error::InvalidParameters(format!("max step must be positive, got {}", step.max_step_ns)));
    }

    let full = space.dim();
    let mut stepper = Stepper::new(Generator::new(problem)?);
    let n = stepper.gen.n;
    let active = stepper.gen.active.clone();
    let mut rho = linalg::to_row_major(&restrict(problem.initial.matrix(), &active));

    let mut stops: Vec<f64> = problem
        .model
        .schedule()
        .breakpoints()
        .into_iter()
        .chain(sample_times.iter().copied())
        .filter(|&s| s > 0.0 && s < duration)
        .collect();
    stops.push(duration);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    // Segment ends, used to keep stage times left of discontinuities.
    let mut seg_ends: Vec<f64> = problem.model.schedule().breakpoints();
    seg_ends.push(duration);
    seg_ends.sort_by(f64::total_cmp);

    let mut traj = Trajectory {
        space,
        times: Vec::with_capacity(sample_times.len()),
        pe_q1: Vec::with_capacity(sample_times.len()),
        pe_q2: Vec::with_capacity(sample_times.len()),
        modes: Vec::with_capacity(sample_times.len()),
        trace_error: Vec::with_capacity(sample_times.len()),
        final_state: problem.initial.clone(),
    };
    let mut next_sample = 0;
    let record = |t: f64, rho: &[C64], traj: &mut Trajectory, next: &mut usize| -> Result<()> {
        while *next < sample_times.len() && (sample_times[*next] - t).abs() < 1e-9 {
            let m = expand(full, &active, rho);
            let (p1, p2, modes) = space.populations(&m);
            traj.times.push(sample_times[*next]);
            traj.pe_q1.push(p1);
            traj.pe_q2.push(p2);
            traj.modes.push(modes);
            traj.trace_error.push(trace_re(n, rho) - 1.0);
            *next += 1;
        }
        Ok(())
    };
    record(0.0, &rho, &mut traj, &mut next_sample)?;

    let mut t = 0.0;
    for &stop in &stops {
        let seg_end = seg_ends.iter().copied().find(|&e| e >= stop - 1e-12).unwrap_or(duration);
        match step.tolerance {
            None => {
                let span = stop - t;
                let steps = libm::ceil(span / step.max_step_ns - 1e-9).max(1.0) as usize;
                let h = span / steps as f64;
                for k in 0..steps {
                    let t0 = t + k as f64 * h;
                    stepper.step(t0, h, seg_end, &mut rho)?;
                }
                check_state(n, &rho, stop)?;
            }
            Some(tol) => adaptive(&mut stepper, &mut rho, t, stop, seg_end, step, tol)?,
        }
        t = stop;
        record(t, &rho, &mut traj, &mut next_sample)?;
    }

    let final_m = expand(full, &active, &rho);
    let min_eig = linalg::min_eigenvalue(&final_m);
    if !(min_eig >= -POSITIVITY_FAILURE_TOL) {
        return Err(Error::Integration { t: duration, reason: format!("final state has eigenvalue {min_eig:.3e}") });
    }
    traj.final_state = DensityMatrix::new_unchecked(space.dims(), final_m)?;
    Ok(traj)
}

/// Step-doubling control over [t, stop]: accepts the two-half-step result
/// when its difference from the full step is within `tol`.
fn adaptive(
    stepper: &mut Stepper<'_>,
    rho: &mut [C64],
    mut t: f64,
    stop: f64,
    seg_end: f64,
    step: StepControl,
    tol: f64,
) -> Result<()> {
    let n = stepper.gen.n;
    let mut h = step.max_step_ns.min(stop - t);
    let mut full = rho.to_vec();
    let mut half = rho.to_vec();
    while stop - t > 1e-12 {
        h = h.min(stop - t);
        full.copy_from_slice(rho);
        half.copy_from_slice(rho);
        stepper.step(t, h, seg_end, &mut full)?;
        stepper.step(t, 0.5 * h, seg_end, &mut half)?;
        stepper.step(t + 0.5 * h, 0.5 * h, seg_end, &mut half)?;
        let err = full.iter().zip(&half).fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm())) / 15.0;
        if err > tol {
            h *= 0.5;
            if h < step.min_step_ns {
                return Err(Error::StepUnderflow { t, step: h });
            }
            continue;
        }
        rho.copy_from_slice(&half);
        t += h;
        check_state(n, rho, t)?;
        if err < tol / 32.0 {
            h = (2.0 * h).min(step.max_step_ns);
        }
    }
    Ok(())
}

/// η = P_e,Q2(t_f) / P_e,Q1(0).
pub fn transfer_efficiency(traj: &Trajectory) -> Result<f64> {
    let (Some(&p1), Some(&p2)) = (traj.pe_q1.first(), traj.pe_q2.last()) else {
        return Err(Error::InvalidParameters(String::from("trajectory has no samples")));
    };
    if traj.times[0] != 0.0 {
        return Err(Error::InvalidParameters(String::from("trajectory must start at t = 0")));
    }
    if p1 <= 1e-15 {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(p2 / p1)
}

/// A parameter that a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    TransferTime,
    Gbar,
    T1r,
    RelayG,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::TransferTime => "t_f",
            SweepParameter::Gbar => "gbar",
            SweepParameter::T1r => "t1r",
            SweepParameter::RelayG => "relay_g",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow<T> {
    pub value: f64,
    pub result: Result<T>,
}

/// Runs `run` for every value in order. Failures are kept per row and the
/// sweep continues.
pub fn sweep<T>(values: &[f64], mut run: impl FnMut(f64) -> Result<T>) -> Vec<SweepRow<T>> {
    values.iter().map(|&value| SweepRow { value, result: run(value) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::Schedule;
    use crate::statespace::build_layout;
    use crate::units::mhz;

    fn excited_q1(space: Space) -> DensityMatrix {
        space.prepare_q1(&linalg::real_mat(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap()
    }

    #[test]
    fn sample_times_round_off_is_clamped() {
        let space = Space::single_excitation(build_layout(0));
        let duration = 55.01872344551328;
        let model = HamiltonianModel::new(space, mhz(84.0), Schedule::adiabatic_transfer(mhz(15.0), duration).unwrap());
        let p = LindbladProblem::new(model, vec![], excited_q1(space));
        let times: Vec<f64> = (0..=10).map(|k| p.duration * k as f64 / 10.0).collect();
        assert!(times[10] > p.duration);
        let traj = evolve(&p, &times).unwrap();
        assert_eq!(traj.times.last(), Some(&p.duration));
        assert!(matches!(evolve(&p, &[0.0, p.duration * (1.0 + 1e-9)]), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn tphi_values() {
        assert!((compute_tphi(11.5, 1.11).unwrap() - 1.166).abs() < 1e-3);
        assert!((compute_tphi(9.1, 1.15).unwrap() - 1.228).abs() < 1e-3);
        assert!(compute_tphi(2.0, 4.0).unwrap().is_infinite());
        assert!(compute_tphi(1.0, 3.0).is_err());
    }

    #[test]
    fn mode_decay_is_exponential() {
        // Single-excitation space, no couplings: put the photon in mode 0.
        let l = build_layout(0);
        let space = Space::single_excitation(l);
        let sched = Schedule::relay_transfer(mhz(1e-9)).unwrap();
        let model = HamiltonianModel::new(space, 0.0, sched);
        let k = l.mode(0).unwrap();
        let idx = space.excited_index(Some(k));
        let rho = DensityMatrix::basis(space.dims(), idx).unwrap();
        let t1r = 40.0;
        let d = Decoherence { mode_t1_ns: Some(t1r), ..Decoherence::default() };
        let mut problem = LindbladProblem::new(model, standard_collapse_ops(space, &d).unwrap(), rho);
        problem.duration = 100.0;
        let times: Vec<f64> = (0..=10).map(|k| 10.0 * k as f64).collect();
        let traj = evolve(&problem, &times).unwrap();
        for (t, p) in traj.times.iter().zip(&traj.modes) {
            assert!((p[0] - libm::exp(-t / t1r)).abs() < 1e-6);
        }
    }

    #[test]
    fn vacuum_rabi_oscillation() {
        let l = build_layout(0);
        let space = Space::single_excitation(l);
        let g = mhz(5.0);
        let sched = Schedule::relay_transfer(g).unwrap();
        let model = HamiltonianModel::new(space, 0.0, sched);
        let problem = LindbladProblem::new(model, Vec::new(), excited_q1(space));
        let times: Vec<f64> = (0..=50).map(|k| k as f64).collect();
        let traj = evolve(&problem, &times).unwrap();
        for (t, p) in traj.times.iter().zip(&traj.pe_q1) {
            let expected = libm::cos(g * t * 1e-9).powi(2);
            assert!((p - expected).abs() < 1e-8, "t = {t}: {p} vs {expected}");
        }
        assert!(traj.pe_q1[50] < 1e-8);
    }

    #[test]
    fn relay_at_single_mode_is_lossless() {
        let l = build_layout(0);
        let space = Space::single_excitation(l);
        let model = HamiltonianModel::new(space, mhz(84.0), Schedule::relay_transfer(mhz(5.0)).unwrap());
        let problem = LindbladProblem::new(model, Vec::new(), excited_q1(space));
        let traj = evolve(&problem, &[0.0, 100.0]).unwrap();
        assert!(transfer_efficiency(&traj).unwrap() > 0.999);
    }

    #[test]
    fn efficiency_needs_initial_population() {
        let l = build_layout(0);
        let space = Space::single_excitation(l);
        let model = HamiltonianModel::new(space, 0.0, Schedule::relay_transfer(mhz(5.0)).unwrap());
        let rho = DensityMatrix::basis(space.dims(), 0).unwrap();
        let problem = LindbladProblem::new(model, Vec::new(), rho);
        let traj = evolve(&problem, &[0.0, 100.0]).unwrap();
        assert_eq!(transfer_efficiency(&traj), Err(Error::UndefinedEfficiency));
    }

    #[test]
    fn subspace_matches_full_density() {
        let l = build_layout(1);
        let sched = Schedule::adiabatic_transfer(mhz(15.0), 132.0).unwrap();
        let d = Decoherence {
            q1_t1_ns: Some(11500.0),
            q2_t1_ns: Some(9100.0),
            q1_tphi_ns: Some(4975.0),
            q2_tphi_ns: Some(4395.0),
            mode_t1_ns: Some(300.0),
            q1_loading: None,
        };
        let mut results = Vec::new();
        for space in [Space::full(l), Space::single_excitation(l)] {
            let model = HamiltonianModel::new(space, mhz(84.0), sched.clone());
            let problem = LindbladProblem::new(model, standard_collapse_ops(space, &d).unwrap(), excited_q1(space));
            let traj = evolve(&problem, &[0.0, 66.0, 132.0]).unwrap();
            results.push((traj.pe_q2.clone(), traj.final_qubits().unwrap()));
        }
        for k in 0..3 {
            assert!((results[0].0[k] - results[1].0[k]).abs() < 1e-10);
        }
        assert!(linalg::max_abs(&(results[0].1.matrix() - results[1].1.matrix())) < 1e-10);
    }

    #[test]
    fn active_block_is_the_single_excitation_sector() {
        let l = build_layout(1);
        let space = Space::full(l);
        let model = HamiltonianModel::new(space, mhz(84.0), Schedule::adiabatic_transfer(mhz(15.0), 132.0).unwrap());
        let d = Decoherence { mode_t1_ns: Some(100.0), q1_tphi_ns: Some(1000.0), ..Decoherence::default() };
        let problem = LindbladProblem::new(model, standard_collapse_ops(space, &d).unwrap(), excited_q1(space));
        let gen = Generator::new(&problem).unwrap();
        assert_eq!(gen.active.len(), 2 * 1 + 4);
        assert!(gen.active.iter().all(|&i| l.excitations(i) <= 1));
        // A two-excitation start pulls in its whole ≤2 sector.
        let both = l.basis_index(&[1, 0, 0, 0, 1]).unwrap();
        let mut p2 = problem.clone();
        p2.initial = DensityMatrix::basis(space.dims(), both).unwrap();
        let gen2 = Generator::new(&p2).unwrap();
        assert!(gen2.active.contains(&both) && gen2.active.len() > gen.active.len());
    }

    #[test]
    fn adaptive_control_agrees_with_fixed() {
        let l = build_layout(1);
        let space = Space::single_excitation(l);
        let model = HamiltonianModel::new(space, mhz(84.0), Schedule::relay_transfer(mhz(5.0)).unwrap());
        let d = Decoherence { mode_t1_ns: Some(50.0), ..Decoherence::default() };
        let problem = LindbladProblem::new(model, standard_collapse_ops(space, &d).unwrap(), excited_q1(space));
        let fixed = evolve(&problem, &[0.0, 100.0]).unwrap();
        let adaptive =
            problem.clone().with_step(StepControl { max_step_ns: 0.5, tolerance: Some(1e-10), min_step_ns: 1e-6 });
        let adap = evolve(&adaptive, &[0.0, 100.0]).unwrap();
        assert!((fixed.pe_q2[1] - adap.pe_q2[1]).abs() < 1e-7);
        let tight = problem.with_step(StepControl { max_step_ns: 0.5, tolerance: Some(1e-30), min_step_ns: 1e-3 });
        assert!(matches!(evolve(&tight, &[0.0, 100.0]), Err(Error::StepUnderflow { .. })));
    }

    #[test]
    fn rejects_bad_samples() {
        let space = Space::single_excitation(build_layout(0));
        let model = HamiltonianModel::new(space, 0.0, Schedule::relay_transfer(mhz(5.0)).unwrap());
        let problem = LindbladProblem::new(model, Vec::new(), excited_q1(space));
        assert!(evolve(&problem, &[0.0, 200.0]).is_err());
        assert!(evolve(&problem, &[50.0, 10.0]).is_err());
    }

    #[test]
    fn sweep_keeps_order_and_failures() {
        let rows = sweep(&[1.0, -1.0, 2.0], |v| {
            if v < 0.0 {
                Err(Error::InvalidParameters(String::from("negative")))
            } else {
                Ok(v * 2.0)
            }
        });
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].result, Ok(2.0));
        assert!(rows[1].result.is_err());
        assert_eq!(rows[2].result, Ok(4.0));
        assert!(sweep(&[], Ok).is_empty());
    }
}
