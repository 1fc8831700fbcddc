//! Readout correction, state and process tomography, and the fidelity,
//! distance and entanglement measures used to score transfers.
//!
//! Two-qubit ordering is Q1 ⊗ Q2 with basis gg, ge, eg, ee (Q1 first).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, I, ONE, ZERO};
use crate::statespace::{pauli_y, pauli_z, paulis, DensityMatrix};

/// Column-stochastic 4×4 assignment matrix: entry (i, j) is the probability
/// of reading outcome i when state j was prepared.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix {
    m: [[f64; 4]; 4],
}

/// Condition number above which readout inversion logs a warning.
pub const CONDITION_WARNING: f64 = 1e3;

impl AssignmentMatrix {
    pub fn new(rows: [[f64; 4]; 4]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameters(format!("assignment entry ({i}, {j}) = {v} not in [0, 1]")));
                }
            }
        }
        for j in 0..4 {
            let s: f64 = (0..4).map(|i| rows[i][j]).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameters(format!("assignment column {j} sums to {s}")));
            }
        }
        let a = Self { m: rows };
        let cond = a.condition_number();
        if !cond.is_finite() {
            return Err(Error::Singular);
        }
        if cond > CONDITION_WARNING {
            log::warn!("assignment matrix is ill-conditioned (κ = {cond:.3e})");
        }
        Ok(a)
    }

    /// Rescales each column to unit sum first, for measured matrices whose
    /// rounded entries do not sum exactly to one.
    pub fn from_columns_normalized(mut rows: [[f64; 4]; 4]) -> Result<Self> {
        for j in 0..4 {
            let s: f64 = (0..4).map(|i| rows[i][j]).sum();
            if !(s > 0.0) {
                return Err(Error::InvalidParameters(format!("assignment column {j} sums to {s}")));
            }
            for row in rows.iter_mut() {
                row[j] /= s;
            }
        }
        Self::new(rows)
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = 1.0;
        }
        Self { m }
    }

    /// Uncorrelated readout: M = M₁ ⊗ M₂ with M_q = [[F_g, 1−F_e], [1−F_g, F_e]].
    pub fn from_fidelities(fg1: f64, fe1: f64, fg2: f64, fe2: f64) -> Result<Self> {
        let q = |fg: f64, fe: f64| [[fg, 1.0 - fe], [1.0 - fg, fe]];
        let (a, b) = (q(fg1, fe1), q(fg2, fe2));
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = a[i / 2][j / 2] * b[i % 2][j % 2];
            }
        }
        Self::new(m)
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    fn flat(&self) -> Vec<f64> {
        self.m.iter().flat_map(|r| r.iter().copied()).collect()
    }

    pub fn condition_number(&self) -> f64 {
        let m = nalgebra::DMatrix::from_row_slice(4, 4, &self.flat());
        let sv = m.singular_values();
        let (max, min) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Observed distribution for true populations `p`.
    pub fn forward(&self, p: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|j| self.m[i][j] * p[j]).sum();
        }
        out
    }

    pub fn invert(&self, raw: &[f64; 4]) -> Result<[f64; 4]> {
        let x = linalg::solve_real(4, &self.flat(), raw).ok_or(Error::Singular)?;
        Ok([x[0], x[1], x[2], x[3]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReadoutCorrection {
    /// M⁻¹·raw followed by Euclidean projection onto the simplex.
    Projected,
    /// M⁻¹·raw as is; entries may leave [0, 1].
    Raw,
}

pub fn correct_readout(raw: &[f64; 4], m: &AssignmentMatrix, mode: ReadoutCorrection) -> Result<[f64; 4]> {
    let s: f64 = raw.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameters(format!("raw probabilities sum to {s}")));
    }
    let inv = m.invert(raw)?;
    Ok(match mode {
        ReadoutCorrection::Raw => inv,
        ReadoutCorrection::Projected => {
            let p = project_to_simplex(&inv);
            [p[0], p[1], p[2], p[3]]
        }
    })
}

/// Euclidean projection onto {p ≥ 0, Σp = 1}.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Pre-measurement tomography gate on one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TomoGate {
    I,
    Rx90,
    Ry90,
}

impl TomoGate {
    pub const ALL: [TomoGate; 3] = [TomoGate::I, TomoGate::Rx90, TomoGate::Ry90];

    pub fn label(self) -> &'static str {
        match self {
            TomoGate::I => "I",
            TomoGate::Rx90 => "X/2",
            TomoGate::Ry90 => "Y/2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "I" | "i" | "id" => Some(TomoGate::I),
            "X/2" | "x90" | "rx90" => Some(TomoGate::Rx90),
            "Y/2" | "y90" | "ry90" => Some(TomoGate::Ry90),
            _ => None,
        }
    }

    /// exp(−iπ/4·σ) for σ = X, Y.
    pub fn unitary(self) -> CMat {
        let s = FRAC_1_SQRT_2;
        match self {
            TomoGate::I => CMat::identity(2, 2),
            TomoGate::Rx90 => CMat::from_fn(2, 2, |i, j| if i == j { c(s, 0.0) } else { c(0.0, -s) }),
            TomoGate::Ry90 => (CMat::identity(2, 2) - pauli_y() * I).scale(s),
        }
    }
}

/// Rz(φ) = exp(−iφZ/2) with Z = |g⟩⟨g| − |e⟩⟨e|.
pub fn rz(phi: f64) -> CMat {
    let h = 0.5 * phi;
    let mut m = CMat::zeros(2, 2);
    m[(0, 0)] = C64::from_polar(1.0, -h);
    m[(1, 1)] = C64::from_polar(1.0, h);
    m
}

/// Gate set and the Q2 azimuthal frame correction.
///
/// With correction φ the Q2 gates are modelled as U·Rz(φ), so a Q2 frame
/// rotated by Rz(φ) is undone in the reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TomographySettings {
    pub phase_q2: f64,
}

impl Default for TomographySettings {
    fn default() -> Self {
        Self { phase_q2: 0.0 }
    }
}

impl TomographySettings {
    pub fn with_phase(phase_q2: f64) -> Self {
        Self { phase_q2 }
    }

    /// All 9 gate pairs, Q1 gate outer.
    pub fn combinations() -> Vec<(TomoGate, TomoGate)> {
        let mut v = Vec::with_capacity(9);
        for a in TomoGate::ALL {
            for b in TomoGate::ALL {
                v.push((a, b));
            }
        }
        v
    }

    pub fn pair_unitary(&self, g1: TomoGate, g2: TomoGate) -> CMat {
        let u2 = g2.unitary() * rz(self.phase_q2);
        g1.unitary().kronecker(&u2)
    }
}

/// Outcome probabilities (gg, ge, eg, ee) for each measured gate pair.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographyData {
    pub entries: Vec<((TomoGate, TomoGate), [f64; 4])>,
}

fn outcome_probabilities(rho: &CMat, u: &CMat) -> [f64; 4] {
    let r = u * rho * u.adjoint();
    [r[(0, 0)].re, r[(1, 1)].re, r[(2, 2)].re, r[(3, 3)].re]
}

/// Noiseless outcome probabilities of a two-qubit state for all 9 settings.
pub fn synthesize_state_data(rho: &DensityMatrix, settings: &TomographySettings) -> Result<TomographyData> {
    check_two_qubit(rho)?;
    let entries = TomographySettings::combinations()
        .into_iter()
        .map(|(a, b)| ((a, b), outcome_probabilities(rho.matrix(), &settings.pair_unitary(a, b))))
        .collect();
    Ok(TomographyData { entries })
}

/// Adds multinomial shot noise with `shots` repetitions per setting.
pub fn sample_shots<R: Rng + ?Sized>(data: &TomographyData, shots: u64, rng: &mut R) -> Result<TomographyData> {
    if shots == 0 {
        return Err(Error::InvalidParameters(String::from("shot count must be positive")));
    }
    let mut entries = Vec::with_capacity(data.entries.len());
    for (setting, p) in &data.entries {
        let mut remaining = shots;
        let mut left = 1.0;
        let mut counts = [0u64; 4];
        for k in 0..4 {
            if k == 3 || remaining == 0 {
                counts[k] = remaining;
                break;
            }
            let q = (p[k].max(0.0) / left).clamp(0.0, 1.0);
            let draw = Binomial::new(remaining, q)
                .map_err(|e| Error::InvalidParameters(format!("binomial({remaining}, {q}): {e}")))?
                .sample(rng);
            counts[k] = draw;
            remaining -= draw;
            left -= p[k].max(0.0);
            if left <= 0.0 {
                left = f64::MIN_POSITIVE;
            }
        }
        let n = shots as f64;
        entries.push((*setting, counts.map(|c| c as f64 / n)));
    }
    Ok(TomographyData { entries })
}

fn check_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: rho.dim() });
    }
    Ok(())
}

/// Two-qubit Pauli products σₐ⊗σ_b, index 4a + b.
fn pauli_products() -> Vec<CMat> {
    let p = paulis();
    let mut out = Vec::with_capacity(16);
    for a in &p {
        for b in &p {
            out.push(a.kronecker(b));
        }
    }
    out
}

/// Linear-inversion state tomography over the 9 gate pairs, then
/// physicality projection.
pub fn state_tomography(data: &TomographyData, settings: &TomographySettings) -> Result<DensityMatrix> {
    let lin = linear_inversion(data, settings)?;
    DensityMatrix::new(vec![2, 2], project_physical(&lin))
}

/// The unprojected linear-inversion estimate (Hermitian, may be non-physical).
pub fn linear_inversion(data: &TomographyData, settings: &TomographySettings) -> Result<CMat> {
    let needed = TomographySettings::combinations();
    let missing: Vec<String> = needed
        .iter()
        .filter(|c| !data.entries.iter().any(|(s, _)| s == *c))
        .map(|(a, b)| format!("{}⊗{}", a.label(), b.label()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteSettings(format!("missing gate pairs: {}", missing.join(", "))));
    }
    let basis = pauli_products();
    // Rows: one per (setting, outcome); p = Σ r_k · tr(P_outcome σ_k)/4.
    let mut a_rows: Vec<[f64; 16]> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for ((g1, g2), probs) in &data.entries {
        let u = settings.pair_unitary(*g1, *g2);
        for (k, &p) in probs.iter().enumerate() {
            let mut row = [0.0; 16];
            for (m, sig) in basis.iter().enumerate() {
                // tr(U†|k⟩⟨k|U σ) = (U σ U†)_kk
                let v = (&u * sig * u.adjoint())[(k, k)].re;
                row[m] = 0.25 * v;
            }
            a_rows.push(row);
            rhs.push(p);
        }
    }
    let mut ata = [0.0; 256];
    let mut atb = [0.0; 16];
    for (row, &b) in a_rows.iter().zip(&rhs) {
        for i in 0..16 {
            atb[i] += row[i] * b;
            for j in 0..16 {
                ata[i * 16 + j] += row[i] * row[j];
            }
        }
    }
    let r = linalg::solve_real(16, &ata, &atb).ok_or(Error::Singular)?;
    let mut rho = CMat::zeros(4, 4);
    for (coef, sig) in r.iter().zip(&basis) {
        rho += sig.scale(0.25 * coef);
    }
    Ok(linalg::hermitian_part(&rho))
}

/// Nearest-by-clipping physical state: Hermitian part, negative eigenvalues
/// set to zero, trace renormalised to one.
pub fn project_physical(m: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(m);
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let d = m.nrows();
    if !(total > 0.0) {
        return CMat::identity(d, d).unscale(d as f64);
    }
    let mut scaled = vecs.clone();
    for (j, &v) in clipped.iter().enumerate() {
        for i in 0..d {
            scaled[(i, j)] *= v / total;
        }
    }
    linalg::hermitian_part(&(scaled * vecs.adjoint()))
}

/// One-qubit process matrix in the Pauli basis {I, X, Y, Z}:
/// ε(ρ) = Σ χ_mn σ_m ρ σ_n.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    chi: CMat,
}

impl ProcessMatrix {
    pub fn new(chi: CMat) -> Result<Self> {
        let p = Self::new_unchecked(chi)?;
        p.validate()?;
        Ok(p)
    }

    pub fn new_unchecked(chi: CMat) -> Result<Self> {
        if chi.nrows() != 4 || chi.ncols() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: chi.nrows() });
        }
        Ok(Self { chi })
    }

    pub fn identity() -> Self {
        let mut chi = CMat::zeros(4, 4);
        chi[(0, 0)] = ONE;
        Self { chi }
    }

    pub fn depolarizing() -> Self {
        Self { chi: CMat::identity(4, 4).unscale(4.0) }
    }

    pub fn chi(&self) -> &CMat {
        &self.chi
    }

    pub fn validate(&self) -> Result<()> {
        let h = linalg::hermitian_defect(&self.chi);
        if h > 1e-10 {
            return Err(Error::InvalidState(format!("χ Hermiticity defect {h:.3e}")));
        }
        let tr = linalg::trace(&self.chi).re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("χ trace {tr}")));
        }
        let min = linalg::min_eigenvalue(&self.chi);
        if min < -1e-8 {
            return Err(Error::InvalidState(format!("χ eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let p = paulis();
        let mut out = CMat::zeros(2, 2);
        for m in 0..4 {
            for n in 0..4 {
                let w = self.chi[(m, n)];
                if w != ZERO {
                    out += (&p[m] * rho * &p[n]) * w;
                }
            }
        }
        out
    }
}

/// Input states |g⟩, (|g⟩+|e⟩)/√2, (|g⟩+i|e⟩)/√2, |e⟩.
pub fn qpt_inputs() -> [CVec; 4] {
    let s = FRAC_1_SQRT_2;
    [
        CVec::from_vec(vec![ONE, ZERO]),
        CVec::from_vec(vec![c(s, 0.0), c(s, 0.0)]),
        CVec::from_vec(vec![c(s, 0.0), c(0.0, s)]),
        CVec::from_vec(vec![ZERO, ONE]),
    ]
}

pub fn qpt_input_states() -> [CMat; 4] {
    qpt_inputs().map(|v| &v * v.adjoint())
}

/// Linear-inversion process tomography from the outputs for [`qpt_inputs`],
/// normalised to tr χ = 1 and projected to a physical χ.
pub fn process_tomography(outputs: &[DensityMatrix]) -> Result<ProcessMatrix> {
    if outputs.len() != 4 {
        return Err(Error::InvalidParameters(format!("expected 4 output states, got {}", outputs.len())));
    }
    for o in outputs {
        if o.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: o.dim() });
        }
    }
    let e00 = outputs[0].matrix().clone();
    let e11 = outputs[3].matrix().clone();
    let diag = &e00 + &e11;
    // ε(|g⟩⟨e|) and ε(|e⟩⟨g|) from the superposition inputs.
    let e01 = outputs[1].matrix() + outputs[2].matrix() * I - diag.clone() * c(0.5, 0.5);
    let e10 = outputs[1].matrix() - outputs[2].matrix() * I - diag * c(0.5, -0.5);
    let images = [[e00, e01], [e10, e11]];

    let p = paulis();
    // Unknowns χ_mn at column 4m + n; rows indexed by (j, k, a, b).
    let mut a = CMat::zeros(16, 16);
    let mut b = CVec::zeros(16);
    for j in 0..2 {
        for k in 0..2 {
            let mut basis = CMat::zeros(2, 2);
            basis[(j, k)] = ONE;
            for row_a in 0..2 {
                for row_b in 0..2 {
                    let r = ((j * 2 + k) * 2 + row_a) * 2 + row_b;
                    b[r] = images[j][k][(row_a, row_b)];
                    for m in 0..4 {
                        for n in 0..4 {
                            a[(r, 4 * m + n)] = (&p[m] * &basis * &p[n])[(row_a, row_b)];
                        }
                    }
                }
            }
        }
    }
    let x = a.lu().solve(&b).ok_or(Error::Singular)?;
    let chi = CMat::from_fn(4, 4, |m, n| x[4 * m + n]);
    let chi = linalg::hermitian_part(&chi);
    let tr = linalg::trace(&chi).re;
    if !(tr.abs() > 1e-12) {
        return Err(Error::InvalidState(String::from("reconstructed χ has zero trace")));
    }
    ProcessMatrix::new(project_physical(&chi.unscale(tr)))
}

/// F = tr(χ·χ_ideal).
pub fn process_fidelity(chi: &ProcessMatrix, ideal: &ProcessMatrix) -> f64 {
    linalg::trace(&(chi.chi() * ideal.chi())).re
}

/// √tr((χa − χb)²); a Frobenius-type distance, not the trace norm.
pub fn trace_distance_chi(a: &ProcessMatrix, b: &ProcessMatrix) -> f64 {
    let d = a.chi() - b.chi();
    libm::sqrt(linalg::trace(&(&d * &d)).re.max(0.0))
}

/// ⟨ψ|ρ|ψ⟩.
pub fn state_fidelity(rho: &DensityMatrix, psi: &CVec) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: psi.len() });
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameters(format!("state vector norm {norm}")));
    }
    Ok(psi.dotc(&(rho.matrix() * psi)).re)
}

/// |ψ⁻⟩ = (|eg⟩ − |ge⟩)/√2, i.e. (|e0g⟩ − |g0e⟩)/√2 once the channel is removed.
pub fn singlet() -> CVec {
    let s = FRAC_1_SQRT_2;
    CVec::from_vec(vec![ZERO, c(-s, 0.0), c(s, 0.0), ZERO])
}

/// Wootters concurrence max(0, λ₁ − λ₂ − λ₃ − λ₄), λ the descending
/// eigenvalues of √(√ρ ρ̃ √ρ) with ρ̃ = (σy⊗σy) ρ* (σy⊗σy).
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let yy = pauli_y().kronecker(&pauli_y());
    let r = rho.matrix();
    let tilde = &yy * r.map(|z| z.conj()) * &yy;
    let sqrt_rho = linalg::hermitian_fn(r, |v| libm::sqrt(v.max(0.0)));
    let inner = &sqrt_rho * tilde * &sqrt_rho;
    let (mut lam, _) = linalg::eigh(&inner);
    for v in lam.iter_mut() {
        *v = libm::sqrt(v.max(0.0));
    }
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// ⟨σᵢ⊗σⱼ⟩ for i, j ∈ {I, X, Y, Z}.
pub fn pauli_expectations(rho: &DensityMatrix) -> Result<[[f64; 4]; 4]> {
    check_two_qubit(rho)?;
    let p = paulis();
    let mut out = [[0.0; 4]; 4];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in p.iter().enumerate() {
            out[i][j] = rho.expectation(&a.kronecker(b));
        }
    }
    Ok(out)
}

/// Single-qubit Bloch components (⟨X⟩, ⟨Y⟩, ⟨Z⟩).
pub fn bloch_vector(rho: &DensityMatrix) -> [f64; 3] {
    let p = paulis();
    [rho.expectation(&p[1]), rho.expectation(&p[2]), rho.expectation(&pauli_z())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::statespace::partial_trace;
    use core::f64::consts::PI;

    /// Measured-style assignment matrix whose last column sums to 0.999.
    pub(crate) const MEASURED: [[f64; 4]; 4] = [
        [0.926, 0.107, 0.114, 0.013],
        [0.040, 0.865, 0.005, 0.120],
        [0.033, 0.005, 0.853, 0.107],
        [0.001, 0.023, 0.028, 0.759],
    ];

    #[test]
    fn identity_readout_is_noop() {
        let raw = [0.1, 0.2, 0.3, 0.4];
        let out = correct_readout(&raw, &AssignmentMatrix::identity(), ReadoutCorrection::Projected).unwrap();
        for k in 0..4 {
            assert!((out[k] - raw[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn measured_matrix_first_column_maps_to_gg() {
        assert!(AssignmentMatrix::new(MEASURED).is_err());
        let m = AssignmentMatrix::from_columns_normalized(MEASURED).unwrap();
        let col = [m.rows()[0][0], m.rows()[1][0], m.rows()[2][0], m.rows()[3][0]];
        let out = correct_readout(&col, &m, ReadoutCorrection::Projected).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12 && out[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn raw_mode_can_leave_simplex() {
        let m = AssignmentMatrix::from_fidelities(0.9, 0.85, 0.92, 0.88).unwrap();
        let raw = [0.99, 0.01, 0.0, 0.0];
        let inv = correct_readout(&raw, &m, ReadoutCorrection::Raw).unwrap();
        assert!(inv.iter().any(|&v| v < 0.0));
        let proj = correct_readout(&raw, &m, ReadoutCorrection::Projected).unwrap();
        assert!(proj.iter().all(|&v| v >= 0.0));
        assert!((proj.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(correct_readout(&[0.5, 0.1, 0.1, 0.1], &m, ReadoutCorrection::Raw).is_err());
    }

    #[test]
    fn singular_assignment_rejected() {
        let m = [[0.5, 0.5, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        assert_eq!(AssignmentMatrix::new(m), Err(Error::Singular));
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_to_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = project_to_simplex(&[1.2, -0.2, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0 && p[2] == 0.0);
        let p = project_to_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn gates_are_exact_rotations() {
        let x = TomoGate::Rx90.unitary();
        let xx = &x * &x;
        // Rx(π) = −iX
        assert!(max_abs(&(xx - crate::statespace::pauli_x() * c(0.0, -1.0))) < 1e-15);
        let y = TomoGate::Ry90.unitary();
        assert!(max_abs(&(&y * &y - pauli_y() * c(0.0, -1.0))) < 1e-15);
        assert!(max_abs(&(&y * y.adjoint() - CMat::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn singlet_round_trip() {
        let rho = DensityMatrix::pure(vec![2, 2], &singlet()).unwrap();
        let s = TomographySettings::default();
        let data = synthesize_state_data(&rho, &s).unwrap();
        let est = state_tomography(&data, &s).unwrap();
        let f = state_fidelity(&est, &singlet()).unwrap();
        assert!(1.0 - f < 1e-9);
    }

    #[test]
    fn frame_rotation_is_undone() {
        let psi = CVec::from_vec(vec![c(0.3, 0.1), c(0.5, -0.2), c(0.1, 0.6), c(-0.4, 0.2)]);
        let rho = DensityMatrix::pure(vec![2, 2], &(psi.unscale(psi.norm()))).unwrap();
        let phi = 0.7;
        let u = CMat::identity(2, 2).kronecker(&rz(phi));
        let rotated = DensityMatrix::new(vec![2, 2], &u * rho.matrix() * u.adjoint()).unwrap();
        let data = synthesize_state_data(&rotated, &TomographySettings::default()).unwrap();
        let est = state_tomography(&data, &TomographySettings::with_phase(phi)).unwrap();
        assert!(max_abs(&(est.matrix() - rho.matrix())) < 1e-10);
    }

    #[test]
    fn incomplete_settings_rejected() {
        let rho = DensityMatrix::maximally_mixed(vec![2, 2]);
        let mut data = synthesize_state_data(&rho, &TomographySettings::default()).unwrap();
        data.entries.pop();
        assert!(matches!(state_tomography(&data, &TomographySettings::default()), Err(Error::IncompleteSettings(_))));
    }

    #[test]
    fn shot_noise_sums_to_one() {
        use rand::SeedableRng;
        let rho = DensityMatrix::pure(vec![2, 2], &singlet()).unwrap();
        let data = synthesize_state_data(&rho, &TomographySettings::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noisy = sample_shots(&data, 2000, &mut rng).unwrap();
        for (_, p) in &noisy.entries {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let est = state_tomography(&noisy, &TomographySettings::default()).unwrap();
        assert!(state_fidelity(&est, &singlet()).unwrap() > 0.9);
    }

    fn outputs_of(chi: &ProcessMatrix) -> Vec<DensityMatrix> {
        qpt_input_states().iter().map(|r| DensityMatrix::new(vec![2], chi.apply(r)).unwrap()).collect()
    }

    #[test]
    fn identity_process_reconstructs() {
        let outs: Vec<DensityMatrix> =
            qpt_input_states().iter().map(|r| DensityMatrix::new(vec![2], r.clone()).unwrap()).collect();
        let chi = process_tomography(&outs).unwrap();
        assert!(max_abs(&(chi.chi() - ProcessMatrix::identity().chi())) < 1e-12);
        assert!((process_fidelity(&chi, &ProcessMatrix::identity()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_damping_round_trip() {
        let g = DensityMatrix::basis(vec![2], 0).unwrap();
        let outs = vec![g.clone(), g.clone(), g.clone(), g];
        let chi = process_tomography(&outs).unwrap();
        for (input, out) in qpt_input_states().iter().zip(&outs) {
            assert!(max_abs(&(chi.apply(input) - out.matrix())) < 1e-10);
        }
    }

    #[test]
    fn depolarizing_fidelity() {
        let f = process_fidelity(&ProcessMatrix::depolarizing(), &ProcessMatrix::identity());
        assert!((f - 0.25).abs() < 1e-15);
        let outs = outputs_of(&ProcessMatrix::depolarizing());
        let chi = process_tomography(&outs).unwrap();
        assert!(max_abs(&(chi.chi() - ProcessMatrix::depolarizing().chi())) < 1e-12);
    }

    #[test]
    fn phase_flip_process() {
        // ε(ρ) = ZρZ: χ_ZZ = 1.
        let outs: Vec<DensityMatrix> = qpt_input_states()
            .iter()
            .map(|r| DensityMatrix::new(vec![2], pauli_z() * r * pauli_z()).unwrap())
            .collect();
        let chi = process_tomography(&outs).unwrap();
        assert!((chi.chi()[(3, 3)].re - 1.0).abs() < 1e-12);
        assert!(process_fidelity(&chi, &ProcessMatrix::identity()).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        let a = ProcessMatrix::identity();
        assert_eq!(trace_distance_chi(&a, &a), 0.0);
        let mut d = CMat::zeros(4, 4);
        d[(0, 0)] = c(0.9, 0.0);
        d[(1, 1)] = c(0.1, 0.0);
        let b = ProcessMatrix::new_unchecked(d).unwrap();
        let mut diff = CMat::zeros(4, 4);
        diff[(0, 0)] = c(0.1, 0.0);
        let bb = ProcessMatrix::new_unchecked(b.chi() + diff).unwrap();
        assert!((trace_distance_chi(&bb, &b) - 0.1).abs() < 1e-15);
        assert!(process_tomography(&[]).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let rho = DensityMatrix::pure(vec![2, 2], &singlet()).unwrap();
        assert!((state_fidelity(&rho, &singlet()).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        assert!((state_fidelity(&mixed, &singlet()).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn concurrence_examples() {
        let bell = DensityMatrix::pure(vec![2, 2], &singlet()).unwrap();
        assert!((concurrence(&bell).unwrap() - 1.0).abs() < 1e-7);
        let gg = DensityMatrix::basis(vec![2, 2], 0).unwrap();
        assert!(concurrence(&gg).unwrap().abs() < 1e-12);
        for p in [0.2, 0.5, 0.8] {
            let w =
                DensityMatrix::new(vec![2, 2], bell.matrix().scale(p) + CMat::identity(4, 4).scale((1.0 - p) / 4.0))
                    .unwrap();
            let expected = ((3.0 * p - 1.0) / 2.0f64).max(0.0);
            assert!((concurrence(&w).unwrap() - expected).abs() < 1e-7, "p = {p}");
        }
    }

    #[test]
    fn singlet_correlations() {
        let bell = DensityMatrix::pure(vec![2, 2], &singlet()).unwrap();
        let e = pauli_expectations(&bell).unwrap();
        for k in 1..4 {
            assert!((e[k][k] + 1.0).abs() < 1e-15);
        }
        assert!((e[0][0] - 1.0).abs() < 1e-15);
        let q1 = partial_trace(&bell, &[0]).unwrap();
        assert!(bloch_vector(&q1).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn pi_frame_correction_maps_minus_e_to_e() {
        // Q2 state (|g⟩ − |e⟩)/√2 read with φ = π looks like (|g⟩ + |e⟩)/√2.
        let s = FRAC_1_SQRT_2;
        let q2 = CVec::from_vec(vec![c(s, 0.0), c(-s, 0.0)]);
        let g = CVec::from_vec(vec![ONE, ZERO]);
        let psi = g.kronecker(&q2);
        let rho = DensityMatrix::pure(vec![2, 2], &psi).unwrap();
        let data = synthesize_state_data(&rho, &TomographySettings::default()).unwrap();
        let est = state_tomography(&data, &TomographySettings::with_phase(PI)).unwrap();
        let plus = g.kronecker(&CVec::from_vec(vec![c(s, 0.0), c(s, 0.0)]));
        assert!((state_fidelity(&est, &plus).unwrap() - 1.0).abs() < 1e-10);
    }
}
