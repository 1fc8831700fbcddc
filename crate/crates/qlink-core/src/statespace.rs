//! Composite Hilbert space of two qubits joined by `2N+1` channel modes.
//!
//! Subsystems are ordered Q1, modes `−N..=N` ascending, Q2. Subsystem 0 is the
//! most significant digit of a basis index. Every subsystem is two-level:
//! qubits are `|g⟩ = 0`, `|e⟩ = 1`, modes are Fock states `|0⟩`, `|1⟩`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, ONE, ZERO};

pub const QUBIT_LEVELS: usize = 2;
pub const FOCK_CUTOFF: usize = 2;

/// Largest dimension for which dense operators are materialised.
pub const MAX_DENSE_DIM: usize = 2048;

/// Tolerances used when validating a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    n_side_modes: usize,
}

pub fn build_layout(n_side_modes: usize) -> SpaceLayout {
    SpaceLayout { n_side_modes }
}

impl SpaceLayout {
    pub fn n_side_modes(&self) -> usize {
        self.n_side_modes
    }

    pub fn n_modes(&self) -> usize {
        2 * self.n_side_modes + 1
    }

    pub fn n_subsystems(&self) -> usize {
        self.n_modes() + 2
    }

    pub fn dim(&self) -> usize {
        QUBIT_LEVELS * FOCK_CUTOFF.pow(self.n_modes() as u32) * QUBIT_LEVELS
    }

    pub fn local_dims(&self) -> Vec<usize> {
        vec![2; self.n_subsystems()]
    }

    pub fn qubit1(&self) -> usize {
        0
    }

    pub fn qubit2(&self) -> usize {
        self.n_modes() + 1
    }

    /// Subsystem index of channel mode `n`, `−N ≤ n ≤ N`.
    pub fn mode(&self, n: i32) -> Result<usize> {
        let big_n = self.n_side_modes as i32;
        if n < -big_n || n > big_n {
            return Err(Error::InvalidParameters(format!("mode {n} outside −{big_n}..={big_n}")));
        }
        Ok((n + big_n) as usize + 1)
    }

    /// Mode numbers `−N..=N` in subsystem order.
    pub fn mode_numbers(&self) -> impl Iterator<Item = i32> {
        let big_n = self.n_side_modes as i32;
        -big_n..=big_n
    }

    pub fn mode_subsystems(&self) -> core::ops::Range<usize> {
        1..self.n_modes() + 1
    }

    pub fn label(&self, subsystem: usize) -> String {
        if subsystem == 0 {
            String::from("q1")
        } else if subsystem == self.qubit2() {
            String::from("q2")
        } else {
            format!("mode_{}", subsystem as i32 - 1 - self.n_side_modes as i32)
        }
    }

    fn shift(&self, subsystem: usize) -> usize {
        self.n_subsystems() - 1 - subsystem
    }

    /// Occupation (0 or 1) of `subsystem` in basis state `index`.
    pub fn occupation(&self, index: usize, subsystem: usize) -> usize {
        (index >> self.shift(subsystem)) & 1
    }

    pub fn basis_index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_subsystems() {
            return Err(Error::DimensionMismatch { expected: self.n_subsystems(), got: occupations.len() });
        }
        let mut idx = 0;
        for &o in occupations {
            if o > 1 {
                return Err(Error::InvalidParameters(format!("occupation {o} exceeds cutoff")));
            }
            idx = (idx << 1) | o;
        }
        Ok(idx)
    }

    /// Basis index with a single excitation on `subsystem`, or the ground
    /// state for `None`.
    pub fn single_excitation(&self, subsystem: Option<usize>) -> usize {
        subsystem.map_or(0, |s| 1 << self.shift(s))
    }

    /// Total excitation number of a basis state.
    pub fn excitations(&self, index: usize) -> u32 {
        index.count_ones()
    }

    fn check_dense(&self) -> Result<()> {
        if self.dim() > MAX_DENSE_DIM {
            return Err(Error::DenseTooLarge(self.dim()));
        }
        Ok(())
    }
}

/// A dense operator on the full layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    layout: SpaceLayout,
    matrix: CMat,
}

impl Operator {
    pub fn new(layout: SpaceLayout, matrix: CMat) -> Result<Self> {
        let d = layout.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        Ok(Self { layout, matrix })
    }

    pub fn zeros(layout: SpaceLayout) -> Result<Self> {
        layout.check_dense()?;
        Ok(Self { layout, matrix: CMat::zeros(layout.dim(), layout.dim()) })
    }

    pub fn identity(layout: SpaceLayout) -> Result<Self> {
        layout.check_dense()?;
        Ok(Self { layout, matrix: CMat::identity(layout.dim(), layout.dim()) })
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout, matrix: self.matrix.adjoint() }
    }

    pub fn compose(&self, rhs: &Operator) -> Self {
        Self { layout: self.layout, matrix: &self.matrix * &rhs.matrix }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { layout: self.layout, matrix: &self.matrix * s }
    }

    pub fn plus(&self, rhs: &Operator) -> Self {
        Self { layout: self.layout, matrix: &self.matrix + &rhs.matrix }
    }
}

pub fn sigma_minus() -> CMat {
    linalg::real_mat(2, 2, &[0.0, 1.0, 0.0, 0.0])
}

pub fn sigma_plus() -> CMat {
    sigma_minus().adjoint()
}

/// Mode lowering operator truncated to `{|0⟩, |1⟩}`.
pub fn annihilation() -> CMat {
    sigma_minus()
}

pub fn pauli_i() -> CMat {
    CMat::identity(2, 2)
}

pub fn pauli_x() -> CMat {
    linalg::real_mat(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMat {
    linalg::cmat(2, 2, &[(0.0, 0.0), (0.0, -1.0), (0.0, 1.0), (0.0, 0.0)])
}

/// `Z = |g⟩⟨g| − |e⟩⟨e|`.
pub fn pauli_z() -> CMat {
    linalg::real_mat(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn paulis() -> [CMat; 4] {
    [pauli_i(), pauli_x(), pauli_y(), pauli_z()]
}

/// Embeds a 2×2 operator on one subsystem, identity elsewhere.
pub fn embed(local_op: &CMat, subsystem: usize, layout: SpaceLayout) -> Result<Operator> {
    if local_op.nrows() != 2 || local_op.ncols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: local_op.nrows() });
    }
    if subsystem >= layout.n_subsystems() {
        return Err(Error::SubsystemOutOfRange(subsystem));
    }
    layout.check_dense()?;
    let d = layout.dim();
    let bit = 1usize << layout.shift(subsystem);
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        let oi = usize::from(i & bit != 0);
        let base = i & !bit;
        for oj in 0..2 {
            let v = local_op[(oi, oj)];
            if v != ZERO {
                m[(i, base | (oj * bit))] = v;
            }
        }
    }
    Ok(Operator { layout, matrix: m })
}

/// Lowering operator (σ for qubits, a for modes) of a subsystem.
pub fn lowering(subsystem: usize, layout: SpaceLayout) -> Result<Operator> {
    embed(&sigma_minus(), subsystem, layout)
}

/// Total excitation number operator, diagonal.
pub fn excitation_number(layout: SpaceLayout) -> Result<Operator> {
    layout.check_dense()?;
    let d = layout.dim();
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = c(layout.excitations(i) as f64, 0.0);
    }
    Ok(Operator { layout, matrix: m })
}

/// How the joint state is stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Representation {
    /// Full tensor-product space of dimension `4·2^(2N+1)`.
    Full,
    /// Ground state plus the `2N+3` single-excitation states. Exact for
    /// excitation-conserving dynamics started with at most one quantum,
    /// since dissipation only returns population to the ground state.
    SingleExcitation,
}

/// A layout together with its storage representation.
///
/// In the single-excitation representation the basis is ordered: index 0 is
/// `|g, vac, g⟩`, index 1 is Q1 excited, indices `2..2+n_modes` hold one photon
/// in modes `−N..=N`, and the last index is Q2 excited.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Space {
    layout: SpaceLayout,
    repr: Representation,
}

impl Space {
    pub fn new(layout: SpaceLayout, repr: Representation) -> Self {
        Self { layout, repr }
    }

    pub fn full(layout: SpaceLayout) -> Self {
        Self::new(layout, Representation::Full)
    }

    pub fn single_excitation(layout: SpaceLayout) -> Self {
        Self::new(layout, Representation::SingleExcitation)
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn dim(&self) -> usize {
        match self.repr {
            Representation::Full => self.layout.dim(),
            Representation::SingleExcitation => self.layout.n_modes() + 3,
        }
    }

    /// Local dimensions used to tag density matrices in this space.
    pub fn dims(&self) -> Vec<usize> {
        match self.repr {
            Representation::Full => self.layout.local_dims(),
            Representation::SingleExcitation => vec![self.dim()],
        }
    }

    pub fn check_dense(&self) -> Result<()> {
        if self.dim() > MAX_DENSE_DIM {
            return Err(Error::DenseTooLarge(self.dim()));
        }
        Ok(())
    }

    /// Basis index with exactly one quantum on `subsystem` (or none).
    pub fn excited_index(&self, subsystem: Option<usize>) -> usize {
        match (self.repr, subsystem) {
            (_, None) => 0,
            (Representation::Full, s) => self.layout.single_excitation(s),
            (Representation::SingleExcitation, Some(s)) => s + 1,
        }
    }

    pub fn occupation(&self, index: usize, subsystem: usize) -> usize {
        match self.repr {
            Representation::Full => self.layout.occupation(index, subsystem),
            Representation::SingleExcitation => usize::from(index == subsystem + 1),
        }
    }

    /// Index after removing the quantum on `subsystem`, if present.
    fn lowered(&self, index: usize, subsystem: usize) -> Option<usize> {
        if self.occupation(index, subsystem) == 0 {
            return None;
        }
        Some(match self.repr {
            Representation::Full => index ^ (1 << (self.layout.n_subsystems() - 1 - subsystem)),
            Representation::SingleExcitation => 0,
        })
    }

    /// Index after moving the quantum from `from` to `to`, if allowed.
    pub fn hop(&self, index: usize, from: usize, to: usize) -> Option<usize> {
        if from == to || self.occupation(index, to) != 0 {
            return None;
        }
        let low = self.lowered(index, from)?;
        Some(match self.repr {
            Representation::Full => low | (1 << (self.layout.n_subsystems() - 1 - to)),
            Representation::SingleExcitation => to + 1,
        })
    }

    /// Lowering operator of a subsystem in this representation.
    pub fn lowering(&self, subsystem: usize) -> Result<CMat> {
        self.check_subsystem(subsystem)?;
        self.check_dense()?;
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            if let Some(j) = self.lowered(i, subsystem) {
                m[(j, i)] = ONE;
            }
        }
        Ok(m)
    }

    /// Diagonal occupation operator of a subsystem.
    pub fn number(&self, subsystem: usize) -> Result<CMat> {
        self.check_subsystem(subsystem)?;
        self.check_dense()?;
        let d = self.dim();
        Ok(CMat::from_fn(d, d, |i, j| if i == j { c(self.occupation(i, subsystem) as f64, 0.0) } else { ZERO }))
    }

    /// `|g⟩⟨g| − |e⟩⟨e|` on a qubit (or the analogous parity on a mode).
    pub fn sigma_z(&self, subsystem: usize) -> Result<CMat> {
        let n = self.number(subsystem)?;
        let d = self.dim();
        Ok(CMat::identity(d, d) - n.scale(2.0))
    }

    /// `a†_to a_from + h.c.`: exchange of one quantum between subsystems.
    pub fn exchange(&self, from: usize, to: usize) -> Result<CMat> {
        self.check_subsystem(from)?;
        self.check_subsystem(to)?;
        self.check_dense()?;
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            if let Some(j) = self.hop(i, from, to) {
                m[(j, i)] += ONE;
                m[(i, j)] += ONE;
            }
        }
        Ok(m)
    }

    fn check_subsystem(&self, subsystem: usize) -> Result<()> {
        if subsystem >= self.layout.n_subsystems() {
            return Err(Error::SubsystemOutOfRange(subsystem));
        }
        Ok(())
    }

    /// Joint state with Q1 in `q1_state` (2×2), channel in vacuum, Q2 in |g⟩.
    pub fn prepare_q1(&self, q1_state: &CMat) -> Result<DensityMatrix> {
        if q1_state.nrows() != 2 || q1_state.ncols() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: q1_state.nrows() });
        }
        self.check_dense()?;
        let d = self.dim();
        let idx = [0, self.excited_index(Some(self.layout.qubit1()))];
        let mut m = CMat::zeros(d, d);
        for a in 0..2 {
            for b in 0..2 {
                m[(idx[a], idx[b])] = q1_state[(a, b)];
            }
        }
        DensityMatrix::new(self.dims(), m)
    }

    /// Excited-state populations of Q1, Q2 and each mode (`−N..=N`).
    pub fn populations(&self, rho: &CMat) -> (f64, f64, Vec<f64>) {
        let l = self.layout;
        let mut modes = vec![0.0; l.n_modes()];
        match self.repr {
            Representation::SingleExcitation => {
                for (k, m) in modes.iter_mut().enumerate() {
                    *m = rho[(k + 2, k + 2)].re;
                }
                let last = self.dim() - 1;
                (rho[(1, 1)].re, rho[(last, last)].re, modes)
            }
            Representation::Full => {
                let (mut p1, mut p2) = (0.0, 0.0);
                for i in 0..self.dim() {
                    let p = rho[(i, i)].re;
                    if p == 0.0 {
                        continue;
                    }
                    if l.occupation(i, 0) == 1 {
                        p1 += p;
                    }
                    if l.occupation(i, l.qubit2()) == 1 {
                        p2 += p;
                    }
                    for (k, m) in modes.iter_mut().enumerate() {
                        if l.occupation(i, k + 1) == 1 {
                            *m += p;
                        }
                    }
                }
                (p1, p2, modes)
            }
        }
    }

    /// Two-qubit state (Q1 ⊗ Q2) with the channel traced out.
    pub fn reduce_to_qubits(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self.repr {
            Representation::Full => partial_trace(rho, &[0, self.layout.qubit2()]),
            Representation::SingleExcitation => {
                let r = rho.matrix();
                let d = self.dim();
                if r.nrows() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: r.nrows() });
                }
                // Two-qubit indices: gg = 0, ge = 1, eg = 2.
                let q2 = d - 1;
                let map = [(0usize, 0usize), (1, 2), (q2, 1)];
                let mut out = CMat::zeros(4, 4);
                for &(si, ti) in &map {
                    for &(sj, tj) in &map {
                        out[(ti, tj)] = r[(si, sj)];
                    }
                }
                for k in 2..q2 {
                    out[(0, 0)] += r[(k, k)];
                }
                DensityMatrix::new_unchecked(vec![2, 2], out)
            }
        }
    }
}

/// A density matrix over a tensor product of subsystems with local
/// dimensions `dims` (ordered most significant first).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    matrix: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and numerical positivity.
    pub fn new(dims: Vec<usize>, matrix: CMat) -> Result<Self> {
        let rho = Self::new_unchecked(dims, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Only checks that the shape matches `dims`.
    pub fn new_unchecked(dims: Vec<usize>, matrix: CMat) -> Result<Self> {
        let d: usize = dims.iter().product();
        if dims.is_empty() || matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        Ok(Self { dims, matrix })
    }

    pub fn on_layout(layout: SpaceLayout, matrix: CMat) -> Result<Self> {
        Self::new(layout.local_dims(), matrix)
    }

    pub fn two_qubit(matrix: CMat) -> Result<Self> {
        Self::new(vec![2, 2], matrix)
    }

    pub fn single_qubit(matrix: CMat) -> Result<Self> {
        Self::new(vec![2], matrix)
    }

    pub fn pure(dims: Vec<usize>, psi: &CVec) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState(String::from("zero state vector")));
        }
        let v = psi.unscale(norm);
        Self::new(dims, &v * v.adjoint())
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let d: usize = dims.iter().product();
        if index >= d {
            return Err(Error::DimensionMismatch { expected: d, got: index });
        }
        let mut m = CMat::zeros(d, d);
        m[(index, index)] = ONE;
        Self::new_unchecked(dims, m)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self { dims, matrix: CMat::identity(d, d).unscale(d as f64) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    /// tr ρ², using the Hermiticity of ρ.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Re tr(A·ρ).
    pub fn expectation(&self, a: &CMat) -> f64 {
        let mut acc = ZERO;
        let d = self.dim();
        for i in 0..d {
            for k in 0..d {
                acc += a[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc.re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn validate(&self) -> Result<()> {
        let herm = linalg::hermitian_defect(&self.matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("Hermiticity defect {herm:.3e}")));
        }
        let tr = linalg::trace(&self.matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {:.12}", tr.re)));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }
}

/// Traces out every subsystem not listed in `keep`. The kept subsystems keep
/// their original relative order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.dims.len();
    if keep.is_empty() {
        return Err(Error::InvalidKeepSet);
    }
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    if kept.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidKeepSet);
    }
    if let Some(&bad) = kept.iter().find(|&&k| k >= n) {
        return Err(Error::SubsystemOutOfRange(bad));
    }
    let traced: Vec<usize> = (0..n).filter(|k| !kept.contains(k)).collect();

    // Stride of each subsystem in the full index.
    let mut stride = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        stride[k] = stride[k + 1] * rho.dims[k + 1];
    }
    let offsets = |subs: &[usize]| -> Vec<usize> {
        let total: usize = subs.iter().map(|&k| rho.dims[k]).product();
        let mut out = Vec::with_capacity(total);
        for mut r in 0..total {
            let mut off = 0;
            for &k in subs.iter().rev() {
                off += (r % rho.dims[k]) * stride[k];
                r /= rho.dims[k];
            }
            out.push(off);
        }
        out
    };
    let keep_off = offsets(&kept);
    let trace_off = offsets(&traced);
    let dk = keep_off.len();
    let mut out = CMat::zeros(dk, dk);
    for (a, &ia) in keep_off.iter().enumerate() {
        for (b, &ib) in keep_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &trace_off {
                acc += rho.matrix[(ia + t, ib + t)];
            }
            out[(a, b)] = acc;
        }
    }
    DensityMatrix::new_unchecked(kept.iter().map(|&k| rho.dims[k]).collect(), out)
}
