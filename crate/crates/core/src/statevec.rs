//! Dense state vectors.
//!
//! Basis index `i` holds qubit `q` in bit `q` of `i` (qubit 0 is the least
//! significant bit). Bit-strings are written with qubit 0 first, so the
//! string `"1110"` is qubits 0, 1, 2 set and qubit 3 clear.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

/// Largest supported register.
pub const MAX_QUBITS: usize = 16;

/// Probability below which a measurement branch is reported as absent.
pub const BRANCH_THRESHOLD: f64 = 1e-12;

/// Tolerance for the unitarity check on user-supplied gate matrices.
pub const UNITARY_TOL: f64 = 1e-10;

/// Registers at least this wide split gate kernels across workers.
#[cfg(feature = "parallel")]
const PARALLEL_KERNEL_MIN_QUBITS: usize = 14;

pub type Mat2C = [[Complex64; 2]; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("{0} qubits requested, at most {MAX_QUBITS} are supported")]
    TooManyQubits(usize),
    #[error("bit-string has length {got}, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("amplitude vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("invalid character `{0}` in bit-string")]
    BadBit(char),
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    IndexOutOfRange { index: usize, num_qubits: usize },
    #[error("qubit {0} appears more than once among gate operands")]
    IndexCollision(usize),
    #[error("gate matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("qubit {qubit} is not in the definite state |{value}>")]
    NotDefinite { qubit: usize, value: u8 },
    #[error("state dump line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Outcome of a projective single-qubit measurement. A branch is `None` when
/// its probability is below [`BRANCH_THRESHOLD`].
#[derive(Debug, Clone)]
pub struct Measurement {
    pub prob0: f64,
    pub zero: Option<StateVector>,
    pub one: Option<StateVector>,
}

impl Measurement {
    pub fn prob1(&self) -> f64 {
        1.0 - self.prob0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_width(num_qubits: usize) -> Result<(), StateError> {
    if num_qubits > MAX_QUBITS {
        Err(StateError::TooManyQubits(num_qubits))
    } else {
        Ok(())
    }
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self, StateError> {
        Self::from_index(num_qubits, 0)
    }

    /// Computational basis state with the given little-endian index.
    pub fn from_index(num_qubits: usize, index: usize) -> Result<Self, StateError> {
        check_width(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(StateError::IndexOutOfRange { index, num_qubits });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    /// Basis state from a bit-string, qubit 0 first.
    pub fn basis_state(num_qubits: usize, bits: &str) -> Result<Self, StateError> {
        check_width(num_qubits)?;
        let index = parse_bits(bits)?;
        let len = bits.chars().count();
        if len != num_qubits {
            return Err(StateError::SizeMismatch { expected: num_qubits, got: len });
        }
        Self::from_index(num_qubits, index)
    }

    /// Wraps an amplitude vector, which must have power-of-two length and
    /// unit norm within [`UNITARY_TOL`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, StateError> {
        let state = Self::from_amplitudes_unnormalized(amps)?;
        let n = state.norm_sqr();
        if (n - 1.0).abs() > UNITARY_TOL {
            return Err(StateError::NotNormalized(n));
        }
        Ok(state)
    }

    /// Like [`from_amplitudes`](Self::from_amplitudes) without the norm check.
    /// Used for operator columns and projected vectors.
    pub fn from_amplitudes_unnormalized(amps: Vec<Complex64>) -> Result<Self, StateError> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(StateError::NotPowerOfTwo(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_width(num_qubits)?;
        Ok(Self { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_index(&self, index: usize) -> Result<(), StateError> {
        if index >= self.num_qubits {
            Err(StateError::IndexOutOfRange { index, num_qubits: self.num_qubits })
        } else {
            Ok(())
        }
    }

    fn control_mask(&self, controls: &[usize], target: usize) -> Result<usize, StateError> {
        self.check_index(target)?;
        let mut mask = 0usize;
        for &c in controls {
            self.check_index(c)?;
            if c == target || mask & (1 << c) != 0 {
                return Err(StateError::IndexCollision(c));
            }
            mask |= 1 << c;
        }
        Ok(mask)
    }

    /// Applies `u` to `target` on every basis component whose control bits
    /// are all 1. An empty control set is an unconditional gate.
    pub fn apply_controlled_unitary(&mut self, controls: &[usize], target: usize, u: &Mat2C) -> Result<(), StateError> {
        let dev = unitarity_deviation(u);
        if dev > UNITARY_TOL {
            return Err(StateError::NonUnitary(dev));
        }
        let mask = self.control_mask(controls, target)?;
        self.apply_masked(mask, target, u);
        Ok(())
    }

    /// Same as [`apply_controlled_unitary`](Self::apply_controlled_unitary)
    /// but without the unitarity check, so deliberately corrupted matrices
    /// can be pushed through a circuit.
    pub fn apply_controlled_matrix(&mut self, controls: &[usize], target: usize, u: &Mat2C) -> Result<(), StateError> {
        let mask = self.control_mask(controls, target)?;
        self.apply_masked(mask, target, u);
        Ok(())
    }

    /// Controlled X, the permutation special case.
    pub fn apply_controlled_x(&mut self, controls: &[usize], target: usize) -> Result<(), StateError> {
        let mask = self.control_mask(controls, target)?;
        let stride = 1usize << target;
        for i in 0..self.amps.len() {
            if i & stride == 0 && i & mask == mask {
                self.amps.swap(i, i | stride);
            }
        }
        Ok(())
    }

    fn apply_masked(&mut self, mask: usize, target: usize, u: &Mat2C) {
        let stride = 1usize << target;
        let kernel = |offset: usize, block: &mut [Complex64]| {
            let (lo, hi) = block.split_at_mut(stride);
            for (k, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if (offset + k) & mask != mask {
                    continue;
                }
                let (x0, x1) = (*a0, *a1);
                *a0 = u[0][0] * x0 + u[0][1] * x1;
                *a1 = u[1][0] * x0 + u[1][1] * x1;
            }
        };
        #[cfg(feature = "parallel")]
        if self.num_qubits >= PARALLEL_KERNEL_MIN_QUBITS {
            use rayon::prelude::*;
            self.amps.par_chunks_mut(stride << 1).enumerate().for_each(|(b, block)| kernel(b * (stride << 1), block));
            return;
        }
        for (b, block) in self.amps.chunks_mut(stride << 1).enumerate() {
            kernel(b * (stride << 1), block);
        }
    }

    /// Probability that qubit `q` reads 0.
    pub fn prob_zero(&self, q: usize) -> Result<f64, StateError> {
        self.check_index(q)?;
        let bit = 1usize << q;
        Ok(self.amps.iter().enumerate().filter(|(i, _)| i & bit == 0).map(|(_, a)| a.norm_sqr()).sum())
    }

    /// Projective measurement of qubit `q` in the computational basis.
    pub fn measure_qubit(&self, q: usize) -> Result<Measurement, StateError> {
        let total = self.norm_sqr();
        let prob0 = self.prob_zero(q)? / total;
        let prob1 = 1.0 - prob0;
        let branch = |value: usize, p: f64| {
            if p < BRANCH_THRESHOLD {
                return None;
            }
            let scale = 1.0 / (p * total).sqrt();
            let amps = self
                .amps
                .iter()
                .enumerate()
                .map(|(i, a)| if (i >> q) & 1 == value { a * scale } else { Complex64::new(0.0, 0.0) })
                .collect();
            Some(StateVector { num_qubits: self.num_qubits, amps })
        };
        Ok(Measurement { prob0, zero: branch(0, prob0), one: branch(1, prob1) })
    }

    /// Unnormalized projection of qubit `q` onto `|value>`.
    pub fn project(&self, q: usize, value: u8) -> Result<StateVector, StateError> {
        self.check_index(q)?;
        let value = (value & 1) as usize;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if (i >> q) & 1 == value { *a } else { Complex64::new(0.0, 0.0) })
            .collect();
        Ok(StateVector { num_qubits: self.num_qubits, amps })
    }

    /// Drops qubit `q`, which must be in the definite state `|value>` (all
    /// weight on the other value below [`BRANCH_THRESHOLD`]).
    pub fn remove_qubit(&self, q: usize, value: u8) -> Result<StateVector, StateError> {
        self.check_index(q)?;
        let value = (value & 1) as usize;
        let stray: f64 =
            self.amps.iter().enumerate().filter(|(i, _)| (i >> q) & 1 != value).map(|(_, a)| a.norm_sqr()).sum();
        if stray > BRANCH_THRESHOLD {
            return Err(StateError::NotDefinite { qubit: q, value: value as u8 });
        }
        let low = (1usize << q) - 1;
        let amps = (0..self.amps.len() / 2)
            .map(|j| {
                let i = (j & low) | ((j & !low) << 1) | (value << q);
                self.amps[i]
            })
            .collect();
        Ok(StateVector { num_qubits: self.num_qubits - 1, amps })
    }

    /// Appends `extra` qubits in `|0>` at the high end.
    pub fn extend(&self, extra: usize) -> Result<StateVector, StateError> {
        check_width(self.num_qubits + extra)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len() << extra];
        amps[..self.amps.len()].copy_from_slice(&self.amps);
        Ok(StateVector { num_qubits: self.num_qubits + extra, amps })
    }

    /// `max_i |self_i - lambda * other_i|` with the phase `lambda` fixed by the
    /// largest-magnitude component of `other`. Infinite on width mismatch.
    pub fn phase_deviation(&self, other: &StateVector) -> f64 {
        if self.num_qubits != other.num_qubits {
            return f64::INFINITY;
        }
        let lambda = global_phase(&self.amps, &other.amps);
        max_deviation(&self.amps, &other.amps, lambda)
    }

    pub fn equal_up_to_global_phase(&self, other: &StateVector, tol: f64) -> bool {
        self.phase_deviation(other) <= tol
    }

    /// Text dump, one line per nonzero amplitude: `<bits> <re> <im>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() <= DUMP_ZERO {
                continue;
            }
            let _ = writeln!(out, "{} {:.16e} {:.16e}", bits_of(i, self.num_qubits), a.re, a.im);
        }
        out
    }

    /// Parses a dump produced by [`dump`](Self::dump). Blank lines and `#`
    /// comments are ignored. The result is renormalized; inputs whose norm
    /// is off by more than 1e-6 are rejected.
    pub fn parse_dump(text: &str) -> Result<StateVector, StateError> {
        let mut entries = Vec::new();
        let mut width = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| StateError::Parse { line: n + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected `<bits> <re> <im>`, got {} fields", fields.len())));
            }
            let index = parse_bits(fields[0]).map_err(|e| err(e.to_string()))?;
            let len = fields[0].len();
            match width {
                None => width = Some(len),
                Some(w) if w != len => return Err(err(format!("bit-string length {len} differs from earlier {w}"))),
                _ => {}
            }
            let re: f64 = fields[1].parse().map_err(|_| err(format!("bad real part `{}`", fields[1])))?;
            let im: f64 = fields[2].parse().map_err(|_| err(format!("bad imaginary part `{}`", fields[2])))?;
            entries.push((index, Complex64::new(re, im)));
        }
        let width = width.ok_or(StateError::Parse { line: 0, message: "empty state dump".into() })?;
        check_width(width)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << width];
        for (i, a) in entries {
            amps[i] += a;
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(StateError::NotNormalized(norm));
        }
        let scale = 1.0 / norm.sqrt();
        amps.iter_mut().for_each(|a| *a *= scale);
        Ok(StateVector { num_qubits: width, amps })
    }
}

/// Magnitude below which dumps omit an amplitude.
const DUMP_ZERO: f64 = 1e-15;

/// Bit-string of `index`, qubit 0 first.
pub fn bits_of(index: usize, num_qubits: usize) -> String {
    (0..num_qubits).map(|q| if (index >> q) & 1 == 1 { '1' } else { '0' }).collect()
}

fn parse_bits(bits: &str) -> Result<usize, StateError> {
    let mut index = 0usize;
    for (q, ch) in bits.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => {
                if q >= MAX_QUBITS {
                    return Err(StateError::TooManyQubits(q + 1));
                }
                index |= 1 << q
            }
            other => return Err(StateError::BadBit(other)),
        }
    }
    if bits.len() > MAX_QUBITS {
        return Err(StateError::TooManyQubits(bits.len()));
    }
    Ok(index)
}

/// Phase `lambda = a_j / b_j` at the largest-magnitude component `j` of `b`
/// (1 when `b` vanishes).
pub fn global_phase(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let j = b.iter().enumerate().max_by(|x, y| x.1.norm_sqr().total_cmp(&y.1.norm_sqr())).map(|(j, _)| j);
    match j {
        Some(j) if b[j].norm() > 0.0 => {
            let l = a[j] / b[j];
            if l.norm() > 0.0 {
                l / l.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        }
        _ => Complex64::new(1.0, 0.0),
    }
}

/// `max_i |a_i - lambda * b_i|`.
pub fn max_deviation(a: &[Complex64], b: &[Complex64], lambda: Complex64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - lambda * y).norm()).fold(0.0, f64::max)
}

/// `max |U^dagger U - I|` entry.
pub fn unitarity_deviation(u: &Mat2C) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let s: Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((s - Complex64::new(expect, 0.0)).norm());
        }
    }
    dev
}

pub fn pauli_x() -> Mat2C {
    let (z, o) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    [[z, o], [o, z]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn basis_states() {
        let s = StateVector::basis_state(2, "00").unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0));
        let s = StateVector::basis_state(4, "1010").unwrap();
        assert_eq!(s.amplitudes()[0b0101], c(1.0));
        let s = StateVector::basis_state(1, "1").unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0));
        assert_eq!(StateVector::basis_state(3, "01"), Err(StateError::SizeMismatch { expected: 3, got: 2 }));
        assert_eq!(StateVector::basis_state(17, &"0".repeat(17)), Err(StateError::TooManyQubits(17)));
        assert_eq!(StateVector::basis_state(2, "0x"), Err(StateError::BadBit('x')));
    }

    #[test]
    fn x_gate_and_toffoli_truth_table() {
        let mut s = StateVector::basis_state(1, "0").unwrap();
        s.apply_controlled_unitary(&[], 0, &pauli_x()).unwrap();
        assert_eq!(s, StateVector::basis_state(1, "1").unwrap());

        let mut s = StateVector::basis_state(4, "1110").unwrap();
        s.apply_controlled_unitary(&[0, 1, 2], 3, &pauli_x()).unwrap();
        assert_eq!(s, StateVector::basis_state(4, "1111").unwrap());

        for i in 0..16 {
            let mut a = StateVector::from_index(4, i).unwrap();
            let mut b = a.clone();
            a.apply_controlled_unitary(&[0, 1, 2], 3, &pauli_x()).unwrap();
            b.apply_controlled_x(&[0, 1, 2], 3).unwrap();
            assert_eq!(a, b);
            let expect = if i & 0b0111 == 0b0111 { i ^ 0b1000 } else { i };
            assert_eq!(a, StateVector::from_index(4, expect).unwrap());
        }
    }

    #[test]
    fn idle_control_leaves_state_unchanged() {
        let f = crate::fib_data::mat2_complex(&crate::FibonacciTensorSet::new().f_matrix());
        let amps = vec![c(0.6), c(0.0), c(0.8), c(0.0)]; // qubit 0 = 0, qubit 1 = 0.6|0> + 0.8|1>
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        let before = s.clone();
        s.apply_controlled_unitary(&[0], 1, &f).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn operand_errors() {
        let mut s = StateVector::zero(3).unwrap();
        assert_eq!(s.apply_controlled_unitary(&[1], 1, &pauli_x()), Err(StateError::IndexCollision(1)));
        assert_eq!(s.apply_controlled_unitary(&[0, 0], 1, &pauli_x()), Err(StateError::IndexCollision(0)));
        assert_eq!(
            s.apply_controlled_unitary(&[], 3, &pauli_x()),
            Err(StateError::IndexOutOfRange { index: 3, num_qubits: 3 })
        );
        let bad = [[c(1.0), c(1.0)], [c(0.0), c(1.0)]];
        assert!(matches!(s.apply_controlled_unitary(&[], 0, &bad), Err(StateError::NonUnitary(_))));
    }

    #[test]
    fn measurement_branches() {
        let m = StateVector::zero(1).unwrap().measure_qubit(0).unwrap();
        assert_eq!(m.prob0, 1.0);
        assert_eq!(m.zero.unwrap(), StateVector::zero(1).unwrap());
        assert!(m.one.is_none());

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_amplitudes(vec![c(h), c(h)]).unwrap();
        let m = plus.measure_qubit(0).unwrap();
        assert!((m.prob0 - 0.5).abs() < 1e-15);
        assert!(m.zero.unwrap().phase_deviation(&StateVector::basis_state(1, "0").unwrap()) < 1e-15);
        assert!(m.one.unwrap().phase_deviation(&StateVector::basis_state(1, "1").unwrap()) < 1e-15);
    }

    #[test]
    fn tadpole_head_measurement() {
        // head is qubit 1; P(head = 0) = 1 / (1 + phi^2)
        let [bp1, _, _] = crate::fib_data::tadpole_states();
        let m = bp1.measure_qubit(1).unwrap();
        assert!((m.prob0 - 0.2763932023).abs() < 1e-10);
    }

    #[test]
    fn global_phase_examples() {
        let zero = StateVector::basis_state(1, "0").unwrap();
        let one = StateVector::basis_state(1, "1").unwrap();
        let neg = StateVector::from_amplitudes(vec![c(-1.0), c(0.0)]).unwrap();
        assert!(zero.equal_up_to_global_phase(&neg, 1e-10));
        assert!(!zero.equal_up_to_global_phase(&one, 1e-10));
    }

    #[test]
    fn remove_and_extend() {
        let s = StateVector::basis_state(3, "101").unwrap();
        let r = s.remove_qubit(1, 0).unwrap();
        assert_eq!(r, StateVector::basis_state(2, "11").unwrap());
        assert!(s.remove_qubit(0, 0).is_err());
        let e = r.extend(1).unwrap();
        assert_eq!(e, StateVector::basis_state(3, "110").unwrap());
    }

    #[test]
    fn dump_round_trip() {
        let [bp1, _, _] = crate::fib_data::tadpole_states();
        let text = bp1.dump();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("00 5.2573111211913359e-1 0.0000000000000000e0\n"));
        let back = StateVector::parse_dump(&text).unwrap();
        assert!(back.phase_deviation(&bp1) < 1e-15);
        let err = StateVector::parse_dump("00 1 0\n0 1 0\n").unwrap_err();
        assert!(matches!(err, StateError::Parse { line: 2, .. }));
        assert!(matches!(StateVector::parse_dump("00 0.5 0\n"), Err(StateError::NotNormalized(_))));
    }

    fn random_state(n: usize) -> impl Strategy<Value = StateVector> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_filter_map("nonzero", |v| {
            let norm: f64 = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            (norm > 1e-3).then(|| {
                StateVector::from_amplitudes(v.iter().map(|(a, b)| Complex64::new(a / norm, b / norm)).collect())
                    .unwrap()
            })
        })
    }

    fn random_unitary() -> impl Strategy<Value = Mat2C> {
        (0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3).prop_map(|(a, b, g, d)| {
            let (s, co) = (g / 2.0).sin_cos();
            let e = |x: f64| Complex64::from_polar(1.0, x);
            [
                [e(a - b / 2.0 - d / 2.0) * co, -e(a - b / 2.0 + d / 2.0) * s],
                [e(a + b / 2.0 - d / 2.0) * s, e(a + b / 2.0 + d / 2.0) * co],
            ]
        })
    }

    proptest! {
        #[test]
        fn phase_invariance(s in random_state(3), t in 0.0f64..6.3) {
            let rotated = StateVector::from_amplitudes(
                s.amplitudes().iter().map(|a| a * Complex64::from_polar(1.0, t)).collect(),
            ).unwrap();
            prop_assert!(s.equal_up_to_global_phase(&rotated, 1e-10));
        }

        #[test]
        fn norm_preserved_and_gates_reversible(
            s in random_state(4),
            gates in proptest::collection::vec((random_unitary(), 0usize..4, 0usize..16), 1..12),
        ) {
            let mut cur = s.clone();
            let mut applied = Vec::new();
            for (u, target, mask) in gates {
                let controls: Vec<usize> = (0..4).filter(|&q| q != target && mask >> q & 1 == 1).collect();
                cur.apply_controlled_unitary(&controls, target, &u).unwrap();
                prop_assert!((cur.norm_sqr() - 1.0).abs() <= 1e-10);
                applied.push((u, target, controls));
            }
            for (u, target, controls) in applied.into_iter().rev() {
                let udag = [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]];
                cur.apply_controlled_unitary(&controls, target, &udag).unwrap();
            }
            prop_assert!(max_deviation(cur.amplitudes(), s.amplitudes(), Complex64::new(1.0, 0.0)) <= 1e-10);
        }

        #[test]
        fn repeated_measurement_is_definite(s in random_state(3), q in 0usize..3) {
            let m = s.measure_qubit(q).unwrap();
            for (branch, value) in [(m.zero, 0), (m.one, 1)] {
                if let Some(post) = branch {
                    let again = post.measure_qubit(q).unwrap();
                    let expect = if value == 0 { 1.0 } else { 0.0 };
                    prop_assert!((again.prob0 - expect).abs() <= 1e-10);
                }
            }
        }
    }
}
