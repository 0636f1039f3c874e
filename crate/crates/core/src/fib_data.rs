//! Numeric data of the Fibonacci theory.
//!
//! Labels are bits: `0` is the vacuum, `1` the Fibonacci anyon. The F tensor
//! is written `F^{abe}_{cde'}`: before the move the edge `e` joins the
//! vertices `(a, b, e)` and `(c, d, e)`; after it, `e'` joins `(b, c, e')` and
//! `(d, a, e')`. Every entry is real.

use num_complex::Complex64;
use thiserror::Error;

use crate::statevec::StateVector;

/// Real 2x2 matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Largest accepted index; `F_92` is the last Fibonacci number below `i64::MAX`.
pub const MAX_FIBONACCI_INDEX: u32 = 92;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("fibonacci index {0} overflows a 64-bit integer (max {MAX_FIBONACCI_INDEX})")]
    FibonacciOverflow(u32),
    #[error("unknown matrix name `{0}` (expected F, S, U or XUX)")]
    UnknownMatrix(String),
}

/// Golden ratio.
pub fn phi() -> f64 {
    (5f64.sqrt() + 1.0) / 2.0
}

/// Vertex fusion rule: 1 iff `ijk` is one of 000, 011, 101, 110, 111.
pub fn delta(i: u8, j: u8, k: u8) -> u8 {
    match (i & 1, j & 1, k & 1) {
        (0, 0, 0) | (0, 1, 1) | (1, 0, 1) | (1, 1, 0) | (1, 1, 1) => 1,
        _ => 0,
    }
}

/// The 2x2 reflections that appear as controlled blocks in the circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedMatrix {
    F,
    S,
    U,
    Xux,
}

impl NamedMatrix {
    pub const ALL: [NamedMatrix; 4] = [Self::F, Self::S, Self::U, Self::Xux];

    pub fn name(self) -> &'static str {
        match self {
            Self::F => "F",
            Self::S => "S",
            Self::U => "U",
            Self::Xux => "XUX",
        }
    }
}

impl std::fmt::Display for NamedMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NamedMatrix {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "F" => Ok(Self::F),
            "S" => Ok(Self::S),
            "U" => Ok(Self::U),
            "XUX" => Ok(Self::Xux),
            other => Err(DataError::UnknownMatrix(other.to_string())),
        }
    }
}

/// Deterministic F-move sectors as read off the table of allowed moves:
/// `(a, b, c, d) -> (e, e')`. The sector `1111` is the only one with a
/// nontrivial 2x2 block and is absent here.
pub const DETERMINISTIC_FMOVES: [([u8; 4], (u8, u8)); 11] = [
    ([0, 0, 0, 0], (0, 0)),
    ([0, 0, 1, 1], (0, 1)),
    ([0, 1, 0, 1], (1, 1)),
    ([0, 1, 1, 0], (1, 0)),
    ([0, 1, 1, 1], (1, 1)),
    ([1, 0, 0, 1], (1, 0)),
    ([1, 0, 1, 0], (1, 1)),
    ([1, 0, 1, 1], (1, 1)),
    ([1, 1, 0, 0], (0, 1)),
    ([1, 1, 0, 1], (1, 1)),
    ([1, 1, 1, 0], (1, 1)),
];

/// Unique `(e, e')` allowed by the vertex constraints before and after an
/// F-move with outer legs `(a, b, c, d)`, or `None` when the sector is empty
/// or (for `1111`) not deterministic.
pub fn deterministic_fmove(a: u8, b: u8, c: u8, d: u8) -> Option<(u8, u8)> {
    let es: Vec<u8> = (0..2).filter(|&e| delta(a, b, e) * delta(c, d, e) == 1).collect();
    let eps: Vec<u8> = (0..2).filter(|&e| delta(b, c, e) * delta(d, a, e) == 1).collect();
    match (es.as_slice(), eps.as_slice()) {
        ([e], [ep]) => Some((*e, *ep)),
        _ => None,
    }
}

/// Fibonacci number `F_n` with `F_0 = 0`, `F_1 = 1`.
pub fn fibonacci(n: u32) -> Result<u64, DataError> {
    if n > MAX_FIBONACCI_INDEX {
        return Err(DataError::FibonacciOverflow(n));
    }
    let (mut prev, mut cur) = (0u64, 1u64);
    for _ in 0..n {
        let next = prev + cur;
        prev = cur;
        cur = next;
    }
    Ok(prev)
}

/// Angle `alpha` such that `R(alpha) X R(-alpha) = m` for a real reflection
/// `m = [[sin a, cos a], [cos a, -sin a]]`, with `R(alpha) = exp(i alpha Y / 2)`.
pub fn reflection_angle(m: &Mat2) -> f64 {
    m[0][0].atan2(m[0][1])
}

/// `R(alpha) = exp(i alpha sigma_y / 2) = [[cos, sin], [-sin, cos]]` of `alpha / 2`.
pub fn ry_matrix(alpha: f64) -> Mat2 {
    let (s, c) = (alpha / 2.0).sin_cos();
    [[c, s], [-s, c]]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mat2_complex(m: &Mat2) -> [[Complex64; 2]; 2] {
    [
        [Complex64::new(m[0][0], 0.0), Complex64::new(m[0][1], 0.0)],
        [Complex64::new(m[1][0], 0.0), Complex64::new(m[1][1], 0.0)],
    ]
}

/// All tensor and matrix data of the theory.
///
/// Immutable once built. [`FibonacciTensorSet::new`] gives the canonical data;
/// [`FibonacciTensorSet::with_perturbed_f`] exists for negative-control tests
/// and deliberately breaks the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct FibonacciTensorSet {
    phi: f64,
    f_matrix: Mat2,
    s_matrix: Mat2,
    u_matrix: Mat2,
    theta: f64,
    rho: f64,
}

impl Default for FibonacciTensorSet {
    fn default() -> Self {
        Self::new()
    }
}

impl FibonacciTensorSet {
    pub fn new() -> Self {
        let phi = phi();
        let inv = 1.0 / phi;
        let inv_sqrt = phi.powf(-0.5);
        let f_matrix = [[inv, inv_sqrt], [inv_sqrt, -inv]];
        let norm = (1.0 + phi * phi).sqrt();
        let s_matrix = [[1.0 / norm, phi / norm], [phi / norm, -1.0 / norm]];
        let inv2 = phi.powi(-2);
        let off = (1.0 - phi.powi(-4)).sqrt();
        let u_matrix = [[-inv2, off], [off, inv2]];
        Self { phi, f_matrix, s_matrix, u_matrix, theta: inv_sqrt.atan(), rho: inv.atan() }
    }

    /// Canonical data with one entry of the F block shifted by `eps`.
    pub fn with_perturbed_f(row: usize, col: usize, eps: f64) -> Self {
        let mut set = Self::new();
        set.f_matrix[row][col] += eps;
        set
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `theta = atan(phi^(-1/2))`, the rotation that conjugates X into F.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `rho = atan(phi^(-1))`, the rotation that conjugates X into S.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn f_matrix(&self) -> Mat2 {
        self.f_matrix
    }

    pub fn s_matrix(&self) -> Mat2 {
        self.s_matrix
    }

    pub fn u_matrix(&self) -> Mat2 {
        self.u_matrix
    }

    pub fn matrix(&self, name: NamedMatrix) -> Mat2 {
        match name {
            NamedMatrix::F => self.f_matrix,
            NamedMatrix::S => self.s_matrix,
            NamedMatrix::U => self.u_matrix,
            NamedMatrix::Xux => {
                let u = self.u_matrix;
                [[u[1][1], u[1][0]], [u[0][1], u[0][0]]]
            }
        }
    }

    pub fn delta(&self, i: u8, j: u8, k: u8) -> u8 {
        delta(i, j, k)
    }

    /// `F^{abe}_{cde'}`.
    pub fn f_tensor(&self, a: u8, b: u8, c: u8, d: u8, e: u8, e_prime: u8) -> f64 {
        let (a, b, c, d, e, e_prime) = (a & 1, b & 1, c & 1, d & 1, e & 1, e_prime & 1);
        if (a, b, c, d) == (1, 1, 1, 1) {
            return self.f_matrix[e as usize][e_prime as usize];
        }
        match deterministic_fmove(a, b, c, d) {
            Some(pair) if pair == (e, e_prime) => 1.0,
            _ => 0.0,
        }
    }

    /// Tadpole tensor `S^a_{bb'}`: the S block when the tail `a` is 0,
    /// `S^1_{11} = 1`, zero otherwise.
    pub fn s_tensor(&self, a: u8, b: u8, b_prime: u8) -> f64 {
        match (a & 1, b & 1, b_prime & 1) {
            (0, b, bp) => self.s_matrix[b as usize][bp as usize],
            (1, 1, 1) => 1.0,
            _ => 0.0,
        }
    }

    /// The three tadpole basis states as two-qubit vectors with qubit 0 the
    /// tail and qubit 1 the head: the `B_p = 1` state and the two spanning
    /// states of the `B_p = 0` space.
    pub fn tadpole_states(&self) -> [StateVector; 3] {
        let norm = (1.0 + self.phi * self.phi).sqrt();
        let c = |re: f64| Complex64::new(re, 0.0);
        let zero = c(0.0);
        // little-endian index = tail + 2 * head
        let bp1 = vec![c(1.0 / norm), zero, c(self.phi / norm), zero];
        let bp0a = vec![c(self.phi / norm), zero, c(-1.0 / norm), zero];
        let bp0b = vec![zero, zero, zero, c(1.0)];
        [bp1, bp0a, bp0b].map(|amps| StateVector::from_amplitudes(amps).expect("tadpole states are normalized"))
    }
}

/// Free-function form of [`FibonacciTensorSet::tadpole_states`] on the
/// canonical data.
pub fn tadpole_states() -> [StateVector; 3] {
    FibonacciTensorSet::new().tadpole_states()
}
