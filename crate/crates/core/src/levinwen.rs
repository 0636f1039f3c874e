//! Circuit builders, operator oracles and verification suites for the
//! Fibonacci Levin-Wen code.
//!
//! Every builder returns a [`Circuit`] over explicit qubit indices. Oracles
//! are assembled directly from the tensor data, independently of any
//! circuit, and the `verify_*` suites compare the two on the vertex-valid
//! subspace.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::Error;
use crate::exec;
use crate::fib_data::{delta, FibonacciTensorSet, NamedMatrix};
use crate::lattice::{reduction_plan, Corner, FMoveRecord, MoveKind, TrivalentLattice, MAX_SIDES, MIN_SIDES};
use crate::statevec::{bits_of, global_phase, max_deviation, StateVector, BRANCH_THRESHOLD};
use crate::Result;

/// Direct unitary identities.
pub const UNITARY_TOL: f64 = 1e-10;
/// Oracle equivalence of the plaquette circuits.
pub const ORACLE_TOL: f64 = 1e-9;
/// Reduced two-qubit identities and exact permutation networks.
pub const EXACT_TOL: f64 = 1e-12;
/// Eigenvalues above this count as `B_p = 1`.
pub const SPECTRAL_THRESHOLD: f64 = 0.5;

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub cases_total: usize,
    pub cases_passed: usize,
    pub skipped_invalid: usize,
    pub max_deviation: f64,
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.cases_passed == self.cases_total
    }

    /// Combines two reports; the witness of `self` wins when both fail.
    pub fn merge(mut self, other: VerificationReport) -> VerificationReport {
        self.cases_total += other.cases_total;
        self.cases_passed += other.cases_passed;
        self.skipped_invalid += other.skipped_invalid;
        self.max_deviation = self.max_deviation.max(other.max_deviation);
        self.witness = self.witness.or(other.witness);
        self.seed = self.seed.or(other.seed);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// One checked case: a witness label and its deviation from the reference.
struct Case {
    label: String,
    deviation: f64,
    ok: bool,
}

impl Case {
    fn new(label: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self { label: label.into(), deviation, ok: deviation <= tolerance }
    }

    fn ok(&self) -> bool {
        self.ok
    }
}

fn tally(name: &str, cases: &[Case], skipped_invalid: usize) -> VerificationReport {
    VerificationReport {
        name: name.to_string(),
        cases_total: cases.len(),
        cases_passed: cases.iter().filter(|c| c.ok()).count(),
        skipped_invalid,
        max_deviation: cases.iter().map(|c| c.deviation).fold(0.0, |m, d| if d.is_nan() { f64::NAN } else { m.max(d) }),
        witness: cases.iter().find(|c| !c.ok()).map(|c| c.label.clone()),
        seed: None,
    }
}

/// Knobs shared by all suites.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Tensor data used by both the circuits and the oracles.
    pub tensors: FibonacciTensorSet,
    /// Replaces every suite's default tolerance.
    pub tolerance: Option<f64>,
    pub seed: u64,
    /// Random valid-subspace states per randomized suite.
    pub random_cases: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { tensors: FibonacciTensorSet::new(), tolerance: None, seed: 0, random_cases: 16 }
    }
}

impl VerifyOptions {
    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

// ---------------------------------------------------------------------------
// builders

fn labelled(num_qubits: usize, roles: &[(usize, &str)]) -> Circuit {
    let mut c = Circuit::new(num_qubits).expect("builder widths are small");
    for &(q, role) in roles {
        c.set_label(q, role).expect("label in range");
    }
    c
}

/// Vertex measurement on qubits `v1, v2, v3 = 0, 1, 2` with the syndrome on
/// qubit 3: three CNOTs into the syndrome and a four-qubit Toffoli.
pub fn qv_circuit() -> Circuit {
    let mut c = labelled(4, &[(0, "v1"), (1, "v2"), (2, "v3"), (3, "syndrome")]);
    for v in 0..3 {
        c.cnot(v, 3).expect("valid operands");
    }
    c.ntoffoli(&[0, 1, 2], 3).expect("valid operands");
    c
}

/// Gates of the F-move circuit on qubits `a, b, c, d, e`: a Toffoli sandwich
/// flipping `e` when `a != c` and `b != d`, then the controlled F block on
/// `e` when `a = b = c = d = 1`.
pub fn f_gates(a: usize, b: usize, c: usize, d: usize, e: usize) -> Vec<Gate> {
    vec![
        Gate::Cnot { control: a, target: c },
        Gate::Cnot { control: b, target: d },
        Gate::toffoli(c, d, e),
        Gate::Cnot { control: b, target: d },
        Gate::Cnot { control: a, target: c },
        Gate::Controlled { matrix: NamedMatrix::F, controls: vec![a, b, c, d], target: e },
    ]
}

/// Reduced F-move with roles `a` and `d` carried by the same qubit.
pub fn reduced_f_gates(a: usize, b: usize, c: usize, e: usize) -> Vec<Gate> {
    vec![
        Gate::Cnot { control: a, target: c },
        Gate::Cnot { control: b, target: a },
        Gate::toffoli(c, a, e),
        Gate::Cnot { control: b, target: a },
        Gate::Cnot { control: a, target: c },
        Gate::Controlled { matrix: NamedMatrix::F, controls: vec![a, b, c], target: e },
    ]
}

/// `S` on `head` when `tail` is 0: an anti-controlled S block.
pub fn s_gates(tail: usize, head: usize) -> Vec<Gate> {
    vec![
        Gate::X { target: tail },
        Gate::Controlled { matrix: NamedMatrix::S, controls: vec![tail], target: head },
        Gate::X { target: tail },
    ]
}

fn swap_gates(p: usize, q: usize) -> Vec<Gate> {
    vec![
        Gate::Cnot { control: p, target: q },
        Gate::Cnot { control: q, target: p },
        Gate::Cnot { control: p, target: q },
    ]
}

fn push_all(c: &mut Circuit, gates: Vec<Gate>) -> Result<()> {
    for g in gates {
        c.push(g)?;
    }
    Ok(())
}

/// Five-qubit F circuit on qubits `a..e = 0..4`.
pub fn f_circuit() -> Circuit {
    let mut c = labelled(5, &[(0, "a"), (1, "b"), (2, "c"), (3, "d"), (4, "e")]);
    push_all(&mut c, f_gates(0, 1, 2, 3, 4)).expect("valid operands");
    c
}

/// Four-qubit reduced F circuit on qubits `a, b, c, e = 0..3`.
pub fn reduced_f_circuit() -> Circuit {
    let mut c = labelled(4, &[(0, "a"), (1, "b"), (2, "c"), (3, "e")]);
    push_all(&mut c, reduced_f_gates(0, 1, 2, 3)).expect("valid operands");
    c
}

/// Two-qubit S circuit with the tail on qubit 0 and the head on qubit 1.
pub fn s_circuit() -> Circuit {
    let mut c = labelled(2, &[(0, "tail"), (1, "head")]);
    push_all(&mut c, s_gates(0, 1)).expect("valid operands");
    c
}

/// Gates realizing a recorded lattice move.
pub fn fmove_gates(record: &FMoveRecord) -> Vec<Gate> {
    let q = record.qubits;
    match record.kind {
        MoveKind::Full => f_gates(q.a, q.b, q.c, q.d, q.e),
        MoveKind::Reduced => reduced_f_gates(q.a, q.b, q.c, q.e),
    }
}

/// Three-vertex tree of the pentagon identity. Qubit `k - 1` holds the edge
/// labelled `k`; the internal edges are 5 and 6.
pub fn pentagon_lattice() -> TrivalentLattice {
    TrivalentLattice::from_vertices(&[[4, 0, 1], [4, 5, 2], [5, 6, 3]]).expect("fixed lattice")
}

/// Internal edges moved by the pentagon sequence, as qubits.
pub const PENTAGON_MOVES: [usize; 5] = [4, 5, 4, 5, 4];

/// The two qubits the pentagon sequence swaps.
pub const PENTAGON_SWAP: (usize, usize) = (4, 5);

/// Moves of the pentagon sequence with their roles and lattices.
pub fn pentagon_plan() -> Result<Vec<FMoveRecord>> {
    let mut lattice = pentagon_lattice();
    let mut plan = Vec::new();
    for e in PENTAGON_MOVES {
        let (next, record) = lattice.apply_fmove(e)?;
        plan.push(record);
        lattice = next;
    }
    Ok(plan)
}

/// Five chained F circuits on seven qubits.
pub fn pentagon_circuit() -> Result<Circuit> {
    let mut c = Circuit::new(7)?;
    for record in pentagon_plan()? {
        push_all(&mut c, fmove_gates(&record))?;
    }
    Ok(c)
}

/// Pentagon circuit with every qubit except 5 and 6 fixed to 1: five
/// controlled-F gates alternating between the two. Qubit 0 is edge 5,
/// qubit 1 is edge 6.
pub fn simplified_pentagon_circuit() -> Circuit {
    let mut c = labelled(2, &[(0, "5"), (1, "6")]);
    for k in 0..5 {
        let (control, target) = if k % 2 == 0 { (1, 0) } else { (0, 1) };
        c.cu(NamedMatrix::F, &[control], target).expect("valid operands");
    }
    c
}

fn check_sides(n: usize) -> Result<()> {
    if (MIN_SIDES..=MAX_SIDES).contains(&n) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("plaquette sides must be in {MIN_SIDES}..={MAX_SIDES}, got {n}")))
    }
}

/// Forward half of the plaquette circuit: the F-moves reducing the `n`-gon
/// to a tadpole, and the tadpole's `(tail, head)` qubits.
pub fn bp_reduction(n: usize) -> Result<(Vec<Gate>, (usize, usize))> {
    check_sides(n)?;
    let plan = reduction_plan(n)?;
    let gates = plan.iter().flat_map(fmove_gates).collect();
    let last = &plan.last().expect("at least one move").lattice;
    let (tail, head) = last.tadpole().expect("reduction ends in a tadpole");
    let q = |e| last.qubit_of(e).expect("edge has a qubit");
    Ok((gates, (q(tail), q(head))))
}

/// Plaquette measurement on `2n + 1` qubits: inner edges on `0..n`, outer
/// legs on `n..2n`, syndrome on `2n`. Reduce to a tadpole, rotate its head
/// with S, copy the head into the syndrome, then undo.
pub fn bp_measure_circuit(n: usize) -> Result<Circuit> {
    let (forward, (tail, head)) = bp_reduction(n)?;
    let syndrome = 2 * n;
    let mut c = Circuit::new(2 * n + 1)?;
    for k in 0..n {
        c.set_label(k, &format!("i{}", k + 1))?;
        c.set_label(n + k, &format!("a{}", k + 1))?;
    }
    c.set_label(syndrome, "syndrome")?;
    push_all(&mut c, forward.clone())?;
    push_all(&mut c, s_gates(tail, head))?;
    c.cnot(head, syndrome)?;
    push_all(&mut c, s_gates(tail, head))?;
    push_all(&mut c, forward.iter().rev().map(Gate::inverse).collect())?;
    Ok(c)
}

/// Tadpole attached to a line: vertices `(3, 1, 2)` and `(3, 4, 4)` with
/// qubit `k - 1` on edge `k`.
pub fn tadpole_pull_lattice() -> TrivalentLattice {
    TrivalentLattice::from_vertices(&[[2, 0, 1], [2, 3, 3]]).expect("fixed lattice")
}

/// Pulls the tadpole through the line: S on the initial tadpole, the two
/// reduced F-moves that expand it into a 2-gon and collapse it on the other
/// edge, and S on the new tadpole.
pub fn tadpole_pull_circuit() -> Result<Circuit> {
    let lattice = tadpole_pull_lattice();
    let (tail, head) = lattice.tadpole().expect("initial tadpole");
    let (mid, first) = lattice.apply_fmove(tail)?;
    let (end, second) = mid.apply_fmove(head)?;
    let (new_tail, new_head) = end.tadpole().expect("final tadpole");
    let mut c = labelled(4, &[(0, "1"), (1, "2"), (2, "3"), (3, "4")]);
    push_all(&mut c, s_gates(tail, head))?;
    push_all(&mut c, fmove_gates(&first))?;
    push_all(&mut c, fmove_gates(&second))?;
    push_all(&mut c, s_gates(new_tail, new_head))?;
    Ok(c)
}

/// Right-hand side of the pull-through identity: swap qubits 3 and 4, then
/// U on 4 controlled by 1, 2 and 3.
pub fn tadpole_pull_rhs() -> Circuit {
    let mut c = labelled(4, &[(0, "1"), (1, "2"), (2, "3"), (3, "4")]);
    push_all(&mut c, swap_gates(2, 3)).expect("valid operands");
    c.cu(NamedMatrix::U, &[0, 1, 2], 3).expect("valid operands");
    c
}

/// Two-qubit right-hand sides with qubits 1 and 2 fixed to 1 (qubit 0 is
/// edge 3, qubit 1 is edge 4): swap then controlled-U, and the variant with
/// the outer NOT gates moved across, swap then controlled-XUX.
pub fn simplified_pull_rhs(moved_nots: bool) -> Circuit {
    let mut c = labelled(2, &[(0, "3"), (1, "4")]);
    push_all(&mut c, swap_gates(0, 1)).expect("valid operands");
    let m = if moved_nots { NamedMatrix::Xux } else { NamedMatrix::U };
    c.cu(m, &[0], 1).expect("valid operands");
    c
}

/// The pull-through circuit with its leading NOT on qubit 3 and trailing
/// NOT on qubit 4 removed.
pub fn tadpole_pull_without_outer_nots() -> Result<Circuit> {
    let full = tadpole_pull_circuit()?;
    let gates = full.gates();
    let mut c = Circuit::new(4)?;
    debug_assert_eq!(gates.first(), Some(&Gate::X { target: 2 }));
    debug_assert_eq!(gates.last(), Some(&Gate::X { target: 3 }));
    for g in &gates[1..gates.len() - 1] {
        c.push(g.clone())?;
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// oracles

/// A plaquette operator restricted to the vertex-valid subspace of its
/// lattice.
#[derive(Debug, Clone)]
pub struct PlaquetteOracle {
    num_qubits: usize,
    valid: Vec<usize>,
    position: Vec<Option<usize>>,
    /// `B_p` on the valid basis, row = output.
    b: DMatrix<f64>,
    b0: DMatrix<f64>,
    b1: DMatrix<f64>,
}

impl PlaquetteOracle {
    /// Assembles `B_p^0`, `B_p^1` and `B_p = (B_p^0 + phi B_p^1) / (1 + phi^2)`
    /// for the single closed face of `lattice`. Entry `(y, x)` of `B_p^s` is
    /// the product over the face corners of `F^{l x_L x_R}_{s y_R y_L}` with
    /// `l` the leg and `L`, `R` the boundary edges on either side.
    pub fn for_lattice(lattice: &TrivalentLattice, tensors: &FibonacciTensorSet) -> Result<Self> {
        let faces = lattice.plaquette_corners();
        let [corners] = faces.as_slice() else {
            return Err(crate::lattice::LatticeError::NotSinglePlaquette(faces.len()).into());
        };
        let q = |e: usize| lattice.qubit_of(e).expect("edge has a qubit");
        let corners: Vec<Corner> = corners
            .iter()
            .map(|c| Corner { vertex: c.vertex, left: q(c.left), right: q(c.right), leg: q(c.leg) })
            .collect();
        let mut ring: Vec<usize> = corners.iter().flat_map(|c| [c.left, c.right]).collect();
        ring.sort_unstable();
        ring.dedup();
        let num_qubits = lattice.num_edges();
        let valid = lattice.enumerate_valid_states()?;
        let mut position = vec![None; 1 << num_qubits];
        for (i, &x) in valid.iter().enumerate() {
            position[x] = Some(i);
        }
        let ring_mask: usize = ring.iter().map(|&e| 1 << e).sum();
        let scatter = |bits: usize| ring.iter().enumerate().map(|(j, &e)| ((bits >> j) & 1) << e).sum::<usize>();
        let phi = tensors.phi();
        let columns = exec::map_slice(&valid, |&x| {
            let mut col = Vec::new();
            for primed in 0..1usize << ring.len() {
                let y = (x & !ring_mask) | scatter(primed);
                let Some(row) = position[y] else { continue };
                let bit = |s: usize, e: usize| ((s >> e) & 1) as u8;
                let amp = |s: u8| {
                    corners
                        .iter()
                        .map(|c| {
                            tensors.f_tensor(
                                bit(x, c.leg),
                                bit(x, c.left),
                                s,
                                bit(y, c.right),
                                bit(x, c.right),
                                bit(y, c.left),
                            )
                        })
                        .product::<f64>()
                };
                let (a0, a1) = (amp(0), amp(1));
                if a0 != 0.0 || a1 != 0.0 {
                    col.push((row, a0, a1));
                }
            }
            col
        });
        let d = valid.len();
        let (mut b0, mut b1) = (DMatrix::zeros(d, d), DMatrix::zeros(d, d));
        for (j, col) in columns.into_iter().enumerate() {
            for (i, a0, a1) in col {
                b0[(i, j)] = a0;
                b1[(i, j)] = a1;
            }
        }
        let b = (&b0 + &b1 * phi) / (1.0 + phi * phi);
        Ok(Self { num_qubits, valid, position, b, b0, b1 })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Vertex-valid basis indices, ascending.
    pub fn valid(&self) -> &[usize] {
        &self.valid
    }

    pub fn restricted(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn restricted_parts(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.b0, &self.b1)
    }

    /// Entry `(y, x)` on full basis indices; zero off the valid subspace.
    pub fn get(&self, y: usize, x: usize) -> f64 {
        match (self.position[y], self.position[x]) {
            (Some(i), Some(j)) => self.b[(i, j)],
            _ => 0.0,
        }
    }

    /// Column `x` as a dense vector over the full basis.
    pub fn column(&self, x: usize) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.num_qubits];
        if let Some(j) = self.position[x] {
            for (i, &y) in self.valid.iter().enumerate() {
                out[y] = self.b[(i, j)];
            }
        }
        out
    }

    /// The full `2^m x 2^m` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = 1 << self.num_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (j, &x) in self.valid.iter().enumerate() {
            for (i, &y) in self.valid.iter().enumerate() {
                m[(y, x)] = self.b[(i, j)];
            }
        }
        m
    }

    /// Eigenvalues of the restricted operator, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.b.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `(dim B_p = 1, dim B_p = 0)` on the valid subspace by spectral
    /// classification.
    pub fn split(&self) -> (usize, usize) {
        let ones = self.spectrum().iter().filter(|&&e| e > SPECTRAL_THRESHOLD).count();
        (ones, self.valid.len() - ones)
    }
}

/// `B_p` for the `n`-sided plaquette (`1 <= n <= 6`). `n = 1` is the tadpole
/// with the tail on qubit 0 and the head on qubit 1.
pub fn bp_oracle(n: usize, tensors: &FibonacciTensorSet) -> Result<PlaquetteOracle> {
    let lattice = if n == 1 {
        TrivalentLattice::from_vertices(&[[0, 1, 1]])?
    } else {
        check_sides(n)?;
        TrivalentLattice::build_plaquette(n)?
    };
    PlaquetteOracle::for_lattice(&lattice, tensors)
}

// ---------------------------------------------------------------------------
// verification helpers

fn dev_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    max_deviation(a, b, Complex64::new(1.0, 0.0))
}

fn real_vec(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

fn matrix_dev(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn real_dev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().map(|z| z.abs()).fold(0.0, f64::max)
}

/// Action of `circuit` on the qubits `free` with every other qubit held at
/// the given values. Returns the block (rows and columns indexed by the
/// bits of `free` in order) and the largest norm leaking out of the fixed
/// setting.
pub fn restricted_block(
    circuit: &Circuit,
    tensors: &FibonacciTensorSet,
    fixed: &[(usize, u8)],
    free: &[usize],
) -> Result<(DMatrix<Complex64>, f64)> {
    let base: usize = fixed.iter().map(|&(q, v)| ((v & 1) as usize) << q).sum();
    let embed = |bits: usize| base | free.iter().enumerate().map(|(j, &q)| ((bits >> j) & 1) << q).sum::<usize>();
    let dim = 1 << free.len();
    let mut block = DMatrix::zeros(dim, dim);
    let mut leak = 0.0f64;
    for j in 0..dim {
        let out = circuit.simulate_basis(tensors, embed(j))?;
        let mut kept = 0.0;
        for i in 0..dim {
            let a = out.amplitudes()[embed(i)];
            block[(i, j)] = a;
            kept += a.norm_sqr();
        }
        leak = leak.max((1.0 - kept).abs());
    }
    Ok((block, leak))
}

fn valid_inputs(lattice: &TrivalentLattice) -> Result<(Vec<usize>, usize)> {
    let valid = lattice.enumerate_valid_states()?;
    let skipped = (1usize << lattice.num_edges()) - valid.len();
    Ok((valid, skipped))
}

// ---------------------------------------------------------------------------
// suites

/// Vertex measurement: on every vertex configuration with the syndrome in
/// `|0>`, the output is the same configuration with syndrome `1 - delta`.
pub fn verify_qv(opts: &VerifyOptions) -> Result<VerificationReport> {
    let c = qv_circuit();
    let tol = opts.tol(UNITARY_TOL);
    let mut cases = Vec::new();
    for v in 0..8usize {
        let out = c.simulate_basis(&opts.tensors, v)?;
        let d = delta((v & 1) as u8, (v >> 1 & 1) as u8, (v >> 2 & 1) as u8) as usize;
        let expect = StateVector::from_index(4, v | (1 - d) << 3)?;
        cases.push(Case::new(bits_of(v, 3), dev_c(out.amplitudes(), expect.amplitudes()), tol));
    }
    Ok(tally("qv", &cases, 0))
}

fn squares_to_identity(c: &Circuit, tensors: &FibonacciTensorSet) -> Result<f64> {
    let u = c.unitary_of_with(tensors)?;
    let id = DMatrix::identity(u.nrows(), u.ncols());
    Ok(matrix_dev(&(&u * &u), &id))
}

/// F, reduced F and S circuits: each squares to the identity and acts as its
/// tensor on the vertex-valid inputs.
pub fn verify_involutions(opts: &VerifyOptions) -> Result<VerificationReport> {
    let t = &opts.tensors;
    let tol = opts.tol(UNITARY_TOL);
    let mut cases = Vec::new();
    let mut skipped = 0;
    let bit = |x: usize, q: usize| ((x >> q) & 1) as u8;

    let f = f_circuit();
    cases.push(Case::new("F^2", squares_to_identity(&f, t)?, tol));
    let u = f.unitary_of_with(t)?;
    for x in 0..32 {
        let [a, b, c, d, e] = [0, 1, 2, 3, 4].map(|q| bit(x, q));
        if delta(a, b, e) * delta(c, d, e) == 0 {
            skipped += 1;
            continue;
        }
        let mut dev = 0.0f64;
        for y in 0..32 {
            let expect = if y & 0b01111 == x & 0b01111 { t.f_tensor(a, b, c, d, e, bit(y, 4)) } else { 0.0 };
            dev = dev.max((u[(y, x)] - Complex64::new(expect, 0.0)).norm());
        }
        cases.push(Case::new(format!("F {}", bits_of(x, 5)), dev, tol));
    }

    let r = reduced_f_circuit();
    cases.push(Case::new("reduced F^2", squares_to_identity(&r, t)?, tol));
    let u = r.unitary_of_with(t)?;
    for x in 0..16 {
        let [a, b, c, e] = [0, 1, 2, 3].map(|q| bit(x, q));
        if delta(a, b, e) * delta(c, a, e) == 0 {
            skipped += 1;
            continue;
        }
        let mut dev = 0.0f64;
        for y in 0..16 {
            let expect = if y & 0b0111 == x & 0b0111 { t.f_tensor(a, b, c, a, e, bit(y, 3)) } else { 0.0 };
            dev = dev.max((u[(y, x)] - Complex64::new(expect, 0.0)).norm());
        }
        cases.push(Case::new(format!("reduced F {}", bits_of(x, 4)), dev, tol));
    }

    let s = s_circuit();
    cases.push(Case::new("S^2", squares_to_identity(&s, t)?, tol));
    let u = s.unitary_of_with(t)?;
    for x in 0..4 {
        let (tail, head) = (bit(x, 0), bit(x, 1));
        if delta(tail, head, head) == 0 {
            skipped += 1;
            continue;
        }
        let mut dev = 0.0f64;
        for y in 0..4 {
            let expect = if bit(y, 0) == tail { t.s_tensor(tail, head, bit(y, 1)) } else { 0.0 };
            dev = dev.max((u[(y, x)] - Complex64::new(expect, 0.0)).norm());
        }
        cases.push(Case::new(format!("S {}", bits_of(x, 2)), dev, tol));
    }
    Ok(tally("involutions", &cases, skipped))
}

/// Borrowed-ancilla lowering of four- and five-qubit Toffolis and of the
/// full F circuit, checked on every basis input including all ancilla
/// states, plus the exact Toffoli counts `4n - 12`.
pub fn verify_lowering(opts: &VerifyOptions) -> Result<VerificationReport> {
    let t = &opts.tensors;
    let mut cases = Vec::new();
    for controls in [3usize, 4] {
        let width = 2 * controls - 1;
        let mut c = Circuit::new(width)?;
        c.ntoffoli(&(0..controls).collect::<Vec<_>>(), controls)?;
        let ancillas: Vec<usize> = (controls + 1..width).collect();
        let lowered = c.lower_ntoffoli(&BTreeMap::from([(0, ancillas)]))?;
        let n = controls + 1;
        let count = lowered.count_gates(crate::CostModel::PrimitiveNToffoli);
        let expect = 4 * n - 12;
        let count_dev = (count.toffoli3 as f64 - expect as f64).abs()
            + (count.toffoli4 + count.toffoli5) as f64
            + lowered.gates().iter().filter(|g| g.controls().len() != 2).count() as f64;
        cases.push(Case::new(format!("{n}-qubit toffoli count"), count_dev, 0.0));
        let devs = exec::map_range(1 << width, |x| -> Result<f64> {
            let a = c.simulate_basis(t, x)?;
            let b = lowered.simulate_basis(t, x)?;
            Ok(dev_c(a.amplitudes(), b.amplitudes()))
        });
        for (x, dev) in devs.into_iter().enumerate() {
            cases.push(Case::new(format!("{n}-qubit toffoli {}", bits_of(x, width)), dev?, opts.tol(EXACT_TOL)));
        }
    }
    let f = f_circuit().widened(7)?;
    let lowered = f.lower_ntoffoli(&BTreeMap::from([(5, vec![5, 6])]))?;
    let devs = exec::map_range(1 << 7, |x| -> Result<f64> {
        let a = f.simulate_basis(t, x)?;
        let b = lowered.simulate_basis(t, x)?;
        Ok(dev_c(a.amplitudes(), b.amplitudes()))
    });
    for (x, dev) in devs.into_iter().enumerate() {
        cases.push(Case::new(format!("lowered F {}", bits_of(x, 7)), dev?, opts.tol(UNITARY_TOL)));
    }
    Ok(tally("lowering", &cases, 0))
}

/// Pentagon identity: on every input valid at the three initial vertices the
/// five chained F circuits act as SWAP of qubits 5 and 6, with one global
/// phase for all inputs.
pub fn verify_pentagon(opts: &VerifyOptions) -> Result<VerificationReport> {
    let c = pentagon_circuit()?;
    let mut swap = Circuit::new(7)?;
    push_all(&mut swap, swap_gates(PENTAGON_SWAP.0, PENTAGON_SWAP.1))?;
    let (valid, skipped) = valid_inputs(&pentagon_lattice())?;
    let pairs = exec::map_slice(&valid, |&x| -> Result<(StateVector, StateVector)> {
        Ok((c.simulate_basis(&opts.tensors, x)?, swap.simulate_basis(&opts.tensors, x)?))
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    let lambda = pairs
        .first()
        .map(|(got, want)| global_phase(got.amplitudes(), want.amplitudes()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let tol = opts.tol(UNITARY_TOL);
    let cases: Vec<Case> = valid
        .iter()
        .zip(&pairs)
        .map(|(&x, (got, want))| {
            Case::new(bits_of(x, 7), max_deviation(got.amplitudes(), want.amplitudes(), lambda), tol)
        })
        .collect();
    Ok(tally("pentagon", &cases, skipped))
}

/// Two-qubit pentagon identity: the alternating controlled-F circuit is
/// SWAP on all four inputs, and it is the block of the full pentagon circuit
/// with the other five qubits held at 1.
pub fn verify_simplified_pentagon(opts: &VerifyOptions) -> Result<VerificationReport> {
    let t = &opts.tensors;
    let tol = opts.tol(EXACT_TOL);
    let simple = simplified_pentagon_circuit();
    let u = simple.unitary_of_with(t)?;
    let mut swap = Circuit::new(2)?;
    push_all(&mut swap, swap_gates(0, 1))?;
    let s = swap.unitary_of()?;
    let mut cases = Vec::new();
    for x in 0..4 {
        let dev = (0..4).map(|y| (u[(y, x)] - s[(y, x)]).norm()).fold(0.0, f64::max);
        cases.push(Case::new(bits_of(x, 2), dev, tol));
    }
    let fixed: Vec<(usize, u8)> = [0, 1, 2, 3, 6].iter().map(|&q| (q, 1)).collect();
    let (block, leak) = restricted_block(&pentagon_circuit()?, t, &fixed, &[PENTAGON_SWAP.0, PENTAGON_SWAP.1])?;
    cases.push(Case::new("block of full circuit", matrix_dev(&block, &u).max(leak), tol));
    Ok(tally("simplified-pentagon", &cases, 0))
}

/// Plaquette measurement against the oracle. For each valid input `x` the
/// syndrome-0 branch must equal `B_p x` and the syndrome-1 branch
/// `(1 - B_p) x`; each branch, renormalized and run again with a fresh
/// syndrome, must reproduce its outcome with certainty and stay put.
pub fn verify_bp(n: usize, opts: &VerifyOptions) -> Result<VerificationReport> {
    let circuit = bp_measure_circuit(n)?;
    let oracle = bp_oracle(n, &opts.tensors)?;
    let dim = 1usize << (2 * n);
    let skipped = dim - oracle.valid().len();
    let tol = opts.tol(ORACLE_TOL);
    let qnd_tol = opts.tol(UNITARY_TOL);
    let t = &opts.tensors;
    let outcomes = exec::map_slice(oracle.valid(), |&x| -> Result<Case> {
        let out = circuit.simulate_basis(t, x)?;
        let (k0, k1) = out.amplitudes().split_at(dim);
        let col = oracle.column(x);
        let mut comp = col.iter().map(|v| -v).collect::<Vec<_>>();
        comp[x] += 1.0;
        let matrix_dev = dev_c(k0, &real_vec(&col)).max(dev_c(k1, &real_vec(&comp)));
        let mut qnd_dev = 0.0f64;
        for (s, branch) in [(0usize, k0), (1, k1)] {
            let p: f64 = branch.iter().map(|a| a.norm_sqr()).sum();
            if p < BRANCH_THRESHOLD {
                continue;
            }
            let post: Vec<Complex64> = branch.iter().map(|a| a / p.sqrt()).collect();
            let again =
                circuit.simulate_with(t, &StateVector::from_amplitudes_unnormalized(post.clone())?.extend(1)?)?;
            let (r0, r1) = again.amplitudes().split_at(dim);
            let (same, other) = if s == 0 { (r0, r1) } else { (r1, r0) };
            let p_other: f64 = other.iter().map(|a| a.norm_sqr()).sum();
            let lambda = global_phase(same, &post);
            qnd_dev = qnd_dev.max(p_other).max(max_deviation(same, &post, lambda));
        }
        Ok(Case {
            label: bits_of(x, 2 * n),
            deviation: matrix_dev.max(qnd_dev),
            ok: matrix_dev <= tol && qnd_dev <= qnd_tol,
        })
    });
    let cases = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(tally(&format!("bp-{n}"), &cases, skipped))
}

/// Randomized smoke test: random superpositions of valid plaquette states.
/// The syndrome-0 probability must be `<psi|B_p|psi>` and the branch must be
/// `B_p psi` up to normalization.
pub fn verify_bp_random(n: usize, opts: &VerifyOptions) -> Result<VerificationReport> {
    let circuit = bp_measure_circuit(n)?;
    let oracle = bp_oracle(n, &opts.tensors)?;
    let dim = 1usize << (2 * n);
    let tol = opts.tol(ORACLE_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cases = Vec::new();
    for case in 0..opts.random_cases {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for &x in oracle.valid() {
            amps[x] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let mut projected = vec![Complex64::new(0.0, 0.0); dim];
        for &x in oracle.valid() {
            for &y in oracle.valid() {
                projected[y] += amps[x] * oracle.get(y, x);
            }
        }
        let state = StateVector::from_amplitudes(amps.clone())?.extend(1)?;
        let out = circuit.simulate_with(&opts.tensors, &state)?;
        let (k0, _) = out.amplitudes().split_at(dim);
        let p0: f64 = k0.iter().map(|a| a.norm_sqr()).sum();
        let expect_p0: f64 = amps.iter().zip(&projected).map(|(a, b)| (a.conj() * b).re).sum();
        let dev = (p0 - expect_p0).abs().max(dev_c(k0, &projected));
        cases.push(Case::new(format!("random state {case}"), dev, tol));
    }
    let mut report = tally(&format!("bp-{n}-random"), &cases, 0);
    report.seed = Some(opts.seed);
    Ok(report)
}

/// The plaquette operator commutes with F-moves: along the reduction of the
/// `n`-gon, conjugating the current plaquette oracle by the move's circuit
/// gives the oracle of the next, smaller plaquette.
pub fn verify_fmove_commutes(n: usize, opts: &VerifyOptions) -> Result<VerificationReport> {
    check_sides(n)?;
    let t = &opts.tensors;
    let tol = opts.tol(ORACLE_TOL);
    let mut lattice = TrivalentLattice::build_plaquette(n)?;
    let mut cases = Vec::new();
    for record in reduction_plan(n)? {
        let before = PlaquetteOracle::for_lattice(&lattice, t)?;
        let after = PlaquetteOracle::for_lattice(&record.lattice, t)?;
        let mut move_circuit = Circuit::new(2 * n)?;
        push_all(&mut move_circuit, fmove_gates(&record))?;
        // W restricted to valid inputs, rows on the valid outputs
        let columns = exec::map_slice(before.valid(), |&x| move_circuit.simulate_basis(t, x));
        let (dv, da) = (before.valid().len(), after.valid().len());
        let mut w = DMatrix::<f64>::zeros(da, dv);
        let mut leak = 0.0f64;
        for (j, col) in columns.into_iter().enumerate() {
            let col = col?;
            for (y, a) in col.amplitudes().iter().enumerate() {
                match after.position[y] {
                    Some(i) => w[(i, j)] = a.re,
                    None => leak = leak.max(a.norm()),
                }
            }
        }
        let conj = &w * before.restricted() * w.transpose();
        let dev = real_dev(&conj, after.restricted()).max(leak);
        let q = record.qubits;
        cases.push(Case::new(
            format!("move on qubit {} ({:?} a={} b={} c={} d={})", q.e, record.kind, q.a, q.b, q.c, q.d),
            dev,
            tol,
        ));
        lattice = record.lattice;
    }
    Ok(tally(&format!("fmove-commutes-{n}"), &cases, 0))
}

/// Tadpole pull-through: the circuit equals swap-then-controlled-U on the
/// valid inputs; its controlled block equals U; with qubits 1 and 2 fixed to
/// 1 the two-qubit identities hold on all four inputs.
pub fn verify_tadpole_pull(opts: &VerifyOptions) -> Result<VerificationReport> {
    let t = &opts.tensors;
    let tol = opts.tol(UNITARY_TOL);
    let exact = opts.tol(EXACT_TOL);
    let lhs = tadpole_pull_circuit()?;
    let rhs = tadpole_pull_rhs();
    let (valid, skipped) = valid_inputs(&tadpole_pull_lattice())?;
    let mut cases = Vec::new();
    for &x in &valid {
        let got = lhs.simulate_basis(t, x)?;
        let want = rhs.simulate_basis(t, x)?;
        cases.push(Case::new(bits_of(x, 4), got.phase_deviation(&want), tol));
    }

    // qubits 1, 2 set and qubit 4 set on input: qubit 3 enters, U acts on 4
    let lhs_u = lhs.unitary_of_with(t)?;
    let u = t.u_matrix();
    let mut block_dev = 0.0f64;
    for (t_out, row) in u.iter().enumerate() {
        for (t_in, &entry) in row.iter().enumerate() {
            let x = 0b1011 | t_in << 2;
            let y = 0b0111 | t_out << 3;
            block_dev = block_dev.max((lhs_u[(y, x)] - Complex64::new(entry, 0.0)).norm());
        }
    }
    cases.push(Case::new("controlled-U block", block_dev, exact));

    let fixed = [(0usize, 1u8), (1, 1)];
    for (moved, circuit) in [(false, lhs), (true, tadpole_pull_without_outer_nots()?)] {
        let (block, leak) = restricted_block(&circuit, t, &fixed, &[2, 3])?;
        let reference = simplified_pull_rhs(moved).unitary_of_with(t)?;
        let tag = if moved { "moved NOTs" } else { "two-qubit" };
        for x in 0..4 {
            let dev = (0..4).map(|y| (block[(y, x)] - reference[(y, x)]).norm()).fold(leak, f64::max);
            cases.push(Case::new(format!("{tag} {}", bits_of(x, 2)), dev, exact));
        }
        if moved {
            // |1>|0> -> |0>|1>
            let dev = (block[(0b10, 0b01)] - Complex64::new(1.0, 0.0)).norm();
            cases.push(Case::new("moved NOTs 10 -> 01", dev, exact));
        }
    }
    Ok(tally("tadpole-pull", &cases, skipped))
}

/// Projector and commutation properties of the `n`-gon oracle: `B_p` is a
/// symmetric idempotent with eigenvalues in {0, 1}, commutes with every
/// vertex projector `Q_v` on the full space, and `B_p^0`, `B_p^1` commute.
pub fn verify_commutation(n: usize, opts: &VerifyOptions) -> Result<VerificationReport> {
    check_sides(n)?;
    let t = &opts.tensors;
    let tol = opts.tol(UNITARY_TOL);
    let lattice = TrivalentLattice::build_plaquette(n)?;
    let oracle = PlaquetteOracle::for_lattice(&lattice, t)?;
    let b = oracle.restricted();
    let (b0, b1) = oracle.restricted_parts();
    let mut cases = vec![
        Case::new("B^2 = B", real_dev(&(b * b), b), tol),
        Case::new("B symmetric", real_dev(&b.transpose(), b), tol),
        Case::new("[B0, B1]", real_dev(&(b0 * b1), &(b1 * b0)), tol),
    ];
    let spectrum_dev = oracle.spectrum().iter().map(|&e| e.abs().min((e - 1.0).abs())).fold(0.0, f64::max);
    cases.push(Case::new("spectrum in {0, 1}", spectrum_dev, tol));

    // unrestricted entries: weight between states that differ at a vertex
    // breaks [B, Q_v] = 0
    let m = 2 * n;
    let phi = t.phi();
    let inner_mask = (1usize << n) - 1;
    let vertices: Vec<[usize; 3]> = lattice.vertices().values().copied().collect();
    let vertex_ok =
        |v: &[usize; 3], s: usize| delta((s >> v[0] & 1) as u8, (s >> v[1] & 1) as u8, (s >> v[2] & 1) as u8);
    let corners = &lattice.plaquette_corners()[0];
    let per_x = exec::map_range(1 << m, |x| {
        let mut worst = vec![0.0f64; vertices.len()];
        for primed in 0..1usize << n {
            let y = (x & !inner_mask) | primed;
            let bit = |s: usize, e: usize| ((s >> e) & 1) as u8;
            let amp = |s: u8| {
                corners
                    .iter()
                    .map(|c| {
                        t.f_tensor(bit(x, c.leg), bit(x, c.left), s, bit(y, c.right), bit(x, c.right), bit(y, c.left))
                    })
                    .product::<f64>()
            };
            let entry = ((amp(0) + phi * amp(1)) / (1.0 + phi * phi)).abs();
            for (k, v) in vertices.iter().enumerate() {
                if vertex_ok(v, x) != vertex_ok(v, y) {
                    worst[k] = worst[k].max(entry);
                }
            }
        }
        worst
    });
    for (k, v) in vertices.iter().enumerate() {
        let dev = per_x.iter().map(|w| w[k]).fold(0.0, f64::max);
        cases.push(Case::new(format!("[B, Q_v] at vertex ({} {} {})", v[0], v[1], v[2]), dev, tol));
    }
    Ok(tally(&format!("commutation-{n}"), &cases, 0))
}

/// Every suite, in a fixed order.
pub fn verify_all(opts: &VerifyOptions) -> Result<Vec<VerificationReport>> {
    let mut reports = vec![verify_qv(opts)?, verify_involutions(opts)?, verify_lowering(opts)?];
    reports.push(verify_pentagon(opts)?);
    reports.push(verify_simplified_pentagon(opts)?);
    for n in MIN_SIDES..=MAX_SIDES {
        reports.push(verify_bp(n, opts)?);
    }
    reports.push(verify_bp_random(MAX_SIDES, opts)?);
    for n in MIN_SIDES..=MAX_SIDES {
        reports.push(verify_fmove_commutes(n, opts)?);
    }
    reports.push(verify_tadpole_pull(opts)?);
    for n in [2, 3, 6] {
        reports.push(verify_commutation(n, opts)?);
    }
    Ok(reports)
}
