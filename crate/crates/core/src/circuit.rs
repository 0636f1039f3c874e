//! Gate-list circuit IR.
//!
//! A [`Circuit`] is an ordered list of [`Gate`]s over `num_qubits` qubits.
//! Controlled 2x2 blocks stay abstract (a [`NamedMatrix`] plus controls) until
//! they are lowered or counted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::exec;
use crate::fib_data::{mat2_complex, reflection_angle, ry_matrix, FibonacciTensorSet, NamedMatrix};
use crate::statevec::{StateError, StateVector, MAX_QUBITS};

/// Widest circuit whose full unitary may be extracted.
pub const MAX_UNITARY_QUBITS: usize = 13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{0} qubits requested, at most {MAX_QUBITS} are supported")]
    TooManyQubits(usize),
    #[error("gate {gate}: qubit {qubit} out of range for {num_qubits} qubits")]
    OperandOutOfRange { gate: usize, qubit: usize, num_qubits: usize },
    #[error("gate {gate}: qubit {qubit} used more than once")]
    DuplicateOperand { gate: usize, qubit: usize },
    #[error("gate {gate}: an n-qubit Toffoli needs at least 2 controls, got {controls}")]
    TooFewControls { gate: usize, controls: usize },
    #[error("gate {gate}: rotation angle is not finite")]
    NonFiniteAngle { gate: usize },
    #[error("circuit has {expected} qubits but the state has {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("unitary extraction is limited to {MAX_UNITARY_QUBITS} qubits, circuit has {0}")]
    SizeLimit(usize),
    #[error("gate {gate}: needs {need} borrowed ancillas, {got} assigned")]
    InsufficientAncillas { gate: usize, need: usize, got: usize },
    #[error("gate {gate}: ancilla {qubit} overlaps the gate operands or another ancilla")]
    OverlappingAncillas { gate: usize, qubit: usize },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    X {
        target: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// Multi-controlled X with at least two controls.
    NToffoli {
        controls: Vec<usize>,
        target: usize,
    },
    /// `exp(i angle sigma_y / 2)`.
    Ry {
        target: usize,
        angle: f64,
    },
    /// Named 2x2 block on `target`, applied when every control is 1.
    Controlled {
        matrix: NamedMatrix,
        controls: Vec<usize>,
        target: usize,
    },
}

impl Gate {
    pub fn toffoli(c1: usize, c2: usize, target: usize) -> Self {
        Gate::NToffoli { controls: vec![c1, c2], target }
    }

    pub fn target(&self) -> usize {
        match self {
            Gate::X { target }
            | Gate::Cnot { target, .. }
            | Gate::NToffoli { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Controlled { target, .. } => *target,
        }
    }

    pub fn controls(&self) -> &[usize] {
        match self {
            Gate::X { .. } | Gate::Ry { .. } => &[],
            Gate::Cnot { control, .. } => std::slice::from_ref(control),
            Gate::NToffoli { controls, .. } | Gate::Controlled { controls, .. } => controls,
        }
    }

    /// Controls followed by the target.
    pub fn operands(&self) -> Vec<usize> {
        let mut ops = self.controls().to_vec();
        ops.push(self.target());
        ops
    }

    /// The inverse gate. Every named block is an involution, so only
    /// rotations change.
    pub fn inverse(&self) -> Gate {
        match self {
            Gate::Ry { target, angle } => Gate::Ry { target: *target, angle: -angle },
            other => other.clone(),
        }
    }

    fn relabel(&self, map: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::X { target } => Gate::X { target: map(*target) },
            Gate::Cnot { control, target } => Gate::Cnot { control: map(*control), target: map(*target) },
            Gate::NToffoli { controls, target } => {
                Gate::NToffoli { controls: controls.iter().map(|&c| map(c)).collect(), target: map(*target) }
            }
            Gate::Ry { target, angle } => Gate::Ry { target: map(*target), angle: *angle },
            Gate::Controlled { matrix, controls, target } => Gate::Controlled {
                matrix: *matrix,
                controls: controls.iter().map(|&c| map(c)).collect(),
                target: map(*target),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostModel {
    /// Every Toffoli with more than two controls is expanded into `4n - 12`
    /// three-qubit Toffolis.
    Decomposed,
    /// Four- and five-qubit Toffolis count as single gates.
    PrimitiveNToffoli,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::Decomposed => "decomposed",
            CostModel::PrimitiveNToffoli => "primitive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateCounts {
    pub toffoli3: usize,
    pub toffoli4: usize,
    pub toffoli5: usize,
    pub cnot: usize,
    pub single_qubit_rotation: usize,
    pub cost_model: CostModel,
}

impl GateCounts {
    fn empty(cost_model: CostModel) -> Self {
        Self { toffoli3: 0, toffoli4: 0, toffoli5: 0, cnot: 0, single_qubit_rotation: 0, cost_model }
    }

    /// Tallies an `arity`-qubit Toffoli (`arity - 1` controls).
    fn add_toffoli(&mut self, arity: usize) {
        match (self.cost_model, arity) {
            (_, 3) => self.toffoli3 += 1,
            (CostModel::PrimitiveNToffoli, 4) => self.toffoli4 += 1,
            (CostModel::PrimitiveNToffoli, 5) => self.toffoli5 += 1,
            (_, n) => self.toffoli3 += barenco_toffoli_count(n),
        }
    }
}

impl fmt::Display for GateCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cost_model == CostModel::PrimitiveNToffoli {
            write!(f, "toffoli5={} toffoli4={} ", self.toffoli5, self.toffoli4)?;
        }
        write!(f, "toffoli={} cnot={} rotations={}", self.toffoli3, self.cnot, self.single_qubit_rotation)
    }
}

/// Three-qubit Toffolis in the borrowed-ancilla network for an `n`-qubit
/// Toffoli: `4n - 12` for `n >= 4`.
pub fn barenco_toffoli_count(n: usize) -> usize {
    match n {
        0..=3 => 1,
        n => 4 * n - 12,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    labels: BTreeMap<usize, String>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self, CircuitError> {
        if num_qubits > MAX_QUBITS {
            return Err(CircuitError::TooManyQubits(num_qubits));
        }
        Ok(Self { num_qubits, gates: Vec::new(), labels: BTreeMap::new() })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn labels(&self) -> &BTreeMap<usize, String> {
        &self.labels
    }

    /// Attaches a role name to a qubit. Names must not contain whitespace.
    pub fn set_label(&mut self, qubit: usize, role: &str) -> Result<&mut Self, CircuitError> {
        if qubit >= self.num_qubits {
            return Err(CircuitError::OperandOutOfRange { gate: self.gates.len(), qubit, num_qubits: self.num_qubits });
        }
        self.labels.insert(qubit, role.to_string());
        Ok(self)
    }

    fn validate(&self, gate: &Gate) -> Result<(), CircuitError> {
        let index = self.gates.len();
        let mut seen = BTreeSet::new();
        for q in gate.operands() {
            if q >= self.num_qubits {
                return Err(CircuitError::OperandOutOfRange { gate: index, qubit: q, num_qubits: self.num_qubits });
            }
            if !seen.insert(q) {
                return Err(CircuitError::DuplicateOperand { gate: index, qubit: q });
            }
        }
        match gate {
            Gate::NToffoli { controls, .. } if controls.len() < 2 => {
                Err(CircuitError::TooFewControls { gate: index, controls: controls.len() })
            }
            Gate::Ry { angle, .. } if !angle.is_finite() => Err(CircuitError::NonFiniteAngle { gate: index }),
            _ => Ok(()),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self, CircuitError> {
        self.validate(&gate)?;
        self.gates.push(gate);
        Ok(self)
    }

    pub fn x(&mut self, target: usize) -> Result<&mut Self, CircuitError> {
        self.push(Gate::X { target })
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self, CircuitError> {
        self.push(Gate::Cnot { control, target })
    }

    pub fn toffoli(&mut self, c1: usize, c2: usize, target: usize) -> Result<&mut Self, CircuitError> {
        self.push(Gate::toffoli(c1, c2, target))
    }

    pub fn ntoffoli(&mut self, controls: &[usize], target: usize) -> Result<&mut Self, CircuitError> {
        self.push(Gate::NToffoli { controls: controls.to_vec(), target })
    }

    pub fn ry(&mut self, target: usize, angle: f64) -> Result<&mut Self, CircuitError> {
        self.push(Gate::Ry { target, angle })
    }

    pub fn cu(&mut self, matrix: NamedMatrix, controls: &[usize], target: usize) -> Result<&mut Self, CircuitError> {
        self.push(Gate::Controlled { matrix, controls: controls.to_vec(), target })
    }

    /// Appends every gate of `other`, which must not be wider than `self`.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self, CircuitError> {
        for gate in &other.gates {
            self.push(gate.clone())?;
        }
        Ok(self)
    }

    /// The same gates on a register of `num_qubits` qubits.
    pub fn widened(&self, num_qubits: usize) -> Result<Circuit, CircuitError> {
        let mut out = Circuit::new(num_qubits)?;
        for gate in &self.gates {
            out.push(gate.clone())?;
        }
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Reverse gate order with every gate inverted.
    pub fn invert(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Renames qubits through `map`; the result has `num_qubits` qubits.
    pub fn remapped(&self, num_qubits: usize, map: &[usize]) -> Result<Circuit, CircuitError> {
        let mut out = Circuit::new(num_qubits)?;
        for gate in &self.gates {
            out.push(gate.relabel(|q| map[q]))?;
        }
        for (q, role) in &self.labels {
            out.set_label(map[*q], role)?;
        }
        Ok(out)
    }

    pub fn simulate(&self, state: &StateVector) -> Result<StateVector, CircuitError> {
        self.simulate_with(&FibonacciTensorSet::new(), state)
    }

    /// Runs the circuit with the named blocks resolved against `tensors`.
    pub fn simulate_with(
        &self,
        tensors: &FibonacciTensorSet,
        state: &StateVector,
    ) -> Result<StateVector, CircuitError> {
        if state.num_qubits() != self.num_qubits {
            return Err(CircuitError::WidthMismatch { expected: self.num_qubits, got: state.num_qubits() });
        }
        let mut out = state.clone();
        for gate in &self.gates {
            match gate {
                Gate::X { target } => out.apply_controlled_x(&[], *target)?,
                Gate::Cnot { control, target } => out.apply_controlled_x(&[*control], *target)?,
                Gate::NToffoli { controls, target } => out.apply_controlled_x(controls, *target)?,
                Gate::Ry { target, angle } => {
                    out.apply_controlled_matrix(&[], *target, &mat2_complex(&ry_matrix(*angle)))?
                }
                Gate::Controlled { matrix, controls, target } => {
                    out.apply_controlled_matrix(controls, *target, &mat2_complex(&tensors.matrix(*matrix)))?
                }
            }
        }
        Ok(out)
    }

    /// Output state for the basis input with the given index.
    pub fn simulate_basis(&self, tensors: &FibonacciTensorSet, index: usize) -> Result<StateVector, CircuitError> {
        self.simulate_with(tensors, &StateVector::from_index(self.num_qubits, index)?)
    }

    pub fn unitary_of(&self) -> Result<DMatrix<Complex64>, CircuitError> {
        self.unitary_of_with(&FibonacciTensorSet::new())
    }

    /// Full unitary, column `j` being the image of basis state `j`.
    pub fn unitary_of_with(&self, tensors: &FibonacciTensorSet) -> Result<DMatrix<Complex64>, CircuitError> {
        if self.num_qubits > MAX_UNITARY_QUBITS {
            return Err(CircuitError::SizeLimit(self.num_qubits));
        }
        let dim = 1usize << self.num_qubits;
        let columns = exec::map_range(dim, |j| self.simulate_basis(tensors, j));
        let mut u = DMatrix::zeros(dim, dim);
        for (j, col) in columns.into_iter().enumerate() {
            for (i, a) in col?.amplitudes().iter().enumerate() {
                u[(i, j)] = *a;
            }
        }
        Ok(u)
    }

    /// Replaces every Toffoli with three or more controls by the
    /// borrowed-ancilla network of `4n - 12` three-qubit Toffolis, and every
    /// controlled block by its rotation-conjugated Toffoli form. `ancillas`
    /// maps gate indices to borrowed qubits; only the first `n - 3` entries
    /// are used.
    pub fn lower_ntoffoli(&self, ancillas: &BTreeMap<usize, Vec<usize>>) -> Result<Circuit, CircuitError> {
        let tensors = FibonacciTensorSet::new();
        let mut out = Circuit::new(self.num_qubits)?;
        out.labels = self.labels.clone();
        for (index, gate) in self.gates.iter().enumerate() {
            let borrowed = ancillas.get(&index).map(Vec::as_slice).unwrap_or(&[]);
            match gate {
                Gate::NToffoli { controls, target } => {
                    emit_lowered_x(&mut out, index, controls, *target, borrowed)?;
                }
                Gate::Controlled { matrix, controls, target } => {
                    let angle = reflection_angle(&tensors.matrix(*matrix));
                    out.ry(*target, -angle)?;
                    emit_lowered_x(&mut out, index, controls, *target, borrowed)?;
                    out.ry(*target, angle)?;
                }
                other => {
                    out.push(other.clone())?;
                }
            }
        }
        Ok(out)
    }

    pub fn count_gates(&self, model: CostModel) -> GateCounts {
        let mut counts = GateCounts::empty(model);
        for gate in &self.gates {
            match gate {
                Gate::X { .. } => {}
                Gate::Cnot { .. } => counts.cnot += 1,
                Gate::NToffoli { controls, .. } => counts.add_toffoli(controls.len() + 1),
                Gate::Ry { .. } => counts.single_qubit_rotation += 1,
                Gate::Controlled { controls, .. } => {
                    counts.single_qubit_rotation += 2;
                    match controls.len() {
                        0 => {}
                        1 => counts.cnot += 1,
                        c => counts.add_toffoli(c + 1),
                    }
                }
            }
        }
        counts
    }

    /// Text form: a `qubits <n>` header, `# label <q> <role>` lines, then one
    /// gate per line.
    pub fn export_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.num_qubits);
        for (q, role) in &self.labels {
            out.push_str(&format!("# label {q} {role}\n"));
        }
        for gate in &self.gates {
            let join = |qs: &[usize]| qs.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            let line = match gate {
                Gate::X { target } => format!("x {target}"),
                Gate::Cnot { control, target } => format!("cnot {control} {target}"),
                Gate::NToffoli { controls, target } if controls.len() == 2 => {
                    format!("toffoli {} {target}", join(controls))
                }
                Gate::NToffoli { controls, target } => format!("ntoffoli {} {target}", join(controls)),
                Gate::Ry { target, angle } => format!("ry {target} {}", format_angle(*angle)),
                Gate::Controlled { matrix, controls, target } if controls.is_empty() => {
                    format!("cu {matrix} {target}")
                }
                Gate::Controlled { matrix, controls, target } => {
                    format!("cu {matrix} {} {target}", join(controls))
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn import_text(text: &str) -> Result<Circuit, CircuitError> {
        let mut circuit: Option<Circuit> = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let tokens = tokenize(raw);
            let err = |column: usize, message: String| CircuitError::Parse { line: line_no, column, message };
            if let Some(comment) = raw.trim_start().strip_prefix('#') {
                let fields: Vec<&str> = comment.split_whitespace().collect();
                if fields.first() == Some(&"label") {
                    let c = circuit.as_mut().ok_or_else(|| err(1, "label before `qubits` header".into()))?;
                    if fields.len() != 3 {
                        return Err(err(1, "expected `# label <qubit> <role>`".into()));
                    }
                    let q = fields[1].parse().map_err(|_| err(1, format!("bad qubit `{}`", fields[1])))?;
                    c.set_label(q, fields[2]).map_err(|e| err(1, e.to_string()))?;
                }
                continue;
            }
            let Some(&(col, op)) = tokens.first() else { continue };
            let args = &tokens[1..];
            let qubit = |(column, tok): (usize, &str)| -> Result<usize, CircuitError> {
                tok.parse().map_err(|_| err(column, format!("expected a qubit index, got `{tok}`")))
            };
            let arity = |want: &str, ok: bool| -> Result<(), CircuitError> {
                if ok {
                    Ok(())
                } else {
                    Err(err(col, format!("`{op}` expects {want}, got {} argument(s)", args.len())))
                }
            };
            if op == "qubits" {
                if circuit.is_some() {
                    return Err(err(col, "duplicate `qubits` header".into()));
                }
                arity("1 argument", args.len() == 1)?;
                let n = qubit(args[0])?;
                circuit = Some(Circuit::new(n).map_err(|e| err(args[0].0, e.to_string()))?);
                continue;
            }
            let c = circuit.as_mut().ok_or_else(|| err(col, "gate before `qubits` header".into()))?;
            let gate = match op {
                "x" => {
                    arity("1 argument", args.len() == 1)?;
                    Gate::X { target: qubit(args[0])? }
                }
                "cnot" => {
                    arity("2 arguments", args.len() == 2)?;
                    Gate::Cnot { control: qubit(args[0])?, target: qubit(args[1])? }
                }
                "toffoli" => {
                    arity("3 arguments", args.len() == 3)?;
                    Gate::toffoli(qubit(args[0])?, qubit(args[1])?, qubit(args[2])?)
                }
                "ntoffoli" => {
                    arity("at least 3 arguments", args.len() >= 3)?;
                    let qs = args.iter().map(|&a| qubit(a)).collect::<Result<Vec<_>, _>>()?;
                    let (target, controls) = qs.split_last().expect("nonempty");
                    Gate::NToffoli { controls: controls.to_vec(), target: *target }
                }
                "ry" => {
                    arity("2 arguments", args.len() == 2)?;
                    let (acol, atok) = args[1];
                    let angle: f64 = atok.parse().map_err(|_| err(acol, format!("bad angle `{atok}`")))?;
                    Gate::Ry { target: qubit(args[0])?, angle }
                }
                "cu" => {
                    arity("a matrix name and at least 1 qubit", args.len() >= 2)?;
                    let (mcol, mtok) = args[0];
                    let matrix: NamedMatrix = mtok.parse().map_err(|e| err(mcol, format!("{e}")))?;
                    let qs = args[1..].iter().map(|&a| qubit(a)).collect::<Result<Vec<_>, _>>()?;
                    let (target, controls) = qs.split_last().expect("nonempty");
                    Gate::Controlled { matrix, controls: controls.to_vec(), target: *target }
                }
                other => return Err(err(col, format!("unknown gate `{other}`"))),
            };
            c.push(gate).map_err(|e| err(col, e.to_string()))?;
        }
        circuit.ok_or(CircuitError::Parse { line: 0, column: 0, message: "missing `qubits` header".into() })
    }
}

/// Whitespace-separated tokens with their 1-based columns, stopping at `#`.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &body[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

/// Plain decimal with 17 significant digits.
pub fn format_angle(angle: f64) -> String {
    if angle == 0.0 {
        return if angle.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", angle);
    let exponent: i32 =
        sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).expect("scientific format has an exponent");
    let decimals = (16 - exponent).max(0) as usize;
    format!("{:.*}", decimals, angle)
}

/// Emits an X on `target` controlled by `controls`, lowering to three-qubit
/// Toffolis when there are three or more controls.
fn emit_lowered_x(
    out: &mut Circuit,
    index: usize,
    controls: &[usize],
    target: usize,
    borrowed: &[usize],
) -> Result<(), CircuitError> {
    let k = controls.len();
    if k <= 2 {
        match k {
            0 => out.x(target)?,
            1 => out.cnot(controls[0], target)?,
            _ => out.toffoli(controls[0], controls[1], target)?,
        };
        return Ok(());
    }
    let need = k - 2;
    if borrowed.len() < need {
        return Err(CircuitError::InsufficientAncillas { gate: index, need, got: borrowed.len() });
    }
    let anc = &borrowed[..need];
    let mut used: BTreeSet<usize> = controls.iter().copied().collect();
    used.insert(target);
    for &a in anc {
        if !used.insert(a) {
            return Err(CircuitError::OverlappingAncillas { gate: index, qubit: a });
        }
    }
    for gate in barenco_network(controls, target, anc) {
        out.push(gate)?;
    }
    Ok(())
}

/// Borrowed-ancilla network for a `k`-control X (`k >= 3`, `k - 2`
/// ancillas): two sweeps, the second without the gate on the target.
pub fn barenco_network(controls: &[usize], target: usize, ancillas: &[usize]) -> Vec<Gate> {
    let k = controls.len();
    assert!(k >= 3 && ancillas.len() >= k - 2);
    // rung j (3 <= j <= k) is T(c_j, a_{j-2}; a_{j-1}) with a_{k-1} = target
    let rung = |j: usize| {
        let tgt = if j == k { target } else { ancillas[j - 2] };
        Gate::toffoli(controls[j - 1], ancillas[j - 3], tgt)
    };
    let base = Gate::toffoli(controls[0], controls[1], ancillas[0]);
    let sweep = |top: usize| {
        let mut gates: Vec<Gate> = (3..=top).rev().map(rung).collect();
        gates.push(base.clone());
        gates.extend((3..=top).map(rung));
        gates
    };
    let mut gates = sweep(k);
    gates.extend(sweep(k - 1));
    gates
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(3).unwrap();
        let s = StateVector::basis_state(3, "101").unwrap();
        assert_eq!(c.simulate(&s).unwrap(), s);
    }

    #[test]
    fn cnot_flips_target() {
        let mut c = Circuit::new(2).unwrap();
        c.cnot(0, 1).unwrap();
        let out = c.simulate(&StateVector::basis_state(2, "10").unwrap()).unwrap();
        assert_eq!(out, StateVector::basis_state(2, "11").unwrap());
        let err = c.simulate(&StateVector::zero(3).unwrap()).unwrap_err();
        assert_eq!(err, CircuitError::WidthMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn rotated_five_qubit_toffoli_applies_f() {
        let set = FibonacciTensorSet::new();
        let mut c = Circuit::new(5).unwrap();
        c.ry(4, -set.theta()).unwrap();
        c.ntoffoli(&[0, 1, 2, 3], 4).unwrap();
        c.ry(4, set.theta()).unwrap();
        let out = c.simulate(&StateVector::basis_state(5, "11110").unwrap()).unwrap();
        let amps = out.amplitudes();
        let phi = set.phi();
        assert!((amps[0b01111] - one() / phi).norm() < 1e-12);
        assert!((amps[0b11111] - one() * phi.powf(-0.5)).norm() < 1e-12);
    }

    #[test]
    fn unitary_of_single_x() {
        let mut c = Circuit::new(1).unwrap();
        c.x(0).unwrap();
        let u = c.unitary_of().unwrap();
        assert_eq!(u[(0, 1)], one());
        assert_eq!(u[(1, 0)], one());
        assert_eq!(u[(0, 0)].norm(), 0.0);
        assert_eq!(Circuit::new(14).unwrap().unitary_of().unwrap_err(), CircuitError::SizeLimit(14));
    }

    #[test]
    fn push_validation() {
        let mut c = Circuit::new(3).unwrap();
        assert!(matches!(c.cnot(1, 1), Err(CircuitError::DuplicateOperand { qubit: 1, .. })));
        assert!(matches!(c.x(3), Err(CircuitError::OperandOutOfRange { qubit: 3, .. })));
        assert!(matches!(c.ntoffoli(&[0], 1), Err(CircuitError::TooFewControls { controls: 1, .. })));
        assert!(matches!(c.ry(0, f64::NAN), Err(CircuitError::NonFiniteAngle { .. })));
        assert!(c.is_empty());
    }

    #[test]
    fn invert_negates_rotations() {
        let mut c = Circuit::new(1).unwrap();
        c.ry(0, 0.25).unwrap();
        assert_eq!(c.invert().gates(), &[Gate::Ry { target: 0, angle: -0.25 }]);
    }

    fn lowering_matches(controls: usize) {
        // operands 0..=controls, ancillas after them
        let n_ops = controls + 1;
        let anc: Vec<usize> = (n_ops..n_ops + controls - 2).collect();
        let width = n_ops + anc.len();
        let mut c = Circuit::new(width).unwrap();
        c.ntoffoli(&(0..controls).collect::<Vec<_>>(), controls).unwrap();
        let lowered = c.lower_ntoffoli(&BTreeMap::from([(0, anc)])).unwrap();
        let counts = lowered.count_gates(CostModel::PrimitiveNToffoli);
        assert_eq!(counts.toffoli3, 4 * n_ops - 12);
        assert!(lowered.gates().iter().all(|g| g.controls().len() == 2));
        for i in 0..1usize << width {
            let mask = (1usize << controls) - 1;
            let expect = if i & mask == mask { i ^ (1 << controls) } else { i };
            let out = lowered.simulate_basis(&FibonacciTensorSet::new(), i).unwrap();
            assert_eq!(out.amplitudes()[expect], one(), "input {i:b}");
        }
    }

    #[test]
    fn barenco_lowering_is_exact() {
        for k in 3..=5 {
            lowering_matches(k);
        }
    }

    #[test]
    fn lowering_errors() {
        let mut c = Circuit::new(6).unwrap();
        c.ntoffoli(&[0, 1, 2, 3], 4).unwrap();
        let err = c.lower_ntoffoli(&BTreeMap::from([(0, vec![5])])).unwrap_err();
        assert_eq!(err, CircuitError::InsufficientAncillas { gate: 0, need: 2, got: 1 });
        let err = c.lower_ntoffoli(&BTreeMap::from([(0, vec![5, 3])])).unwrap_err();
        assert_eq!(err, CircuitError::OverlappingAncillas { gate: 0, qubit: 3 });
        let err = c.lower_ntoffoli(&BTreeMap::from([(0, vec![5, 5])])).unwrap_err();
        assert_eq!(err, CircuitError::OverlappingAncillas { gate: 0, qubit: 5 });
    }

    #[test]
    fn count_conventions() {
        let mut c = Circuit::new(6).unwrap();
        c.x(0).unwrap();
        c.cu(NamedMatrix::S, &[0], 1).unwrap();
        c.cu(NamedMatrix::F, &[0, 1, 2, 3], 4).unwrap();
        c.ntoffoli(&[0, 1, 2], 3).unwrap();
        c.ntoffoli(&[0, 1, 2, 3, 4], 5).unwrap();
        let d = c.count_gates(CostModel::Decomposed);
        assert_eq!((d.toffoli3, d.toffoli4, d.toffoli5, d.cnot, d.single_qubit_rotation), (8 + 4 + 12, 0, 0, 1, 4));
        let p = c.count_gates(CostModel::PrimitiveNToffoli);
        assert_eq!((p.toffoli3, p.toffoli4, p.toffoli5, p.cnot, p.single_qubit_rotation), (12, 1, 1, 1, 4));
        assert_eq!(d.to_string(), "toffoli=24 cnot=1 rotations=4");
        assert_eq!(p.to_string(), "toffoli5=1 toffoli4=1 toffoli=12 cnot=1 rotations=4");
    }

    #[test]
    fn text_examples() {
        let mut c = Circuit::new(2).unwrap();
        c.cnot(0, 1).unwrap();
        let text = c.export_text();
        assert_eq!(text, "qubits 2\ncnot 0 1\n");
        assert_eq!(Circuit::import_text(&text).unwrap(), c);

        let theta = FibonacciTensorSet::new().theta();
        let mut c = Circuit::new(3).unwrap();
        c.ry(2, theta).unwrap();
        let text = c.export_text();
        assert_eq!(text.lines().nth(1).unwrap(), "ry 2 0.66623943249251527");
        let back = Circuit::import_text(&text).unwrap();
        assert_eq!(back.gates()[0], Gate::Ry { target: 2, angle: theta });
    }

    #[test]
    fn parse_errors_name_line_and_column() {
        let err = Circuit::import_text("toffoli 0").unwrap_err();
        assert!(matches!(err, CircuitError::Parse { line: 1, .. }), "{err}");
        let err = Circuit::import_text("qubits 3\ncnot 0 1\n  toffoli 0 1").unwrap_err();
        assert!(matches!(err, CircuitError::Parse { line: 3, column: 3, .. }), "{err}");
        let err = Circuit::import_text("qubits 3\ncu G 0 1").unwrap_err();
        assert!(matches!(err, CircuitError::Parse { line: 2, column: 4, .. }), "{err}");
        let err = Circuit::import_text("qubits 3\nry 0 abc").unwrap_err();
        assert!(matches!(err, CircuitError::Parse { line: 2, column: 6, .. }), "{err}");
        let err = Circuit::import_text("qubits 2\ncnot 0 2").unwrap_err();
        assert!(matches!(err, CircuitError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn labels_round_trip() {
        let mut c = Circuit::new(4).unwrap();
        c.set_label(3, "syndrome").unwrap();
        c.ntoffoli(&[0, 1, 2], 3).unwrap();
        let text = c.export_text();
        assert!(text.contains("# label 3 syndrome\n"));
        assert!(text.contains("ntoffoli 0 1 2 3\n"));
        assert_eq!(Circuit::import_text(&text).unwrap(), c);
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        let subset = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
        let names =
            prop_oneof![Just(NamedMatrix::F), Just(NamedMatrix::S), Just(NamedMatrix::U), Just(NamedMatrix::Xux)];
        (0usize..5, subset, 0usize..n, -10.0f64..10.0, names).prop_map(move |(kind, perm, k, angle, matrix)| {
            let target = perm[0];
            let controls: Vec<usize> = perm[1..].iter().copied().take(k.min(n - 1)).collect();
            match kind {
                0 => Gate::X { target },
                1 => Gate::Cnot { control: perm[1], target },
                2 => Gate::NToffoli { controls: perm[1..3.max(k.min(n - 1) + 1)].to_vec(), target },
                3 => Gate::Ry { target, angle },
                _ => Gate::Controlled { matrix, controls, target },
            }
        })
    }

    fn arb_circuit() -> impl Strategy<Value = Circuit> {
        (3usize..6).prop_flat_map(|n| {
            proptest::collection::vec(arb_gate(n), 0..15).prop_map(move |gates| {
                let mut c = Circuit::new(n).unwrap();
                for g in gates {
                    c.push(g).unwrap();
                }
                c
            })
        })
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(c in arb_circuit()) {
            prop_assert_eq!(Circuit::import_text(&c.export_text()).unwrap(), c);
        }

        #[test]
        fn double_inversion_is_structural_identity(c in arb_circuit()) {
            prop_assert_eq!(c.invert().invert(), c);
        }

        #[test]
        fn circuit_then_inverse_is_identity(c in arb_circuit()) {
            let mut both = c.clone();
            both.append(&c.invert()).unwrap();
            let u = both.unitary_of().unwrap();
            let id = DMatrix::<Complex64>::identity(u.nrows(), u.ncols());
            prop_assert!((u - id).iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-10);
        }

        #[test]
        fn decomposed_counts_expand_primitive_counts(c in arb_circuit()) {
            let d = c.count_gates(CostModel::Decomposed);
            let p = c.count_gates(CostModel::PrimitiveNToffoli);
            prop_assert_eq!(d.toffoli4 + d.toffoli5, 0);
            prop_assert_eq!(d.toffoli3, p.toffoli3 + 4 * p.toffoli4 + 8 * p.toffoli5);
            prop_assert_eq!((d.cnot, d.single_qubit_rotation), (p.cnot, p.single_qubit_rotation));
        }

        #[test]
        fn format_angle_round_trips(x in proptest::num::f64::NORMAL) {
            prop_assert_eq!(format_angle(x).parse::<f64>().unwrap(), x);
        }
    }
}
