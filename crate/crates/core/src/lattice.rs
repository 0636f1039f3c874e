//! Abstract trivalent lattices.
//!
//! A lattice is a rotation system: every vertex lists its three incident
//! edges in cyclic order, and an edge touching only one vertex is an open
//! external leg. An edge listed twice at one vertex is a loop (the head of a
//! tadpole). Every edge carries a fixed qubit index; F-moves rewire edges
//! between vertices but never move qubits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::fib_data::delta;
use crate::statevec::bits_of;

/// Largest lattice whose valid states may be enumerated.
pub const MAX_ENUMERATED_EDGES: usize = 13;

pub const MIN_SIDES: usize = 2;
pub const MAX_SIDES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("plaquette must have between {MIN_SIDES} and {MAX_SIDES} sides, got {0}")]
    SidesOutOfRange(usize),
    #[error("edge {0} is not in the lattice")]
    UnknownEdge(usize),
    #[error("edge {0} is an open leg; an F-move needs an internal edge")]
    OpenEdge(usize),
    #[error("edge {0} is a loop; an F-move needs two distinct endpoints")]
    LoopEdge(usize),
    #[error("edge {0} has no F-move pattern (neighbouring legs coincide)")]
    Degenerate(usize),
    #[error("edge {edge} is attached {count} times; at most 2 ends are allowed")]
    OverusedEdge { edge: usize, count: usize },
    #[error("edge {edge} is mapped to qubit {qubit}, which is already taken or missing")]
    BadQubitMap { edge: usize, qubit: usize },
    #[error("{0} edges exceed the enumeration limit of {MAX_ENUMERATED_EDGES}")]
    TooManyEdges(usize),
    #[error("lattice has {0} closed faces, expected exactly one plaquette")]
    NotSinglePlaquette(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    /// Five distinct edges.
    Full,
    /// Four edges, roles `a` and `d` played by the same edge.
    Reduced,
}

/// Edge roles of an F-move. For a reduced move `d == a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveRoles {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    pub e: usize,
}

impl MoveRoles {
    fn map(self, f: impl Fn(usize) -> usize) -> Self {
        Self { a: f(self.a), b: f(self.b), c: f(self.c), d: f(self.d), e: f(self.e) }
    }
}

/// A vertex on a face boundary: the boundary edges on either side and the
/// leg pointing away from the face. At a tadpole head `left == right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corner {
    pub vertex: usize,
    pub left: usize,
    pub right: usize,
    pub leg: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FMoveRecord {
    pub kind: MoveKind,
    /// Roles as edge ids.
    pub edges: MoveRoles,
    /// Roles as qubit indices.
    pub qubits: MoveRoles,
    /// The lattice after the move.
    pub lattice: TrivalentLattice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrivalentLattice {
    vertices: BTreeMap<usize, [usize; 3]>,
    qubits: BTreeMap<usize, usize>,
}

impl TrivalentLattice {
    /// Builds a lattice from vertex triples (cyclic order) with vertex ids
    /// `0..` and every edge assigned the qubit of the same index. Edge ids
    /// must be exactly `0..m`.
    pub fn from_vertices(vertices: &[[usize; 3]]) -> Result<Self, LatticeError> {
        let edges: BTreeSet<usize> = vertices.iter().flatten().copied().collect();
        let qubits = edges.iter().map(|&e| (e, e)).collect();
        Self::with_qubits(vertices, qubits)
    }

    pub fn with_qubits(vertices: &[[usize; 3]], qubits: BTreeMap<usize, usize>) -> Result<Self, LatticeError> {
        let mut ends: BTreeMap<usize, usize> = BTreeMap::new();
        for &e in vertices.iter().flatten() {
            *ends.entry(e).or_default() += 1;
        }
        for (&edge, &count) in &ends {
            if count > 2 {
                return Err(LatticeError::OverusedEdge { edge, count });
            }
        }
        let m = ends.len();
        let mut seen = BTreeSet::new();
        for &edge in ends.keys() {
            match qubits.get(&edge) {
                Some(&q) if q < m && seen.insert(q) => {}
                Some(&q) => return Err(LatticeError::BadQubitMap { edge, qubit: q }),
                None => return Err(LatticeError::BadQubitMap { edge, qubit: usize::MAX }),
            }
        }
        Ok(Self {
            vertices: vertices.iter().copied().enumerate().collect(),
            qubits: ends.keys().map(|e| (*e, qubits[e])).collect(),
        })
    }

    /// An `n`-sided plaquette: inner edges `i_1..i_n` on qubits `0..n`, outer
    /// legs `a_1..a_n` on qubits `n..2n`, vertex `k` joining `a_k`, `i_k` and
    /// `i_{k-1}` (indices cyclic).
    pub fn build_plaquette(n: usize) -> Result<Self, LatticeError> {
        if !(MIN_SIDES..=MAX_SIDES).contains(&n) {
            return Err(LatticeError::SidesOutOfRange(n));
        }
        let vertices: Vec<[usize; 3]> = (0..n).map(|k| [n + k, k, (k + n - 1) % n]).collect();
        Self::from_vertices(&vertices)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.qubits.len()
    }

    pub fn vertices(&self) -> &BTreeMap<usize, [usize; 3]> {
        &self.vertices
    }

    pub fn qubit_of(&self, edge: usize) -> Option<usize> {
        self.qubits.get(&edge).copied()
    }

    /// `(vertex, slot)` positions where `edge` is attached.
    fn ends(&self, edge: usize) -> Vec<(usize, usize)> {
        self.vertices
            .iter()
            .flat_map(|(&v, tri)| tri.iter().enumerate().filter(move |(_, &e)| e == edge).map(move |(i, _)| (v, i)))
            .collect()
    }

    pub fn is_open(&self, edge: usize) -> bool {
        self.ends(edge).len() == 1
    }

    /// Vertex triple rotated so that `edge` comes first.
    fn rotated(&self, v: usize, slot: usize) -> [usize; 3] {
        let t = self.vertices[&v];
        [t[slot], t[(slot + 1) % 3], t[(slot + 2) % 3]]
    }

    /// The rewiring of an F-move on `edge`, without role analysis. Returns
    /// the new lattice and the pre-move legs `(x1, x2, y1, y2)`.
    fn rewire(&self, edge: usize) -> Result<(Self, [usize; 4]), LatticeError> {
        let ends = self.ends(edge);
        match ends.len() {
            0 => return Err(LatticeError::UnknownEdge(edge)),
            1 => return Err(LatticeError::OpenEdge(edge)),
            _ => {}
        }
        let ((u, su), (w, sw)) = (ends[0], ends[1]);
        if u == w {
            return Err(LatticeError::LoopEdge(edge));
        }
        let [_, x1, x2] = self.rotated(u, su);
        let [_, y1, y2] = self.rotated(w, sw);
        let mut out = self.clone();
        out.vertices.insert(u, [edge, y2, x1]);
        out.vertices.insert(w, [edge, x2, y1]);
        Ok((out, [x1, x2, y1, y2]))
    }

    /// Applies the F-move on internal edge `edge`.
    ///
    /// With legs `(x1, x2)` at one endpoint and `(y1, y2)` at the other, the
    /// roles are `(a, b, c, d) = (x1, x2, y1, y2)`. When two legs coincide
    /// the move is reduced: `x1 == y2` gives `a = d` directly and `x2 == y1`
    /// is brought to that form by the `a <-> b, c <-> d` symmetry. A move
    /// that expands a tadpole head takes its roles from the reverse move.
    pub fn apply_fmove(&self, edge: usize) -> Result<(TrivalentLattice, FMoveRecord), LatticeError> {
        let (after, [x1, x2, y1, y2]) = self.rewire(edge)?;
        let (kind, edges) = if x1 == x2 || y1 == y2 {
            let (_, [p1, p2, q1, q2]) = after.rewire(edge)?;
            reduced_roles(edge, p1, p2, q1, q2).ok_or(LatticeError::Degenerate(edge))?
        } else {
            let distinct: BTreeSet<usize> = [x1, x2, y1, y2, edge].into_iter().collect();
            match distinct.len() {
                5 => (MoveKind::Full, MoveRoles { a: x1, b: x2, c: y1, d: y2, e: edge }),
                _ => reduced_roles(edge, x1, x2, y1, y2).ok_or(LatticeError::Degenerate(edge))?,
            }
        };
        let qubits = edges.map(|e| self.qubits[&e]);
        let record = FMoveRecord { kind, edges, qubits, lattice: after.clone() };
        Ok((after, record))
    }

    /// Cycles of darts `(vertex, slot)`. Leaving a dart along its edge and
    /// turning to the next slot at the far vertex traces a face; open legs
    /// are walked around.
    fn face_cycles(&self) -> Vec<Vec<(usize, usize)>> {
        let mut partner: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for &e in self.qubits.keys() {
            let ends = self.ends(e);
            match ends.as_slice() {
                [only] => {
                    partner.insert(*only, *only);
                }
                [p, q] => {
                    partner.insert(*p, *q);
                    partner.insert(*q, *p);
                }
                _ => unreachable!("edges have one or two ends"),
            }
        }
        let mut visited = BTreeSet::new();
        let mut faces = Vec::new();
        for &start in partner.keys() {
            if visited.contains(&start) {
                continue;
            }
            let mut face = Vec::new();
            let mut dart = start;
            while visited.insert(dart) {
                face.push(dart);
                let (w, j) = partner[&dart];
                dart = (w, (j + 1) % 3);
            }
            faces.push(face);
        }
        faces
    }

    /// Edge lists of the closed faces, those whose boundary has no open leg.
    pub fn plaquettes(&self) -> Vec<Vec<usize>> {
        self.face_cycles()
            .into_iter()
            .map(|face| face.iter().map(|&(v, i)| self.vertices[&v][i]).collect::<Vec<_>>())
            .filter(|edges| edges.iter().all(|&e| !self.is_open(e)))
            .collect()
    }

    /// Corners of every closed face, in boundary order.
    pub fn plaquette_corners(&self) -> Vec<Vec<Corner>> {
        self.face_cycles()
            .into_iter()
            .filter(|face| face.iter().all(|&(v, i)| !self.is_open(self.vertices[&v][i])))
            .map(|face| {
                face.iter()
                    .map(|&(v, i)| {
                        let t = self.vertices[&v];
                        // the walk arrives on slot i - 1 and leaves on slot i
                        Corner { vertex: v, left: t[i], right: t[(i + 2) % 3], leg: t[(i + 1) % 3] }
                    })
                    .collect()
            })
            .collect()
    }

    /// `(tail, head)` edges if the lattice contains a tadpole vertex
    /// `(tail, head, head)`.
    pub fn tadpole(&self) -> Option<(usize, usize)> {
        self.vertices.values().find_map(|t| {
            (0..3).find_map(|s| {
                let [x, y, z] = [t[s], t[(s + 1) % 3], t[(s + 2) % 3]];
                (y == z && x != y).then_some((x, y))
            })
        })
    }

    /// Whether the two lattices agree up to vertex renaming and cyclic
    /// rotation of each vertex.
    pub fn same_topology(&self, other: &TrivalentLattice) -> bool {
        let canon = |l: &TrivalentLattice| {
            let mut tris: Vec<[usize; 3]> = l
                .vertices
                .values()
                .map(|t| (0..3).map(|s| [t[s], t[(s + 1) % 3], t[(s + 2) % 3]]).min().expect("three rotations"))
                .collect();
            tris.sort();
            tris
        };
        self.qubits == other.qubits && canon(self) == canon(other)
    }

    /// Whether the basis index (bit `q` = qubit `q`) satisfies every vertex
    /// constraint.
    pub fn is_valid_state(&self, index: usize) -> bool {
        self.vertices.values().all(|t| {
            let bit = |e: usize| ((index >> self.qubits[&e]) & 1) as u8;
            delta(bit(t[0]), bit(t[1]), bit(t[2])) == 1
        })
    }

    /// Basis indices of all vertex-valid configurations, ascending.
    pub fn enumerate_valid_states(&self) -> Result<Vec<usize>, LatticeError> {
        let m = self.num_edges();
        if m > MAX_ENUMERATED_EDGES {
            return Err(LatticeError::TooManyEdges(m));
        }
        Ok((0..1usize << m).filter(|&i| self.is_valid_state(i)).collect())
    }

    /// Valid configurations as bit-strings, qubit 0 first.
    pub fn valid_bitstrings(&self) -> Result<Vec<String>, LatticeError> {
        let m = self.num_edges();
        Ok(self.enumerate_valid_states()?.into_iter().map(|i| bits_of(i, m)).collect())
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (v, t) in &self.vertices {
            let _ = writeln!(out, "vertex {v}: {} {} {}", t[0], t[1], t[2]);
        }
        for (e, q) in &self.qubits {
            let _ = writeln!(out, "edge {e}: qubit {q}");
        }
        out
    }
}

fn reduced_roles(e: usize, x1: usize, x2: usize, y1: usize, y2: usize) -> Option<(MoveKind, MoveRoles)> {
    let roles = if x1 == y2 && x2 != y1 {
        MoveRoles { a: x1, b: x2, c: y1, d: y2, e }
    } else if x2 == y1 && x1 != y2 {
        MoveRoles { a: x2, b: x1, c: y2, d: y1, e }
    } else {
        return None;
    };
    let distinct: BTreeSet<usize> = [roles.a, roles.b, roles.c, e].into_iter().collect();
    (distinct.len() == 4).then_some((MoveKind::Reduced, roles))
}

/// F-moves reducing the `n`-sided plaquette to a tadpole. Each step moves
/// the plaquette edge on the highest qubit, peeling one side: `n - 2` full
/// moves and a final reduced move on the 2-gon.
pub fn reduction_plan(n: usize) -> Result<Vec<FMoveRecord>, LatticeError> {
    let mut lattice = TrivalentLattice::build_plaquette(n)?;
    let mut plan = Vec::with_capacity(n - 1);
    loop {
        let faces = lattice.plaquettes();
        let [face] = faces.as_slice() else {
            return Err(LatticeError::NotSinglePlaquette(faces.len()));
        };
        if face.len() == 1 {
            return Ok(plan);
        }
        let edge = *face.iter().max_by_key(|&&e| lattice.qubits[&e]).expect("nonempty face");
        let (next, record) = lattice.apply_fmove(edge)?;
        plan.push(record);
        lattice = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fib_data::fibonacci;

    #[test]
    fn plaquette_sizes() {
        let hex = TrivalentLattice::build_plaquette(6).unwrap();
        assert_eq!((hex.num_edges(), hex.num_vertices()), (12, 6));
        let two = TrivalentLattice::build_plaquette(2).unwrap();
        assert_eq!((two.num_edges(), two.num_vertices()), (4, 2));
        assert_eq!(TrivalentLattice::build_plaquette(1), Err(LatticeError::SidesOutOfRange(1)));
        assert_eq!(TrivalentLattice::build_plaquette(7), Err(LatticeError::SidesOutOfRange(7)));
    }

    #[test]
    fn plaquette_face_is_the_inner_ring() {
        for n in 2..=6 {
            let l = TrivalentLattice::build_plaquette(n).unwrap();
            let faces = l.plaquettes();
            assert_eq!(faces.len(), 1);
            let ring: BTreeSet<usize> = faces[0].iter().copied().collect();
            assert_eq!(ring, (0..n).collect());
        }
    }

    #[test]
    fn valid_state_counts_follow_fibonacci() {
        for n in 2..=6u32 {
            let l = TrivalentLattice::build_plaquette(n as usize).unwrap();
            let count = l.enumerate_valid_states().unwrap().len() as u64;
            assert_eq!(count, fibonacci(2 * n - 1).unwrap() + fibonacci(2 * n + 1).unwrap(), "n={n}");
        }
        let hex = TrivalentLattice::build_plaquette(6).unwrap();
        assert_eq!(hex.enumerate_valid_states().unwrap().len(), 322);
    }

    #[test]
    fn single_vertex_has_five_states() {
        let v = TrivalentLattice::from_vertices(&[[0, 1, 2]]).unwrap();
        assert_eq!(v.valid_bitstrings().unwrap(), vec!["000", "110", "101", "011", "111"]);
    }

    #[test]
    fn hexagon_first_move_leaves_a_pentagon() {
        let hex = TrivalentLattice::build_plaquette(6).unwrap();
        let (next, record) = hex.apply_fmove(5).unwrap();
        assert_eq!(record.kind, MoveKind::Full);
        assert_eq!(record.qubits.e, 5);
        let faces = next.plaquettes();
        assert_eq!(faces.len(), 1);
        assert_eq!(faces[0].len(), 5);
    }

    #[test]
    fn full_move_is_an_involution() {
        let hex = TrivalentLattice::build_plaquette(6).unwrap();
        for e in 0..6 {
            let (once, _) = hex.apply_fmove(e).unwrap();
            let (twice, _) = once.apply_fmove(e).unwrap();
            assert!(twice.same_topology(&hex), "edge {e}");
            assert!(!once.same_topology(&hex));
        }
    }

    #[test]
    fn two_gon_reduces_to_tadpole() {
        let two = TrivalentLattice::build_plaquette(2).unwrap();
        let (tad, record) = two.apply_fmove(1).unwrap();
        assert_eq!(record.kind, MoveKind::Reduced);
        assert_eq!(record.edges.a, record.edges.d);
        assert_eq!(tad.tadpole(), Some((1, 0)));
        let faces = tad.plaquettes();
        assert_eq!(faces, vec![vec![0]]);
        // expanding the tadpole again is the same reduced move
        let (back, again) = tad.apply_fmove(1).unwrap();
        assert_eq!(again.kind, MoveKind::Reduced);
        let (q, r) = (again.qubits, record.qubits);
        assert_eq!((q.a, q.d, q.e), (r.a, r.d, r.e));
        assert_eq!(BTreeSet::from([q.b, q.c]), BTreeSet::from([r.b, r.c]));
        assert!(back.same_topology(&two));
    }

    #[test]
    fn plan_shapes() {
        for n in 2..=6 {
            let plan = reduction_plan(n).unwrap();
            assert_eq!(plan.len(), n - 1);
            let full = plan.iter().filter(|r| r.kind == MoveKind::Full).count();
            assert_eq!(full, n - 2);
            assert_eq!(plan.last().unwrap().kind, MoveKind::Reduced);
            let last = &plan.last().unwrap().lattice;
            assert!(last.tadpole().is_some());
            for r in &plan {
                let q = r.qubits;
                let distinct: BTreeSet<usize> = [q.a, q.b, q.c, q.d, q.e].into_iter().collect();
                assert_eq!(distinct.len(), if r.kind == MoveKind::Full { 5 } else { 4 });
            }
        }
    }

    #[test]
    fn move_errors() {
        let hex = TrivalentLattice::build_plaquette(6).unwrap();
        assert_eq!(hex.apply_fmove(6).unwrap_err(), LatticeError::OpenEdge(6));
        assert_eq!(hex.apply_fmove(40).unwrap_err(), LatticeError::UnknownEdge(40));
        let tad = TrivalentLattice::from_vertices(&[[1, 0, 0]]).unwrap();
        assert_eq!(tad.apply_fmove(0).unwrap_err(), LatticeError::LoopEdge(0));
        assert!(matches!(
            TrivalentLattice::from_vertices(&[[0, 1, 2], [0, 1, 3], [0, 4, 5]]),
            Err(LatticeError::OverusedEdge { edge: 0, count: 3 })
        ));
    }

    #[test]
    fn dump_format() {
        let l = TrivalentLattice::from_vertices(&[[0, 1, 2]]).unwrap();
        assert_eq!(l.dump(), "vertex 0: 0 1 2\nedge 0: qubit 0\nedge 1: qubit 1\nedge 2: qubit 2\n");
    }
}
