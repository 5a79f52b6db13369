//! Physical-dimension consistency: every node carries an integer exponent
//! vector over the program's base units; hyperedges contribute linear
//! equations over those vectors; fraction-free integer elimination either
//! certifies consistency or reports the first contradicting constraint in
//! insertion order.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::{Integer, Signed, Zero};

use crate::phg::{EdgeId, EdgeKind, NodeId, NormKind, Phg};

/// Integer exponent vector over the declared base units, e.g. with base
/// units (m, kg, s) a force is (1, 1, -2).
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct UnitVector(pub Vec<i64>);

impl UnitVector {
    pub fn zero(n: usize) -> Self {
        UnitVector(vec![0; n])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &UnitVector) -> UnitVector {
        UnitVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &UnitVector) -> UnitVector {
        UnitVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, k: i64) -> UnitVector {
        UnitVector(self.0.iter().map(|a| a * k).collect())
    }

    /// Render against unit names, e.g. `m^2*s^-1`; `1` when dimensionless.
    pub fn render(&self, units: &[String]) -> String {
        let mut parts = Vec::new();
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let name = units.get(i).map(String::as_str).unwrap_or("?");
            if e == 1 {
                parts.push(name.to_string());
            } else {
                parts.push(format!("{name}^{e}"));
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

/// Where a constraint came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Provenance {
    Edge(EdgeId),
    Declaration(NodeId),
}

/// One linear equation: sum of coeff * dim(node) = rhs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimConstraint {
    pub terms: Vec<(NodeId, i64)>,
    pub rhs: UnitVector,
    pub provenance: Provenance,
    pub index: usize,
}

impl DimConstraint {
    fn new(index: usize, provenance: Provenance, terms: Vec<(NodeId, i64)>, rhs: UnitVector) -> Self {
        DimConstraint {
            terms,
            rhs,
            provenance,
            index,
        }
    }
}

/// Solver outcome. Consistent assignments satisfy every constraint exactly;
/// free variables are assigned the zero vector and listed.
#[derive(Clone, Debug)]
pub enum DimSolution {
    Consistent {
        assignment: BTreeMap<NodeId, UnitVector>,
        free: Vec<NodeId>,
    },
    Inconsistent {
        constraint: DimConstraint,
        witness: String,
    },
}

impl DimSolution {
    pub fn is_consistent(&self) -> bool {
        matches!(self, DimSolution::Consistent { .. })
    }
}

impl fmt::Display for DimSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimSolution::Consistent { assignment, free } => {
                write!(f, "consistent ({} nodes, {} free)", assignment.len(), free.len())
            }
            DimSolution::Inconsistent { constraint, witness } => {
                write!(f, "inconsistent at constraint #{}: {}", constraint.index, witness)
            }
        }
    }
}

/// Walk the hypergraph and emit the dimension equations:
/// products and joins sum their source dimensions; metric norms and grade
/// selections preserve dimension; sandwiches preserve the operand dimension
/// and force a dimensionless operator; coordinate-extraction norms (ideal or
/// simplex content) emit no equation, so the extracted scale is pinned by
/// declarations; declared node dimensions become fixed equations.
pub fn collect_constraints(phg: &Phg) -> Vec<DimConstraint> {
    let n = phg.base_units.len();
    let mut out = Vec::new();
    let mut idx = 0;
    let mut push = |out: &mut Vec<DimConstraint>, prov, terms, rhs| {
        out.push(DimConstraint::new(idx, prov, terms, rhs));
        idx += 1;
    };

    for node in phg.nodes() {
        if let Some(dims) = &node.declared_dims {
            push(
                &mut out,
                Provenance::Declaration(node.id),
                vec![(node.id, 1)],
                dims.clone(),
            );
        }
    }
    for edge in phg.edges() {
        let prov = Provenance::Edge(edge.id);
        match &edge.kind {
            EdgeKind::Product(_) | EdgeKind::Join => {
                let mut terms = vec![(edge.target, 1)];
                for &s in &edge.sources {
                    merge_term(&mut terms, s, -1);
                }
                push(&mut out, prov, terms, UnitVector::zero(n));
            }
            EdgeKind::Sandwich => {
                // rotor dimensionless, target = operand
                push(&mut out, prov, vec![(edge.sources[0], 1)], UnitVector::zero(n));
                push(
                    &mut out,
                    prov,
                    vec![(edge.target, 1), (edge.sources[1], -1)],
                    UnitVector::zero(n),
                );
            }
            EdgeKind::GradeSelect(_) | EdgeKind::Norm(NormKind::Metric) => {
                push(
                    &mut out,
                    prov,
                    vec![(edge.target, 1), (edge.sources[0], -1)],
                    UnitVector::zero(n),
                );
            }
            // coordinate extraction: dimension enters here, via declaration
            EdgeKind::Norm(NormKind::Ideal) | EdgeKind::Norm(NormKind::SimplexContent) => {}
            EdgeKind::CoLocation(_) | EdgeKind::Transfer | EdgeKind::SyncBarrier | EdgeKind::Custom(_) => {}
        }
    }
    out
}

struct Row {
    coeffs: BTreeMap<NodeId, BigInt>,
    rhs: Vec<BigInt>,
    source_index: usize,
}

impl Row {
    fn from_constraint(c: &DimConstraint, n_units: usize) -> Row {
        let mut coeffs: BTreeMap<NodeId, BigInt> = BTreeMap::new();
        for (node, k) in &c.terms {
            let e = coeffs.entry(*node).or_insert_with(BigInt::zero);
            *e += BigInt::from(*k);
        }
        coeffs.retain(|_, v| !v.is_zero());
        let mut rhs: Vec<BigInt> = c.rhs.0.iter().map(|&e| BigInt::from(e)).collect();
        rhs.resize(n_units, BigInt::zero());
        Row {
            coeffs,
            rhs,
            source_index: c.index,
        }
    }

    fn leading(&self) -> Option<NodeId> {
        self.coeffs.keys().next().copied()
    }

    /// Divide everything by the gcd and make the leading coefficient
    /// positive, keeping rows small and canonical.
    fn normalize(&mut self) {
        let mut g = BigInt::zero();
        for v in self.coeffs.values() {
            g = g.gcd(v);
        }
        for v in &self.rhs {
            g = g.gcd(v);
        }
        if g > BigInt::from(1) {
            for v in self.coeffs.values_mut() {
                *v /= &g;
            }
            for v in &mut self.rhs {
                *v /= &g;
            }
        }
        if let Some(lead) = self.leading() {
            if self.coeffs[&lead].is_negative() {
                for v in self.coeffs.values_mut() {
                    *v = -v.clone();
                }
                for v in &mut self.rhs {
                    *v = -v.clone();
                }
            }
        }
    }

    /// Fraction-free elimination of `var` using `pivot`:
    /// self = pivot_coeff * self - self_coeff * pivot.
    fn eliminate(&mut self, var: NodeId, pivot: &Row) {
        let Some(mine) = self.coeffs.get(&var).cloned() else {
            return;
        };
        let pc = pivot.coeffs[&var].clone();
        let mut vars: Vec<NodeId> = self.coeffs.keys().copied().collect();
        vars.extend(pivot.coeffs.keys().filter(|v| !self.coeffs.contains_key(v)));
        for node in vars {
            let a = self.coeffs.get(&node).cloned().unwrap_or_else(BigInt::zero);
            let b = pivot.coeffs.get(&node).cloned().unwrap_or_else(BigInt::zero);
            let v = &pc * a - &mine * b;
            if v.is_zero() {
                self.coeffs.remove(&node);
            } else {
                self.coeffs.insert(node, v);
            }
        }
        for i in 0..self.rhs.len() {
            self.rhs[i] = &pc * &self.rhs[i] - &mine * &pivot.rhs[i];
        }
        self.normalize();
    }
}

/// Fraction-free integer Gaussian elimination, processing constraints in
/// insertion order. Deterministic: identical input yields an identical
/// witness.
pub fn solve(n_units: usize, nodes: &[NodeId], constraints: &[DimConstraint]) -> DimSolution {
    let mut pivots: BTreeMap<NodeId, Row> = BTreeMap::new();
    for c in constraints {
        let mut row = Row::from_constraint(c, n_units);
        row.normalize();
        loop {
            let Some(lead) = row.leading() else { break };
            if let Some(pivot) = pivots.get(&lead) {
                row.eliminate(lead, pivot);
            } else {
                break;
            }
        }
        match row.leading() {
            Some(lead) => {
                pivots.insert(lead, row);
            }
            None => {
                if row.rhs.iter().any(|v| !v.is_zero()) {
                    return DimSolution::Inconsistent {
                        constraint: c.clone(),
                        witness: format!(
                            "constraint #{} reduces to 0 = ({})",
                            c.index,
                            row.rhs
                                .iter()
                                .map(|v| v.to_string())
                                .collect::<Vec<_>>()
                                .join(", ")
                        ),
                    };
                }
                // redundant constraint
            }
        }
    }

    // back-substitute, highest pivot variable first
    let mut assignment: BTreeMap<NodeId, Vec<BigInt>> = BTreeMap::new();
    let mut free: Vec<NodeId> = Vec::new();
    for &node in nodes {
        if !pivots.contains_key(&node) {
            free.push(node);
            assignment.insert(node, vec![BigInt::zero(); n_units]);
        }
    }
    let order: Vec<NodeId> = pivots.keys().rev().copied().collect();
    for var in order {
        let row = &pivots[&var];
        let lead_coeff = row.coeffs[&var].clone();
        let mut rhs = row.rhs.clone();
        for (node, coeff) in &row.coeffs {
            if *node == var {
                continue;
            }
            let val = assignment
                .get(node)
                .cloned()
                .unwrap_or_else(|| vec![BigInt::zero(); n_units]);
            for i in 0..n_units {
                rhs[i] -= coeff * &val[i];
            }
        }
        let mut value = Vec::with_capacity(n_units);
        for r in rhs {
            let (q, rem) = r.div_rem(&lead_coeff);
            if !rem.is_zero() {
                // no integer solution; rational exponents are out of scope
                let c = constraints
                    .iter()
                    .find(|c| c.index == row.source_index)
                    .cloned()
                    .unwrap_or_else(|| {
                        DimConstraint::new(row.source_index, Provenance::Declaration(var), vec![], UnitVector::zero(n_units))
                    });
                return DimSolution::Inconsistent {
                    constraint: c,
                    witness: format!(
                        "dimension of {var} requires a non-integer exponent ({lead_coeff} does not divide {})",
                        q * &lead_coeff + rem
                    ),
                };
            }
            value.push(q);
        }
        assignment.insert(var, value);
    }

    let assignment = assignment
        .into_iter()
        .map(|(node, v)| {
            (
                node,
                UnitVector(v.into_iter().map(|b| big_to_i64(&b)).collect()),
            )
        })
        .collect();
    DimSolution::Consistent { assignment, free }
}

fn big_to_i64(b: &BigInt) -> i64 {
    use num::ToPrimitive;
    b.to_i64().unwrap_or_else(|| {
        if b.is_negative() {
            i64::MIN
        } else {
            i64::MAX
        }
    })
}

fn merge_term(terms: &mut Vec<(NodeId, i64)>, node: NodeId, k: i64) {
    if let Some(t) = terms.iter_mut().find(|(n, _)| *n == node) {
        t.1 += k;
    } else {
        terms.push((node, k));
    }
}

/// Convenience: collect and solve for a hypergraph.
pub fn check_dimensions(phg: &Phg) -> DimSolution {
    let constraints = collect_constraints(phg);
    let nodes: Vec<NodeId> = phg.nodes().iter().map(|n| n.id).collect();
    solve(phg.base_units.len(), &nodes, &constraints)
}
