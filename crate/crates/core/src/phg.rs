//! The program hypergraph: annotated nodes, directed k-ary hyperedges, and
//! the monotone saturation fixpoint that elaborates node annotations once
//! every hyperedge source is saturated.
//!
//! Binary edges are the `|S| = 1` special case, so plain dependency graphs
//! embed unchanged. Operation edges (products, joins, projections, norms)
//! drive grade inference; relational edges (co-location, transfer, sync
//! barriers, custom) are carried for the placement and reporting layers and
//! fire no inference.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::algebra::{AlgebraRef, ProductKind};
use crate::dims::UnitVector;
use crate::grade::{self, GradeDiagnostic, GradeSet, Severity};
use crate::place::CoLocationAnnotation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct EdgeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// What a node's value is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ValueKind {
    Multivector,
    Scalar,
}

/// Declared lifetime/liveness flag carried from the source program. Stored
/// as metadata only; the saturation engine drives `Activation`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StateFlag {
    Live,
    Latent,
    Fresh,
}

/// Saturation lattice: Fresh < Elaborated < Saturated. Monotone per run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Fresh,
    Elaborated,
    Saturated,
}

/// Norm flavor carried on `Norm` edges. `Metric` is the algebra norm;
/// `Ideal` is the Euclidean norm of the degenerate-generator coefficients;
/// `SimplexContent` divides the ideal norm by k! to turn a k-simplex join
/// into its measure (length, area, volume).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NormKind {
    Metric,
    Ideal,
    SimplexContent,
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::Metric => "metric",
            NormKind::Ideal => "ideal",
            NormKind::SimplexContent => "content",
        }
    }

    pub fn from_name(name: &str) -> Option<NormKind> {
        match name {
            "metric" => Some(NormKind::Metric),
            "ideal" => Some(NormKind::Ideal),
            "content" => Some(NormKind::SimplexContent),
            _ => None,
        }
    }
}

/// Hyperedge annotation: the relational kind plus its payload.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeKind {
    Product(ProductKind),
    Sandwich,
    Join,
    GradeSelect(usize),
    Norm(NormKind),
    CoLocation(CoLocationAnnotation),
    Transfer,
    SyncBarrier,
    Custom(String),
}

impl EdgeKind {
    /// Operation edges participate in grade inference and gate activation;
    /// relational edges are consumed by placement and reporting only.
    pub fn is_operation(&self) -> bool {
        !matches!(
            self,
            EdgeKind::CoLocation(_) | EdgeKind::Transfer | EdgeKind::SyncBarrier | EdgeKind::Custom(_)
        )
    }

    pub fn name(&self) -> String {
        match self {
            EdgeKind::Product(k) => k.name().to_string(),
            EdgeKind::Sandwich => "sandwich".to_string(),
            EdgeKind::Join => "join".to_string(),
            EdgeKind::GradeSelect(k) => format!("select[{k}]"),
            EdgeKind::Norm(n) => format!("norm[{}]", n.name()),
            EdgeKind::CoLocation(_) => "colocate".to_string(),
            EdgeKind::Transfer => "transfer".to_string(),
            EdgeKind::SyncBarrier => "sync".to_string(),
            EdgeKind::Custom(tag) => format!("custom[{tag}]"),
        }
    }

    /// Acceptable source arity (min, max).
    fn arity(&self) -> (usize, usize) {
        match self {
            EdgeKind::Product(_) | EdgeKind::Sandwich => (2, 2),
            EdgeKind::Join => (2, usize::MAX),
            EdgeKind::GradeSelect(_) | EdgeKind::Norm(_) | EdgeKind::Transfer => (1, 1),
            EdgeKind::CoLocation(_) => (2, usize::MAX),
            EdgeKind::SyncBarrier | EdgeKind::Custom(_) => (1, usize::MAX),
        }
    }
}

/// An annotated node.
#[derive(Clone, Debug)]
pub struct PhgNode {
    pub id: NodeId,
    pub name: String,
    pub kind: ValueKind,
    pub declared_grades: GradeSet,
    pub declared_dims: Option<UnitVector>,
    pub coeffect: Option<String>,
    pub flag: StateFlag,
}

/// A directed hyperedge: ordered operand list, one target, annotation, and
/// a per-target reachability bit-vector.
#[derive(Clone, Debug)]
pub struct Hyperedge {
    pub id: EdgeId,
    pub sources: Vec<NodeId>,
    pub target: NodeId,
    pub kind: EdgeKind,
    pub reachability: u64,
}

/// Node construction spec.
#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub name: String,
    pub kind: ValueKind,
    pub declared_grades: GradeSet,
    pub declared_dims: Option<UnitVector>,
    pub coeffect: Option<String>,
    pub flag: StateFlag,
}

impl NodeSpec {
    pub fn multivector(name: impl Into<String>) -> Self {
        NodeSpec {
            name: name.into(),
            kind: ValueKind::Multivector,
            declared_grades: GradeSet::Unknown,
            declared_dims: None,
            coeffect: None,
            flag: StateFlag::Fresh,
        }
    }

    pub fn scalar(name: impl Into<String>) -> Self {
        NodeSpec {
            kind: ValueKind::Scalar,
            ..NodeSpec::multivector(name)
        }
    }

    pub fn with_grades(mut self, grades: GradeSet) -> Self {
        self.declared_grades = grades;
        self
    }

    pub fn with_dims(mut self, dims: UnitVector) -> Self {
        self.declared_dims = Some(dims);
        self
    }

    pub fn with_coeffect(mut self, tag: impl Into<String>) -> Self {
        self.coeffect = Some(tag.into());
        self
    }
}

/// Edge construction spec. `reachability = None` means active on every
/// configured target.
#[derive(Clone, Debug)]
pub struct EdgeSpec {
    pub sources: Vec<NodeId>,
    pub target: NodeId,
    pub kind: EdgeKind,
    pub reachability: Option<u64>,
}

impl EdgeSpec {
    pub fn new(kind: EdgeKind, sources: Vec<NodeId>, target: NodeId) -> Self {
        EdgeSpec {
            sources,
            target,
            kind,
            reachability: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PhgError {
    UnknownNode(NodeId),
    DuplicateName(String),
    CycleIntroduced { edge_target: NodeId },
    ArityMismatch { kind: String, got: usize },
    MissingAlgebra,
    ReachabilityWidth { got: u64, targets: usize },
    InvalidColocation(String),
}

impl fmt::Display for PhgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhgError::UnknownNode(n) => write!(f, "unknown node {n}"),
            PhgError::DuplicateName(n) => write!(f, "duplicate node name `{n}`"),
            PhgError::CycleIntroduced { edge_target } => {
                write!(f, "edge targeting {edge_target} would introduce a cycle")
            }
            PhgError::ArityMismatch { kind, got } => {
                write!(f, "edge kind {kind} cannot take {got} sources")
            }
            PhgError::MissingAlgebra => {
                write!(f, "multivector operation requires a configured algebra")
            }
            PhgError::ReachabilityWidth { got, targets } => {
                write!(f, "reachability mask {got:#b} wider than {targets} configured targets")
            }
            PhgError::InvalidColocation(msg) => write!(f, "invalid co-location group: {msg}"),
        }
    }
}

impl std::error::Error for PhgError {}

/// The program hypergraph.
#[derive(Clone, Debug, Default)]
pub struct Phg {
    nodes: Vec<PhgNode>,
    edges: Vec<Hyperedge>,
    name_index: BTreeMap<String, NodeId>,
    /// edge ids having node i among their sources
    source_index: Vec<Vec<EdgeId>>,
    pub base_units: Vec<String>,
    pub targets: Vec<String>,
    pub algebra: Option<AlgebraRef>,
}

impl Phg {
    pub fn new() -> Self {
        Phg::default()
    }

    pub fn with_algebra(algebra: AlgebraRef) -> Self {
        Phg {
            algebra: Some(algebra),
            ..Phg::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[PhgNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &PhgNode {
        &self.nodes[id.0 as usize]
    }

    pub fn edge(&self, id: EdgeId) -> &Hyperedge {
        &self.edges[id.0 as usize]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    pub fn add_node(&mut self, spec: NodeSpec) -> Result<NodeId, PhgError> {
        if self.name_index.contains_key(&spec.name) {
            return Err(PhgError::DuplicateName(spec.name));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.name_index.insert(spec.name.clone(), id);
        self.source_index.push(Vec::new());
        self.nodes.push(PhgNode {
            id,
            name: spec.name,
            kind: spec.kind,
            declared_grades: spec.declared_grades,
            declared_dims: spec.declared_dims,
            coeffect: spec.coeffect,
            flag: spec.flag,
        });
        Ok(id)
    }

    pub fn add_hyperedge(&mut self, spec: EdgeSpec) -> Result<EdgeId, PhgError> {
        for &s in &spec.sources {
            if s.0 as usize >= self.nodes.len() {
                return Err(PhgError::UnknownNode(s));
            }
        }
        if spec.target.0 as usize >= self.nodes.len() {
            return Err(PhgError::UnknownNode(spec.target));
        }
        let (min, max) = spec.kind.arity();
        if spec.sources.len() < min || spec.sources.len() > max {
            return Err(PhgError::ArityMismatch {
                kind: spec.kind.name(),
                got: spec.sources.len(),
            });
        }
        if spec.sources.contains(&spec.target) || self.reaches_any(spec.target, &spec.sources) {
            return Err(PhgError::CycleIntroduced {
                edge_target: spec.target,
            });
        }
        match &spec.kind {
            EdgeKind::Product(_) | EdgeKind::Sandwich | EdgeKind::Join if self.algebra.is_none() => {
                return Err(PhgError::MissingAlgebra);
            }
            EdgeKind::CoLocation(group) => {
                group
                    .validate(&spec.sources)
                    .map_err(PhgError::InvalidColocation)?;
            }
            _ => {}
        }
        let width = self.targets.len();
        let full: u64 = if width == 0 { 0 } else { (1u64 << width) - 1 };
        let reachability = spec.reachability.unwrap_or(full);
        if reachability & !full != 0 {
            return Err(PhgError::ReachabilityWidth {
                got: reachability,
                targets: width,
            });
        }
        let id = EdgeId(self.edges.len() as u32);
        let mut distinct = spec.sources.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for s in &distinct {
            self.source_index[s.0 as usize].push(id);
        }
        self.edges.push(Hyperedge {
            id,
            sources: spec.sources,
            target: spec.target,
            kind: spec.kind,
            reachability,
        });
        Ok(id)
    }

    /// True when `from` can reach any of `goals` through existing edges.
    fn reaches_any(&self, from: NodeId, goals: &[NodeId]) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from.0 as usize] = true;
        while let Some(n) = stack.pop() {
            for eid in &self.source_index[n.0 as usize] {
                let t = self.edges[eid.0 as usize].target;
                if !seen[t.0 as usize] {
                    seen[t.0 as usize] = true;
                    if goals.contains(&t) {
                        return true;
                    }
                    stack.push(t);
                }
            }
        }
        false
    }

    /// Operation edges with `n` among their sources.
    pub fn consumers(&self, n: NodeId) -> impl Iterator<Item = &Hyperedge> {
        self.source_index[n.0 as usize]
            .iter()
            .map(|e| &self.edges[e.0 as usize])
            .filter(|e| e.kind.is_operation())
    }

    /// Operation edges targeting `n`.
    pub fn producers(&self, n: NodeId) -> impl Iterator<Item = &Hyperedge> {
        self.edges
            .iter()
            .filter(move |e| e.target == n && e.kind.is_operation())
    }

    /// A node is an input when no operation edge produces it.
    pub fn is_input(&self, n: NodeId) -> bool {
        self.producers(n).next().is_none()
    }

    /// Plain-graph view: the list of (source, target) pairs when every
    /// hyperedge is binary (|S| = 1); `None` otherwise.
    pub fn binary_view(&self) -> Option<Vec<(NodeId, NodeId, EdgeKind, u64)>> {
        let mut out = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.sources.len() != 1 {
                return None;
            }
            out.push((e.sources[0], e.target, e.kind.clone(), e.reachability));
        }
        Some(out)
    }

    /// Rebuild from a plain-graph view produced by [`Phg::binary_view`],
    /// preserving all node annotations.
    pub fn from_binary(
        template: &Phg,
        edges: Vec<(NodeId, NodeId, EdgeKind, u64)>,
    ) -> Result<Phg, PhgError> {
        let mut phg = Phg {
            nodes: template.nodes.clone(),
            edges: Vec::new(),
            name_index: template.name_index.clone(),
            source_index: vec![Vec::new(); template.nodes.len()],
            base_units: template.base_units.clone(),
            targets: template.targets.clone(),
            algebra: template.algebra.clone(),
        };
        for (s, t, kind, reach) in edges {
            phg.add_hyperedge(EdgeSpec {
                sources: vec![s],
                target: t,
                kind,
                reachability: Some(reach),
            })?;
        }
        Ok(phg)
    }

    pub fn saturate(&self) -> SaturationReport {
        self.saturate_with_order(WorklistOrder::Fifo)
    }

    /// Saturation fixpoint with an explicit worklist discipline (exposed so
    /// confluence can be tested; the result is order-independent).
    pub fn saturate_with_order(&self, order: WorklistOrder) -> SaturationReport {
        Saturator::new(self, order).run()
    }
}

/// Worklist discipline for the fixpoint. Any order yields the same final
/// annotations; the trace may differ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorklistOrder {
    Fifo,
    Lifo,
}

/// One fixpoint step, as recorded in the trace.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceStep {
    /// An input node with a complete declaration started saturated.
    InputSaturated { node: NodeId },
    /// A hyperedge fired: every source saturated, target elaborated.
    EdgeFired {
        edge: EdgeId,
        target: NodeId,
        inferred: GradeSet,
        /// Whether this firing completed the target (all producers fired).
        target_saturated: bool,
        /// Whether the target's grade set was unknown before this firing.
        newly_known: bool,
    },
}

#[derive(Clone, Debug)]
pub struct StalledNode {
    pub node: NodeId,
    pub reason: String,
}

/// Everything the fixpoint produced. The graph itself is left untouched;
/// final annotations live here.
#[derive(Clone, Debug)]
pub struct SaturationReport {
    pub iterations: usize,
    pub node_grades: BTreeMap<NodeId, GradeSet>,
    pub activation: BTreeMap<NodeId, Activation>,
    pub trace: Vec<TraceStep>,
    pub stalled: Vec<StalledNode>,
    pub diagnostics: Vec<GradeDiagnostic>,
    initial_known: usize,
}

impl SaturationReport {
    pub fn grades(&self, n: NodeId) -> GradeSet {
        self.node_grades.get(&n).copied().unwrap_or(GradeSet::Unknown)
    }

    pub fn is_saturated(&self, n: NodeId) -> bool {
        self.activation.get(&n) == Some(&Activation::Saturated)
    }

    pub fn all_saturated(&self) -> bool {
        self.stalled.is_empty()
    }
}

/// Per-step information measurement: (saturated node count, known grade-set
/// count) before any step, then after each trace step. This is a proxy
/// ordering: componentwise non-decreasing, strictly increasing on firings.
pub fn information_quality(report: &SaturationReport) -> Vec<(usize, usize)> {
    let mut sat = 0usize;
    let mut known = report.initial_known;
    let mut out = vec![(sat, known)];
    for step in &report.trace {
        match step {
            TraceStep::InputSaturated { .. } => sat += 1,
            TraceStep::EdgeFired {
                target_saturated,
                newly_known,
                ..
            } => {
                if *target_saturated {
                    sat += 1;
                }
                if *newly_known {
                    known += 1;
                }
            }
        }
        out.push((sat, known));
    }
    out
}

enum Work {
    Node(NodeId),
    Edge(EdgeId),
}

struct Saturator<'a> {
    phg: &'a Phg,
    order: WorklistOrder,
    grades: Vec<GradeSet>,
    activation: Vec<Activation>,
    /// Distinct unsaturated sources per operation edge.
    pending: Vec<usize>,
    /// Unfired producer count per node.
    unfired: Vec<usize>,
    fired: Vec<bool>,
    queue: VecDeque<Work>,
    trace: Vec<TraceStep>,
    diagnostics: Vec<GradeDiagnostic>,
    iterations: usize,
    initial_known: usize,
}

impl<'a> Saturator<'a> {
    fn new(phg: &'a Phg, order: WorklistOrder) -> Self {
        let n = phg.node_count();
        let m = phg.edge_count();
        Saturator {
            phg,
            order,
            grades: vec![GradeSet::Unknown; n],
            activation: vec![Activation::Fresh; n],
            pending: vec![0; m],
            unfired: vec![0; n],
            fired: vec![false; m],
            queue: VecDeque::new(),
            trace: Vec::new(),
            diagnostics: Vec::new(),
            iterations: 0,
            initial_known: 0,
        }
    }

    fn push(&mut self, w: Work) {
        match self.order {
            WorklistOrder::Fifo => self.queue.push_back(w),
            WorklistOrder::Lifo => self.queue.push_front(w),
        }
    }

    fn run(mut self) -> SaturationReport {
        for edge in self.phg.edges() {
            if !edge.kind.is_operation() {
                continue;
            }
            self.unfired[edge.target.0 as usize] += 1;
            let mut distinct: Vec<NodeId> = edge.sources.clone();
            distinct.sort_unstable();
            distinct.dedup();
            self.pending[edge.id.0 as usize] = distinct.len();
        }
        // seed: scalar nodes are grade {0}; input nodes take their declared
        // grades; produced nodes start unknown, their declarations are
        // checked against inference when their producers fire
        for node in self.phg.nodes() {
            let idx = node.id.0 as usize;
            let is_input = self.unfired[idx] == 0;
            self.grades[idx] = match node.kind {
                ValueKind::Scalar => GradeSet::singleton(0),
                ValueKind::Multivector if is_input => node.declared_grades,
                ValueKind::Multivector => GradeSet::Unknown,
            };
            if !self.grades[idx].is_unknown() {
                self.initial_known += 1;
            }
            // input nodes with complete declarations start saturated
            if is_input && !self.grades[idx].is_unknown() {
                self.push(Work::Node(node.id));
            }
        }

        while let Some(work) = self.queue.pop_front() {
            self.iterations += 1;
            match work {
                Work::Node(n) => self.saturate_node(n, true),
                Work::Edge(e) => self.fire(e),
            }
        }

        let mut stalled = Vec::new();
        for node in self.phg.nodes() {
            let idx = node.id.0 as usize;
            if self.activation[idx] != Activation::Saturated {
                stalled.push(StalledNode {
                    node: node.id,
                    reason: self.stall_reason(node.id),
                });
            }
        }

        let node_grades = self
            .phg
            .nodes()
            .iter()
            .map(|n| (n.id, self.grades[n.id.0 as usize]))
            .collect();
        let activation = self
            .phg
            .nodes()
            .iter()
            .map(|n| (n.id, self.activation[n.id.0 as usize]))
            .collect();
        SaturationReport {
            iterations: self.iterations,
            node_grades,
            activation,
            trace: self.trace,
            stalled,
            diagnostics: self.diagnostics,
            initial_known: self.initial_known,
        }
    }

    fn saturate_node(&mut self, n: NodeId, is_input: bool) {
        let idx = n.0 as usize;
        if self.activation[idx] == Activation::Saturated {
            return;
        }
        self.activation[idx] = Activation::Saturated;
        if is_input {
            self.trace.push(TraceStep::InputSaturated { node: n });
        }
        // release edges waiting on this node
        let waiting: Vec<EdgeId> = self.phg.consumers(n).map(|e| e.id).collect();
        for eid in waiting {
            if self.fired[eid.0 as usize] {
                continue;
            }
            let p = &mut self.pending[eid.0 as usize];
            *p = p.saturating_sub(1);
            if *p == 0 {
                self.push(Work::Edge(eid));
            }
        }
    }

    fn fire(&mut self, e: EdgeId) {
        let edge = self.phg.edge(e);
        let eidx = e.0 as usize;
        if self.fired[eidx] {
            return;
        }
        self.fired[eidx] = true;
        let inferred = self.infer(edge);
        let tidx = edge.target.0 as usize;
        let was_unknown = self.grades[tidx].is_unknown();

        if inferred.is_structural_zero() {
            self.diagnostics.push(GradeDiagnostic {
                node: edge.target,
                declared: self.phg.node(edge.target).declared_grades,
                inferred,
                severity: Severity::Warning,
                message: format!(
                    "provably zero computation: {} on `{}` vanishes by grade arithmetic",
                    edge.kind.name(),
                    self.phg.node(edge.target).name
                ),
            });
        }

        if was_unknown {
            self.grades[tidx] = inferred;
        } else if self.grades[tidx].is_disjoint(&inferred)
            && !self.grades[tidx].is_structural_zero()
            && !inferred.is_structural_zero()
        {
            // conflicting producers: keep the first-fired assignment
            self.diagnostics.push(GradeDiagnostic {
                node: edge.target,
                declared: self.grades[tidx],
                inferred,
                severity: Severity::Error,
                message: format!(
                    "edge {} infers grades {} for `{}` but an earlier assignment fixed {}",
                    e,
                    inferred,
                    self.phg.node(edge.target).name,
                    self.grades[tidx]
                ),
            });
        } else {
            // narrowing meet; never widens
            let met = self.grades[tidx].intersect(&inferred);
            if !met.is_unknown() {
                self.grades[tidx] = met;
            }
        }

        // declared-versus-inferred check on the target
        let declared = self.phg.node(edge.target).declared_grades;
        if !declared.is_unknown() && !inferred.is_unknown() {
            if let Some(d) = grade::check_grades(&declared, &inferred, edge.target) {
                self.diagnostics.push(d);
            }
        }

        if self.activation[tidx] < Activation::Elaborated {
            self.activation[tidx] = Activation::Elaborated;
        }
        self.unfired[tidx] -= 1;
        let target_saturated = self.unfired[tidx] == 0;
        self.trace.push(TraceStep::EdgeFired {
            edge: e,
            target: edge.target,
            inferred,
            target_saturated,
            newly_known: was_unknown && !self.grades[tidx].is_unknown(),
        });
        if target_saturated {
            self.saturate_node(edge.target, false);
        }
    }

    fn infer(&self, edge: &Hyperedge) -> GradeSet {
        let src = |i: usize| self.grades[edge.sources[i].0 as usize];
        if edge
            .sources
            .iter()
            .any(|s| self.grades[s.0 as usize].is_structural_zero())
        {
            return GradeSet::StructuralZero;
        }
        match &edge.kind {
            EdgeKind::Product(kind) => {
                let alg = self.phg.algebra.as_ref().expect("validated at insertion");
                grade::table_grades(alg, *kind, &src(0), &src(1))
            }
            EdgeKind::Sandwich => {
                let alg = self.phg.algebra.as_ref().expect("validated at insertion");
                let rx = grade::table_grades(alg, ProductKind::Gp, &src(0), &src(1));
                grade::table_grades(alg, ProductKind::Gp, &rx, &src(0))
            }
            EdgeKind::Join => {
                let alg = self.phg.algebra.as_ref().expect("validated at insertion");
                let mut acc = src(0);
                for i in 1..edge.sources.len() {
                    acc = grade::table_grades(alg, ProductKind::Outer, &acc, &src(i));
                }
                acc
            }
            EdgeKind::GradeSelect(k) => {
                let s = src(0);
                if s.is_unknown() {
                    GradeSet::Unknown
                } else if s.contains(*k) {
                    GradeSet::singleton(*k)
                } else {
                    GradeSet::StructuralZero
                }
            }
            EdgeKind::Norm(_) => GradeSet::singleton(0),
            // relational kinds never fire
            _ => GradeSet::Unknown,
        }
    }

    fn stall_reason(&self, n: NodeId) -> String {
        if self.phg.is_input(n) {
            return "input node without a complete grade declaration".to_string();
        }
        let waiting: Vec<String> = self
            .phg
            .producers(n)
            .filter(|e| !self.fired[e.id.0 as usize])
            .flat_map(|e| {
                e.sources
                    .iter()
                    .filter(|s| self.activation[s.0 as usize] != Activation::Saturated)
                    .map(|s| self.phg.node(*s).name.clone())
                    .collect::<Vec<_>>()
            })
            .collect();
        format!("waiting on unsaturated sources: {}", waiting.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Algebra, Signature};

    fn pga() -> AlgebraRef {
        Algebra::new(Signature::new(3, 0, 1)).unwrap()
    }

    fn triangle_phg() -> (Phg, [NodeId; 5], [EdgeId; 2]) {
        let mut phg = Phg::with_algebra(pga());
        let p1 = phg
            .add_node(NodeSpec::multivector("p1").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let p2 = phg
            .add_node(NodeSpec::multivector("p2").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let p3 = phg
            .add_node(NodeSpec::multivector("p3").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let face = phg.add_node(NodeSpec::multivector("face")).unwrap();
        let area = phg.add_node(NodeSpec::scalar("area")).unwrap();
        let join = phg
            .add_hyperedge(EdgeSpec::new(EdgeKind::Join, vec![p1, p2, p3], face))
            .unwrap();
        let norm = phg
            .add_hyperedge(EdgeSpec::new(
                EdgeKind::Norm(NormKind::SimplexContent),
                vec![face],
                area,
            ))
            .unwrap();
        (phg, [p1, p2, p3, face, area], [join, norm])
    }

    #[test]
    fn triangle_saturates_with_expected_grades() {
        let (phg, nodes, _) = triangle_phg();
        let report = phg.saturate();
        assert!(report.all_saturated());
        assert_eq!(report.grades(nodes[3]), GradeSet::singleton(3));
        assert_eq!(report.grades(nodes[4]), GradeSet::singleton(0));
        assert!(report.iterations <= phg.node_count() + phg.edge_count());
        // two firing rounds: join then norm
        let fired: Vec<_> = report
            .trace
            .iter()
            .filter(|s| matches!(s, TraceStep::EdgeFired { .. }))
            .collect();
        assert_eq!(fired.len(), 2);
    }

    #[test]
    fn validation_errors() {
        let mut phg = Phg::with_algebra(pga());
        let a = phg
            .add_node(NodeSpec::multivector("a").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let b = phg.add_node(NodeSpec::multivector("b")).unwrap();
        assert!(matches!(
            phg.add_node(NodeSpec::multivector("a")),
            Err(PhgError::DuplicateName(_))
        ));
        assert!(matches!(
            phg.add_hyperedge(EdgeSpec::new(EdgeKind::Join, vec![a, b], b)),
            Err(PhgError::CycleIntroduced { .. })
        ));
        assert!(matches!(
            phg.add_hyperedge(EdgeSpec::new(EdgeKind::Join, vec![a], b)),
            Err(PhgError::ArityMismatch { .. })
        ));
        assert!(matches!(
            phg.add_hyperedge(EdgeSpec::new(EdgeKind::Norm(NormKind::Metric), vec![NodeId(99)], b)),
            Err(PhgError::UnknownNode(_))
        ));
        // two-hop cycle
        let c = phg.add_node(NodeSpec::multivector("c")).unwrap();
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::Product(ProductKind::Gp), vec![a, b], c))
            .unwrap();
        assert!(matches!(
            phg.add_hyperedge(EdgeSpec::new(EdgeKind::Product(ProductKind::Gp), vec![c, a], b)),
            Err(PhgError::CycleIntroduced { .. })
        ));
    }

    #[test]
    fn undeclared_input_stalls_downstream_without_errors() {
        let mut phg = Phg::with_algebra(pga());
        let a = phg.add_node(NodeSpec::multivector("a")).unwrap(); // no grades
        let b = phg
            .add_node(NodeSpec::multivector("b").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let c = phg.add_node(NodeSpec::multivector("c")).unwrap();
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::Product(ProductKind::Gp), vec![a, b], c))
            .unwrap();
        let report = phg.saturate();
        assert_eq!(report.stalled.len(), 2);
        assert!(report.diagnostics.is_empty());
        assert_eq!(report.grades(c), GradeSet::Unknown);
        assert!(!report.is_saturated(c));
    }

    #[test]
    fn all_sources_rule_holds() {
        // one fresh source keeps the join target fresh, never partial
        let mut phg = Phg::with_algebra(pga());
        let a = phg
            .add_node(NodeSpec::multivector("a").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let b = phg.add_node(NodeSpec::multivector("b")).unwrap();
        let t = phg.add_node(NodeSpec::multivector("t")).unwrap();
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::Join, vec![a, b], t)).unwrap();
        let report = phg.saturate();
        assert_eq!(report.activation[&t], Activation::Fresh);
    }

    #[test]
    fn structural_zero_propagates_with_warning() {
        let mut phg = Phg::with_algebra(pga());
        let ids: Vec<NodeId> = (0..5)
            .map(|i| {
                phg.add_node(NodeSpec::multivector(format!("p{i}")).with_grades(GradeSet::singleton(1)))
                    .unwrap()
            })
            .collect();
        let over = phg.add_node(NodeSpec::multivector("over")).unwrap();
        let next = phg.add_node(NodeSpec::multivector("next")).unwrap();
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::Join, ids.clone(), over)).unwrap();
        phg.add_hyperedge(EdgeSpec::new(
            EdgeKind::Product(ProductKind::Gp),
            vec![over, ids[0]],
            next,
        ))
        .unwrap();
        let report = phg.saturate();
        assert!(report.grades(over).is_structural_zero());
        assert!(report.grades(next).is_structural_zero());
        let zero_warnings = report
            .diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Warning && d.message.contains("provably zero"))
            .count();
        assert_eq!(zero_warnings, 2);
    }

    #[test]
    fn conflicting_producers_keep_first_and_error() {
        let mut phg = Phg::with_algebra(pga());
        let a = phg
            .add_node(NodeSpec::multivector("a").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let b = phg
            .add_node(NodeSpec::multivector("b").with_grades(GradeSet::singleton(1)))
            .unwrap();
        let t = phg.add_node(NodeSpec::multivector("t")).unwrap();
        // outer infers {2}; select infers {1}: disjoint
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::Product(ProductKind::Outer), vec![a, b], t))
            .unwrap();
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::GradeSelect(1), vec![a], t)).unwrap();
        let report = phg.saturate();
        let errors: Vec<_> = report
            .diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        assert_eq!(errors.len(), 1);
        // whichever edge fired first wins; the later one is the error
        let first_inferred = report
            .trace
            .iter()
            .find_map(|s| match s {
                TraceStep::EdgeFired { inferred, .. } => Some(*inferred),
                _ => None,
            })
            .unwrap();
        assert_eq!(report.grades(t), first_inferred);
        assert!(report.is_saturated(t));
    }

    #[test]
    fn information_quality_strictly_increases_on_firings() {
        let (phg, _, _) = triangle_phg();
        let report = phg.saturate();
        let q = information_quality(&report);
        assert_eq!(q[0].0, 0);
        for w in q.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            assert!(w[1] > w[0], "each step must strictly increase: {w:?}");
        }

        let empty = Phg::new().saturate();
        assert_eq!(information_quality(&empty), vec![(0, 0)]);
    }

    #[test]
    fn confluence_under_worklist_orders() {
        let (phg, _, _) = triangle_phg();
        let fifo = phg.saturate_with_order(WorklistOrder::Fifo);
        let lifo = phg.saturate_with_order(WorklistOrder::Lifo);
        assert_eq!(fifo.node_grades, lifo.node_grades);
        assert_eq!(fifo.activation, lifo.activation);
    }

    #[test]
    fn binary_embedding_round_trips() {
        let mut phg = Phg::with_algebra(pga());
        let a = phg
            .add_node(NodeSpec::multivector("a").with_grades(GradeSet::from_grades([1, 3])))
            .unwrap();
        let b = phg.add_node(NodeSpec::multivector("b")).unwrap();
        let c = phg.add_node(NodeSpec::scalar("c")).unwrap();
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::GradeSelect(3), vec![a], b)).unwrap();
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::Norm(NormKind::Metric), vec![b], c))
            .unwrap();
        let view = phg.binary_view().expect("all edges unary");
        let rebuilt = Phg::from_binary(&phg, view).unwrap();
        let before = phg.saturate();
        let after = rebuilt.saturate();
        assert_eq!(before.node_grades, after.node_grades);
        assert_eq!(before.activation, after.activation);

        // a non-binary edge defeats the view
        let mut tri = triangle_phg().0;
        assert!(tri.binary_view().is_none());
        let d = tri.add_node(NodeSpec::multivector("d")).unwrap();
        let _ = d;
    }
}
