//! Program evaluation and forward-mode directional derivatives.
//!
//! Evaluation walks the operation hyperedges in topological order, holding
//! only the live frontier: a node's value is dropped as soon as its last
//! consumer has run, so peak auxiliary storage tracks graph width, not
//! program length. Derivatives run the same single forward pass over
//! primal/tangent pairs (dual multivectors) with the product rule on every
//! bilinear kind; there is no tape.
//!
//! Inner-product reductions (the scalar part of norm derivatives)
//! accumulate through [`ExactAccumulator`]: exact rational addition in
//! exact mode, Neumaier-compensated summation in float mode, rounded once
//! at extraction.

use std::collections::BTreeMap;
use std::fmt;

use num::rational::BigRational;
use num::Zero;

use crate::algebra::{AlgebraError, Blade, Multivector, ProductKind};
use crate::kernel::{self, KernelError};
use crate::phg::{EdgeKind, NodeId, NormKind, Phg, SaturationReport};
use crate::scalar::{Mode, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    UnboundInput(NodeId),
    StalledGraph(NodeId),
    /// Derivative of a norm at exactly zero is undefined.
    NormAtZero(NodeId),
    /// Exact mode cannot represent an irrational norm.
    ExactNormIrrational(NodeId),
    MixedGradeContent(NodeId),
    ModeMismatch,
    Algebra(AlgebraError),
    Kernel(KernelError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnboundInput(n) => write!(f, "input node {n} has no bound value"),
            EvalError::StalledGraph(n) => {
                write!(f, "node {n} did not saturate; run check before eval")
            }
            EvalError::NormAtZero(n) => write!(f, "derivative of norm at zero, node {n}"),
            EvalError::ExactNormIrrational(n) => {
                write!(f, "norm of node {n} is irrational; not representable in exact mode")
            }
            EvalError::MixedGradeContent(n) => {
                write!(f, "simplex content of node {n} needs a single-grade join value")
            }
            EvalError::ModeMismatch => write!(f, "bound values mix numeric modes"),
            EvalError::Algebra(e) => write!(f, "{e}"),
            EvalError::Kernel(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<AlgebraError> for EvalError {
    fn from(e: AlgebraError) -> Self {
        EvalError::Algebra(e)
    }
}

impl From<KernelError> for EvalError {
    fn from(e: KernelError) -> Self {
        EvalError::Kernel(e)
    }
}

/// Which product implementation the evaluator uses. Both must agree
/// exactly; the kernel route specializes each product to the operand
/// grades it actually sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Dense,
    Kernels,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions {
    pub backend: Backend,
}

/// Frontier instrumentation: how many node values were ever alive at once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub peak_live: usize,
    pub evaluated_edges: usize,
}

/// A multivector with a tangent component riding along.
#[derive(Clone, Debug, PartialEq)]
pub struct DualMultivector {
    pub primal: Multivector,
    pub tangent: Multivector,
}

impl DualMultivector {
    pub fn new(primal: Multivector, tangent: Multivector) -> Self {
        debug_assert_eq!(primal.algebra().signature(), tangent.algebra().signature());
        DualMultivector { primal, tangent }
    }

    pub fn constant(primal: Multivector) -> Self {
        let tangent = Multivector::zero(primal.algebra().clone(), primal.mode());
        DualMultivector { primal, tangent }
    }
}

/// Quire-style accumulator: mathematically exact in rational mode, rounded
/// once at extraction; Neumaier-compensated two-term summation in float
/// mode.
#[derive(Clone, Debug)]
pub enum ExactAccumulator {
    Float { sum: f64, compensation: f64, terms: usize },
    Exact { sum: BigRational, terms: usize },
}

impl ExactAccumulator {
    pub fn new(mode: Mode) -> Self {
        match mode {
            Mode::Float64 => ExactAccumulator::Float {
                sum: 0.0,
                compensation: 0.0,
                terms: 0,
            },
            Mode::ExactRational => ExactAccumulator::Exact {
                sum: BigRational::zero(),
                terms: 0,
            },
        }
    }

    pub fn add(&mut self, term: &Scalar) {
        match (self, term) {
            (ExactAccumulator::Float { sum, compensation, terms }, Scalar::F64(t)) => {
                let s = *sum + t;
                if sum.abs() >= t.abs() {
                    *compensation += (*sum - s) + t;
                } else {
                    *compensation += (t - s) + *sum;
                }
                *sum = s;
                *terms += 1;
            }
            (ExactAccumulator::Exact { sum, terms }, Scalar::Rational(t)) => {
                *sum += t;
                *terms += 1;
            }
            _ => panic!("accumulator mode mismatch"),
        }
    }

    /// Fused product accumulation a*b.
    pub fn add_product(&mut self, a: &Scalar, b: &Scalar) {
        self.add(&a.mul(b));
    }

    pub fn term_count(&self) -> usize {
        match self {
            ExactAccumulator::Float { terms, .. } => *terms,
            ExactAccumulator::Exact { terms, .. } => *terms,
        }
    }

    /// Extract the total; the single rounding point in float mode.
    pub fn total(&self) -> Scalar {
        match self {
            ExactAccumulator::Float { sum, compensation, .. } => Scalar::F64(sum + compensation),
            ExactAccumulator::Exact { sum, .. } => Scalar::Rational(sum.clone()),
        }
    }
}

/// Sum a term list through the accumulator.
pub fn accumulate(mode: Mode, terms: &[Scalar]) -> Scalar {
    let mut acc = ExactAccumulator::new(mode);
    for t in terms {
        acc.add(t);
    }
    acc.total()
}

/// Evaluate the program over the bound inputs, returning values for the
/// requested nodes (default: every sink). See [`eval_with_stats`].
pub fn eval(
    phg: &Phg,
    report: &SaturationReport,
    inputs: &BTreeMap<NodeId, Multivector>,
    outputs: Option<&[NodeId]>,
) -> Result<BTreeMap<NodeId, Multivector>, EvalError> {
    eval_with_stats(phg, report, inputs, outputs, EvalOptions::default()).map(|(v, _)| v)
}

pub fn eval_with_stats(
    phg: &Phg,
    report: &SaturationReport,
    inputs: &BTreeMap<NodeId, Multivector>,
    outputs: Option<&[NodeId]>,
    opts: EvalOptions,
) -> Result<(BTreeMap<NodeId, Multivector>, EvalStats), EvalError> {
    let duals: BTreeMap<NodeId, DualMultivector> = inputs
        .iter()
        .map(|(k, v)| (*k, DualMultivector::constant(v.clone())))
        .collect();
    let (vals, stats) = forward_pass(phg, report, &duals, outputs, opts, false)?;
    Ok((vals.into_iter().map(|(k, d)| (k, d.primal)).collect(), stats))
}

/// Forward-mode directional derivative: evaluates primal and tangent in one
/// pass. `direction` binds tangents for differentiated inputs; unlisted
/// inputs get a zero tangent. Returns the tangent values at the requested
/// nodes.
pub fn directional_derivative(
    phg: &Phg,
    report: &SaturationReport,
    inputs: &BTreeMap<NodeId, Multivector>,
    direction: &BTreeMap<NodeId, Multivector>,
    outputs: Option<&[NodeId]>,
) -> Result<BTreeMap<NodeId, Multivector>, EvalError> {
    let mut duals = BTreeMap::new();
    for (k, v) in inputs {
        let tangent = direction
            .get(k)
            .cloned()
            .unwrap_or_else(|| Multivector::zero(v.algebra().clone(), v.mode()));
        duals.insert(*k, DualMultivector::new(v.clone(), tangent));
    }
    let (vals, _) = forward_pass(phg, report, &duals, outputs, EvalOptions::default(), true)?;
    Ok(vals.into_iter().map(|(k, d)| (k, d.tangent)).collect())
}

/// Sink nodes: targets that no operation edge consumes.
pub fn sink_nodes(phg: &Phg) -> Vec<NodeId> {
    phg.nodes()
        .iter()
        .map(|n| n.id)
        .filter(|id| {
            !phg.edges()
                .iter()
                .any(|e| e.kind.is_operation() && e.sources.contains(id))
        })
        .filter(|id| !phg.is_input(*id))
        .collect()
}

fn forward_pass(
    phg: &Phg,
    report: &SaturationReport,
    inputs: &BTreeMap<NodeId, DualMultivector>,
    outputs: Option<&[NodeId]>,
    opts: EvalOptions,
    with_tangent: bool,
) -> Result<(BTreeMap<NodeId, DualMultivector>, EvalStats), EvalError> {
    let requested: Vec<NodeId> = match outputs {
        Some(o) => o.to_vec(),
        None => sink_nodes(phg),
    };

    // only the backward closure of the requested outputs is evaluated
    let mut needed: Vec<NodeId> = requested.clone();
    let mut frontier = requested.clone();
    while let Some(n) = frontier.pop() {
        for e in phg.edges().iter().filter(|e| e.kind.is_operation()) {
            if e.target == n {
                for s in &e.sources {
                    if !needed.contains(s) {
                        needed.push(*s);
                        frontier.push(*s);
                    }
                }
            }
        }
    }
    let live_edges: Vec<&crate::phg::Hyperedge> = phg
        .edges()
        .iter()
        .filter(|e| e.kind.is_operation() && needed.contains(&e.target))
        .collect();

    // live-set accounting: consumers per node = occurrences in live edges,
    // with requested outputs pinned
    let mut refcount: BTreeMap<NodeId, usize> = BTreeMap::new();
    for e in &live_edges {
        for s in &e.sources {
            *refcount.entry(*s).or_insert(0) += 1;
        }
    }
    let pinned: Vec<NodeId> = requested.clone();

    let mut values: BTreeMap<NodeId, DualMultivector> = BTreeMap::new();
    let mut results: BTreeMap<NodeId, DualMultivector> = BTreeMap::new();
    let mut stats = EvalStats::default();

    for node in phg.nodes() {
        if phg.is_input(node.id) && needed.contains(&node.id) {
            if let Some(v) = inputs.get(&node.id) {
                values.insert(node.id, v.clone());
            }
        }
    }
    stats.peak_live = values.len();

    // topological order over operation edges: repeatedly run edges whose
    // sources are available (the graph is a DAG by construction)
    let mut pending = live_edges;
    // order by readiness; a simple fixpoint keeps insertion order stable
    while !pending.is_empty() {
        let mut progressed = false;
        let mut next_round = Vec::new();
        for edge in pending {
            let ready = edge.sources.iter().all(|s| values.contains_key(s));
            if !ready {
                next_round.push(edge);
                continue;
            }
            progressed = true;
            if !report.is_saturated(edge.target) {
                return Err(EvalError::StalledGraph(edge.target));
            }
            let operands: Vec<DualMultivector> = edge
                .sources
                .iter()
                .map(|s| values[s].clone())
                .collect();
            let out = apply_edge(edge, &operands, opts, with_tangent)?;
            values.insert(edge.target, out);
            stats.evaluated_edges += 1;
            // release operands whose last consumer just ran
            for s in &edge.sources {
                let rc = refcount.get_mut(s).expect("counted above");
                *rc -= 1;
                if *rc == 0 && !pinned.contains(s) {
                    if let Some(v) = values.remove(s) {
                        if requested.contains(s) {
                            results.insert(*s, v);
                        }
                    }
                }
            }
            stats.peak_live = stats.peak_live.max(values.len());
        }
        if !progressed {
            // some source never becomes available: find the culprit
            let missing = next_round
                .iter()
                .flat_map(|e| e.sources.iter())
                .find(|s| !values.contains_key(s) && phg.is_input(**s))
                .copied();
            return Err(match missing {
                Some(n) => EvalError::UnboundInput(n),
                None => EvalError::StalledGraph(next_round[0].target),
            });
        }
        pending = next_round;
    }

    for id in &requested {
        if let Some(v) = values.get(id).or_else(|| results.get(id)) {
            results.insert(*id, v.clone());
        } else if phg.is_input(*id) {
            return Err(EvalError::UnboundInput(*id));
        } else {
            return Err(EvalError::StalledGraph(*id));
        }
    }
    results.retain(|k, _| requested.contains(k));
    Ok((results, stats))
}

fn product_of(
    kind: ProductKind,
    x: &Multivector,
    y: &Multivector,
    opts: EvalOptions,
) -> Result<Multivector, EvalError> {
    match opts.backend {
        Backend::Dense => Ok(Multivector::product(kind, x, y)?),
        Backend::Kernels => {
            if x.is_zero() || y.is_zero() {
                return Ok(Multivector::zero(x.algebra().clone(), x.mode()));
            }
            let p = crate::grade::GradeSet::from_grades(x.grades());
            let q = crate::grade::GradeSet::from_grades(y.grades());
            match kernel::emit_kernel(x.algebra(), kind, &p, &q) {
                Ok(kir) => Ok(kernel::run_kernel_on_multivectors(&kir, x, y)?),
                Err(KernelError::StructuralZeroKernel) => {
                    Ok(Multivector::zero(x.algebra().clone(), x.mode()))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn bilinear(
    kind: ProductKind,
    x: &DualMultivector,
    y: &DualMultivector,
    opts: EvalOptions,
    with_tangent: bool,
) -> Result<DualMultivector, EvalError> {
    let primal = product_of(kind, &x.primal, &y.primal, opts)?;
    let tangent = if with_tangent {
        product_of(kind, &x.tangent, &y.primal, opts)?
            .add(&product_of(kind, &x.primal, &y.tangent, opts)?)?
    } else {
        Multivector::zero(primal.algebra().clone(), primal.mode())
    };
    Ok(DualMultivector { primal, tangent })
}

fn apply_edge(
    edge: &crate::phg::Hyperedge,
    operands: &[DualMultivector],
    opts: EvalOptions,
    with_tangent: bool,
) -> Result<DualMultivector, EvalError> {
    match &edge.kind {
        EdgeKind::Product(kind) => bilinear(*kind, &operands[0], &operands[1], opts, with_tangent),
        EdgeKind::Sandwich => {
            // r x ~r: product rule over all three factors
            let r = &operands[0];
            let x = &operands[1];
            let rx = bilinear(ProductKind::Gp, r, x, opts, with_tangent)?;
            let rrev = DualMultivector {
                primal: r.primal.reverse(),
                tangent: r.tangent.reverse(),
            };
            bilinear(ProductKind::Gp, &rx, &rrev, opts, with_tangent)
        }
        EdgeKind::Join => {
            let mut acc = operands[0].clone();
            for rhs in &operands[1..] {
                acc = bilinear(ProductKind::Outer, &acc, rhs, opts, with_tangent)?;
            }
            Ok(acc)
        }
        EdgeKind::GradeSelect(k) => Ok(DualMultivector {
            primal: operands[0].primal.grade_project(*k)?,
            tangent: operands[0].tangent.grade_project(*k)?,
        }),
        EdgeKind::Norm(nk) => norm_edge(edge.target, *nk, &operands[0], with_tangent),
        _ => unreachable!("relational edges are filtered out of evaluation"),
    }
}

/// Norm evaluation plus derivative. With s the (signed) squared norm and
/// n = sqrt(|s|), the tangent is d|s| / (2 n); ds itself is a dot product
/// of coefficients and runs through the exact accumulator.
fn norm_edge(
    target: NodeId,
    kind: NormKind,
    x: &DualMultivector,
    with_tangent: bool,
) -> Result<DualMultivector, EvalError> {
    let mv = &x.primal;
    let alg = mv.algebra().clone();
    let mode = mv.mode();

    // signed squared norm and the blade weights that define it
    let (s, weight): (Scalar, Box<dyn Fn(Blade) -> i64>) = match kind {
        NormKind::Metric => {
            let s = mv
                .gp(&mv.reverse())?
                .coeff(Blade::SCALAR);
            let alg2 = alg.clone();
            let w = move |b: Blade| -> i64 {
                // scalar coefficient of b * reverse(b)
                let k = b.grade();
                let rev = if (k * k.saturating_sub(1) / 2) % 2 == 1 { -1i64 } else { 1 };
                let e = alg2.blade_product(b, b);
                if e.blade == Blade::SCALAR {
                    rev * e.sign as i64
                } else {
                    0
                }
            };
            (s, Box::new(w))
        }
        NormKind::Ideal | NormKind::SimplexContent => {
            if alg.signature().r == 0 {
                return Err(EvalError::Kernel(KernelError::InvalidGrades(
                    "ideal norm needs a degenerate generator".into(),
                )));
            }
            let mut acc = ExactAccumulator::new(mode);
            for (b, c) in mv.coeffs() {
                if b.contains_generator(0) {
                    acc.add_product(c, c);
                }
            }
            let w = |b: Blade| -> i64 {
                if b.contains_generator(0) {
                    1
                } else {
                    0
                }
            };
            (acc.total(), Box::new(w))
        }
    };

    let scale = match kind {
        NormKind::SimplexContent => {
            let grades = mv.grades();
            if grades.len() > 1 {
                return Err(EvalError::MixedGradeContent(target));
            }
            let order = grades.first().copied().unwrap_or(1).saturating_sub(1);
            let f: i64 = (1..=order as i64).product();
            f.max(1)
        }
        _ => 1,
    };

    let abs_s = s.abs();
    let n_float = abs_s.to_f64().sqrt() / scale as f64;
    let primal_scalar = match mode {
        Mode::Float64 => Scalar::F64(n_float),
        Mode::ExactRational => {
            let root = abs_s
                .sqrt_exact()
                .ok_or(EvalError::ExactNormIrrational(target))?;
            root.div(&Scalar::from_i64(mode, scale)).expect("scale nonzero")
        }
    };
    let primal = Multivector::scalar(alg.clone(), primal_scalar.clone());

    let tangent = if with_tangent {
        if primal_scalar.is_zero() {
            if x.tangent.is_zero() {
                Multivector::zero(alg.clone(), mode)
            } else {
                return Err(EvalError::NormAtZero(target));
            }
        } else {
            // ds = 2 sum_b w_b c_b dc_b, accumulated exactly
            let mut acc = ExactAccumulator::new(mode);
            for (b, c) in mv.coeffs() {
                let w = weight(b);
                if w != 0 {
                    acc.add_product(&c.scale_i64(2 * w), &x.tangent.coeff(b));
                }
            }
            let ds = acc.total();
            let dabs = if s.to_f64() < 0.0 { ds.neg() } else { ds };
            // d(sqrt(|s|)/scale) = d|s| / (2 scale^2 n)
            let denom = primal_scalar.scale_i64(2 * scale * scale);
            let dn = dabs.div(&denom).expect("norm nonzero here");
            Multivector::scalar(alg.clone(), dn)
        }
    } else {
        Multivector::zero(alg.clone(), mode)
    };
    Ok(DualMultivector { primal, tangent })
}
