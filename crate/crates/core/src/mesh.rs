//! Simplicial mesh structure over the hypergraph: k-simplices as join
//! hyperedges of grade-1 points, boundary sharing as explicit three-way
//! relations, and exact (threshold-free) incidence and orientation
//! predicates via the regressive product in rational mode.
//!
//! Point convention: vertices are grade-1 with the homogeneous embedding
//! e0 + x e1 + y e2 + z e3, so a k-simplex join has grade k+1. The dual
//! ("points are grade d-1") convention is the complement picture of the
//! same arithmetic and is not used here.

use std::collections::BTreeMap;
use std::fmt;

use crate::algebra::{AlgebraError, AlgebraRef, Blade, Multivector};
use crate::phg::{EdgeId, EdgeKind, EdgeSpec, NodeId, NodeSpec, Phg, PhgError};
use crate::grade::GradeSet;
use crate::scalar::{parse_rational, Mode, Scalar};

/// Edge-kind payload tag for boundary-sharing relations: a hyperedge
/// ({F1, F2} -> E) with this tag asserts E is the faces' shared boundary.
pub const BOUNDARY_TAG: &str = "boundary";

/// A simplex target node plus its construction data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplexNode {
    pub node: NodeId,
    /// Simplex order k; the join of k+1 vertices.
    pub order: usize,
    pub vertices: Vec<NodeId>,
    pub join_edge: EdgeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeshError {
    DuplicateVertex(NodeId),
    GradeMismatch { node: NodeId, expected: usize },
    TooManyVertices { got: usize, dim: usize },
    TooFewVertices,
    ModeError(&'static str),
    WrongGrades(String),
    Phg(String),
    Algebra(AlgebraError),
}

impl fmt::Display for MeshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshError::DuplicateVertex(n) => write!(f, "duplicate vertex {n}"),
            MeshError::GradeMismatch { node, expected } => {
                write!(f, "vertex {node} must be declared grade {{{expected}}}")
            }
            MeshError::TooManyVertices { got, dim } => {
                write!(f, "{got} vertices exceed algebra dimension {dim}")
            }
            MeshError::TooFewVertices => write!(f, "a simplex needs at least 2 vertices"),
            MeshError::ModeError(msg) => write!(f, "exact-rational mode required: {msg}"),
            MeshError::WrongGrades(msg) => write!(f, "{msg}"),
            MeshError::Phg(msg) => write!(f, "{msg}"),
            MeshError::Algebra(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MeshError {}

impl From<PhgError> for MeshError {
    fn from(e: PhgError) -> Self {
        MeshError::Phg(e.to_string())
    }
}

impl From<AlgebraError> for MeshError {
    fn from(e: AlgebraError) -> Self {
        MeshError::Algebra(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum MeshDiagnosticKind {
    MissingBoundary,
    TJunction,
    DegenerateSimplex,
    NonManifoldEdge,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct MeshDiagnostic {
    pub kind: MeshDiagnosticKind,
    pub nodes: Vec<NodeId>,
    pub message: String,
}

/// Add a simplex: a named target node plus the join hyperedge over the
/// vertex nodes. Vertices must be distinct, declared grade-{1} multivector
/// nodes; at most d of them join to a non-zero result.
pub fn build_simplex(
    phg: &mut Phg,
    name: &str,
    vertices: &[NodeId],
) -> Result<SimplexNode, MeshError> {
    let alg = phg.algebra.clone().ok_or(MeshError::Phg("no algebra configured".into()))?;
    if vertices.len() < 2 {
        return Err(MeshError::TooFewVertices);
    }
    if vertices.len() > alg.dim() {
        return Err(MeshError::TooManyVertices {
            got: vertices.len(),
            dim: alg.dim(),
        });
    }
    let mut seen = Vec::new();
    for &v in vertices {
        if seen.contains(&v) {
            return Err(MeshError::DuplicateVertex(v));
        }
        seen.push(v);
        if phg.node(v).declared_grades != GradeSet::singleton(1) {
            return Err(MeshError::GradeMismatch { node: v, expected: 1 });
        }
    }
    let node = phg.add_node(
        NodeSpec::multivector(name).with_grades(GradeSet::singleton(vertices.len())),
    )?;
    let join_edge = phg.add_hyperedge(EdgeSpec::new(EdgeKind::Join, vertices.to_vec(), node))?;
    Ok(SimplexNode {
        node,
        order: vertices.len() - 1,
        vertices: vertices.to_vec(),
        join_edge,
    })
}

/// Record that edge-simplex `shared` is the common boundary of `f1` and
/// `f2`, as a single three-member relation. The shared vertex-set invariant
/// is checked here.
pub fn add_boundary_constraint(
    phg: &mut Phg,
    f1: &SimplexNode,
    f2: &SimplexNode,
    shared: &SimplexNode,
) -> Result<EdgeId, MeshError> {
    let mut expect: Vec<NodeId> = f1
        .vertices
        .iter()
        .copied()
        .filter(|v| f2.vertices.contains(v))
        .collect();
    expect.sort_unstable();
    let mut got = shared.vertices.clone();
    got.sort_unstable();
    if expect != got {
        return Err(MeshError::Phg(format!(
            "shared simplex {} is not the vertex intersection of {} and {}",
            shared.node, f1.node, f2.node
        )));
    }
    Ok(phg.add_hyperedge(EdgeSpec::new(
        EdgeKind::Custom(BOUNDARY_TAG.to_string()),
        vec![f1.node, f2.node],
        shared.node,
    ))?)
}

/// Scan a mesh for boundary defects. Identity decisions are structural
/// (node ids); coefficients are consulted only to classify duplicate edge
/// nodes as T-junctions and exactly-zero joins as degenerate (exact mode).
///
/// Diagnostics, in order: per face pair sharing >= 2 vertices, a missing
/// shared edge node or missing boundary relation is `MissingBoundary`; an
/// edge-simplex vertex set shared by > 2 faces is `NonManifoldEdge`;
/// distinct edge nodes with exactly equal values are `TJunction`; simplex
/// values that are exactly zero are `DegenerateSimplex`.
pub fn check_boundary_consistency(
    phg: &Phg,
    simplices: &[SimplexNode],
    values: &BTreeMap<NodeId, Multivector>,
) -> Vec<MeshDiagnostic> {
    let mut out = Vec::new();
    let faces: Vec<&SimplexNode> = simplices.iter().filter(|s| s.order >= 2).collect();
    let edges: Vec<&SimplexNode> = simplices.iter().filter(|s| s.order == 1).collect();

    let boundary_edges: Vec<(NodeId, NodeId, NodeId)> = phg
        .edges()
        .iter()
        .filter(|e| matches!(&e.kind, EdgeKind::Custom(tag) if tag == BOUNDARY_TAG))
        .filter(|e| e.sources.len() == 2)
        .map(|e| (e.sources[0], e.sources[1], e.target))
        .collect();

    for i in 0..faces.len() {
        for j in (i + 1)..faces.len() {
            let (f1, f2) = (faces[i], faces[j]);
            let mut shared: Vec<NodeId> = f1
                .vertices
                .iter()
                .copied()
                .filter(|v| f2.vertices.contains(v))
                .collect();
            shared.sort_unstable();
            if shared.len() < 2 {
                continue;
            }
            let edge_nodes: Vec<&&SimplexNode> = edges
                .iter()
                .filter(|e| {
                    let mut vs = e.vertices.clone();
                    vs.sort_unstable();
                    vs == shared
                })
                .collect();
            if edge_nodes.is_empty() {
                out.push(MeshDiagnostic {
                    kind: MeshDiagnosticKind::MissingBoundary,
                    nodes: vec![f1.node, f2.node],
                    message: format!(
                        "faces `{}` and `{}` share vertices but no edge node exists",
                        phg.node(f1.node).name,
                        phg.node(f2.node).name
                    ),
                });
                continue;
            }
            let related = edge_nodes.iter().any(|e| {
                boundary_edges.iter().any(|(a, b, t)| {
                    *t == e.node
                        && ((*a == f1.node && *b == f2.node) || (*a == f2.node && *b == f1.node))
                })
            });
            if !related {
                out.push(MeshDiagnostic {
                    kind: MeshDiagnosticKind::MissingBoundary,
                    nodes: vec![f1.node, f2.node, edge_nodes[0].node],
                    message: format!(
                        "faces `{}` and `{}` share an edge node but no boundary relation records it",
                        phg.node(f1.node).name,
                        phg.node(f2.node).name
                    ),
                });
            }
        }
    }

    // an edge vertex set on more than two faces is non-manifold
    for e in &edges {
        let mut vs = e.vertices.clone();
        vs.sort_unstable();
        let touching = faces
            .iter()
            .filter(|f| vs.iter().all(|v| f.vertices.contains(v)))
            .count();
        if touching > 2 {
            out.push(MeshDiagnostic {
                kind: MeshDiagnosticKind::NonManifoldEdge,
                nodes: vec![e.node],
                message: format!(
                    "edge `{}` is shared by {touching} faces",
                    phg.node(e.node).name
                ),
            });
        }
    }

    // duplicate edge nodes: distinct ids, exactly equal coefficients
    for i in 0..edges.len() {
        for j in (i + 1)..edges.len() {
            let (a, b) = (edges[i], edges[j]);
            if let (Some(va), Some(vb)) = (values.get(&a.node), values.get(&b.node)) {
                if !va.is_zero() && va == vb {
                    out.push(MeshDiagnostic {
                        kind: MeshDiagnosticKind::TJunction,
                        nodes: vec![a.node, b.node],
                        message: format!(
                            "edges `{}` and `{}` are distinct nodes with identical coefficients",
                            phg.node(a.node).name,
                            phg.node(b.node).name
                        ),
                    });
                }
            }
        }
    }

    for s in simplices {
        if let Some(v) = values.get(&s.node) {
            if v.is_zero() {
                out.push(MeshDiagnostic {
                    kind: MeshDiagnosticKind::DegenerateSimplex,
                    nodes: vec![s.node],
                    message: format!(
                        "simplex `{}` joins to exactly zero",
                        phg.node(s.node).name
                    ),
                });
            }
        }
    }
    out
}

fn require_exact(mv: &Multivector, what: &'static str) -> Result<(), MeshError> {
    if mv.mode() != Mode::ExactRational {
        return Err(MeshError::ModeError(what));
    }
    Ok(())
}

/// Exact incidence: true iff the regressive product vanishes identically.
/// For a grade-1 point against a grade-3 plane in PGA this is the scalar
/// pairing, and it is zero exactly when the point lies on the plane; no
/// threshold is involved. Refuses float mode.
pub fn incidence(x: &Multivector, y: &Multivector) -> Result<bool, MeshError> {
    require_exact(x, "incidence is an exact predicate; use incidence_float to opt into a tolerance")?;
    require_exact(y, "incidence is an exact predicate; use incidence_float to opt into a tolerance")?;
    Ok(x.regressive(y)?.is_zero())
}

/// Tolerance-based float variant, explicitly separate from the exact
/// predicate.
pub fn incidence_float(x: &Multivector, y: &Multivector, tol: f64) -> Result<bool, MeshError> {
    let r = x.regressive(y)?;
    let within = r.coeffs().all(|(_, c)| c.to_f64().abs() <= tol);
    Ok(within)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Orientation {
    On,
    Positive,
    Negative,
}

/// Side-of-plane orientation of a grade-1 point against a grade-3 plane:
/// the sign of the scalar regressive pairing regressive(plane, point),
/// positive on the side the plane's construction order induces. Invariant
/// under positive rescaling of the point's homogeneous coordinate.
pub fn orientation(point: &Multivector, plane: &Multivector) -> Result<Orientation, MeshError> {
    require_exact(point, "orientation is an exact predicate")?;
    require_exact(plane, "orientation is an exact predicate")?;
    if point.grades() != vec![1] || plane.grades() != vec![3] {
        return Err(MeshError::WrongGrades(format!(
            "orientation expects grade-1 point and grade-3 plane, got {:?} and {:?}",
            point.grades(),
            plane.grades()
        )));
    }
    let pairing = plane.regressive(point)?.coeff(Blade::SCALAR);
    if pairing.is_zero() {
        return Ok(Orientation::On);
    }
    Ok(if pairing.to_f64() > 0.0 {
        Orientation::Positive
    } else {
        Orientation::Negative
    })
}

/// A homogeneous PGA point e0 + x e1 + y e2 + z e3 from rational
/// coordinates.
pub fn pga_point(alg: &AlgebraRef, coords: &[Scalar]) -> Result<Multivector, MeshError> {
    let mut coeffs = vec![(Blade(1), Scalar::one(coords.first().map(|c| c.mode()).unwrap_or(Mode::ExactRational)))];
    for (i, c) in coords.iter().enumerate() {
        coeffs.push((Blade(1 << (i + 1)), c.clone()));
    }
    Ok(Multivector::from_coeffs(alg.clone(), coeffs[0].1.mode(), coeffs)?)
}

/// Measure of a k-simplex join: the Euclidean norm of the coefficients on
/// blades containing the degenerate generator, divided by k!. For a
/// triangle join (grade 3) this is half the parallelogram area. Exact mode
/// returns an exact rational when the squared content is a perfect square.
pub fn simplex_content(join: &Multivector, order: usize) -> Result<Scalar, MeshError> {
    let alg = join.algebra();
    if alg.signature().r != 1 {
        return Err(MeshError::WrongGrades(
            "simplex content needs one degenerate generator".to_string(),
        ));
    }
    let mut sumsq = Scalar::zero(join.mode());
    for (b, c) in join.coeffs() {
        if b.contains_generator(0) {
            sumsq = sumsq.add(&c.mul(c));
        }
    }
    let factorial: i64 = (1..=order as i64).product();
    match join.mode() {
        Mode::Float64 => Ok(Scalar::F64(sumsq.to_f64().sqrt() / factorial as f64)),
        Mode::ExactRational => {
            let root = sumsq.sqrt_exact().ok_or(MeshError::ModeError(
                "squared content is not a perfect square; no exact root exists",
            ))?;
            Ok(root
                .div(&Scalar::from_i64(Mode::ExactRational, factorial))
                .expect("factorial nonzero"))
        }
    }
}

/// Parsed flat mesh: vertex coordinate rows plus face index triples.
#[derive(Clone, Debug, Default)]
pub struct IndexedMesh {
    pub vertices: Vec<[Scalar; 3]>,
    pub faces: Vec<[usize; 3]>,
}

/// Parse the flat text form: `v x y z` rows (rational or decimal
/// coordinates) and `f i j k` rows (zero-based vertex indices), `#`
/// comments.
pub fn parse_indexed_mesh(text: &str) -> Result<IndexedMesh, String> {
    let mut mesh = IndexedMesh::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap();
        let rest: Vec<&str> = parts.collect();
        match tag {
            "v" => {
                if rest.len() != 3 {
                    return Err(format!("line {}: `v` needs 3 coordinates", lineno + 1));
                }
                let mut coords = Vec::with_capacity(3);
                for r in &rest {
                    let c = parse_rational(r).map_err(|e| format!("line {}: {e}", lineno + 1))?;
                    coords.push(Scalar::Rational(c));
                }
                mesh.vertices
                    .push([coords[0].clone(), coords[1].clone(), coords[2].clone()]);
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(format!("line {}: `f` needs 3 vertex indices", lineno + 1));
                }
                let mut idx = [0usize; 3];
                for (i, r) in rest.iter().enumerate() {
                    idx[i] = r
                        .parse::<usize>()
                        .map_err(|e| format!("line {}: bad index `{r}`: {e}", lineno + 1))?;
                }
                mesh.faces.push(idx);
            }
            other => return Err(format!("line {}: unknown row tag `{other}`", lineno + 1)),
        }
    }
    for f in &mesh.faces {
        for &i in f {
            if i >= mesh.vertices.len() {
                return Err(format!("face index {i} out of range"));
            }
        }
    }
    Ok(mesh)
}

/// Build a PGA hypergraph from an indexed triangle list: one grade-1 node
/// per vertex, one edge simplex per shared face side (single node per
/// vertex pair), one face simplex per triangle, and a boundary relation for
/// every face pair around a shared edge. Returns the graph, the simplex
/// table, and exact vertex values for evaluation.
pub fn import_indexed_mesh(
    alg: &AlgebraRef,
    mesh: &IndexedMesh,
) -> Result<(Phg, Vec<SimplexNode>, BTreeMap<NodeId, Multivector>), MeshError> {
    let mut phg = Phg::with_algebra(alg.clone());
    let mut values = BTreeMap::new();
    let mut vertex_nodes = Vec::with_capacity(mesh.vertices.len());
    for (i, coords) in mesh.vertices.iter().enumerate() {
        let id = phg.add_node(
            NodeSpec::multivector(format!("v{i}")).with_grades(GradeSet::singleton(1)),
        )?;
        vertex_nodes.push(id);
        values.insert(id, pga_point(alg, coords.as_slice())?);
    }
    let mut simplices = Vec::new();
    let mut edge_by_pair: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut faces_by_edge: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])] {
            let key = (a.min(b), a.max(b));
            if !edge_by_pair.contains_key(&key) {
                let s = build_simplex(
                    &mut phg,
                    &format!("edge_{}_{}", key.0, key.1),
                    &[vertex_nodes[key.0], vertex_nodes[key.1]],
                )?;
                edge_by_pair.insert(key, simplices.len());
                simplices.push(s);
            }
            faces_by_edge.entry(key).or_default().push(fi);
        }
    }
    let mut face_simplex_index = BTreeMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let s = build_simplex(
            &mut phg,
            &format!("face{fi}"),
            &[vertex_nodes[f[0]], vertex_nodes[f[1]], vertex_nodes[f[2]]],
        )?;
        face_simplex_index.insert(fi, simplices.len());
        simplices.push(s);
    }
    for (key, face_list) in &faces_by_edge {
        let edge = simplices[edge_by_pair[key]].clone();
        for i in 0..face_list.len() {
            for j in (i + 1)..face_list.len() {
                let f1 = simplices[face_simplex_index[&face_list[i]]].clone();
                let f2 = simplices[face_simplex_index[&face_list[j]]].clone();
                add_boundary_constraint(&mut phg, &f1, &f2, &edge)?;
            }
        }
    }
    Ok((phg, simplices, values))
}
