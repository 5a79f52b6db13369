//! The textual program format and the diagnostic pipeline behind the
//! command-line driver.
//!
//! Line-oriented grammar, one declaration per line, `#` comments:
//!
//! ```text
//! algebra 3,0,1
//! units m kg s
//! target npu 2x2 tile_kb=32 dma=2
//! node p1 mv grade={1} unit=m^2 coeffect=io
//! node area scalar
//! edge join(p1,p2,p3) -> face
//! edge norm(face) -> area variant=content
//! edge select(x) -> y grade=2
//! edge custom:boundary(f1,f2) -> e
//! colocate grp(a,b,c,d) -> out routes=a>b,b>d dma=a:d sync=d footprint=a:8 reach=npu
//! ```
//!
//! Forward references are legal; names resolve in a second pass. One
//! algebra per program.

use std::collections::BTreeMap;
use std::fmt;

use crate::algebra::{Algebra, AlgebraRef, Multivector, ProductKind, Signature};
use crate::dims::{self, DimSolution, UnitVector};
use crate::grade::{GradeSet, Severity};
use crate::mesh::{self, SimplexNode};
use crate::phg::{
    EdgeKind, EdgeSpec, NodeId, NodeSpec, NormKind, Phg, SaturationReport, ValueKind,
};
use crate::place::{self, CoLocationAnnotation, TargetModel};
use crate::scalar::{Mode, Scalar};

/// A located parse or resolution error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramError {
    pub line: usize,
    pub col: usize,
    pub code: &'static str,
    pub message: String,
}

impl ProgramError {
    fn new(line: usize, col: usize, code: &'static str, message: impl Into<String>) -> Self {
        ProgramError {
            line,
            col,
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for ProgramError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {} [{}]", self.line, self.col, self.message, self.code)
    }
}

impl std::error::Error for ProgramError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetDecl {
    pub line: usize,
    pub model: TargetModel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeDecl {
    pub line: usize,
    pub name: String,
    pub kind: ValueKind,
    pub grades: Option<Vec<usize>>,
    pub unit: Option<UnitVector>,
    pub coeffect: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeOp {
    Product(ProductKind),
    Sandwich,
    Join,
    Select(usize),
    Norm(NormKind),
    Transfer,
    Sync,
    Custom(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeDecl {
    pub line: usize,
    pub op: EdgeOp,
    pub sources: Vec<String>,
    pub target: String,
    pub reach: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColocateDecl {
    pub line: usize,
    pub name: String,
    pub members: Vec<String>,
    pub target: String,
    pub routes: Vec<(String, String)>,
    pub dma: Vec<(String, String)>,
    pub sync: Vec<String>,
    pub footprints: Vec<(String, u32)>,
    pub reach: Option<Vec<String>>,
}

/// Parsed program: declarations in file order. Serializing and re-parsing
/// is the identity on this structure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProgramFile {
    pub algebra: Option<Signature>,
    pub units: Vec<String>,
    pub targets: Vec<TargetDecl>,
    pub nodes: Vec<NodeDecl>,
    pub edges: Vec<EdgeDecl>,
    pub colocates: Vec<ColocateDecl>,
}

struct LineParser<'a> {
    line_no: usize,
    text: &'a str,
}

impl<'a> LineParser<'a> {
    fn err(&self, col: usize, code: &'static str, msg: impl Into<String>) -> ProgramError {
        ProgramError::new(self.line_no, col, code, msg)
    }

    fn col_of(&self, token: &str) -> usize {
        self.text.find(token).map(|i| i + 1).unwrap_or(1)
    }
}

fn parse_grade_set(s: &str) -> Option<Vec<usize>> {
    let inner = s.strip_prefix('{')?.strip_suffix('}')?;
    let mut out = Vec::new();
    for part in inner.split(',') {
        out.push(part.trim().parse::<usize>().ok()?);
    }
    out.sort_unstable();
    out.dedup();
    Some(out)
}

/// Unit expression over declared base units: `m`, `m^2`, `kg*m/s^2`, `1`.
fn parse_unit_expr(expr: &str, units: &[String]) -> Result<UnitVector, String> {
    let mut vec = UnitVector::zero(units.len());
    if expr == "1" {
        return Ok(vec);
    }
    let mut sign = 1i64;
    for chunk in expr.split_inclusive(['*', '/']) {
        let (factor, next_sign) = match chunk.strip_suffix('*') {
            Some(f) => (f, sign),
            None => match chunk.strip_suffix('/') {
                Some(f) => (f, -1),
                None => (chunk, sign),
            },
        };
        let factor = factor.trim();
        if factor.is_empty() {
            return Err("empty factor in unit expression".to_string());
        }
        let (name, exp) = match factor.split_once('^') {
            Some((n, e)) => (
                n.trim(),
                e.trim()
                    .parse::<i64>()
                    .map_err(|_| format!("bad exponent in `{factor}`"))?,
            ),
            None => (factor, 1),
        };
        if name == "1" {
            sign = next_sign;
            continue;
        }
        let idx = units
            .iter()
            .position(|u| u == name)
            .ok_or_else(|| format!("unknown base unit `{name}`"))?;
        vec.0[idx] += sign * exp;
        sign = next_sign;
    }
    Ok(vec)
}

fn split_call(token: &str) -> Option<(&str, Vec<&str>)> {
    let open = token.find('(')?;
    let close = token.rfind(')')?;
    if close < open {
        return None;
    }
    let name = &token[..open];
    let args: Vec<&str> = token[open + 1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    Some((name, args))
}

fn parse_pairs(value: &str, sep: char) -> Option<Vec<(String, String)>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let (a, b) = part.split_once(sep)?;
        out.push((a.trim().to_string(), b.trim().to_string()));
    }
    Some(out)
}

/// Parse program text into the declaration structure.
pub fn parse_program(text: &str) -> Result<ProgramFile, ProgramError> {
    let mut file = ProgramFile::default();
    let mut seen_names: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lp = LineParser { line_no: i + 1, text: raw };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match keyword {
            "algebra" => {
                if file.algebra.is_some() {
                    return Err(lp.err(1, "duplicate-algebra", "one algebra per program"));
                }
                let arg = rest
                    .first()
                    .ok_or_else(|| lp.err(1, "syntax", "algebra needs p,q,r"))?;
                let parts: Vec<&str> = arg.split(',').collect();
                if parts.len() != 3 {
                    return Err(lp.err(lp.col_of(arg), "syntax", "algebra needs p,q,r"));
                }
                let nums: Result<Vec<usize>, _> =
                    parts.iter().map(|p| p.trim().parse::<usize>()).collect();
                let nums =
                    nums.map_err(|e| lp.err(lp.col_of(arg), "syntax", format!("bad signature: {e}")))?;
                file.algebra = Some(Signature::new(nums[0], nums[1], nums[2]));
            }
            "units" => {
                file.units = rest.iter().map(|s| s.to_string()).collect();
            }
            "target" => {
                if rest.len() < 2 {
                    return Err(lp.err(1, "syntax", "target NAME RxC [tile_kb=N] [dma=N]"));
                }
                let name = rest[0].to_string();
                let (rows, cols) = rest[1]
                    .split_once('x')
                    .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
                    .ok_or_else(|| lp.err(lp.col_of(rest[1]), "syntax", "grid must be RxC"))?;
                let mut tile_kb = 32u32;
                let mut dma = 2u32;
                for opt in &rest[2..] {
                    if let Some(v) = opt.strip_prefix("tile_kb=") {
                        tile_kb = v
                            .parse()
                            .map_err(|e| lp.err(lp.col_of(opt), "syntax", format!("tile_kb: {e}")))?;
                    } else if let Some(v) = opt.strip_prefix("dma=") {
                        dma = v
                            .parse()
                            .map_err(|e| lp.err(lp.col_of(opt), "syntax", format!("dma: {e}")))?;
                    } else {
                        return Err(lp.err(lp.col_of(opt), "unknown-option", format!("unknown target option `{opt}`")));
                    }
                }
                file.targets.push(TargetDecl {
                    line: lp.line_no,
                    model: TargetModel::new(name, rows, cols, tile_kb, dma),
                });
            }
            "node" => {
                if rest.len() < 2 {
                    return Err(lp.err(1, "syntax", "node NAME mv|scalar [grade={..}] [unit=..] [coeffect=..]"));
                }
                let name = rest[0].to_string();
                if seen_names.contains(&name) {
                    return Err(lp.err(lp.col_of(&name), "duplicate-name", format!("duplicate name `{name}`")));
                }
                seen_names.push(name.clone());
                let kind = match rest[1] {
                    "mv" => ValueKind::Multivector,
                    "scalar" => ValueKind::Scalar,
                    other => {
                        return Err(lp.err(lp.col_of(other), "syntax", format!("node kind must be mv or scalar, got `{other}`")))
                    }
                };
                let mut decl = NodeDecl {
                    line: lp.line_no,
                    name,
                    kind,
                    grades: None,
                    unit: None,
                    coeffect: None,
                };
                for opt in &rest[2..] {
                    if let Some(v) = opt.strip_prefix("grade=") {
                        decl.grades = Some(parse_grade_set(v).ok_or_else(|| {
                            lp.err(lp.col_of(opt), "syntax", format!("bad grade set `{v}`; use {{1,3}}"))
                        })?);
                    } else if let Some(v) = opt.strip_prefix("unit=") {
                        decl.unit = Some(parse_unit_expr(v, &file.units).map_err(|e| {
                            lp.err(lp.col_of(opt), "unknown-unit", e)
                        })?);
                    } else if let Some(v) = opt.strip_prefix("coeffect=") {
                        decl.coeffect = Some(v.to_string());
                    } else {
                        return Err(lp.err(lp.col_of(opt), "unknown-option", format!("unknown node option `{opt}`")));
                    }
                }
                file.nodes.push(decl);
            }
            "edge" => {
                let call = rest
                    .first()
                    .ok_or_else(|| lp.err(1, "syntax", "edge KIND(sources) -> target"))?;
                let (op_name, args) = split_call(call)
                    .ok_or_else(|| lp.err(lp.col_of(call), "syntax", "edge needs KIND(a,b,...)"))?;
                if rest.get(1) != Some(&"->") || rest.len() < 3 {
                    return Err(lp.err(1, "syntax", "edge KIND(sources) -> target"));
                }
                let target = rest[2].to_string();
                let mut reach = None;
                let mut grade_opt = None;
                let mut variant = None;
                for opt in &rest[3..] {
                    if let Some(v) = opt.strip_prefix("reach=") {
                        reach = Some(v.split(',').map(|s| s.trim().to_string()).collect());
                    } else if let Some(v) = opt.strip_prefix("grade=") {
                        grade_opt = Some(v.parse::<usize>().map_err(|e| {
                            lp.err(lp.col_of(opt), "syntax", format!("grade: {e}"))
                        })?);
                    } else if let Some(v) = opt.strip_prefix("variant=") {
                        variant = Some(NormKind::from_name(v).ok_or_else(|| {
                            lp.err(lp.col_of(opt), "syntax", format!("unknown norm variant `{v}`"))
                        })?);
                    } else {
                        return Err(lp.err(lp.col_of(opt), "unknown-option", format!("unknown edge option `{opt}`")));
                    }
                }
                let op = match op_name {
                    "gp" | "outer" | "inner" | "regressive" => {
                        EdgeOp::Product(ProductKind::from_name(op_name).unwrap())
                    }
                    "sandwich" => EdgeOp::Sandwich,
                    "join" => EdgeOp::Join,
                    "select" => EdgeOp::Select(grade_opt.ok_or_else(|| {
                        lp.err(lp.col_of(call), "syntax", "select needs grade=K")
                    })?),
                    "norm" => EdgeOp::Norm(variant.unwrap_or(NormKind::Metric)),
                    "transfer" => EdgeOp::Transfer,
                    "sync" => EdgeOp::Sync,
                    other => match other.strip_prefix("custom:") {
                        Some(tag) => EdgeOp::Custom(tag.to_string()),
                        None => {
                            return Err(lp.err(
                                lp.col_of(call),
                                "unknown-keyword",
                                format!("unknown edge kind `{other}`"),
                            ))
                        }
                    },
                };
                file.edges.push(EdgeDecl {
                    line: lp.line_no,
                    op,
                    sources: args.iter().map(|s| s.to_string()).collect(),
                    target,
                    reach,
                });
            }
            "colocate" => {
                let call = rest
                    .first()
                    .ok_or_else(|| lp.err(1, "syntax", "colocate NAME(members) -> target [options]"))?;
                let (name, members) = split_call(call)
                    .ok_or_else(|| lp.err(lp.col_of(call), "syntax", "colocate needs NAME(a,b,...)"))?;
                if rest.get(1) != Some(&"->") || rest.len() < 3 {
                    return Err(lp.err(1, "syntax", "colocate NAME(members) -> target [options]"));
                }
                let mut decl = ColocateDecl {
                    line: lp.line_no,
                    name: name.to_string(),
                    members: members.iter().map(|s| s.to_string()).collect(),
                    target: rest[2].to_string(),
                    routes: Vec::new(),
                    dma: Vec::new(),
                    sync: Vec::new(),
                    footprints: Vec::new(),
                    reach: None,
                };
                for opt in &rest[3..] {
                    if let Some(v) = opt.strip_prefix("routes=") {
                        decl.routes = parse_pairs(v, '>').ok_or_else(|| {
                            lp.err(lp.col_of(opt), "syntax", "routes=a>b,c>d")
                        })?;
                    } else if let Some(v) = opt.strip_prefix("dma=") {
                        decl.dma = parse_pairs(v, ':').ok_or_else(|| {
                            lp.err(lp.col_of(opt), "syntax", "dma=a:b,c:d")
                        })?;
                    } else if let Some(v) = opt.strip_prefix("sync=") {
                        decl.sync = v.split(',').map(|s| s.trim().to_string()).collect();
                    } else if let Some(v) = opt.strip_prefix("footprint=") {
                        let pairs = parse_pairs(v, ':').ok_or_else(|| {
                            lp.err(lp.col_of(opt), "syntax", "footprint=a:8,b:16")
                        })?;
                        let mut out = Vec::new();
                        for (m, kb) in pairs {
                            let kb = kb.parse::<u32>().map_err(|e| {
                                lp.err(lp.col_of(opt), "syntax", format!("footprint: {e}"))
                            })?;
                            out.push((m, kb));
                        }
                        decl.footprints = out;
                    } else if let Some(v) = opt.strip_prefix("reach=") {
                        decl.reach = Some(v.split(',').map(|s| s.trim().to_string()).collect());
                    } else {
                        return Err(lp.err(lp.col_of(opt), "unknown-option", format!("unknown colocate option `{opt}`")));
                    }
                }
                file.colocates.push(decl);
            }
            other => {
                return Err(lp.err(1, "unknown-keyword", format!("unknown keyword `{other}`")));
            }
        }
    }
    Ok(file)
}

/// Canonical text form; `parse(serialize(p)) == p`.
pub fn serialize_program(file: &ProgramFile) -> String {
    let mut out = String::new();
    if let Some(sig) = file.algebra {
        out.push_str(&format!("algebra {},{},{}\n", sig.p, sig.q, sig.r));
    }
    if !file.units.is_empty() {
        out.push_str(&format!("units {}\n", file.units.join(" ")));
    }
    for t in &file.targets {
        out.push_str(&format!(
            "target {} {}x{} tile_kb={} dma={}\n",
            t.model.name, t.model.rows, t.model.cols, t.model.tile_kb, t.model.dma_channels
        ));
    }
    for n in &file.nodes {
        let kind = match n.kind {
            ValueKind::Multivector => "mv",
            ValueKind::Scalar => "scalar",
        };
        out.push_str(&format!("node {} {}", n.name, kind));
        if let Some(gs) = &n.grades {
            let inner: Vec<String> = gs.iter().map(|g| g.to_string()).collect();
            out.push_str(&format!(" grade={{{}}}", inner.join(",")));
        }
        if let Some(u) = &n.unit {
            out.push_str(&format!(" unit={}", u.render(&file.units)));
        }
        if let Some(c) = &n.coeffect {
            out.push_str(&format!(" coeffect={c}"));
        }
        out.push('\n');
    }
    for e in &file.edges {
        let mut opts = String::new();
        let op = match &e.op {
            EdgeOp::Product(k) => k.name().to_string(),
            EdgeOp::Sandwich => "sandwich".to_string(),
            EdgeOp::Join => "join".to_string(),
            EdgeOp::Select(k) => {
                opts.push_str(&format!(" grade={k}"));
                "select".to_string()
            }
            EdgeOp::Norm(v) => {
                if *v != NormKind::Metric {
                    opts.push_str(&format!(" variant={}", v.name()));
                }
                "norm".to_string()
            }
            EdgeOp::Transfer => "transfer".to_string(),
            EdgeOp::Sync => "sync".to_string(),
            EdgeOp::Custom(tag) => format!("custom:{tag}"),
        };
        if let Some(r) = &e.reach {
            opts.push_str(&format!(" reach={}", r.join(",")));
        }
        out.push_str(&format!(
            "edge {}({}) -> {}{}\n",
            op,
            e.sources.join(","),
            e.target,
            opts
        ));
    }
    for c in &file.colocates {
        out.push_str(&format!("colocate {}({}) -> {}", c.name, c.members.join(","), c.target));
        if !c.routes.is_empty() {
            let rs: Vec<String> = c.routes.iter().map(|(a, b)| format!("{a}>{b}")).collect();
            out.push_str(&format!(" routes={}", rs.join(",")));
        }
        if !c.dma.is_empty() {
            let ds: Vec<String> = c.dma.iter().map(|(a, b)| format!("{a}:{b}")).collect();
            out.push_str(&format!(" dma={}", ds.join(",")));
        }
        if !c.sync.is_empty() {
            out.push_str(&format!(" sync={}", c.sync.join(",")));
        }
        if !c.footprints.is_empty() {
            let fs: Vec<String> = c.footprints.iter().map(|(m, kb)| format!("{m}:{kb}")).collect();
            out.push_str(&format!(" footprint={}", fs.join(",")));
        }
        if let Some(r) = &c.reach {
            out.push_str(&format!(" reach={}", r.join(",")));
        }
        out.push('\n');
    }
    out
}

/// A compiled program: the graph plus name/line maps for reporting.
#[derive(Debug)]
pub struct CompiledProgram {
    pub file: ProgramFile,
    pub phg: Phg,
    pub algebra: Option<AlgebraRef>,
    pub node_lines: BTreeMap<NodeId, usize>,
}

impl CompiledProgram {
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.phg.node_by_name(name)
    }

    pub fn node_name(&self, id: NodeId) -> String {
        self.phg.node(id).name.clone()
    }
}

/// Resolve a parsed file into a validated hypergraph.
pub fn compile(file: ProgramFile) -> Result<CompiledProgram, ProgramError> {
    let algebra = match file.algebra {
        Some(sig) => Some(Algebra::new(sig).map_err(|e| {
            ProgramError::new(1, 1, "algebra", e.to_string())
        })?),
        None => None,
    };
    let mut phg = match &algebra {
        Some(a) => Phg::with_algebra(a.clone()),
        None => Phg::new(),
    };
    phg.base_units = file.units.clone();
    phg.targets = file.targets.iter().map(|t| t.model.name.clone()).collect();

    let mut node_lines = BTreeMap::new();
    for n in &file.nodes {
        let mut spec = match n.kind {
            ValueKind::Multivector => NodeSpec::multivector(&n.name),
            ValueKind::Scalar => NodeSpec::scalar(&n.name),
        };
        if let Some(gs) = &n.grades {
            spec = spec.with_grades(GradeSet::from_grades(gs.iter().copied()));
        }
        if let Some(u) = &n.unit {
            spec = spec.with_dims(u.clone());
        }
        if let Some(c) = &n.coeffect {
            spec = spec.with_coeffect(c.clone());
        }
        let id = phg
            .add_node(spec)
            .map_err(|e| ProgramError::new(n.line, 1, "node", e.to_string()))?;
        node_lines.insert(id, n.line);
    }

    let names: BTreeMap<String, NodeId> = phg
        .nodes()
        .iter()
        .map(|n| (n.name.clone(), n.id))
        .collect();
    let resolve = move |name: &str, line: usize| -> Result<NodeId, ProgramError> {
        names.get(name).copied().ok_or_else(|| {
            ProgramError::new(line, 1, "unresolved-reference", format!("unknown node `{name}`"))
        })
    };
    let resolve_reach = |reach: &Option<Vec<String>>, line: usize| -> Result<Option<u64>, ProgramError> {
        match reach {
            None => Ok(None),
            Some(names) => {
                let mut mask = 0u64;
                for t in names {
                    let idx = file
                        .targets
                        .iter()
                        .position(|d| d.model.name == *t)
                        .ok_or_else(|| {
                            ProgramError::new(line, 1, "unresolved-reference", format!("unknown target `{t}`"))
                        })?;
                    mask |= 1 << idx;
                }
                Ok(Some(mask))
            }
        }
    };

    for e in &file.edges {
        let sources: Result<Vec<NodeId>, _> =
            e.sources.iter().map(|s| resolve(s, e.line)).collect();
        let sources = sources?;
        let target = resolve(&e.target, e.line)?;
        let kind = match &e.op {
            EdgeOp::Product(k) => EdgeKind::Product(*k),
            EdgeOp::Sandwich => EdgeKind::Sandwich,
            EdgeOp::Join => EdgeKind::Join,
            EdgeOp::Select(k) => EdgeKind::GradeSelect(*k),
            EdgeOp::Norm(v) => EdgeKind::Norm(*v),
            EdgeOp::Transfer => EdgeKind::Transfer,
            EdgeOp::Sync => EdgeKind::SyncBarrier,
            EdgeOp::Custom(tag) => EdgeKind::Custom(tag.clone()),
        };
        phg.add_hyperedge(EdgeSpec {
            sources,
            target,
            kind,
            reachability: resolve_reach(&e.reach, e.line)?,
        })
        .map_err(|err| ProgramError::new(e.line, 1, "edge", err.to_string()))?;
    }

    for c in &file.colocates {
        let members: Result<Vec<NodeId>, _> =
            c.members.iter().map(|m| resolve(m, c.line)).collect();
        let members = members?;
        let target = resolve(&c.target, c.line)?;
        let mut group = CoLocationAnnotation::new(members.clone());
        let rp = |name: &String| resolve(name, c.line);
        for (a, b) in &c.routes {
            group.routes.push((rp(a)?, rp(b)?));
        }
        for (a, b) in &c.dma {
            group.dma_pairs.push((rp(a)?, rp(b)?));
        }
        for s in &c.sync {
            group.sync_barriers.push(rp(s)?);
        }
        for (m, kb) in &c.footprints {
            group.footprints_kb.insert(rp(m)?, *kb);
        }
        phg.add_hyperedge(EdgeSpec {
            sources: members,
            target,
            kind: EdgeKind::CoLocation(group),
            reachability: resolve_reach(&c.reach, c.line)?,
        })
        .map_err(|err| ProgramError::new(c.line, 1, "colocate", err.to_string()))?;
    }

    Ok(CompiledProgram {
        file,
        phg,
        algebra,
        node_lines,
    })
}

/// Parse and compile in one step.
pub fn load_program(text: &str) -> Result<CompiledProgram, ProgramError> {
    compile(parse_program(text)?)
}

/// One entry of the check report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub line: Option<usize>,
    pub node: Option<String>,
}

/// All diagnostics from one `check` run, ordered by source line then
/// severity. Exit status is 1 exactly when an error is present.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct DiagnosticReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl DiagnosticReport {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn exit_code(&self) -> i32 {
        if self.has_errors() {
            1
        } else {
            0
        }
    }

    fn sort(&mut self) {
        self.diagnostics.sort_by(|a, b| {
            a.line
                .unwrap_or(usize::MAX)
                .cmp(&b.line.unwrap_or(usize::MAX))
                .then(b.severity.cmp(&a.severity))
                .then(a.code.cmp(&b.code))
                .then(a.message.cmp(&b.message))
        });
    }
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.diagnostics.is_empty() {
            return writeln!(f, "ok: no diagnostics");
        }
        for d in &self.diagnostics {
            let loc = d
                .line
                .map(|l| format!("line {l}: "))
                .unwrap_or_default();
            let node = d
                .node
                .as_ref()
                .map(|n| format!(" `{n}`"))
                .unwrap_or_default();
            writeln!(f, "{}{}: [{}]{} {}", loc, d.severity, d.code, node, d.message)?;
        }
        Ok(())
    }
}

/// Everything `check` computed, for callers that want more than the report.
#[derive(Debug)]
pub struct CheckOutput {
    pub report: DiagnosticReport,
    pub saturation: SaturationReport,
    pub dims: DimSolution,
}

/// The full static pipeline: saturation and grade checks, dimensional
/// consistency, structural mesh boundary checks, and per-target
/// co-location feasibility.
pub fn check(program: &CompiledProgram) -> CheckOutput {
    let mut report = DiagnosticReport::default();
    let phg = &program.phg;
    let saturation = phg.saturate();

    for d in &saturation.diagnostics {
        report.diagnostics.push(Diagnostic {
            severity: d.severity,
            code: "grade".to_string(),
            message: d.message.clone(),
            line: program.node_lines.get(&d.node).copied(),
            node: Some(program.node_name(d.node)),
        });
    }
    for s in &saturation.stalled {
        report.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            code: "stalled".to_string(),
            message: s.reason.clone(),
            line: program.node_lines.get(&s.node).copied(),
            node: Some(program.node_name(s.node)),
        });
    }

    let dims = dims::check_dimensions(phg);
    if let DimSolution::Inconsistent { constraint, witness } = &dims {
        let (line, node) = match constraint.provenance {
            dims::Provenance::Declaration(n) => (
                program.node_lines.get(&n).copied(),
                Some(program.node_name(n)),
            ),
            dims::Provenance::Edge(e) => {
                let t = phg.edge(e).target;
                (program.node_lines.get(&t).copied(), Some(program.node_name(t)))
            }
        };
        report.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            code: "dims".to_string(),
            message: witness.clone(),
            line,
            node,
        });
    }

    // structural mesh checks over join-built simplices
    let simplices = derive_simplices(program);
    for d in mesh::check_boundary_consistency(phg, &simplices, &BTreeMap::new()) {
        report.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            code: format!("mesh-{:?}", d.kind).to_lowercase(),
            message: d.message,
            line: d.nodes.first().and_then(|n| program.node_lines.get(n)).copied(),
            node: d.nodes.first().map(|n| program.node_name(*n)),
        });
    }

    let targets: Vec<TargetModel> = program.file.targets.iter().map(|t| t.model.clone()).collect();
    if !targets.is_empty() {
        let matrix = place::check_feasibility(phg, &targets);
        for (gi, group) in matrix.groups.iter().enumerate() {
            for (ti, tname) in matrix.targets.iter().enumerate() {
                if let place::Feasibility::Infeasible(reason) = matrix.cell(gi, ti) {
                    let t = phg.edge(*group).target;
                    report.diagnostics.push(Diagnostic {
                        severity: Severity::Error,
                        code: "colocation".to_string(),
                        message: format!("group on `{tname}` infeasible: {reason}"),
                        line: program.node_lines.get(&t).copied(),
                        node: Some(program.node_name(t)),
                    });
                }
            }
        }
    }

    report.sort();
    CheckOutput {
        report,
        saturation,
        dims,
    }
}

/// Join edges whose sources are all declared grade-{1} multivector nodes
/// define the program's simplices.
pub fn derive_simplices(program: &CompiledProgram) -> Vec<SimplexNode> {
    let phg = &program.phg;
    phg.edges()
        .iter()
        .filter(|e| matches!(e.kind, EdgeKind::Join))
        .filter(|e| {
            e.sources
                .iter()
                .all(|s| phg.node(*s).declared_grades == GradeSet::singleton(1))
        })
        .map(|e| SimplexNode {
            node: e.target,
            order: e.sources.len() - 1,
            vertices: e.sources.clone(),
            join_edge: e.id,
        })
        .collect()
}

/// Parse a JSON value file: node name -> dense coefficient list in
/// canonical blade order (numbers in float mode, `num/den` strings in
/// exact mode).
pub fn parse_value_file(
    program: &CompiledProgram,
    text: &str,
    mode: Mode,
) -> Result<BTreeMap<NodeId, Multivector>, String> {
    let alg = program
        .algebra
        .as_ref()
        .ok_or("program declares no algebra")?;
    let json: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = json.as_object().ok_or("value file must be a JSON object")?;
    let mut out = BTreeMap::new();
    for (name, coeffs) in obj {
        let id = program
            .node_id(name)
            .ok_or_else(|| format!("unknown node `{name}` in value file"))?;
        let list = coeffs
            .as_array()
            .ok_or_else(|| format!("`{name}` must map to a coefficient list"))?;
        if list.len() != alg.blade_count() {
            return Err(format!(
                "`{name}` has {} coefficients; algebra needs {}",
                list.len(),
                alg.blade_count()
            ));
        }
        let mut pairs = Vec::new();
        for (i, v) in list.iter().enumerate() {
            let s = match (mode, v) {
                (Mode::Float64, serde_json::Value::Number(n)) => {
                    Scalar::F64(n.as_f64().ok_or_else(|| format!("`{name}`[{i}] not an f64"))?)
                }
                (Mode::ExactRational, serde_json::Value::String(t)) => {
                    Scalar::parse(Mode::ExactRational, t)?
                }
                (Mode::ExactRational, serde_json::Value::Number(n)) if n.is_i64() => {
                    Scalar::from_i64(Mode::ExactRational, n.as_i64().unwrap())
                }
                _ => {
                    return Err(format!(
                        "`{name}`[{i}]: expected {} coefficient",
                        match mode {
                            Mode::Float64 => "a number",
                            Mode::ExactRational => "a `num/den` string or integer",
                        }
                    ))
                }
            };
            if !s.is_zero() {
                pairs.push((alg.blades()[i], s));
            }
        }
        let mv = Multivector::from_coeffs(alg.clone(), mode, pairs).map_err(|e| e.to_string())?;
        out.insert(id, mv);
    }
    Ok(out)
}

/// Render evaluation results as a JSON object in value-file format.
pub fn values_to_json(
    program: &CompiledProgram,
    values: &BTreeMap<NodeId, Multivector>,
) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    for (id, mv) in values {
        let dense: Vec<serde_json::Value> = mv
            .to_dense()
            .into_iter()
            .map(|s| match s {
                Scalar::F64(v) => serde_json::json!(v),
                r @ Scalar::Rational(_) => serde_json::json!(r.to_string()),
            })
            .collect();
        obj.insert(program.node_name(*id), serde_json::Value::Array(dense));
    }
    serde_json::Value::Object(obj)
}

/// Render a tile plan with node names instead of raw ids.
pub fn plan_to_json(program: &CompiledProgram, plan: &place::TilePlan) -> serde_json::Value {
    let assignments: serde_json::Map<String, serde_json::Value> = plan
        .assignments
        .iter()
        .map(|(n, (r, c))| (program.node_name(*n), serde_json::json!([r, c])))
        .collect();
    let blocks: Vec<serde_json::Value> = plan
        .blocks
        .iter()
        .map(|(e, rect)| {
            serde_json::json!({
                "group": program.node_name(program.phg.edge(*e).target),
                "row": rect.row, "col": rect.col,
                "rows": rect.rows, "cols": rect.cols,
            })
        })
        .collect();
    serde_json::json!({
        "target": plan.target,
        "assignments": assignments,
        "blocks": blocks,
        "dma_channels": plan
            .dma_channels
            .iter()
            .map(|(a, b, ch)| serde_json::json!([program.node_name(*a), program.node_name(*b), ch]))
            .collect::<Vec<_>>(),
        "barrier_schedule": plan
            .barrier_schedule
            .iter()
            .map(|n| program.node_name(*n))
            .collect::<Vec<_>>(),
    })
}

/// Render a feasibility matrix with group names instead of edge ids.
pub fn matrix_to_json(
    program: &CompiledProgram,
    matrix: &place::FeasibilityMatrix,
) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = matrix
        .groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let cells: serde_json::Map<String, serde_json::Value> = matrix
                .targets
                .iter()
                .enumerate()
                .map(|(ti, t)| {
                    let cell = match matrix.cell(gi, ti) {
                        place::Feasibility::Feasible => serde_json::json!("feasible"),
                        place::Feasibility::Infeasible(r) => {
                            serde_json::json!({ "infeasible": r.to_string() })
                        }
                    };
                    (t.clone(), cell)
                })
                .collect();
            serde_json::json!({
                "group": program.node_name(program.phg.edge(*g).target),
                "targets": cells,
            })
        })
        .collect();
    serde_json::json!(rows)
}

/// The Appendix-style triangle fixture used across tests and docs.
pub const TRIANGLE_PROGRAM: &str = "\
algebra 3,0,1
units m
node p1 mv grade={1}
node p2 mv grade={1}
node p3 mv grade={1}
node face mv
node area scalar unit=m^2
edge join(p1,p2,p3) -> face
edge norm(face) -> area variant=content
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_program_parses_to_expected_shape() {
        let program = load_program(TRIANGLE_PROGRAM).unwrap();
        assert_eq!(program.phg.node_count(), 5);
        assert_eq!(program.phg.edge_count(), 2);
        let out = check(&program);
        assert!(!out.report.has_errors(), "{}", out.report);
        assert!(out.saturation.all_saturated());
        let face = program.node_id("face").unwrap();
        assert_eq!(out.saturation.grades(face), GradeSet::singleton(3));
        assert!(out.dims.is_consistent());
    }

    #[test]
    fn round_trip_is_identity() {
        let text = "\
algebra 3,0,1
units m kg s
target npu 2x2 tile_kb=32 dma=2
node a mv grade={1} unit=m coeffect=io
node b mv grade={1,3}
node c mv
node s scalar unit=kg*m/s^2
edge gp(a,b) -> c reach=npu
edge norm(c) -> s variant=ideal
colocate g(a,b,c) -> s routes=a>b,b>c dma=a:c sync=c footprint=a:8,b:4,c:2 reach=npu
";
        let parsed = parse_program(text).unwrap();
        let serialized = serialize_program(&parsed);
        let reparsed = parse_program(&serialized).unwrap();
        assert_eq!(parsed, reparsed);
        // and the canonical form is a fixpoint
        assert_eq!(serialized, serialize_program(&reparsed));
    }

    #[test]
    fn located_errors() {
        // parse accepts the line; the dangling reference surfaces at compile
        let e = load_program("node a mv\nedge join(a) -> b\n").unwrap_err();
        assert_eq!(e.line, 2, "{e}");
        assert_eq!(e.code, "unresolved-reference");
        let text = "node a mv\nnode a scalar\n";
        let e = parse_program(text).unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.code, "duplicate-name");

        let e = parse_program("flub 1 2 3\n").unwrap_err();
        assert_eq!(e.code, "unknown-keyword");

        let e = load_program("algebra 3,0,1\nnode a mv grade={1}\nnode b mv\nedge join(a) -> b\n")
            .unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("cannot take 1 source"));

        let e = load_program("algebra 3,0,1\nnode a mv\nedge norm(zzz) -> a\n").unwrap_err();
        assert_eq!(e.code, "unresolved-reference");
    }

    #[test]
    fn empty_program_is_valid() {
        let program = load_program("").unwrap();
        assert_eq!(program.phg.node_count(), 0);
        let out = check(&program);
        assert_eq!(out.report.exit_code(), 0);
    }

    #[test]
    fn grade_conflict_fixture_errors() {
        let text = "\
algebra 3,0,1
node a mv grade={1}
node b mv grade={1}
node c mv grade={1}
edge outer(a,b) -> c
";
        let program = load_program(text).unwrap();
        let out = check(&program);
        assert!(out.report.has_errors());
        let errs: Vec<&Diagnostic> = out
            .report
            .diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].node.as_deref(), Some("c"));
        assert_eq!(errs[0].line, Some(4));
    }

    #[test]
    fn unit_conflict_fixture_reports_provenance() {
        let text = "\
algebra 3,0,1
units m s
node a mv grade={1} unit=m
node b mv grade={1} unit=s
node c mv unit=m^2
edge outer(a,b) -> c
";
        let program = load_program(text).unwrap();
        let out = check(&program);
        assert!(out.report.has_errors());
        assert!(!out.dims.is_consistent());
        let derr = out
            .report
            .diagnostics
            .iter()
            .find(|d| d.code == "dims")
            .unwrap();
        assert!(derr.node.is_some());
    }

    #[test]
    fn forward_references_resolve() {
        let text = "\
algebra 3,0,1
edge join(p,q,r) -> f
node p mv grade={1}
node q mv grade={1}
node r mv grade={1}
node f mv
";
        // edges before nodes: parse keeps order, compile resolves second pass
        let parsed = parse_program(text).unwrap();
        let program = compile(parsed).unwrap();
        assert_eq!(program.phg.edge_count(), 1);
    }

    #[test]
    fn value_file_round_trip() {
        let program = load_program(TRIANGLE_PROGRAM).unwrap();
        let vals = r#"{"p1": ["1", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0"]}"#;
        let parsed = parse_value_file(&program, vals, Mode::ExactRational).unwrap();
        let p1 = program.node_id("p1").unwrap();
        assert_eq!(parsed[&p1].coeff(crate::algebra::Blade(0)), Scalar::ratio(1, 1));
        let json = values_to_json(&program, &parsed);
        assert_eq!(json["p1"][0], serde_json::json!("1"));

        assert!(parse_value_file(&program, r#"{"nope": []}"#, Mode::Float64)
            .unwrap_err()
            .contains("unknown node"));
        assert!(parse_value_file(&program, r#"{"p1": [1, 2]}"#, Mode::Float64)
            .unwrap_err()
            .contains("16"));
    }
}
