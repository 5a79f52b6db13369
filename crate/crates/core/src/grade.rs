//! Grade inference: output grade sets per operation kind, either from the
//! signature-level rules alone or refined by scanning the Cayley table, plus
//! the O(1) declared-versus-inferred check.

use std::fmt;

use crate::algebra::{Algebra, AlgebraError, ProductKind};
use crate::phg::NodeId;

/// A set of grades in [0, d], or one of two distinguished states:
/// `Unknown` (no information yet) and `StructuralZero` (the value is
/// provably zero from grade arithmetic alone). A concrete set is never
/// empty; an operation whose possible output grades vanish is a
/// `StructuralZero`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GradeSet {
    Unknown,
    StructuralZero,
    Grades(u16),
}

impl GradeSet {
    pub fn singleton(k: usize) -> GradeSet {
        GradeSet::Grades(1 << k)
    }

    pub fn from_grades(grades: impl IntoIterator<Item = usize>) -> GradeSet {
        let mut bits = 0u16;
        for g in grades {
            debug_assert!(g < 16);
            bits |= 1 << g;
        }
        if bits == 0 {
            GradeSet::StructuralZero
        } else {
            GradeSet::Grades(bits)
        }
    }

    /// Full range 0..=d.
    pub fn full(d: usize) -> GradeSet {
        GradeSet::Grades(((1u32 << (d + 1)) - 1) as u16)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, GradeSet::Unknown)
    }

    pub fn is_structural_zero(&self) -> bool {
        matches!(self, GradeSet::StructuralZero)
    }

    pub fn contains(&self, k: usize) -> bool {
        matches!(self, GradeSet::Grades(bits) if bits & (1 << k) != 0)
    }

    pub fn grades(&self) -> Vec<usize> {
        match self {
            GradeSet::Grades(bits) => (0..16).filter(|k| bits & (1 << k) != 0).collect(),
            _ => Vec::new(),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            GradeSet::Grades(bits) => bits.count_ones() as usize,
            _ => 0,
        }
    }

    pub fn union(&self, other: &GradeSet) -> GradeSet {
        match (self, other) {
            (GradeSet::Unknown, _) | (_, GradeSet::Unknown) => GradeSet::Unknown,
            (GradeSet::StructuralZero, x) | (x, GradeSet::StructuralZero) => *x,
            (GradeSet::Grades(a), GradeSet::Grades(b)) => GradeSet::Grades(a | b),
        }
    }

    pub fn intersect(&self, other: &GradeSet) -> GradeSet {
        match (self, other) {
            (GradeSet::Unknown, _) | (_, GradeSet::Unknown) => GradeSet::Unknown,
            (GradeSet::StructuralZero, _) | (_, GradeSet::StructuralZero) => {
                GradeSet::StructuralZero
            }
            (GradeSet::Grades(a), GradeSet::Grades(b)) => {
                if a & b == 0 {
                    GradeSet::StructuralZero
                } else {
                    GradeSet::Grades(a & b)
                }
            }
        }
    }

    /// Subset test on concrete sets; `StructuralZero` is a subset of
    /// everything, `Unknown` of nothing.
    pub fn is_subset(&self, other: &GradeSet) -> bool {
        match (self, other) {
            (GradeSet::StructuralZero, _) => true,
            (GradeSet::Grades(a), GradeSet::Grades(b)) => a & !b == 0,
            (GradeSet::Grades(_), GradeSet::StructuralZero) => false,
            (GradeSet::Unknown, _) | (_, GradeSet::Unknown) => false,
        }
    }

    pub fn is_disjoint(&self, other: &GradeSet) -> bool {
        match (self, other) {
            (GradeSet::Grades(a), GradeSet::Grades(b)) => a & b == 0,
            _ => true,
        }
    }
}

impl fmt::Debug for GradeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for GradeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradeSet::Unknown => write!(f, "?"),
            GradeSet::StructuralZero => write!(f, "zero"),
            GradeSet::Grades(_) => {
                write!(f, "{{")?;
                for (i, g) in self.grades().into_iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Warning => write!(f, "warning"),
            Severity::Error => write!(f, "error"),
        }
    }
}

/// Declared-versus-inferred mismatch report for one node.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GradeDiagnostic {
    pub node: NodeId,
    pub declared: GradeSet,
    pub inferred: GradeSet,
    pub severity: Severity,
    pub message: String,
}

/// Signature-level output grade set: the metric-free rule per kind.
pub fn signature_grades(
    kind: ProductKind,
    p: usize,
    q: usize,
    d: usize,
) -> Result<GradeSet, AlgebraError> {
    if p > d || q > d {
        return Err(AlgebraError::GradeOutOfRange {
            grade: p.max(q),
            dim: d,
        });
    }
    Ok(match kind {
        ProductKind::Gp => {
            // output grade is p+q-2k for k shared generators, with k between
            // max(0, p+q-d) and min(p,q); past p+q = d the top grade is
            // therefore 2d-(p+q), not d
            let lo = p.abs_diff(q);
            let hi = if p + q <= d { p + q } else { 2 * d - (p + q) };
            GradeSet::from_grades((lo..=hi).step_by(2))
        }
        ProductKind::Outer => {
            if p + q > d {
                GradeSet::StructuralZero
            } else {
                GradeSet::singleton(p + q)
            }
        }
        ProductKind::Inner => GradeSet::singleton(p.abs_diff(q)),
        ProductKind::Regressive => {
            if p + q < d {
                GradeSet::StructuralZero
            } else {
                GradeSet::singleton(p + q - d)
            }
        }
    })
}

/// Exact output grade set from the Cayley table, restricted to operand
/// grades in P x Q. Always a subset of the union of `signature_grades`
/// over the pairs.
pub fn table_grades(alg: &Algebra, kind: ProductKind, p: &GradeSet, q: &GradeSet) -> GradeSet {
    if p.is_unknown() || q.is_unknown() {
        return GradeSet::Unknown;
    }
    if p.is_structural_zero() || q.is_structural_zero() {
        return GradeSet::StructuralZero;
    }
    let mut bits = 0u16;
    for a in alg.blades() {
        if !p.contains(a.grade()) {
            continue;
        }
        for b in alg.blades() {
            if !q.contains(b.grade()) {
                continue;
            }
            if let Some((_, out)) = alg.blade_contribution(kind, *a, *b) {
                bits |= 1 << out.grade();
            }
        }
    }
    if bits == 0 {
        GradeSet::StructuralZero
    } else {
        GradeSet::Grades(bits)
    }
}

/// Grade of a k-ary join: the sum of the factor grades, or structural zero
/// past the algebra dimension.
pub fn join_grades(grades: &[usize], d: usize) -> GradeSet {
    let total: usize = grades.iter().sum();
    if total > d {
        GradeSet::StructuralZero
    } else {
        GradeSet::singleton(total)
    }
}

/// O(1) declared-versus-inferred check: bit-set operations only.
/// `None` means pass.
pub fn check_grades(
    declared: &GradeSet,
    inferred: &GradeSet,
    node: NodeId,
) -> Option<GradeDiagnostic> {
    if inferred.is_unknown() || declared.is_unknown() {
        return None;
    }
    if inferred.is_structural_zero() {
        return Some(GradeDiagnostic {
            node,
            declared: *declared,
            inferred: *inferred,
            severity: Severity::Warning,
            message: "provably zero computation: grade arithmetic forces this value to vanish"
                .to_string(),
        });
    }
    if declared.is_disjoint(inferred) {
        return Some(GradeDiagnostic {
            node,
            declared: *declared,
            inferred: *inferred,
            severity: Severity::Error,
            message: format!("declared grades {declared} are disjoint from inferred {inferred}"),
        });
    }
    if declared.is_subset(inferred) {
        return None;
    }
    let narrowed = declared.intersect(inferred);
    Some(GradeDiagnostic {
        node,
        declared: *declared,
        inferred: *inferred,
        severity: Severity::Warning,
        message: format!(
            "declaration {declared} is wider than inferred {inferred}; a {narrowed} kernel would be sparser"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Signature;

    fn all_signatures(max_d: usize) -> Vec<Signature> {
        let mut out = Vec::new();
        for d in 0..=max_d {
            for p in 0..=d {
                for q in 0..=(d - p) {
                    out.push(Signature::new(p, q, d - p - q));
                }
            }
        }
        out
    }

    #[test]
    fn signature_rules() {
        assert_eq!(
            signature_grades(ProductKind::Gp, 1, 2, 3).unwrap(),
            GradeSet::from_grades([1, 3])
        );
        assert_eq!(
            signature_grades(ProductKind::Outer, 2, 2, 3).unwrap(),
            GradeSet::StructuralZero
        );
        assert_eq!(
            signature_grades(ProductKind::Regressive, 1, 3, 4).unwrap(),
            GradeSet::singleton(0)
        );
        assert_eq!(
            signature_grades(ProductKind::Inner, 3, 1, 4).unwrap(),
            GradeSet::singleton(2)
        );
        assert!(signature_grades(ProductKind::Gp, 5, 0, 4).is_err());
    }

    #[test]
    fn gp_grades_step_by_two() {
        for d in 0..=4 {
            for p in 0..=d {
                for q in 0..=d {
                    let gs = signature_grades(ProductKind::Gp, p, q, d).unwrap();
                    let lo = p.abs_diff(q);
                    for g in gs.grades() {
                        assert_eq!((g - lo) % 2, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn table_refines_signature_exhaustively() {
        for sig in all_signatures(4) {
            let alg = Algebra::new(sig).unwrap();
            let d = sig.dim();
            for kind in ProductKind::ALL {
                for p in 0..=d {
                    for q in 0..=d {
                        let table =
                            table_grades(&alg, kind, &GradeSet::singleton(p), &GradeSet::singleton(q));
                        let sig_set = signature_grades(kind, p, q, d).unwrap();
                        assert!(
                            table.is_subset(&sig_set) || table.is_structural_zero(),
                            "{sig} {kind} {p}x{q}: table {table} not within signature {sig_set}"
                        );
                        // no annihilation beyond grade structure when r = 0
                        if sig.r == 0 && kind == ProductKind::Gp {
                            assert_eq!(table, sig_set, "{sig} gp {p}x{q}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn table_grades_examples() {
        let pga = Algebra::new(Signature::new(3, 0, 1)).unwrap();
        let one = GradeSet::singleton(1);
        let got = table_grades(&pga, ProductKind::Gp, &one, &one);
        assert!(got.is_subset(&GradeSet::from_grades([0, 2])));

        let euc = Algebra::new(Signature::new(2, 0, 0)).unwrap();
        assert_eq!(
            table_grades(&euc, ProductKind::Outer, &one, &one),
            GradeSet::singleton(2)
        );
        for k in 0..=2 {
            assert_eq!(
                table_grades(&euc, ProductKind::Gp, &GradeSet::singleton(0), &GradeSet::singleton(k)),
                GradeSet::singleton(k)
            );
        }
    }

    #[test]
    fn join_rule() {
        assert_eq!(join_grades(&[1, 1, 1], 4), GradeSet::singleton(3));
        assert_eq!(join_grades(&[1, 1, 1, 1, 1], 4), GradeSet::StructuralZero);
        assert_eq!(join_grades(&[0, 3], 4), GradeSet::singleton(3));
    }

    #[test]
    fn declared_vs_inferred() {
        let n = NodeId(0);
        assert!(check_grades(&GradeSet::singleton(1), &GradeSet::from_grades([1, 3]), n).is_none());
        let err = check_grades(&GradeSet::singleton(2), &GradeSet::from_grades([1, 3]), n).unwrap();
        assert_eq!(err.severity, Severity::Error);
        let warn = check_grades(&GradeSet::full(4), &GradeSet::singleton(3), n).unwrap();
        assert_eq!(warn.severity, Severity::Warning);
        assert!(warn.message.contains("sparser"));
        let zero = check_grades(&GradeSet::singleton(2), &GradeSet::StructuralZero, n).unwrap();
        assert_eq!(zero.severity, Severity::Warning);
    }
}
