//! Clifford algebras Cl(p,q,r): signature, blade basis, and the generated
//! geometric-product Cayley table. The table is the ground truth every other
//! module (grade inference, kernel emission, evaluation) derives from.
//!
//! Canonical generator order is degenerate first (`e0`), then positive, then
//! negative, ascending index. Blades are bit-masks over generators in that
//! order, listed ascending by mask, so `Cl(3,0,1)` runs
//! `1, e0, e1, e01, e2, ..., e0123`.

mod multivector;

pub use multivector::{Multivector, NormValue, ProductKind, SandwichOutcome};

use std::fmt;
use std::sync::Arc;

/// Hard default on generator count; 2^d blades must stay desk-scale.
pub const DEFAULT_DIMENSION_CEILING: usize = 8;

/// Metric signature (p, q, r): counts of generators squaring to +1, -1, 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
    pub r: usize,
}

impl Signature {
    pub fn new(p: usize, q: usize, r: usize) -> Self {
        Signature { p, q, r }
    }

    /// Total generator count d = p + q + r.
    pub fn dim(&self) -> usize {
        self.p + self.q + self.r
    }

    /// Number of basis blades, 2^d.
    pub fn blade_count(&self) -> usize {
        1usize << self.dim()
    }

    /// Square of generator `i` in canonical order: 0 for i < r, +1 for the
    /// next p generators, -1 for the rest.
    pub fn generator_metric(&self, i: usize) -> i8 {
        debug_assert!(i < self.dim());
        if i < self.r {
            0
        } else if i < self.r + self.p {
            1
        } else {
            -1
        }
    }

    /// Printed label of generator `i`: zero-based when a degenerate
    /// generator exists (PGA convention `e0, e1, ...`), one-based otherwise
    /// (`e1, ..., ed`).
    pub fn generator_label(&self, i: usize) -> usize {
        if self.r > 0 {
            i
        } else {
            i + 1
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cl({},{},{})", self.p, self.q, self.r)
    }
}

/// A basis blade as a d-bit generator set. Grade = popcount.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct Blade(pub u16);

impl Blade {
    pub const SCALAR: Blade = Blade(0);

    pub fn grade(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn mask(&self) -> u16 {
        self.0
    }

    pub fn contains_generator(&self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    /// Generator indices in ascending order.
    pub fn generators(&self) -> impl Iterator<Item = usize> + '_ {
        (0..16).filter(move |i| self.0 & (1 << i) != 0)
    }
}

/// One Cayley table cell: sign in {-1, 0, +1} and the result blade.
/// Sign 0 marks a degenerate contraction (a repeated null generator).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CayleyEntry {
    pub sign: i8,
    pub blade: Blade,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraError {
    DimensionCeilingExceeded { dim: usize, ceiling: usize },
    AlgebraMismatch,
    ModeMismatch,
    GradeOutOfRange { grade: usize, dim: usize },
    InvalidBlade { mask: u16, dim: usize },
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::DimensionCeilingExceeded { dim, ceiling } => {
                write!(f, "algebra dimension {dim} exceeds ceiling {ceiling}")
            }
            AlgebraError::AlgebraMismatch => write!(f, "operands belong to different algebras"),
            AlgebraError::ModeMismatch => write!(f, "operands have different numeric modes"),
            AlgebraError::GradeOutOfRange { grade, dim } => {
                write!(f, "grade {grade} out of range for dimension {dim}")
            }
            AlgebraError::InvalidBlade { mask, dim } => {
                write!(f, "blade mask {mask:#x} invalid for dimension {dim}")
            }
        }
    }
}

impl std::error::Error for AlgebraError {}

/// A constructed Clifford algebra: signature, canonical blade list, and the
/// full geometric-product Cayley table. Immutable after construction and
/// safe to share across threads.
#[derive(Debug)]
pub struct Algebra {
    signature: Signature,
    blades: Vec<Blade>,
    table: Vec<CayleyEntry>,
}

pub type AlgebraRef = Arc<Algebra>;

impl Algebra {
    /// Build Cl(p,q,r) with the default dimension ceiling.
    pub fn new(signature: Signature) -> Result<AlgebraRef, AlgebraError> {
        Self::with_ceiling(signature, DEFAULT_DIMENSION_CEILING)
    }

    /// Build with an explicit ceiling on the generator count.
    pub fn with_ceiling(signature: Signature, ceiling: usize) -> Result<AlgebraRef, AlgebraError> {
        let d = signature.dim();
        if d > ceiling {
            return Err(AlgebraError::DimensionCeilingExceeded { dim: d, ceiling });
        }
        let n = signature.blade_count();
        let blades: Vec<Blade> = (0..n).map(|m| Blade(m as u16)).collect();
        let mut table = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                table.push(raw_blade_product(&signature, Blade(a as u16), Blade(b as u16)));
            }
        }
        Ok(Arc::new(Algebra {
            signature,
            blades,
            table,
        }))
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn dim(&self) -> usize {
        self.signature.dim()
    }

    pub fn blade_count(&self) -> usize {
        self.blades.len()
    }

    /// Blades in canonical (ascending mask) order.
    pub fn blades(&self) -> &[Blade] {
        &self.blades
    }

    /// Blades of one grade, ascending mask.
    pub fn blades_of_grade(&self, k: usize) -> impl Iterator<Item = Blade> + '_ {
        self.blades.iter().copied().filter(move |b| b.grade() == k)
    }

    pub fn pseudoscalar(&self) -> Blade {
        Blade((self.blade_count() - 1) as u16)
    }

    pub fn valid_blade(&self, b: Blade) -> bool {
        (b.0 as usize) < self.blade_count()
    }

    /// Geometric product of two basis blades, from the generated table.
    pub fn blade_product(&self, a: Blade, b: Blade) -> CayleyEntry {
        debug_assert!(self.valid_blade(a) && self.valid_blade(b));
        self.table[(a.0 as usize) * self.blade_count() + b.0 as usize]
    }

    /// Outer product of basis blades: zero unless the generator sets are
    /// disjoint; never metric-dependent.
    pub fn blade_outer(&self, a: Blade, b: Blade) -> Option<(i8, Blade)> {
        if a.0 & b.0 != 0 {
            return None;
        }
        Some((reorder_sign(a.0, b.0), Blade(a.0 | b.0)))
    }

    /// Non-metric right complement: the blade `c` with sign `s` such that
    /// `b ∧ (s·c) = +pseudoscalar`.
    pub fn right_complement(&self, b: Blade) -> (i8, Blade) {
        let comp = Blade(self.pseudoscalar().0 ^ b.0);
        let s = reorder_sign(b.0, comp.0);
        (s, comp)
    }

    /// Inverse of the right complement (the left complement), so that
    /// `right_complement` followed by this map is the identity with sign +1.
    pub fn left_complement(&self, b: Blade) -> (i8, Blade) {
        let comp = Blade(self.pseudoscalar().0 ^ b.0);
        let s = reorder_sign(comp.0, b.0);
        (s, comp)
    }

    /// Regressive product of basis blades via the non-metric complement:
    /// `lc(rc(a) ∧ rc(b))`. `None` when the complements overlap.
    pub fn blade_regressive(&self, a: Blade, b: Blade) -> Option<(i8, Blade)> {
        let (sa, ca) = self.right_complement(a);
        let (sb, cb) = self.right_complement(b);
        let (sw, w) = self.blade_outer(ca, cb)?;
        let (sl, out) = self.left_complement(w);
        Some((sa * sb * sw * sl, out))
    }

    /// Per-kind blade-pair contribution. This is the single source the dense
    /// products and the specialized kernels are both derived from.
    pub fn blade_contribution(&self, kind: ProductKind, a: Blade, b: Blade) -> Option<(i8, Blade)> {
        match kind {
            ProductKind::Gp => {
                let e = self.blade_product(a, b);
                (e.sign != 0).then_some((e.sign, e.blade))
            }
            ProductKind::Outer => self.blade_outer(a, b),
            ProductKind::Inner => {
                let e = self.blade_product(a, b);
                let target = a.grade().abs_diff(b.grade());
                (e.sign != 0 && e.blade.grade() == target).then_some((e.sign, e.blade))
            }
            ProductKind::Regressive => self.blade_regressive(a, b),
        }
    }

    /// Printed blade name: `1` for the scalar, else `e` + generator labels.
    pub fn blade_name(&self, b: Blade) -> String {
        if b.0 == 0 {
            return "1".to_string();
        }
        let mut s = String::from("e");
        for g in b.generators() {
            s.push_str(&self.signature.generator_label(g).to_string());
        }
        s
    }

    /// Inverse of `blade_name`.
    pub fn blade_by_name(&self, name: &str) -> Option<Blade> {
        if name == "1" {
            return Some(Blade::SCALAR);
        }
        let digits = name.strip_prefix('e')?;
        let mut mask = 0u16;
        for ch in digits.chars() {
            let label = ch.to_digit(10)? as usize;
            let idx = if self.signature.r > 0 {
                label
            } else {
                label.checked_sub(1)?
            };
            if idx >= self.dim() || mask & (1 << idx) != 0 {
                return None;
            }
            mask |= 1 << idx;
        }
        Some(Blade(mask))
    }
}

impl PartialEq for Algebra {
    fn eq(&self, other: &Self) -> bool {
        self.signature == other.signature
    }
}

/// Sign from sorting the concatenation of two ascending generator sequences:
/// counts the transpositions needed to merge `b`'s generators into `a`'s.
pub(crate) fn reorder_sign(a: u16, b: u16) -> i8 {
    let mut swaps = 0u32;
    let mut rest = a >> 1;
    while rest != 0 {
        swaps += (rest & b).count_ones();
        rest >>= 1;
    }
    if swaps % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Blade product from first principles: transposition count to interleave
/// the generator sequences, then metric contraction of repeated generators.
fn raw_blade_product(sig: &Signature, a: Blade, b: Blade) -> CayleyEntry {
    let mut sign = reorder_sign(a.0, b.0);
    let common = a.0 & b.0;
    for i in 0..sig.dim() {
        if common & (1 << i) != 0 {
            sign *= sig.generator_metric(i);
        }
    }
    CayleyEntry {
        sign,
        blade: Blade(a.0 ^ b.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alg(p: usize, q: usize, r: usize) -> AlgebraRef {
        Algebra::new(Signature::new(p, q, r)).unwrap()
    }

    /// Independent oracle: reduce an explicit generator sequence by bubble
    /// sort with sign flips, contracting adjacent equal generators by the
    /// metric. Shares no code with the bit-mask table generator.
    fn reduce_sequence(sig: &Signature, seq: &[usize]) -> (i8, u16) {
        let mut s: Vec<usize> = seq.to_vec();
        let mut sign: i8 = 1;
        loop {
            let mut changed = false;
            let mut i = 0;
            while i + 1 < s.len() {
                if s[i] > s[i + 1] {
                    s.swap(i, i + 1);
                    sign = -sign;
                    changed = true;
                } else if s[i] == s[i + 1] {
                    sign *= sig.generator_metric(s[i]);
                    s.drain(i..=i + 1);
                    if sign == 0 {
                        return (0, 0);
                    }
                    changed = true;
                } else {
                    i += 1;
                }
            }
            if !changed {
                break;
            }
        }
        let mut mask = 0u16;
        for g in s {
            mask |= 1 << g;
        }
        (sign, mask)
    }

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
    fn generator_squares_match_signature() {
        let a = alg(2, 0, 0);
        let e1 = Blade(0b01);
        assert_eq!(
            a.blade_product(e1, e1),
            CayleyEntry { sign: 1, blade: Blade::SCALAR }
        );

        let pga = alg(3, 0, 1);
        let e0 = Blade(0b0001);
        assert_eq!(pga.blade_product(e0, e0).sign, 0);

        let neg = alg(0, 1, 0);
        let e1 = Blade(0b1);
        assert_eq!(
            neg.blade_product(e1, e1),
            CayleyEntry { sign: -1, blade: Blade::SCALAR }
        );
    }

    #[test]
    fn hand_expanded_products() {
        let a = alg(2, 0, 0);
        let e1 = Blade(0b01);
        let e2 = Blade(0b10);
        let e12 = Blade(0b11);
        assert_eq!(a.blade_product(e1, e2), CayleyEntry { sign: 1, blade: e12 });
        assert_eq!(a.blade_product(e2, e1), CayleyEntry { sign: -1, blade: e12 });
        // e12·e12 = e1 e2 e1 e2 = -e1 e1 e2 e2 = -1
        assert_eq!(
            a.blade_product(e12, e12),
            CayleyEntry { sign: -1, blade: Blade::SCALAR }
        );
    }

    #[test]
    fn table_matches_sequence_reducer_exhaustively() {
        for sig in all_signatures(4) {
            let a = Algebra::new(sig).unwrap();
            for &x in a.blades() {
                for &y in a.blades() {
                    let seq: Vec<usize> = x.generators().chain(y.generators()).collect();
                    let (sign, mask) = reduce_sequence(&sig, &seq);
                    let entry = a.blade_product(x, y);
                    assert_eq!(entry.sign, sign, "sign mismatch {sig} {x:?} {y:?}");
                    if sign != 0 {
                        assert_eq!(entry.blade.0, mask, "mask mismatch {sig} {x:?} {y:?}");
                        assert_eq!(entry.blade.0, x.0 ^ y.0);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_sign_iff_shared_null_generator() {
        for sig in all_signatures(4) {
            let a = Algebra::new(sig).unwrap();
            for &x in a.blades() {
                for &y in a.blades() {
                    let entry = a.blade_product(x, y);
                    let shares_null =
                        (0..sig.r).any(|i| x.contains_generator(i) && y.contains_generator(i));
                    assert_eq!(entry.sign == 0, shares_null, "{sig} {x:?} {y:?}");
                }
            }
        }
    }

    #[test]
    fn complements_invert() {
        for sig in all_signatures(5) {
            let a = Algebra::new(sig).unwrap();
            for &b in a.blades() {
                let (s, c) = a.right_complement(b);
                // b ∧ (s·c) = +I
                let (so, blade) = a.blade_outer(b, c).unwrap();
                assert_eq!(blade, a.pseudoscalar());
                assert_eq!(s * so, 1);
                let (sl, back) = a.left_complement(c);
                assert_eq!(back, b);
                assert_eq!(s * sl, 1, "complement round trip in {sig}");
            }
        }
    }

    #[test]
    fn regressive_grade_rule() {
        let a = alg(3, 0, 1);
        for &x in a.blades() {
            for &y in a.blades() {
                if let Some((s, out)) = a.blade_regressive(x, y) {
                    assert_ne!(s, 0);
                    assert_eq!(out.grade(), x.grade() + y.grade() - a.dim());
                }
            }
        }
    }

    #[test]
    fn ceiling_enforced() {
        let err = Algebra::new(Signature::new(9, 0, 0)).unwrap_err();
        assert!(matches!(err, AlgebraError::DimensionCeilingExceeded { dim: 9, ceiling: 8 }));
        assert!(Algebra::with_ceiling(Signature::new(3, 0, 0), 2).is_err());
    }

    #[test]
    fn blade_names_round_trip() {
        let pga = alg(3, 0, 1);
        assert_eq!(pga.blade_name(Blade::SCALAR), "1");
        assert_eq!(pga.blade_name(Blade(0b0011)), "e01");
        assert_eq!(pga.blade_by_name("e01"), Some(Blade(0b0011)));
        let euc = alg(3, 0, 0);
        assert_eq!(euc.blade_name(Blade(0b011)), "e12");
        assert_eq!(euc.blade_by_name("e12"), Some(Blade(0b011)));
        assert_eq!(euc.blade_by_name("e0"), None);
    }
}
