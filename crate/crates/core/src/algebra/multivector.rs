//! Multivectors as sparse blade→coefficient maps, with the four products,
//! reversal, sandwich, grade projection, and norms. All operations are pure;
//! results are canonicalized (no stored zero coefficients).

use std::collections::BTreeMap;
use std::fmt;

use super::{AlgebraError, AlgebraRef, Blade};
use crate::scalar::{Mode, Scalar};

/// Relative magnitude below which float coefficients are dropped during
/// canonicalization. Exact mode has no threshold.
pub const FLOAT_ZERO_RELATIVE: f64 = 1e-14;

/// The product vocabulary. The inner product is the grade-filtered
/// geometric product (the |p-q| part, scalar operands included); the
/// regressive product uses the non-metric right complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ProductKind {
    Gp,
    Outer,
    Inner,
    Regressive,
}

impl ProductKind {
    pub const ALL: [ProductKind; 4] = [
        ProductKind::Gp,
        ProductKind::Outer,
        ProductKind::Inner,
        ProductKind::Regressive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProductKind::Gp => "gp",
            ProductKind::Outer => "outer",
            ProductKind::Inner => "inner",
            ProductKind::Regressive => "regressive",
        }
    }

    pub fn from_name(name: &str) -> Option<ProductKind> {
        match name {
            "gp" => Some(ProductKind::Gp),
            "outer" => Some(ProductKind::Outer),
            "inner" => Some(ProductKind::Inner),
            "regressive" => Some(ProductKind::Regressive),
            _ => None,
        }
    }
}

impl fmt::Display for ProductKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Metric norm result: the squared norm in the operand's mode plus the float
/// square root.
#[derive(Clone, Debug, PartialEq)]
pub struct NormValue {
    pub squared: Scalar,
    pub value: f64,
}

/// Sandwich product result plus the grade-preservation contract check.
#[derive(Clone, Debug)]
pub struct SandwichOutcome {
    pub value: Multivector,
    /// Set when the operator is not an even-grade unit rotor or the result
    /// grades differ from the operand's.
    pub grade_warning: Option<String>,
}

/// Sparse multivector over one algebra in one numeric mode.
#[derive(Clone, Debug)]
pub struct Multivector {
    algebra: AlgebraRef,
    mode: Mode,
    coeffs: BTreeMap<Blade, Scalar>,
}

impl PartialEq for Multivector {
    fn eq(&self, other: &Self) -> bool {
        self.algebra.signature() == other.algebra.signature()
            && self.mode == other.mode
            && self.coeffs == other.coeffs
    }
}

impl Multivector {
    pub fn zero(algebra: AlgebraRef, mode: Mode) -> Self {
        Multivector {
            algebra,
            mode,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn scalar(algebra: AlgebraRef, value: Scalar) -> Self {
        let mode = value.mode();
        let mut mv = Multivector::zero(algebra, mode);
        mv.set(Blade::SCALAR, value);
        mv
    }

    pub fn basis(algebra: AlgebraRef, mode: Mode, blade: Blade) -> Result<Self, AlgebraError> {
        if !algebra.valid_blade(blade) {
            return Err(AlgebraError::InvalidBlade {
                mask: blade.0,
                dim: algebra.dim(),
            });
        }
        let mut mv = Multivector::zero(algebra, mode);
        mv.set(blade, Scalar::one(mode));
        Ok(mv)
    }

    pub fn from_coeffs(
        algebra: AlgebraRef,
        mode: Mode,
        coeffs: impl IntoIterator<Item = (Blade, Scalar)>,
    ) -> Result<Self, AlgebraError> {
        let mut mv = Multivector::zero(algebra, mode);
        for (b, c) in coeffs {
            if !mv.algebra.valid_blade(b) {
                return Err(AlgebraError::InvalidBlade {
                    mask: b.0,
                    dim: mv.algebra.dim(),
                });
            }
            if c.mode() != mode {
                return Err(AlgebraError::ModeMismatch);
            }
            let entry = mv.coeffs.entry(b).or_insert_with(|| Scalar::zero(mode));
            *entry = entry.add(&c);
        }
        mv.canonicalize();
        Ok(mv)
    }

    /// Dense coefficient vector in canonical blade order.
    pub fn to_dense(&self) -> Vec<Scalar> {
        self.algebra
            .blades()
            .iter()
            .map(|b| self.coeff(*b))
            .collect()
    }

    pub fn algebra(&self) -> &AlgebraRef {
        &self.algebra
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn coeff(&self, blade: Blade) -> Scalar {
        self.coeffs
            .get(&blade)
            .cloned()
            .unwrap_or_else(|| Scalar::zero(self.mode))
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (Blade, &Scalar)> {
        self.coeffs.iter().map(|(b, c)| (*b, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Grades of stored blades, ascending, deduplicated.
    pub fn grades(&self) -> Vec<usize> {
        let mut gs: Vec<usize> = self.coeffs.keys().map(|b| b.grade()).collect();
        gs.sort_unstable();
        gs.dedup();
        gs
    }

    fn set(&mut self, blade: Blade, value: Scalar) {
        if value.is_zero() {
            self.coeffs.remove(&blade);
        } else {
            self.coeffs.insert(blade, value);
        }
    }

    fn accumulate(&mut self, blade: Blade, value: &Scalar) {
        let cur = self
            .coeffs
            .entry(blade)
            .or_insert_with(|| Scalar::zero(self.mode));
        *cur = cur.add(value);
    }

    /// Drop exact zeros, plus relatively negligible float coefficients.
    fn canonicalize(&mut self) {
        self.coeffs.retain(|_, c| !c.is_zero());
        if self.mode == Mode::Float64 && !self.coeffs.is_empty() {
            let max = self
                .coeffs
                .values()
                .map(|c| c.to_f64().abs())
                .fold(0.0f64, f64::max);
            let cutoff = FLOAT_ZERO_RELATIVE * max;
            self.coeffs.retain(|_, c| c.to_f64().abs() >= cutoff);
        }
    }

    fn check_compatible(&self, other: &Multivector) -> Result<(), AlgebraError> {
        if self.algebra.signature() != other.algebra.signature() {
            return Err(AlgebraError::AlgebraMismatch);
        }
        if self.mode != other.mode {
            return Err(AlgebraError::ModeMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Multivector) -> Result<Multivector, AlgebraError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (b, c) in &other.coeffs {
            out.accumulate(*b, c);
        }
        out.canonicalize();
        Ok(out)
    }

    pub fn sub(&self, other: &Multivector) -> Result<Multivector, AlgebraError> {
        self.add(&other.negate())
    }

    pub fn negate(&self) -> Multivector {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn scale(&self, factor: &Scalar) -> Result<Multivector, AlgebraError> {
        if factor.mode() != self.mode {
            return Err(AlgebraError::ModeMismatch);
        }
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.mul(factor);
        }
        out.canonicalize();
        Ok(out)
    }

    /// Product of the given kind, summed over per-blade Cayley
    /// contributions.
    pub fn product(
        kind: ProductKind,
        x: &Multivector,
        y: &Multivector,
    ) -> Result<Multivector, AlgebraError> {
        x.check_compatible(y)?;
        let mut out = Multivector::zero(x.algebra.clone(), x.mode);
        for (a, ca) in &x.coeffs {
            for (b, cb) in &y.coeffs {
                if let Some((sign, blade)) = x.algebra.blade_contribution(kind, *a, *b) {
                    let term = ca.mul(cb);
                    let term = if sign < 0 { term.neg() } else { term };
                    out.accumulate(blade, &term);
                }
            }
        }
        out.canonicalize();
        Ok(out)
    }

    pub fn gp(&self, other: &Multivector) -> Result<Multivector, AlgebraError> {
        Multivector::product(ProductKind::Gp, self, other)
    }

    pub fn outer(&self, other: &Multivector) -> Result<Multivector, AlgebraError> {
        Multivector::product(ProductKind::Outer, self, other)
    }

    pub fn inner(&self, other: &Multivector) -> Result<Multivector, AlgebraError> {
        Multivector::product(ProductKind::Inner, self, other)
    }

    pub fn regressive(&self, other: &Multivector) -> Result<Multivector, AlgebraError> {
        Multivector::product(ProductKind::Regressive, self, other)
    }

    /// Left fold of the outer product over two or more factors.
    pub fn outer_join(factors: &[Multivector]) -> Result<Multivector, AlgebraError> {
        assert!(factors.len() >= 2, "outer_join needs at least two factors");
        let mut acc = factors[0].clone();
        for f in &factors[1..] {
            acc = acc.outer(f)?;
        }
        Ok(acc)
    }

    /// Reversal: grade-k parts scale by (-1)^(k(k-1)/2). Involutive.
    pub fn reverse(&self) -> Multivector {
        let mut out = self.clone();
        for (b, c) in out.coeffs.iter_mut() {
            let k = b.grade();
            if (k * (k.saturating_sub(1)) / 2) % 2 == 1 {
                *c = c.neg();
            }
        }
        out
    }

    /// Sandwich product r x reverse(r).
    pub fn sandwich(r: &Multivector, x: &Multivector) -> Result<Multivector, AlgebraError> {
        r.gp(x)?.gp(&r.reverse())
    }

    /// Sandwich with the rotor contract check: warns when `r` is not an
    /// even-grade unit rotor or when the result grades differ from `x`'s.
    pub fn sandwich_checked(
        r: &Multivector,
        x: &Multivector,
    ) -> Result<SandwichOutcome, AlgebraError> {
        let value = Multivector::sandwich(r, x)?;
        let odd: Vec<usize> = r.grades().into_iter().filter(|g| g % 2 == 1).collect();
        let mut grade_warning = None;
        if !odd.is_empty() {
            grade_warning = Some(format!(
                "sandwich operator has odd-grade components {odd:?}; grade preservation not guaranteed"
            ));
        } else {
            let n = r.norm().value;
            if (n - 1.0).abs() > 1e-9 {
                grade_warning = Some(format!(
                    "sandwich operator is not unit (norm {n}); grade preservation not guaranteed"
                ));
            } else if value.grades() != x.grades() && !value.is_zero() && !x.is_zero() {
                grade_warning = Some(format!(
                    "sandwich changed grades {:?} -> {:?}",
                    x.grades(),
                    value.grades()
                ));
            }
        }
        Ok(SandwichOutcome { value, grade_warning })
    }

    /// Keep exactly the grade-k part.
    pub fn grade_project(&self, k: usize) -> Result<Multivector, AlgebraError> {
        if k > self.algebra.dim() {
            return Err(AlgebraError::GradeOutOfRange {
                grade: k,
                dim: self.algebra.dim(),
            });
        }
        let mut out = Multivector::zero(self.algebra.clone(), self.mode);
        for (b, c) in &self.coeffs {
            if b.grade() == k {
                out.coeffs.insert(*b, c.clone());
            }
        }
        Ok(out)
    }

    /// Metric norm: sqrt(|scalar part of x·reverse(x)|). The squared value
    /// stays in the operand's mode; the root is a float.
    pub fn norm(&self) -> NormValue {
        let squared = self
            .gp(&self.reverse())
            .expect("self-product cannot mismatch")
            .coeff(Blade::SCALAR)
            .abs();
        let value = squared.to_f64().sqrt();
        NormValue { squared, value }
    }
}

impl fmt::Display for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (b, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *b == Blade::SCALAR {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c} {}", self.algebra.blade_name(*b))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Algebra, Signature};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn alg(p: usize, q: usize, r: usize) -> AlgebraRef {
        Algebra::new(Signature::new(p, q, r)).unwrap()
    }

    fn basis(a: &AlgebraRef, mode: Mode, mask: u16) -> Multivector {
        Multivector::basis(a.clone(), mode, Blade(mask)).unwrap()
    }

    fn random_mv(a: &AlgebraRef, rng: &mut StdRng, grades: Option<&[usize]>) -> Multivector {
        let mut coeffs = Vec::new();
        for &b in a.blades() {
            if let Some(gs) = grades {
                if !gs.contains(&b.grade()) {
                    continue;
                }
            }
            let num = rng.random_range(-9i64..=9);
            let den = rng.random_range(1i64..=7);
            coeffs.push((b, Scalar::ratio(num, den)));
        }
        Multivector::from_coeffs(a.clone(), Mode::ExactRational, coeffs).unwrap()
    }

    #[test]
    fn outer_of_vector_with_itself_vanishes() {
        let a = alg(2, 0, 0);
        let e1 = basis(&a, Mode::ExactRational, 0b01);
        assert!(e1.outer(&e1).unwrap().is_zero());
    }

    #[test]
    fn inner_lowers_grade() {
        let a = alg(2, 0, 0);
        let e1 = basis(&a, Mode::ExactRational, 0b01);
        let e12 = basis(&a, Mode::ExactRational, 0b11);
        let out = e1.inner(&e12).unwrap();
        assert_eq!(out, basis(&a, Mode::ExactRational, 0b10));
    }

    #[test]
    fn degenerate_pairs_contribute_nothing() {
        let a = alg(3, 0, 1);
        let e01 = basis(&a, Mode::ExactRational, 0b0011);
        let e02 = basis(&a, Mode::ExactRational, 0b0101);
        assert!(e01.gp(&e02).unwrap().is_zero());
    }

    #[test]
    fn gp_splits_into_inner_plus_outer_on_vectors() {
        let mut rng = StdRng::seed_from_u64(11);
        for (p, q, r) in [(2, 0, 0), (3, 0, 0), (3, 0, 1), (1, 1, 0)] {
            let a = alg(p, q, r);
            for _ in 0..50 {
                let x = random_mv(&a, &mut rng, Some(&[1]));
                let y = random_mv(&a, &mut rng, Some(&[1]));
                let gp = x.gp(&y).unwrap();
                let sum = x.inner(&y).unwrap().add(&x.outer(&y).unwrap()).unwrap();
                assert_eq!(gp, sum);
            }
        }
    }

    #[test]
    fn outer_is_associative_exact() {
        let mut rng = StdRng::seed_from_u64(12);
        let a = alg(3, 0, 1);
        for _ in 0..30 {
            let x = random_mv(&a, &mut rng, None);
            let y = random_mv(&a, &mut rng, None);
            let z = random_mv(&a, &mut rng, None);
            let left = x.outer(&y).unwrap().outer(&z).unwrap();
            let right = x.outer(&y.outer(&z).unwrap()).unwrap();
            assert_eq!(left, right);
        }
    }

    #[test]
    fn reverse_is_involutive_antiautomorphism() {
        let mut rng = StdRng::seed_from_u64(13);
        let a = alg(2, 1, 1);
        for _ in 0..30 {
            let x = random_mv(&a, &mut rng, None);
            let y = random_mv(&a, &mut rng, None);
            assert_eq!(x.reverse().reverse(), x);
            assert_eq!(
                x.gp(&y).unwrap().reverse(),
                y.reverse().gp(&x.reverse()).unwrap()
            );
        }
    }

    #[test]
    fn grade_projections_recompose() {
        let mut rng = StdRng::seed_from_u64(14);
        let a = alg(3, 0, 1);
        for _ in 0..20 {
            let x = random_mv(&a, &mut rng, None);
            let mut sum = Multivector::zero(a.clone(), Mode::ExactRational);
            for k in 0..=a.dim() {
                sum = sum.add(&x.grade_project(k).unwrap()).unwrap();
            }
            assert_eq!(sum, x);
        }
        assert!(basis(&a, Mode::ExactRational, 0b0001)
            .grade_project(0)
            .unwrap()
            .is_zero());
        assert!(matches!(
            basis(&a, Mode::ExactRational, 0).grade_project(9),
            Err(AlgebraError::GradeOutOfRange { .. })
        ));
    }

    #[test]
    fn sandwich_rotates_vectors() {
        // r = cos(t/2) - sin(t/2) e12 applied to e1 gives cos(t) e1 + sin(t) e2
        let a = alg(2, 0, 0);
        let t = std::f64::consts::FRAC_PI_2;
        let r = Multivector::from_coeffs(
            a.clone(),
            Mode::Float64,
            [
                (Blade(0), Scalar::F64((t / 2.0).cos())),
                (Blade(0b11), Scalar::F64(-(t / 2.0).sin())),
            ],
        )
        .unwrap();
        let e1 = basis(&a, Mode::Float64, 0b01);
        let out = Multivector::sandwich(&r, &e1).unwrap();
        assert!((out.coeff(Blade(0b01)).to_f64() - t.cos()).abs() < 1e-12);
        assert!((out.coeff(Blade(0b10)).to_f64() - t.sin()).abs() < 1e-12);

        let identity = Multivector::scalar(a.clone(), Scalar::F64(1.0));
        let same = Multivector::sandwich_checked(&identity, &e1).unwrap();
        assert_eq!(same.value, e1);
        assert!(same.grade_warning.is_none());

        let mixed = identity.add(&e1).unwrap();
        let warned = Multivector::sandwich_checked(&mixed, &e1).unwrap();
        assert!(warned.grade_warning.is_some());
    }

    #[test]
    fn norm_examples() {
        let a3 = alg(3, 0, 0);
        assert_eq!(basis(&a3, Mode::Float64, 0b001).norm().value, 1.0);

        let pga = alg(3, 0, 1);
        assert_eq!(basis(&pga, Mode::ExactRational, 0b0001).norm().value, 0.0);

        let a2 = alg(2, 0, 0);
        let v = Multivector::from_coeffs(
            a2,
            Mode::ExactRational,
            [
                (Blade(0b01), Scalar::from_i64(Mode::ExactRational, 3)),
                (Blade(0b10), Scalar::from_i64(Mode::ExactRational, 4)),
            ],
        )
        .unwrap();
        let n = v.norm();
        assert_eq!(n.squared, Scalar::from_i64(Mode::ExactRational, 25));
        assert_eq!(n.value, 5.0);
    }

    #[test]
    fn join_grade_and_antisymmetry() {
        let pga = alg(3, 0, 1);
        let mut rng = StdRng::seed_from_u64(15);
        let p1 = random_mv(&pga, &mut rng, Some(&[1]));
        let p2 = random_mv(&pga, &mut rng, Some(&[1]));
        let p3 = random_mv(&pga, &mut rng, Some(&[1]));
        let face = Multivector::outer_join(&[p1.clone(), p2.clone(), p3.clone()]).unwrap();
        assert_eq!(face.grades(), vec![3]);
        let swapped = Multivector::outer_join(&[p2.clone(), p1.clone(), p3.clone()]).unwrap();
        assert_eq!(face, swapped.negate());
        // repeated factor annihilates
        assert!(Multivector::outer_join(&[p1.clone(), p2.clone(), p1.clone()])
            .unwrap()
            .is_zero());
        // five grade-1 factors exceed d=4
        assert!(Multivector::outer_join(&[
            p1.clone(),
            p2.clone(),
            p3.clone(),
            random_mv(&pga, &mut rng, Some(&[1])),
            random_mv(&pga, &mut rng, Some(&[1])),
        ])
        .unwrap()
        .is_zero());
    }

    #[test]
    fn mode_and_algebra_mismatches_reported() {
        let a = alg(2, 0, 0);
        let b = alg(3, 0, 0);
        let x = basis(&a, Mode::Float64, 0b01);
        let y = basis(&a, Mode::ExactRational, 0b01);
        let z = basis(&b, Mode::Float64, 0b01);
        assert!(matches!(x.gp(&y), Err(AlgebraError::ModeMismatch)));
        assert!(matches!(x.gp(&z), Err(AlgebraError::AlgebraMismatch)));
    }

    #[test]
    fn float_canonicalization_drops_relative_dust() {
        let a = alg(2, 0, 0);
        let x = Multivector::from_coeffs(
            a,
            Mode::Float64,
            [
                (Blade(0b01), Scalar::F64(1.0)),
                (Blade(0b10), Scalar::F64(1e-16)),
            ],
        )
        .unwrap();
        assert_eq!(x.grades(), vec![1]);
        assert!(x.coeff(Blade(0b10)).is_zero());
    }
}
