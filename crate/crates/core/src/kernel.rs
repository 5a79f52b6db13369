//! Sparsity profiles and straight-line kernels derived from the Cayley
//! table. A kernel is a single-assignment instruction list specialized to
//! one algebra, operation kind, and input grade restriction: one multiply
//! per non-zero Cayley contribution and one add chain per output slot, in
//! blade-mask ascending order, so instruction counts are auditable against
//! the profile and the printed form is byte-stable.

use std::collections::BTreeMap;
use std::fmt;

use crate::algebra::{Algebra, AlgebraError, Blade, Multivector, ProductKind, Signature};
use crate::grade::GradeSet;
use crate::scalar::{Mode, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelError {
    /// The requested kernel computes identically zero by grade arithmetic.
    StructuralZeroKernel,
    /// A grade set was unknown or out of range for the algebra.
    InvalidGrades(String),
    /// run_kernel input binding missing a slot.
    MissingSlot(String),
    ModeMismatch,
    Algebra(AlgebraError),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::StructuralZeroKernel => {
                write!(f, "kernel would compute identically zero")
            }
            KernelError::InvalidGrades(msg) => write!(f, "invalid grade restriction: {msg}"),
            KernelError::MissingSlot(name) => write!(f, "missing input slot `{name}`"),
            KernelError::ModeMismatch => write!(f, "kernel inputs mix numeric modes"),
            KernelError::Algebra(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for KernelError {}

impl From<AlgebraError> for KernelError {
    fn from(e: AlgebraError) -> Self {
        KernelError::Algebra(e)
    }
}

/// Arithmetic cost of one operation under a grade restriction, against both
/// the grade-restricted dense pair count and the full 2^d x 2^d dense
/// evaluation.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SparsityProfile {
    pub signature: Signature,
    pub kind: ProductKind,
    pub input_grades: Vec<Vec<usize>>,
    /// Blade pairs with a non-zero contribution.
    pub nonzero: usize,
    /// Blade pairs in the grade-restricted dense evaluation.
    pub restricted_dense: usize,
    pub multiplies: usize,
    pub adds: usize,
    pub dense_multiplies: usize,
    pub dense_adds: usize,
    /// 100 * (1 - nonzero / restricted_dense).
    pub reduction_pct: f64,
}

/// Instruction operator. MULADD appears only when fused contraction is
/// requested; default emission keeps MUL/ADD separate so counts match the
/// profile exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum OpCode {
    Mul,
    Add,
    Sub,
    Neg,
    MulAdd,
}

impl OpCode {
    fn name(&self) -> &'static str {
        match self {
            OpCode::Mul => "mul",
            OpCode::Add => "add",
            OpCode::Sub => "sub",
            OpCode::Neg => "neg",
            OpCode::MulAdd => "muladd",
        }
    }
}

/// Slot index into [`KernelIR::slots`].
pub type SlotId = usize;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Instr {
    pub dst: SlotId,
    pub op: OpCode,
    pub args: Vec<SlotId>,
}

/// What a kernel computes.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub enum KernelKind {
    Product(ProductKind),
    /// Fused join of k+1 grade-1 operands.
    Join { order: usize },
}

/// A straight-line single-assignment arithmetic program.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KernelIR {
    pub signature: Signature,
    pub kind: KernelKind,
    pub input_grades: Vec<Vec<usize>>,
    /// All slot names; instruction operands index into this table.
    pub slots: Vec<String>,
    /// Input slots per operand, in canonical blade order.
    pub inputs: Vec<Vec<(Blade, SlotId)>>,
    /// Output slots, blade-mask ascending; each written exactly once.
    pub outputs: Vec<(Blade, SlotId)>,
    pub instrs: Vec<Instr>,
}

impl KernelIR {
    pub fn multiply_count(&self) -> usize {
        self.instrs
            .iter()
            .filter(|i| matches!(i.op, OpCode::Mul | OpCode::MulAdd))
            .count()
    }

    pub fn add_count(&self) -> usize {
        self.instrs
            .iter()
            .filter(|i| matches!(i.op, OpCode::Add | OpCode::Sub | OpCode::MulAdd))
            .count()
    }
}

impl fmt::Display for KernelIR {
    /// Line-oriented text form: a header, slot declarations, then one
    /// instruction per line as `dst = op a b`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            KernelKind::Product(k) => k.name().to_string(),
            KernelKind::Join { order } => format!("join{}", order),
        };
        let grades: Vec<String> = self
            .input_grades
            .iter()
            .map(|gs| {
                format!(
                    "{{{}}}",
                    gs.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")
                )
            })
            .collect();
        writeln!(f, "kernel {} {} {}", kind, self.signature, grades.join("x"))?;
        for (i, operand) in self.inputs.iter().enumerate() {
            let names: Vec<&str> = operand.iter().map(|(_, s)| self.slots[*s].as_str()).collect();
            writeln!(f, "in{} {}", i, names.join(" "))?;
        }
        let outs: Vec<&str> = self.outputs.iter().map(|(_, s)| self.slots[*s].as_str()).collect();
        writeln!(f, "out {}", outs.join(" "))?;
        for instr in &self.instrs {
            let args: Vec<&str> = instr.args.iter().map(|a| self.slots[*a].as_str()).collect();
            writeln!(f, "{} = {} {}", self.slots[instr.dst], instr.op.name(), args.join(" "))?;
        }
        Ok(())
    }
}

fn grades_of(set: &GradeSet, d: usize) -> Result<Vec<usize>, KernelError> {
    match set {
        GradeSet::Unknown => Err(KernelError::InvalidGrades("grade set unknown".into())),
        GradeSet::StructuralZero => Err(KernelError::StructuralZeroKernel),
        GradeSet::Grades(_) => {
            let gs = set.grades();
            if gs.iter().any(|g| *g > d) {
                return Err(KernelError::InvalidGrades(format!(
                    "grades {gs:?} exceed dimension {d}"
                )));
            }
            Ok(gs)
        }
    }
}

/// Non-zero contributions of `kind` restricted to grade sets, in
/// (a-mask, b-mask) ascending order.
fn contributions(
    alg: &Algebra,
    kind: ProductKind,
    p_grades: &[usize],
    q_grades: &[usize],
) -> Vec<(Blade, Blade, i8, Blade)> {
    let mut out = Vec::new();
    for &a in alg.blades() {
        if !p_grades.contains(&a.grade()) {
            continue;
        }
        for &b in alg.blades() {
            if !q_grades.contains(&b.grade()) {
                continue;
            }
            if let Some((sign, blade)) = alg.blade_contribution(kind, a, b) {
                out.push((a, b, sign, blade));
            }
        }
    }
    out
}

/// Count profile for `kind` restricted to single grades (p, q).
pub fn sparsity_profile(
    alg: &Algebra,
    kind: ProductKind,
    p: usize,
    q: usize,
) -> Result<SparsityProfile, KernelError> {
    sparsity_profile_sets(alg, kind, &GradeSet::singleton(p), &GradeSet::singleton(q))
}

/// Count profile for `kind` restricted to grade sets.
pub fn sparsity_profile_sets(
    alg: &Algebra,
    kind: ProductKind,
    p: &GradeSet,
    q: &GradeSet,
) -> Result<SparsityProfile, KernelError> {
    let d = alg.dim();
    let p_grades = grades_of(p, d)?;
    let q_grades = grades_of(q, d)?;
    let contribs = contributions(alg, kind, &p_grades, &q_grades);
    let restricted_dense: usize = {
        let pa: usize = p_grades.iter().map(|&g| alg.blades_of_grade(g).count()).sum();
        let qa: usize = q_grades.iter().map(|&g| alg.blades_of_grade(g).count()).sum();
        pa * qa
    };
    let mut per_output: BTreeMap<Blade, usize> = BTreeMap::new();
    for (_, _, _, out) in &contribs {
        *per_output.entry(*out).or_insert(0) += 1;
    }
    let nonzero = contribs.len();
    let adds: usize = per_output.values().map(|c| c.saturating_sub(1)).sum();
    let n = alg.blade_count();
    let dense_multiplies = n * n;
    let dense_adds = n * n - n;
    Ok(SparsityProfile {
        signature: alg.signature(),
        kind,
        input_grades: vec![p_grades, q_grades],
        nonzero,
        restricted_dense,
        multiplies: nonzero,
        adds,
        dense_multiplies,
        dense_adds,
        reduction_pct: if restricted_dense == 0 {
            0.0
        } else {
            100.0 * (1.0 - nonzero as f64 / restricted_dense as f64)
        },
    })
}

/// Fraction of zero entries in the full 2^d x 2^d x 2^d product tensor
/// (operand pair x output blade) for the given kind.
pub fn tensor_sparsity(alg: &Algebra, kind: ProductKind) -> f64 {
    let n = alg.blade_count();
    let mut nonzero = 0usize;
    for &a in alg.blades() {
        for &b in alg.blades() {
            if alg.blade_contribution(kind, a, b).is_some() {
                nonzero += 1;
            }
        }
    }
    let total = n * n * n;
    1.0 - nonzero as f64 / total as f64
}

/// Emission options. `fuse_muladd` folds each accumulation into a MULADD,
/// trading auditability of counts for fused contraction.
#[derive(Clone, Copy, Debug, Default)]
pub struct KernelOptions {
    pub fuse_muladd: bool,
}

/// Emit the specialized kernel for a binary product restricted to grade
/// sets: inputs `a_<blade>` and `b_<blade>`, outputs `out_<blade>`.
pub fn emit_kernel(
    alg: &Algebra,
    kind: ProductKind,
    p: &GradeSet,
    q: &GradeSet,
) -> Result<KernelIR, KernelError> {
    emit_kernel_with(alg, kind, p, q, KernelOptions::default())
}

pub fn emit_kernel_with(
    alg: &Algebra,
    kind: ProductKind,
    p: &GradeSet,
    q: &GradeSet,
    opts: KernelOptions,
) -> Result<KernelIR, KernelError> {
    let d = alg.dim();
    let p_grades = grades_of(p, d)?;
    let q_grades = grades_of(q, d)?;
    let contribs = contributions(alg, kind, &p_grades, &q_grades);
    if contribs.is_empty() {
        return Err(KernelError::StructuralZeroKernel);
    }

    let mut b = Builder::new(alg.signature(), KernelKind::Product(kind), vec![
        p_grades.clone(),
        q_grades.clone(),
    ]);
    let a_slots = b.add_operand("a", alg, &p_grades);
    let b_slots = b.add_operand("b", alg, &q_grades);

    // group contributions per output blade, already (a,b)-ascending
    let mut per_output: BTreeMap<Blade, Vec<(Blade, Blade, i8)>> = BTreeMap::new();
    for (a, bb, sign, out) in contribs {
        per_output.entry(out).or_default().push((a, bb, sign));
    }
    for (out, terms) in per_output {
        let mut acc: Option<SlotId> = None;
        for (pa, pb, sign) in &terms {
            acc = Some(b.accumulate(acc, (a_slots[pa], b_slots[pb]), *sign, opts));
        }
        let acc = acc.expect("non-empty term list");
        b.finish_output(alg, out, acc);
    }
    Ok(b.build())
}

/// Emit the fused k-simplex join kernel: the nested outer product of k+1
/// grade-1 operands expanded symbolically, no intermediate multivector.
/// Operands are named `p0..pk`, one slot per grade-1 blade.
pub fn emit_join_kernel(alg: &Algebra, order: usize) -> Result<KernelIR, KernelError> {
    let d = alg.dim();
    let factors = order + 1;
    if factors > d {
        return Err(KernelError::StructuralZeroKernel);
    }
    if factors < 2 {
        return Err(KernelError::InvalidGrades("join needs at least 2 factors".into()));
    }
    let grade1: Vec<usize> = vec![1];
    let mut b = Builder::new(
        alg.signature(),
        KernelKind::Join { order },
        vec![grade1.clone(); factors],
    );
    let operand_slots: Vec<BTreeMap<Blade, SlotId>> = (0..factors)
        .map(|i| b.add_operand(&format!("p{i}"), alg, &grade1))
        .collect();

    // each injective generator tuple (g0..gk) contributes one term to the
    // blade {g0..gk}, signed by the parity of sorting the sequence
    let mut per_output: BTreeMap<Blade, Vec<(Vec<usize>, i8)>> = BTreeMap::new();
    let mut tuple = vec![0usize; factors];
    loop {
        let mut mask = 0u16;
        let mut dup = false;
        for &g in &tuple {
            if mask & (1 << g) != 0 {
                dup = true;
                break;
            }
            mask |= 1 << g;
        }
        if !dup {
            per_output
                .entry(Blade(mask))
                .or_default()
                .push((tuple.clone(), permutation_sign(&tuple)));
        }
        if !next_tuple(&mut tuple, d) {
            break;
        }
    }

    for (out, terms) in per_output {
        let mut acc: Option<SlotId> = None;
        for (tuple, sign) in &terms {
            // chain of multiplies across the operands
            let mut prod = operand_slots[0][&Blade(1 << tuple[0])];
            for (op_idx, &g) in tuple.iter().enumerate().skip(1) {
                let rhs = operand_slots[op_idx][&Blade(1 << g)];
                let dst = b.temp();
                b.instr(dst, OpCode::Mul, vec![prod, rhs]);
                prod = dst;
            }
            acc = Some(b.chain_product(acc, prod, *sign));
        }
        let acc = acc.expect("non-empty");
        b.finish_output(alg, out, acc);
    }
    Ok(b.build())
}

fn permutation_sign(seq: &[usize]) -> i8 {
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in (i + 1)..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Odometer step over tuples in [0, base)^len; false past the last tuple.
fn next_tuple(tuple: &mut [usize], base: usize) -> bool {
    for i in (0..tuple.len()).rev() {
        tuple[i] += 1;
        if tuple[i] < base {
            return true;
        }
        tuple[i] = 0;
    }
    false
}

struct Builder {
    signature: Signature,
    kind: KernelKind,
    input_grades: Vec<Vec<usize>>,
    slots: Vec<String>,
    inputs: Vec<Vec<(Blade, SlotId)>>,
    outputs: Vec<(Blade, SlotId)>,
    instrs: Vec<Instr>,
    temp_count: usize,
}

impl Builder {
    fn new(signature: Signature, kind: KernelKind, input_grades: Vec<Vec<usize>>) -> Self {
        Builder {
            signature,
            kind,
            input_grades,
            slots: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            instrs: Vec::new(),
            temp_count: 0,
        }
    }

    fn slot(&mut self, name: String) -> SlotId {
        self.slots.push(name);
        self.slots.len() - 1
    }

    fn temp(&mut self) -> SlotId {
        let id = self.slot(format!("t{}", self.temp_count));
        self.temp_count += 1;
        id
    }

    fn add_operand(&mut self, prefix: &str, alg: &Algebra, grades: &[usize]) -> BTreeMap<Blade, SlotId> {
        let mut map = BTreeMap::new();
        let mut list = Vec::new();
        for &blade in alg.blades() {
            if grades.contains(&blade.grade()) {
                let id = self.slot(format!("{prefix}_{}", alg.blade_name(blade)));
                map.insert(blade, id);
                list.push((blade, id));
            }
        }
        self.inputs.push(list);
        map
    }

    fn instr(&mut self, dst: SlotId, op: OpCode, args: Vec<SlotId>) {
        self.instrs.push(Instr { dst, op, args });
    }

    /// One product contribution folded into the accumulator chain.
    fn accumulate(
        &mut self,
        acc: Option<SlotId>,
        (a, b): (SlotId, SlotId),
        sign: i8,
        opts: KernelOptions,
    ) -> SlotId {
        if opts.fuse_muladd && acc.is_some() && sign > 0 {
            let dst = self.temp();
            self.instr(dst, OpCode::MulAdd, vec![a, b, acc.unwrap()]);
            return dst;
        }
        let prod = self.temp();
        self.instr(prod, OpCode::Mul, vec![a, b]);
        self.chain_product(acc, prod, sign)
    }

    fn chain_product(&mut self, acc: Option<SlotId>, term: SlotId, sign: i8) -> SlotId {
        match acc {
            None => {
                if sign > 0 {
                    term
                } else {
                    let dst = self.temp();
                    self.instr(dst, OpCode::Neg, vec![term]);
                    dst
                }
            }
            Some(acc) => {
                let dst = self.temp();
                let op = if sign > 0 { OpCode::Add } else { OpCode::Sub };
                self.instr(dst, op, vec![acc, term]);
                dst
            }
        }
    }

    /// Bind the finished accumulator slot to its output name. Every term
    /// chain ends in a fresh temp, so the rename writes each output once.
    fn finish_output(&mut self, alg: &Algebra, out: Blade, acc: SlotId) {
        self.slots[acc] = format!("out_{}", alg.blade_name(out));
        self.outputs.push((out, acc));
    }

    fn build(self) -> KernelIR {
        KernelIR {
            signature: self.signature,
            kind: self.kind,
            input_grades: self.input_grades,
            slots: self.slots,
            inputs: self.inputs,
            outputs: self.outputs,
            instrs: self.instrs,
        }
    }
}

/// Execute a kernel on per-slot inputs. All inputs must share one mode.
pub fn run_kernel(
    kir: &KernelIR,
    inputs: &BTreeMap<String, Scalar>,
) -> Result<BTreeMap<String, Scalar>, KernelError> {
    let mut mode: Option<Mode> = None;
    for v in inputs.values() {
        match mode {
            None => mode = Some(v.mode()),
            Some(m) if m != v.mode() => return Err(KernelError::ModeMismatch),
            _ => {}
        }
    }
    let mode = mode.unwrap_or(Mode::Float64);
    let mut values: Vec<Option<Scalar>> = vec![None; kir.slots.len()];
    for operand in &kir.inputs {
        for (_, slot) in operand {
            let name = &kir.slots[*slot];
            let v = inputs
                .get(name)
                .cloned()
                .ok_or_else(|| KernelError::MissingSlot(name.clone()))?;
            values[*slot] = Some(v);
        }
    }
    for instr in &kir.instrs {
        let arg = |i: usize| -> Result<&Scalar, KernelError> {
            values[instr.args[i]]
                .as_ref()
                .ok_or_else(|| KernelError::MissingSlot(kir.slots[instr.args[i]].clone()))
        };
        let v = match instr.op {
            OpCode::Mul => arg(0)?.mul(arg(1)?),
            OpCode::Add => arg(0)?.add(arg(1)?),
            OpCode::Sub => arg(0)?.sub(arg(1)?),
            OpCode::Neg => arg(0)?.neg(),
            OpCode::MulAdd => arg(0)?.mul(arg(1)?).add(arg(2)?),
        };
        values[instr.dst] = Some(v);
    }
    let mut out = BTreeMap::new();
    for (_, slot) in &kir.outputs {
        let v = values[*slot]
            .clone()
            .unwrap_or_else(|| Scalar::zero(mode));
        out.insert(kir.slots[*slot].clone(), v);
    }
    Ok(out)
}

/// Bind a multivector's coefficients to an operand's input slots.
pub fn bind_operand(
    kir: &KernelIR,
    operand: usize,
    mv: &Multivector,
    into: &mut BTreeMap<String, Scalar>,
) {
    for (blade, slot) in &kir.inputs[operand] {
        into.insert(kir.slots[*slot].clone(), mv.coeff(*blade));
    }
}

/// Run a binary-product kernel on two multivectors and rebuild the result.
pub fn run_kernel_on_multivectors(
    kir: &KernelIR,
    x: &Multivector,
    y: &Multivector,
) -> Result<Multivector, KernelError> {
    run_kernel_on_operands(kir, &[x.clone(), y.clone()])
}

/// Run any kernel on its operand list.
pub fn run_kernel_on_operands(
    kir: &KernelIR,
    operands: &[Multivector],
) -> Result<Multivector, KernelError> {
    assert_eq!(operands.len(), kir.inputs.len(), "operand arity");
    let mut inputs = BTreeMap::new();
    for (i, mv) in operands.iter().enumerate() {
        bind_operand(kir, i, mv, &mut inputs);
    }
    let out = run_kernel(kir, &inputs)?;
    let alg = operands[0].algebra().clone();
    let mode = operands[0].mode();
    let coeffs: Vec<(Blade, Scalar)> = kir
        .outputs
        .iter()
        .filter_map(|(blade, slot)| {
            out.get(&kir.slots[*slot]).map(|v| (*blade, v.clone()))
        })
        .collect();
    Multivector::from_coeffs(alg, mode, coeffs).map_err(KernelError::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraRef;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn alg(p: usize, q: usize, r: usize) -> AlgebraRef {
        Algebra::new(Signature::new(p, q, r)).unwrap()
    }

    fn random_mv(a: &AlgebraRef, rng: &mut StdRng, grades: &[usize]) -> Multivector {
        let coeffs: Vec<(Blade, Scalar)> = a
            .blades()
            .iter()
            .filter(|b| grades.contains(&b.grade()))
            .map(|b| (*b, Scalar::ratio(rng.random_range(-9i64..=9), rng.random_range(1i64..=7))))
            .collect();
        Multivector::from_coeffs(a.clone(), Mode::ExactRational, coeffs).unwrap()
    }

    #[test]
    fn scalar_scalar_profile() {
        let a = alg(3, 0, 1);
        let p = sparsity_profile(&a, ProductKind::Gp, 0, 0).unwrap();
        assert_eq!(p.nonzero, 1);
        assert_eq!(p.restricted_dense, 1);
        assert_eq!(p.adds, 0);
    }

    #[test]
    fn outer_1x1_in_2d() {
        let a = alg(2, 0, 0);
        let p = sparsity_profile(&a, ProductKind::Outer, 1, 1).unwrap();
        assert_eq!(p.nonzero, 2);
        assert_eq!(p.restricted_dense, 4);
        assert_eq!(p.adds, 1);
        assert_eq!(p.reduction_pct, 50.0);
    }

    #[test]
    fn pga_2x1_gp_counts() {
        // 6 grade-2 blades x 4 grade-1 blades = 24 restricted pairs;
        // 3 pairs share the null generator, so 21 contribute
        let a = alg(3, 0, 1);
        let p = sparsity_profile(&a, ProductKind::Gp, 2, 1).unwrap();
        assert_eq!(p.restricted_dense, 24);
        assert_eq!(p.nonzero, 21);
        let k = emit_kernel(&a, ProductKind::Gp, &GradeSet::singleton(2), &GradeSet::singleton(1))
            .unwrap();
        assert_eq!(k.multiply_count(), p.multiplies);
        assert_eq!(k.add_count(), p.adds);
    }

    #[test]
    fn tensor_sparsity_figures() {
        let euc3 = alg(3, 0, 0);
        assert!((tensor_sparsity(&euc3, ProductKind::Gp) - 0.875).abs() < 1e-12);
        let pga3 = alg(3, 0, 1);
        let s = tensor_sparsity(&pga3, ProductKind::Gp);
        assert!((s - (1.0 - 192.0 / 4096.0)).abs() < 1e-12);
        let pga2 = alg(2, 0, 1);
        let s2 = tensor_sparsity(&pga2, ProductKind::Gp);
        assert!((s2 - (1.0 - 48.0 / 512.0)).abs() < 1e-12);
    }

    #[test]
    fn structural_zero_kernels_refused() {
        let a = alg(3, 0, 0);
        assert!(matches!(
            emit_kernel(&a, ProductKind::Outer, &GradeSet::singleton(2), &GradeSet::singleton(2)),
            Err(KernelError::StructuralZeroKernel)
        ));
        assert!(matches!(emit_join_kernel(&a, 3), Err(KernelError::StructuralZeroKernel)));
    }

    #[test]
    fn scalar_broadcast_kernel_shape() {
        // gp {0} x {k}: one copy-scale MUL per grade-k blade, no adds
        let a = alg(3, 0, 0);
        let k = emit_kernel(&a, ProductKind::Gp, &GradeSet::singleton(0), &GradeSet::singleton(2))
            .unwrap();
        assert_eq!(k.multiply_count(), 3);
        assert_eq!(k.add_count(), 0);
    }

    #[test]
    fn kernel_matches_dense_product() {
        let mut rng = StdRng::seed_from_u64(21);
        for (p, q, r) in [(2, 0, 0), (3, 0, 1), (1, 1, 0), (2, 1, 1)] {
            let a = alg(p, q, r);
            let d = a.dim();
            for kind in ProductKind::ALL {
                for gp in 0..=d {
                    for gq in 0..=d {
                        let kir = match emit_kernel(
                            &a,
                            kind,
                            &GradeSet::singleton(gp),
                            &GradeSet::singleton(gq),
                        ) {
                            Ok(k) => k,
                            Err(KernelError::StructuralZeroKernel) => continue,
                            Err(e) => panic!("{e}"),
                        };
                        for _ in 0..5 {
                            let x = random_mv(&a, &mut rng, &[gp]);
                            let y = random_mv(&a, &mut rng, &[gq]);
                            let via_kernel = run_kernel_on_multivectors(&kir, &x, &y).unwrap();
                            let dense = Multivector::product(kind, &x, &y).unwrap();
                            assert_eq!(via_kernel, dense, "{} {kind} {gp}x{gq}", a.signature());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn join_kernel_equals_outer_fold() {
        let mut rng = StdRng::seed_from_u64(22);
        for (p, q, r) in [(3, 0, 1), (4, 0, 1), (3, 0, 0)] {
            let a = alg(p, q, r);
            for order in 1..a.dim() {
                let kir = emit_join_kernel(&a, order).unwrap();
                for _ in 0..5 {
                    let pts: Vec<Multivector> =
                        (0..=order).map(|_| random_mv(&a, &mut rng, &[1])).collect();
                    let fused = run_kernel_on_operands(&kir, &pts).unwrap();
                    let folded = Multivector::outer_join(&pts).unwrap();
                    assert_eq!(fused, folded, "{} order {order}", a.signature());
                }
            }
        }
    }

    #[test]
    fn monotone_specialization() {
        let a = alg(3, 0, 1);
        let small = emit_kernel(
            &a,
            ProductKind::Gp,
            &GradeSet::singleton(1),
            &GradeSet::singleton(2),
        )
        .unwrap();
        let big = emit_kernel(
            &a,
            ProductKind::Gp,
            &GradeSet::from_grades([1, 3]),
            &GradeSet::from_grades([0, 2]),
        )
        .unwrap();
        assert!(small.multiply_count() <= big.multiply_count());
    }

    #[test]
    fn kernel_text_is_stable() {
        let a = alg(2, 0, 0);
        let k1 = emit_kernel(&a, ProductKind::Gp, &GradeSet::singleton(1), &GradeSet::singleton(1))
            .unwrap();
        let k2 = emit_kernel(&a, ProductKind::Gp, &GradeSet::singleton(1), &GradeSet::singleton(1))
            .unwrap();
        assert_eq!(k1.to_string(), k2.to_string());
        let text = k1.to_string();
        assert!(text.contains("kernel gp cl(2,0,0) {1}x{1}"));
        assert!(text.lines().any(|l| l.contains("= mul a_e1 b_e1")));
    }

    #[test]
    fn basis_product_through_kernel() {
        let a = alg(2, 0, 0);
        let kir = emit_kernel(&a, ProductKind::Gp, &GradeSet::singleton(1), &GradeSet::singleton(1))
            .unwrap();
        let mut inputs = BTreeMap::new();
        inputs.insert("a_e1".into(), Scalar::F64(1.0));
        inputs.insert("a_e2".into(), Scalar::F64(0.0));
        inputs.insert("b_e1".into(), Scalar::F64(0.0));
        inputs.insert("b_e2".into(), Scalar::F64(1.0));
        let out = run_kernel(&kir, &inputs).unwrap();
        assert_eq!(out["out_e12"], Scalar::F64(1.0));

        inputs.remove("b_e2");
        assert!(matches!(run_kernel(&kir, &inputs), Err(KernelError::MissingSlot(_))));
    }

    #[test]
    fn all_zero_inputs_give_all_zero_outputs() {
        let a = alg(3, 0, 1);
        let kir = emit_join_kernel(&a, 2).unwrap();
        let zero = Multivector::zero(a.clone(), Mode::ExactRational);
        let out = run_kernel_on_operands(&kir, &[zero.clone(), zero.clone(), zero.clone()]).unwrap();
        assert!(out.is_zero());
    }

    #[test]
    fn muladd_only_when_fused() {
        let a = alg(3, 0, 0);
        let plain = emit_kernel(&a, ProductKind::Gp, &GradeSet::singleton(1), &GradeSet::singleton(1))
            .unwrap();
        assert!(plain.instrs.iter().all(|i| i.op != OpCode::MulAdd));
        let fused = emit_kernel_with(
            &a,
            ProductKind::Gp,
            &GradeSet::singleton(1),
            &GradeSet::singleton(1),
            KernelOptions { fuse_muladd: true },
        )
        .unwrap();
        assert!(fused.instrs.iter().any(|i| i.op == OpCode::MulAdd));
        let mut rng = StdRng::seed_from_u64(23);
        let x = random_mv(&a, &mut rng, &[1]);
        let y = random_mv(&a, &mut rng, &[1]);
        assert_eq!(
            run_kernel_on_multivectors(&plain, &x, &y).unwrap(),
            run_kernel_on_multivectors(&fused, &x, &y).unwrap()
        );
    }
}
