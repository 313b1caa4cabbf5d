//! Matrix-free linear operators.
//!
//! An operator maps a real model vector of length `model_dim` to a real data
//! vector of length `data_dim` (`forward`, the de-migration `A`) and back
//! (`adjoint`, the migration `Aᵀ`). Everything downstream, from CGLS to the
//! block-row recursion, only ever touches operators through this trait.
//!
//! Operators are immutable once built, so the same instance may be applied from
//! several threads at once.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};

pub trait LinearOperator: Send + Sync {
    fn model_dim(&self) -> usize;
    fn data_dim(&self) -> usize;

    /// Overwrites `data` with `A · model`. Lengths have already been checked.
    fn forward_into(&self, model: &[f64], data: &mut [f64]);

    /// Overwrites `model` with `Aᵀ · data`. Lengths have already been checked.
    fn adjoint_into(&self, data: &[f64], model: &mut [f64]);

    /// Whether the operator is known to be identically zero.
    ///
    /// Matrix-free operators cannot tell in general and return `false`.
    fn is_zero(&self) -> bool {
        false
    }

    fn apply_forward(&self, model: &[f64]) -> Result<Vec<f64>> {
        check_len("forward model vector", self.model_dim(), model.len())?;
        let mut data = vec![0.0; self.data_dim()];
        self.forward_into(model, &mut data);
        Ok(data)
    }

    fn apply_adjoint(&self, data: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint data vector", self.data_dim(), data.len())?;
        let mut model = vec![0.0; self.model_dim()];
        self.adjoint_into(data, &mut model);
        Ok(model)
    }
}

pub type SharedOperator = Arc<dyn LinearOperator>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Result of the dot-product adjoint test `⟨A x, y⟩ = ⟨x, Aᵀ y⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DotTest {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
}

impl DotTest {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.relative_error < tolerance
    }
}

/// Draws `x` (model space) then `y` (data space) as standard normals from
/// `ChaCha8Rng::seed_from_u64(seed)` and compares both sides of the adjoint
/// identity. The denominator is floored at `f64::MIN_POSITIVE`.
pub fn dot_test(op: &dyn LinearOperator, seed: u64) -> DotTest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..op.model_dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let y: Vec<f64> = (0..op.data_dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();

    let mut ax = vec![0.0; op.data_dim()];
    op.forward_into(&x, &mut ax);
    let mut aty = vec![0.0; op.model_dim()];
    op.adjoint_into(&y, &mut aty);

    let lhs = dot(&ax, &y);
    let rhs = dot(&x, &aty);
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    DotTest {
        lhs,
        rhs,
        relative_error: (lhs - rhs).abs() / scale,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityOperator {
    dim: usize,
}

impl IdentityOperator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LinearOperator for IdentityOperator {
    fn model_dim(&self) -> usize {
        self.dim
    }

    fn data_dim(&self) -> usize {
        self.dim
    }

    fn forward_into(&self, model: &[f64], data: &mut [f64]) {
        data.copy_from_slice(model);
    }

    fn adjoint_into(&self, data: &[f64], model: &mut [f64]) {
        model.copy_from_slice(data);
    }

    fn is_zero(&self) -> bool {
        self.dim == 0
    }
}

/// Explicit `rows × cols` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "dense operator needs positive dimensions, got {rows}x{cols}"
            )));
        }
        check_len("dense operator entries", rows * cols, entries.len())?;
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len("dense operator row", cols, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self {
            rows: dim,
            cols: dim,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Vertical concatenation `[self; other]`.
    pub fn stack(&self, other: &DenseOperator) -> Result<DenseOperator> {
        check_len("stacked dense operator columns", self.cols, other.cols)?;
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Self::new(self.rows + other.rows, self.cols, entries)
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }
}

impl LinearOperator for DenseOperator {
    fn model_dim(&self) -> usize {
        self.cols
    }

    fn data_dim(&self) -> usize {
        self.rows
    }

    fn forward_into(&self, model: &[f64], data: &mut [f64]) {
        for (i, out) in data.iter_mut().enumerate() {
            *out = dot(self.row(i), model);
        }
    }

    fn adjoint_into(&self, data: &[f64], model: &mut [f64]) {
        model.fill(0.0);
        for (i, &di) in data.iter().enumerate() {
            for (m, a) in model.iter_mut().zip(self.row(i)) {
                *m += a * di;
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.entries.iter().all(|&a| a == 0.0)
    }
}

/// Row-block concatenation of operators sharing a model space.
///
/// Forward writes each block's output into its own slice of the data vector;
/// adjoint sums the block adjoints in block order, so the result does not
/// depend on how the blocks were scheduled.
#[derive(Clone)]
pub struct StackedOperator {
    blocks: Vec<SharedOperator>,
    offsets: Vec<usize>,
    model_dim: usize,
}

impl std::fmt::Debug for StackedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StackedOperator")
            .field("blocks", &self.blocks.len())
            .field("model_dim", &self.model_dim)
            .field("data_dim", &self.data_dim())
            .finish()
    }
}

pub fn stack_rows(ops: Vec<SharedOperator>) -> Result<StackedOperator> {
    let first = ops
        .first()
        .ok_or_else(|| Error::invalid("cannot stack an empty list of operators"))?;
    let model_dim = first.model_dim();
    let mut offsets = Vec::with_capacity(ops.len() + 1);
    offsets.push(0);
    for op in &ops {
        check_len("stacked block model_dim", model_dim, op.model_dim())?;
        offsets.push(offsets.last().unwrap() + op.data_dim());
    }
    Ok(StackedOperator {
        blocks: ops,
        offsets,
        model_dim,
    })
}

impl StackedOperator {
    pub fn blocks(&self) -> &[SharedOperator] {
        &self.blocks
    }

    /// Data-space range occupied by block `i`.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

impl LinearOperator for StackedOperator {
    fn model_dim(&self) -> usize {
        self.model_dim
    }

    fn data_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn forward_into(&self, model: &[f64], data: &mut [f64]) {
        let mut chunks = Vec::with_capacity(self.blocks.len());
        let mut rest = data;
        for block in &self.blocks {
            let (head, tail) = rest.split_at_mut(block.data_dim());
            chunks.push(head);
            rest = tail;
        }
        self.blocks
            .par_iter()
            .zip(chunks.into_par_iter())
            .for_each(|(block, out)| block.forward_into(model, out));
    }

    fn adjoint_into(&self, data: &[f64], model: &mut [f64]) {
        let partials: Vec<Vec<f64>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(i, block)| {
                let mut part = vec![0.0; self.model_dim];
                block.adjoint_into(&data[self.block_range(i)], &mut part);
                part
            })
            .collect();
        model.fill(0.0);
        for part in &partials {
            for (m, p) in model.iter_mut().zip(part) {
                *m += p;
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.is_zero())
    }
}

/// Wraps an operator and negates the largest-magnitude component of its
/// adjoint output.
///
/// Exists only so that adjoint checks can be shown to fail on a broken pair.
pub struct SignFlippedAdjoint {
    inner: SharedOperator,
}

impl SignFlippedAdjoint {
    pub fn new(inner: SharedOperator) -> Self {
        Self { inner }
    }
}

impl LinearOperator for SignFlippedAdjoint {
    fn model_dim(&self) -> usize {
        self.inner.model_dim()
    }

    fn data_dim(&self) -> usize {
        self.inner.data_dim()
    }

    fn forward_into(&self, model: &[f64], data: &mut [f64]) {
        self.inner.forward_into(model, data);
    }

    fn adjoint_into(&self, data: &[f64], model: &mut [f64]) {
        self.inner.adjoint_into(data, model);
        let largest = model
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i);
        if let Some(i) = largest {
            model[i] = -model[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shared<O: LinearOperator + 'static>(op: O) -> SharedOperator {
        Arc::new(op)
    }

    fn upper() -> DenseOperator {
        DenseOperator::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn identity_forward_and_adjoint() {
        let id = IdentityOperator::new(3);
        assert_eq!(
            id.apply_forward(&[1.0, 2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        let id2 = IdentityOperator::new(2);
        assert_eq!(id2.apply_adjoint(&[4.0, 5.0]).unwrap(), vec![4.0, 5.0]);
    }

    #[test]
    fn dense_matvec_by_hand() {
        let a = upper();
        assert_eq!(a.apply_forward(&[1.0, 1.0]).unwrap(), vec![2.0, 1.0]);
        assert_eq!(a.apply_adjoint(&[1.0, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn zero_in_zero_out() {
        let a = upper();
        assert_eq!(a.apply_forward(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(a.apply_adjoint(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_names_sizes() {
        let err = upper().apply_forward(&[1.0, 2.0, 3.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 2") && msg.contains("got 3"), "{msg}");
        assert!(upper().apply_adjoint(&[1.0]).is_err());
    }

    #[test]
    fn identity_dot_test_is_exact() {
        for seed in 0..5 {
            assert_eq!(
                dot_test(&IdentityOperator::new(17), seed).relative_error,
                0.0
            );
        }
    }

    #[test]
    fn dense_dot_test_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let entries: Vec<f64> = (0..7 * 5)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let a = DenseOperator::new(7, 5, entries).unwrap();
        for seed in 0..20 {
            assert!(dot_test(&a, seed).relative_error < 1e-12);
        }
        let broken = SignFlippedAdjoint::new(shared(a));
        assert!(dot_test(&broken, 3).relative_error > 1e-6);
    }

    #[test]
    fn stack_of_identities() {
        let s = stack_rows(vec![
            shared(IdentityOperator::new(2)),
            shared(IdentityOperator::new(2)),
        ])
        .unwrap();
        assert_eq!(s.data_dim(), 4);
        assert_eq!(
            s.apply_forward(&[1.0, 2.0]).unwrap(),
            vec![1.0, 2.0, 1.0, 2.0]
        );
        assert_eq!(
            s.apply_adjoint(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![4.0, 6.0]
        );
        assert_eq!(dot_test(&s, 1).relative_error, 0.0);
    }

    #[test]
    fn stack_rejects_bad_input() {
        assert!(stack_rows(vec![]).is_err());
        assert!(stack_rows(vec![
            shared(IdentityOperator::new(2)),
            shared(IdentityOperator::new(3)),
        ])
        .is_err());
    }

    #[test]
    fn zero_detection() {
        let z = DenseOperator::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(z.is_zero());
        assert!(!upper().is_zero());
        let s = stack_rows(vec![shared(z.clone()), shared(z)]).unwrap();
        assert!(s.is_zero());
    }

    fn dense_strategy() -> impl Strategy<Value = (DenseOperator, DenseOperator)> {
        (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(r0, r1, c)| {
            (
                prop::collection::vec(-10.0f64..10.0, r0 * c),
                prop::collection::vec(-10.0f64..10.0, r1 * c),
            )
                .prop_map(move |(e0, e1)| {
                    (
                        DenseOperator::new(r0, c, e0).unwrap(),
                        DenseOperator::new(r1, c, e1).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn stacked_forward_restricts_to_blocks((a0, a1) in dense_strategy(), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<f64> = (0..a0.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = stack_rows(vec![shared(a0.clone()), shared(a1.clone())]).unwrap();
            let full = s.apply_forward(&m).unwrap();
            prop_assert_eq!(&full[s.block_range(0)], &a0.apply_forward(&m).unwrap()[..]);
            prop_assert_eq!(&full[s.block_range(1)], &a1.apply_forward(&m).unwrap()[..]);
            prop_assert!(dot_test(&s, seed).relative_error < 1e-10);
        }

        #[test]
        fn dense_is_linear((a, _) in dense_strategy(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..a.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..a.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| alpha * u + beta * v).collect();
            let lhs = a.apply_forward(&combo).unwrap();
            let ax = a.apply_forward(&x).unwrap();
            let ay = a.apply_forward(&y).unwrap();
            let diff: Vec<f64> = lhs.iter().zip(ax.iter().zip(&ay)).map(|(l, (p, q))| l - alpha * p - beta * q).collect();
            let n = norm(&lhs);
            prop_assume!(n > 0.1 * (alpha.abs() * norm(&ax) + beta.abs() * norm(&ay)));
            prop_assert!(norm(&diff) / n < 1e-12);
        }
    }
}
