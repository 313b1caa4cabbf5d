use crate::error::{check_len, Error, Result};

/// Regularly sampled 2D field, fast axis first.
///
/// For earth models the fast axis is depth and the slow axis lateral
/// position; for gathers it is time and receiver. Sample `(i1, i2)` lives at
/// `values[i2 * n1 + i1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub n1: usize,
    pub n2: usize,
    pub d1: f64,
    pub d2: f64,
    pub o1: f64,
    pub o2: f64,
    pub values: Vec<f64>,
}

impl Grid2D {
    pub fn new(n1: usize, n2: usize, d1: f64, d2: f64, values: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {n1}x{n2}"
            )));
        }
        if !(d1 > 0.0 && d1.is_finite() && d2 > 0.0 && d2.is_finite()) {
            return Err(Error::invalid(format!(
                "grid spacings must be positive, got {d1}, {d2}"
            )));
        }
        check_len("grid values", n1 * n2, values.len())?;
        Ok(Self {
            n1,
            n2,
            d1,
            d2,
            o1: 0.0,
            o2: 0.0,
            values,
        })
    }

    pub fn filled(n1: usize, n2: usize, d1: f64, d2: f64, value: f64) -> Result<Self> {
        Self::new(n1, n2, d1, d2, vec![value; n1 * n2])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i2 * self.n1 + i1
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize) -> f64 {
        self.values[self.index(i1, i2)]
    }

    #[inline]
    pub fn set(&mut self, i1: usize, i2: usize, v: f64) {
        let i = self.index(i1, i2);
        self.values[i] = v;
    }

    /// Samples along the slow axis at fixed fast index (a depth row for earth models).
    pub fn row(&self, i1: usize) -> Vec<f64> {
        (0..self.n2).map(|i2| self.get(i1, i2)).collect()
    }

    pub fn column(&self, i2: usize) -> &[f64] {
        &self.values[i2 * self.n1..(i2 + 1) * self.n1]
    }

    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        check_len("grid values", self.len(), values.len())?;
        Ok(Self {
            values,
            ..self.clone()
        })
    }
}
