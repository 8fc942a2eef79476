use crate::error::{MqatError, Result};

/// Dense row-major single-precision tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f32>) -> Result<Self> {
        let shape = shape.into();
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(MqatError::shape(
                "tensor",
                format!("invalid shape {shape:?}"),
            ));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(MqatError::shape(
                "tensor",
                format!(
                    "shape {shape:?} needs {expected} values, got {}",
                    data.len()
                ),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f32) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f32) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(MqatError::shape("from_rows", "ragged rows"));
        }
        Self::new([rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> Result<f32> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(MqatError::shape(
                "item",
                format!("expected scalar, got {:?}", self.shape),
            ))
        }
    }

    /// (rows, cols) for a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(MqatError::shape(
                op,
                format!("expected rank-2 tensor, got {other:?}"),
            )),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let cols = *self.shape.last().unwrap();
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// `a · b` with double-precision accumulation.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul")?;
        let (k2, n) = other.dims2("matmul")?;
        if k != k2 {
            return Err(MqatError::shape(
                "matmul",
                format!(
                    "lhs {:?} rhs {:?}: inner dims {k} != {k2}",
                    self.shape, other.shape
                ),
            ));
        }
        let mut out = vec![0f32; m * n];
        let mut acc = vec![0f64; n];
        for i in 0..m {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for p in 0..k {
                let a = self.data[i * k + p] as f64;
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (slot, &b) in acc.iter_mut().zip(brow) {
                    *slot += a * b as f64;
                }
            }
            for (o, a) in out[i * n..(i + 1) * n].iter_mut().zip(&acc) {
                *o = *a as f32;
            }
        }
        Tensor::new([m, n], out)
    }

    /// `a · bᵀ` with double-precision accumulation.
    pub(crate) fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul")?;
        let (n, k2) = other.dims2("matmul")?;
        if k != k2 {
            return Err(MqatError::shape("matmul", "transposed inner dims differ"));
        }
        let mut out = vec![0f32; m * n];
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b = &other.data[j * k..(j + 1) * k];
                let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
                out[i * n + j] = dot as f32;
            }
        }
        Tensor::new([m, n], out)
    }

    /// `aᵀ · b` with double-precision accumulation.
    pub(crate) fn matmul_tn(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul")?;
        let (m2, n) = other.dims2("matmul")?;
        if m != m2 {
            return Err(MqatError::shape("matmul", "transposed outer dims differ"));
        }
        let mut acc = vec![0f64; k * n];
        for i in 0..m {
            let brow = &other.data[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p] as f64;
                if a == 0.0 {
                    continue;
                }
                for (slot, &b) in acc[p * n..(p + 1) * n].iter_mut().zip(brow) {
                    *slot += a * b as f64;
                }
            }
        }
        Tensor::new([k, n], acc.into_iter().map(|v| v as f32).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_shape() {
        assert!(Tensor::new([2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new([0], vec![]).is_err());
    }

    #[test]
    fn transposed_products_agree_with_plain_matmul() {
        let a = Tensor::new([2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 2.0]).unwrap();
        let b = Tensor::new([3, 2], vec![0.5, 1.0, -2.0, 1.0, 3.0, 0.0]).unwrap();
        let bt = Tensor::new([2, 3], vec![0.5, -2.0, 3.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap(), a.matmul_nt(&bt).unwrap());
        let at = Tensor::new([3, 2], vec![1.0, -1.0, 2.0, 0.5, 3.0, 2.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap(), at.matmul_tn(&b).unwrap());
    }
}
