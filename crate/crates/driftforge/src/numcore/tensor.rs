use crate::error::{Error, Result};

/// Dense row-major f64 tensor. Rank is the length of `shape`; a rank-0
/// tensor is disallowed (use a rank-1 tensor of length 1 for scalars).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and backing data. The data length must
    /// equal the product of the dimensions.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("tensor rank must be >= 1"));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                format!("{:?} ({} elements)", shape, expected),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    /// Rank-1 tensor owning `data`.
    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the same data under a new shape with equal element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    /// Euclidean norm of the flattened data.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape(
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    fn dims2(&self, what: &str) -> Result<(usize, usize)> {
        if self.rank() != 2 {
            return Err(Error::shape(
                format!("rank-2 tensor for {what}"),
                format!("rank {}", self.rank()),
            ));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    /// Matrix product of two rank-2 tensors, (m,k) x (k,n) -> (m,n).
    ///
    /// Uses the i-k-j loop order so the inner loop is a contiguous axpy over
    /// rows of both `b` and the output; this keeps strict IEEE semantics
    /// (no reassociation) while still vectorizing.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul lhs")?;
        let (k2, n) = other.dims2("matmul rhs")?;
        if k != k2 {
            return Err(Error::shape(
                format!("({m},{k}) x ({k},_)"),
                format!("({m},{k}) x ({k2},{n})"),
            ));
        }
        let a = &self.data;
        let b = &other.data;
        let mut c = vec![0.0f64; m * n];
        for i in 0..m {
            let crow = &mut c[i * n..(i + 1) * n];
            let arow = &a[i * k..(i + 1) * k];
            for (p, &aip) in arow.iter().enumerate() {
                let brow = &b[p * n..(p + 1) * n];
                for (cv, bv) in crow.iter_mut().zip(brow.iter()) {
                    *cv += aip * *bv;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: c,
        })
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.dims2("transpose")?;
        let mut out = vec![0.0f64; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.data()[i * k + p] * b.data()[p * n + j];
                }
                c[i * n + j] = acc;
            }
        }
        Tensor::new(vec![m, n], c).unwrap()
    }

    #[test]
    fn new_rejects_bad_length() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
    }

    #[test]
    fn zero_size_dims_are_allowed() {
        let t = Tensor::zeros(vec![0, 4]);
        assert_eq!(t.len(), 0);
        assert!(t.is_empty());
        let u = Tensor::new(vec![0], vec![]).unwrap();
        assert_eq!(u.rank(), 1);
    }

    #[test]
    fn elementwise_ops() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[1.5, 2.5, 3.5, 4.5]);
        assert_eq!(a.sub(&b).unwrap().data(), &[0.5, 1.5, 2.5, 3.5]);
        assert_eq!(a.mul(&b).unwrap().data(), &[0.5, 1.0, 1.5, 2.0]);
        assert_eq!(a.scale(2.0).data(), &[2.0, 4.0, 6.0, 8.0]);
        let c = Tensor::zeros(vec![3]);
        assert!(a.add(&c).is_err());
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let mut rng = Rng::new(42);
        for &(m, k, n) in &[(1usize, 1usize, 1usize), (2, 3, 4), (16, 16, 16), (5, 17, 9)] {
            let a = Tensor::new(vec![m, k], (0..m * k).map(|_| rng.next_f64() - 0.5).collect())
                .unwrap();
            let b = Tensor::new(vec![k, n], (0..k * n).map(|_| rng.next_f64() - 0.5).collect())
                .unwrap();
            let fast = a.matmul(&b).unwrap();
            let slow = naive_matmul(&a, &b);
            for (x, y) in fast.data().iter().zip(slow.data().iter()) {
                assert!((x - y).abs() <= 1e-12, "fast {x} vs naive {y}");
            }
        }
    }

    #[test]
    fn matmul_shape_errors() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![4, 2]);
        assert!(a.matmul(&b).is_err());
        let v = Tensor::zeros(vec![3]);
        assert!(a.matmul(&v).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let t = a.transpose().unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(t.transpose().unwrap(), a);
    }

    #[test]
    fn norm_and_dot() {
        let a = Tensor::from_vec(vec![3.0, 4.0]);
        assert!((a.norm() - 5.0).abs() < 1e-15);
        let b = Tensor::from_vec(vec![1.0, -1.0]);
        assert!((a.dot(&b).unwrap() - -1.0).abs() < 1e-15);
    }
}
