use crate::error::{NnError, Result};

/// Dense `(batch, channels, time)` array, row-major with time fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(batch: usize, channels: usize, time: usize) -> Result<Self> {
        let dims = [batch, channels, time];
        if dims.contains(&0) {
            return Err(NnError::InvalidDims(dims));
        }
        Ok(Self {
            dims,
            data: vec![0.0; batch * channels * time],
        })
    }

    pub fn from_vec(batch: usize, channels: usize, time: usize, data: Vec<f64>) -> Result<Self> {
        let dims = [batch, channels, time];
        if dims.contains(&0) {
            return Err(NnError::InvalidDims(dims));
        }
        if data.len() != batch * channels * time {
            return Err(NnError::StorageLength {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    /// Builds a tensor by evaluating `f(b, c, t)` at every index.
    pub fn from_fn(
        batch: usize,
        channels: usize,
        time: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut out = Self::zeros(batch, channels, time)?;
        for b in 0..batch {
            for c in 0..channels {
                for t in 0..time {
                    let i = out.index(b, c, t);
                    out.data[i] = f(b, c, t);
                }
            }
        }
        Ok(out)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn time(&self) -> usize {
        self.dims[2]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, t: usize) -> usize {
        (b * self.dims[1] + c) * self.dims[2] + t
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, t: usize) -> f64 {
        self.data[self.index(b, c, t)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, t: usize, v: f64) {
        let i = self.index(b, c, t);
        self.data[i] = v;
    }

    /// The time series of one channel of one batch item.
    pub fn row(&self, b: usize, c: usize) -> &[f64] {
        let start = self.index(b, c, 0);
        &self.data[start..start + self.dims[2]]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let start = self.index(b, c, 0);
        let t = self.dims[2];
        &mut self.data[start..start + t]
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Inner product over all elements; shapes must match.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.expect_dims(other.dims)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn expect_dims(&self, dims: [usize; 3]) -> Result<()> {
        if self.dims != dims {
            return Err(NnError::ShapeMismatch {
                expected: dims,
                found: self.dims,
            });
        }
        Ok(())
    }

    /// Stacks the channels of several tensors with equal batch and time.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Self> {
        let first = parts.first().ok_or(NnError::InvalidDims([0, 0, 0]))?;
        let (batch, time) = (first.batch(), first.time());
        let channels: usize = parts.iter().map(|p| p.channels()).sum();
        let mut out = Self::zeros(batch, channels, time)?;
        for b in 0..batch {
            let mut c0 = 0;
            for p in parts {
                p.expect_dims([batch, p.channels(), time])?;
                for c in 0..p.channels() {
                    out.row_mut(b, c0 + c).copy_from_slice(p.row(b, c));
                }
                c0 += p.channels();
            }
        }
        Ok(out)
    }

    /// Copies channels `start..start + count`.
    pub fn select_channels(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.channels() {
            return Err(NnError::InvalidDims([self.batch(), count, self.time()]));
        }
        let mut out = Self::zeros(self.batch(), count, self.time())?;
        for b in 0..self.batch() {
            for c in 0..count {
                out.row_mut(b, c).copy_from_slice(self.row(b, start + c));
            }
        }
        Ok(out)
    }

    pub(crate) fn debug_check_finite(&self, what: &str) {
        debug_assert!(self.is_finite(), "non-finite values after {what}");
    }
}
