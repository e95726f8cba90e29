//! Dense row-major float tensors.
//!
//! These are deliberately plain carriers: a shape plus a `Vec<f32>`. All
//! numeric work in the crate happens in explicit loops over these buffers
//! with 64-bit accumulation where it matters, so the types stay small.

/// 2-D tensor, row-major. Rows are tokens and columns are channels wherever
/// the quantizer is involved.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "Tensor2 data length mismatch");
        Tensor2 { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// 3-D tensor, row-major over (d0, d1, d2). Used as [heads, tokens, head_dim]
/// for K/V/Q and as [heads, queries, keys] for attention scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub d0: usize,
    pub d1: usize,
    pub d2: usize,
    pub data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(d0: usize, d1: usize, d2: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), d0 * d1 * d2, "Tensor3 data length mismatch");
        Tensor3 { d0, d1, d2, data }
    }

    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Tensor3 { d0, d1, d2, data: vec![0.0; d0 * d1 * d2] }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d0, self.d1, self.d2)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[(i * self.d1 + j) * self.d2 + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f32) {
        self.data[(i * self.d1 + j) * self.d2 + k] = v;
    }

    /// Row (i, j, ..): the innermost d2-length slice.
    #[inline]
    pub fn row(&self, i: usize, j: usize) -> &[f32] {
        let start = (i * self.d1 + j) * self.d2;
        &self.data[start..start + self.d2]
    }

    /// The [d1, d2] plane at index i along d0, copied into a Tensor2.
    pub fn plane(&self, i: usize) -> Tensor2 {
        let start = i * self.d1 * self.d2;
        Tensor2::new(self.d1, self.d2, self.data[start..start + self.d1 * self.d2].to_vec())
    }

    /// Overwrites the [d1, d2] plane at index i along d0.
    pub fn set_plane(&mut self, i: usize, plane: &Tensor2) {
        assert_eq!((plane.rows, plane.cols), (self.d1, self.d2), "plane shape mismatch");
        let start = i * self.d1 * self.d2;
        self.data[start..start + plane.data.len()].copy_from_slice(&plane.data);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor2_indexing_is_row_major() {
        let t = Tensor2::new(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(t.at(0, 2), 2.0);
        assert_eq!(t.at(1, 0), 3.0);
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn tensor3_plane_round_trip() {
        let mut t = Tensor3::zeros(2, 2, 2);
        let p = Tensor2::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        t.set_plane(1, &p);
        assert_eq!(t.plane(1), p);
        assert_eq!(t.plane(0).data, vec![0.0; 4]);
        assert_eq!(t.at(1, 1, 0), 3.0);
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn wrong_length_is_rejected() {
        Tensor2::new(2, 2, vec![0.0; 3]);
    }
}
