//! Dense complex tensors with named legs, plus the contraction and
//! rank-revealing splits every other module is built on.
//!
//! Data is stored row-major over `shape`, with one label per leg. All
//! operations are pure: they return new tensors and never mutate inputs.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Controls rank truncation in SVD-based splits and compressions.
///
/// Singular values strictly below `svd_threshold * sigma_max` are dropped;
/// values equal to the cutoff are kept, so truncation decisions are
/// deterministic. `max_bond = None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub max_bond: Option<usize>,
    pub svd_threshold: f64,
    pub record_weight: bool,
}

impl TruncationPolicy {
    pub fn new(max_bond: Option<usize>, svd_threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&svd_threshold) {
            return Err(Error::InvalidArgument(format!(
                "svd_threshold must lie in [0, 1), got {svd_threshold}"
            )));
        }
        if let Some(b) = max_bond {
            if b == 0 {
                return Err(Error::InvalidArgument(
                    "max_bond must be at least 1 when bounded".into(),
                ));
            }
        }
        Ok(Self {
            max_bond,
            svd_threshold,
            record_weight: true,
        })
    }

    /// Unbounded bond, cutting only numerically-zero singular values.
    pub fn exact() -> Self {
        Self {
            max_bond: None,
            svd_threshold: 1e-14,
            record_weight: true,
        }
    }

    pub fn with_record_weight(mut self, record: bool) -> Self {
        self.record_weight = record;
        self
    }

    /// The tighter of two policies: smaller threshold, smaller bond cap.
    pub fn tightened(&self, threshold: f64) -> Self {
        Self {
            max_bond: self.max_bond,
            svd_threshold: self.svd_threshold.min(threshold),
            record_weight: self.record_weight,
        }
    }
}

/// Dense complex tensor with ordered, named legs.
#[derive(Clone, Debug)]
pub struct DenseTensor {
    legs: Vec<String>,
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl DenseTensor {
    pub fn new(legs: Vec<String>, shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        if legs.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} legs vs {} shape entries",
                legs.len(),
                shape.len()
            )));
        }
        for (i, l) in legs.iter().enumerate() {
            if legs[..i].contains(l) {
                return Err(Error::DuplicateLeg(l.clone()));
            }
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("zero-dimensional leg".into()));
        }
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::DataLength {
                expected: n,
                got: data.len(),
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("tensor construction".into()));
        }
        Ok(Self { legs, shape, data })
    }

    pub fn zeros(legs: Vec<String>, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        Self::new(legs, shape, vec![Complex64::new(0.0, 0.0); n])
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(value: Complex64) -> Self {
        Self {
            legs: vec![],
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn legs(&self) -> &[String] {
        &self.legs
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.legs.len()
    }

    pub fn leg_dim(&self, leg: &str) -> Result<usize> {
        Ok(self.shape[self.leg_index(leg)?])
    }

    fn leg_index(&self, leg: &str) -> Result<usize> {
        self.legs
            .iter()
            .position(|l| l == leg)
            .ok_or_else(|| Error::LegNotFound(leg.into()))
    }

    /// The single value of a rank-0 tensor.
    pub fn into_scalar(self) -> Result<Complex64> {
        if self.rank() != 0 {
            return Err(Error::DimensionMismatch(format!(
                "expected rank-0 tensor, got rank {}",
                self.rank()
            )));
        }
        Ok(self.data[0])
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self {
            legs: self.legs.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            legs: self.legs.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn renamed(&self, from: &str, to: &str) -> Result<Self> {
        let idx = self.leg_index(from)?;
        let mut legs = self.legs.clone();
        legs[idx] = to.to_string();
        Self::new(legs, self.shape.clone(), self.data.clone())
    }

    /// Sum of two tensors with identical leg sets; `other` is permuted to
    /// this tensor's leg order first.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let order: Vec<&str> = self.legs.iter().map(String::as_str).collect();
        let other = other.permuted(&order)?;
        if other.shape != self.shape {
            return Err(Error::DimensionMismatch(
                "tensor addition with unequal shapes".into(),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.legs.clone(), self.shape.clone(), data)
    }

    /// Reorders legs into `order`, moving data accordingly.
    pub fn permuted(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.legs.len() {
            return Err(Error::DimensionMismatch(format!(
                "permutation lists {} legs, tensor has {}",
                order.len(),
                self.legs.len()
            )));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|l| self.leg_index(l))
            .collect::<Result<_>>()?;
        {
            let mut seen = vec![false; perm.len()];
            for &p in &perm {
                if seen[p] {
                    return Err(Error::DuplicateLeg(self.legs[p].clone()));
                }
                seen[p] = true;
            }
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let new_legs: Vec<String> = perm.iter().map(|&p| self.legs[p].clone()).collect();
        let in_strides = row_major_strides(&self.shape);
        // stride in the input for each output axis
        let mapped: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let n = self.data.len();
        let rank = new_shape.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        let mut counters = vec![0usize; rank];
        let mut in_off = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[in_off];
            // odometer increment over the output multi-index
            for ax in (0..rank).rev() {
                counters[ax] += 1;
                in_off += mapped[ax];
                if counters[ax] < new_shape[ax] {
                    break;
                }
                in_off -= mapped[ax] * new_shape[ax];
                counters[ax] = 0;
            }
        }
        Ok(Self {
            legs: new_legs,
            shape: new_shape,
            data: out,
        })
    }

    /// Permutes to `order` and fuses consecutive runs of legs into single
    /// legs. `groups` lists `(new_label, how_many_legs)` consuming `order`
    /// left to right.
    pub fn reshape_groups(&self, order: &[&str], groups: &[(&str, usize)]) -> Result<Self> {
        let consumed: usize = groups.iter().map(|(_, c)| c).sum();
        if consumed != order.len() {
            return Err(Error::DimensionMismatch(format!(
                "groups consume {consumed} legs, order lists {}",
                order.len()
            )));
        }
        let permuted = self.permuted(order)?;
        let mut legs = Vec::with_capacity(groups.len());
        let mut shape = Vec::with_capacity(groups.len());
        let mut at = 0usize;
        for (label, count) in groups {
            let dim: usize = permuted.shape[at..at + count].iter().product();
            legs.push(label.to_string());
            shape.push(dim);
            at += count;
        }
        Self::new(legs, shape, permuted.data)
    }

    /// Splits one leg into several (the inverse of fusing); the product of
    /// part dimensions must equal the original dimension. Data layout is
    /// unchanged because fusing is row-major.
    pub fn split_leg(&self, leg: &str, parts: &[(&str, usize)]) -> Result<Self> {
        let idx = self.leg_index(leg)?;
        let prod: usize = parts.iter().map(|(_, d)| d).product();
        if prod != self.shape[idx] {
            return Err(Error::DimensionMismatch(format!(
                "cannot split leg '{leg}' of dimension {} into product {prod}",
                self.shape[idx]
            )));
        }
        let mut legs = Vec::with_capacity(self.legs.len() + parts.len() - 1);
        let mut shape = Vec::with_capacity(legs.capacity());
        for (i, l) in self.legs.iter().enumerate() {
            if i == idx {
                for (pl, pd) in parts {
                    legs.push(pl.to_string());
                    shape.push(*pd);
                }
            } else {
                legs.push(l.clone());
                shape.push(self.shape[i]);
            }
        }
        Self::new(legs, shape, self.data.clone())
    }

    /// Matrix view: rows indexed by `row_legs`, columns by `col_legs`
    /// (together a permutation of all legs).
    pub fn to_matrix(&self, row_legs: &[&str], col_legs: &[&str]) -> Result<Array2<Complex64>> {
        let order: Vec<&str> = row_legs.iter().chain(col_legs.iter()).copied().collect();
        let p = self.permuted(&order)?;
        let m: usize = row_legs
            .iter()
            .map(|l| self.leg_dim(l))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .product();
        let n = p.data.len() / m;
        Array2::from_shape_vec((m, n), p.data)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))
    }

    pub fn from_matrix(
        mat: &Array2<Complex64>,
        row_legs: &[(&str, usize)],
        col_legs: &[(&str, usize)],
    ) -> Result<Self> {
        let legs = row_legs
            .iter()
            .chain(col_legs.iter())
            .map(|(l, _)| l.to_string())
            .collect();
        let shape = row_legs
            .iter()
            .chain(col_legs.iter())
            .map(|(_, d)| *d)
            .collect();
        let data = mat
            .as_standard_layout()
            .iter()
            .copied()
            .collect::<Vec<_>>();
        Self::new(legs, shape, data)
    }
}

/// Pairwise tensor contraction over matching leg labels.
///
/// Result legs are the unpaired legs of `a` followed by those of `b`, in
/// their original orders.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(&str, &str)]) -> Result<DenseTensor> {
    let mut ca: Vec<&str> = Vec::with_capacity(pairs.len());
    let mut cb: Vec<&str> = Vec::with_capacity(pairs.len());
    for &(la, lb) in pairs {
        let da = a.leg_dim(la)?;
        let db = b.leg_dim(lb)?;
        if da != db {
            return Err(Error::DimensionMismatch(format!(
                "paired legs '{la}' ({da}) and '{lb}' ({db}) differ"
            )));
        }
        if ca.contains(&la) {
            return Err(Error::DuplicateLeg(la.into()));
        }
        if cb.contains(&lb) {
            return Err(Error::DuplicateLeg(lb.into()));
        }
        ca.push(la);
        cb.push(lb);
    }
    let fa: Vec<&str> = a
        .legs()
        .iter()
        .map(String::as_str)
        .filter(|l| !ca.contains(l))
        .collect();
    let fb: Vec<&str> = b
        .legs()
        .iter()
        .map(String::as_str)
        .filter(|l| !cb.contains(l))
        .collect();

    let a_mat = a.to_matrix(&fa, &ca)?;
    let b_mat = b.to_matrix(&cb, &fb)?;
    let prod = a_mat.dot(&b_mat);

    let row_dims: Vec<(&str, usize)> = fa
        .iter()
        .map(|l| a.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    let col_dims: Vec<(&str, usize)> = fb
        .iter()
        .map(|l| b.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    DenseTensor::from_matrix(&prod, &row_dims, &col_dims)
}

/// Outcome of an SVD-based split.
pub struct SvdSplit {
    /// Isometric factor carrying `left_legs` plus the new bond leg.
    pub left: DenseTensor,
    /// `S V^dagger` factor: new bond leg plus the remaining legs.
    pub right: DenseTensor,
    /// Relative discarded weight: sum of dropped squared singular values
    /// over the total.
    pub discarded_weight: f64,
    /// Kept singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Splits `t` across `left_legs` via SVD, truncating per `policy`.
/// Singular values are folded into the right factor.
pub fn svd_split(
    t: &DenseTensor,
    left_legs: &[&str],
    new_leg: &str,
    policy: &TruncationPolicy,
) -> Result<SvdSplit> {
    if left_legs.is_empty() || left_legs.len() >= t.rank() {
        return Err(Error::InvalidArgument(
            "left_legs must be a nonempty proper subset of the tensor legs".into(),
        ));
    }
    if t.legs().iter().any(|l| l == new_leg) {
        return Err(Error::DuplicateLeg(new_leg.into()));
    }
    let right_legs: Vec<&str> = t
        .legs()
        .iter()
        .map(String::as_str)
        .filter(|l| !left_legs.contains(l))
        .collect();
    let mat = t.to_matrix(left_legs, &right_legs)?;
    let (u, s, vt) = linalg::svd(&mat)?;

    let total: f64 = s.iter().map(|x| x * x).sum();
    let keep = if total == 0.0 {
        1
    } else {
        let cutoff = policy.svd_threshold * s[0];
        let mut k = s.iter().take_while(|&&x| x >= cutoff).count().max(1);
        if let Some(cap) = policy.max_bond {
            k = k.min(cap);
        }
        k
    };
    let dropped: f64 = s.iter().skip(keep).map(|x| x * x).sum();
    let discarded_weight = if total == 0.0 { 0.0 } else { dropped / total };

    let m = mat.nrows();
    let n = mat.ncols();
    let mut left_mat = Array2::<Complex64>::zeros((m, keep));
    let mut right_mat = Array2::<Complex64>::zeros((keep, n));
    for j in 0..keep {
        for i in 0..m {
            left_mat[(i, j)] = u[(i, j)];
        }
        for i in 0..n {
            right_mat[(j, i)] = vt[(j, i)] * Complex64::new(s[j], 0.0);
        }
    }

    let left_dims: Vec<(&str, usize)> = left_legs
        .iter()
        .map(|l| t.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    let right_dims: Vec<(&str, usize)> = right_legs
        .iter()
        .map(|l| t.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    let left = DenseTensor::from_matrix(&left_mat, &left_dims, &[(new_leg, keep)])?;
    let right = DenseTensor::from_matrix(&right_mat, &[(new_leg, keep)], &right_dims)?;
    Ok(SvdSplit {
        left,
        right,
        discarded_weight,
        singular_values: s[..keep].to_vec(),
    })
}

/// QR split: `left` is a column isometry over `left_legs`, `right` the
/// upper-triangular remainder. No truncation.
pub fn qr_split(t: &DenseTensor, left_legs: &[&str], new_leg: &str) -> Result<(DenseTensor, DenseTensor)> {
    if left_legs.is_empty() || left_legs.len() >= t.rank() {
        return Err(Error::InvalidArgument(
            "left_legs must be a nonempty proper subset of the tensor legs".into(),
        ));
    }
    let right_legs: Vec<&str> = t
        .legs()
        .iter()
        .map(String::as_str)
        .filter(|l| !left_legs.contains(l))
        .collect();
    let mat = t.to_matrix(left_legs, &right_legs)?;
    let (q, r) = linalg::qr(&mat)?;
    let k = q.ncols();
    let left_dims: Vec<(&str, usize)> = left_legs
        .iter()
        .map(|l| t.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    let right_dims: Vec<(&str, usize)> = right_legs
        .iter()
        .map(|l| t.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    let left = DenseTensor::from_matrix(&q, &left_dims, &[(new_leg, k)])?;
    let right = DenseTensor::from_matrix(&r, &[(new_leg, k)], &right_dims)?;
    Ok((left, right))
}

/// LQ split: `right` is a row isometry over the complement of `left_legs`.
pub fn lq_split(t: &DenseTensor, left_legs: &[&str], new_leg: &str) -> Result<(DenseTensor, DenseTensor)> {
    if left_legs.is_empty() || left_legs.len() >= t.rank() {
        return Err(Error::InvalidArgument(
            "left_legs must be a nonempty proper subset of the tensor legs".into(),
        ));
    }
    let right_legs: Vec<&str> = t
        .legs()
        .iter()
        .map(String::as_str)
        .filter(|l| !left_legs.contains(l))
        .collect();
    let mat = t.to_matrix(left_legs, &right_legs)?;
    // A = L Q with Q Q^dagger = I, via QR of A^dagger.
    let adag = mat.t().mapv(|z| z.conj());
    let (q1, r1) = linalg::qr(&adag.as_standard_layout().to_owned())?;
    let l_mat = r1.t().mapv(|z| z.conj());
    let q_mat = q1.t().mapv(|z| z.conj());
    let k = q_mat.nrows();
    let left_dims: Vec<(&str, usize)> = left_legs
        .iter()
        .map(|l| t.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    let right_dims: Vec<(&str, usize)> = right_legs
        .iter()
        .map(|l| t.leg_dim(l).map(|d| (*l, d)))
        .collect::<Result<_>>()?;
    let left = DenseTensor::from_matrix(&l_mat.as_standard_layout().to_owned(), &left_dims, &[(new_leg, k)])?;
    let right = DenseTensor::from_matrix(&q_mat.as_standard_layout().to_owned(), &[(new_leg, k)], &right_dims)?;
    Ok((left, right))
}

/// Thin wrappers over LAPACK with a fast path for real-valued data.
pub(crate) mod linalg {
    use super::*;
    use ndarray_linalg::{Eigh, JobSvd, QRInto, SVDDCInto, UPLO};

    fn is_real(mat: &Array2<Complex64>) -> bool {
        mat.iter().all(|z| z.im == 0.0)
    }

    fn check_finite(mat: &Array2<Complex64>, what: &str) -> Result<()> {
        if mat.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.into()))
        }
    }

    /// Economy SVD, descending singular values.
    pub fn svd(mat: &Array2<Complex64>) -> Result<(Array2<Complex64>, Vec<f64>, Array2<Complex64>)> {
        check_finite(mat, "svd input")?;
        if is_real(mat) {
            let real = mat.mapv(|z| z.re);
            let (u, s, vt) = real
                .svddc_into(JobSvd::Some)
                .map_err(|e| Error::Linalg(format!("real svd: {e}")))?;
            let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
            let vt = vt.ok_or_else(|| Error::Linalg("svd returned no Vt".into()))?;
            return Ok((
                u.mapv(|x| Complex64::new(x, 0.0)),
                s.to_vec(),
                vt.mapv(|x| Complex64::new(x, 0.0)),
            ));
        }
        let (u, s, vt) = mat
            .clone()
            .svddc_into(JobSvd::Some)
            .map_err(|e| Error::Linalg(format!("complex svd: {e}")))?;
        let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
        let vt = vt.ok_or_else(|| Error::Linalg("svd returned no Vt".into()))?;
        Ok((u, s.to_vec(), vt))
    }

    /// Economy QR.
    pub fn qr(mat: &Array2<Complex64>) -> Result<(Array2<Complex64>, Array2<Complex64>)> {
        check_finite(mat, "qr input")?;
        if is_real(mat) {
            let real = mat.mapv(|z| z.re);
            let (q, r) = real
                .qr_into()
                .map_err(|e| Error::Linalg(format!("real qr: {e}")))?;
            return Ok((
                q.mapv(|x| Complex64::new(x, 0.0)),
                r.mapv(|x| Complex64::new(x, 0.0)),
            ));
        }
        mat.clone()
            .qr_into()
            .map_err(|e| Error::Linalg(format!("complex qr: {e}")))
    }

    /// Eigendecomposition of a real symmetric matrix, ascending eigenvalues.
    pub fn eigh_real(mat: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
        if !mat.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("eigh input".into()));
        }
        mat.eigh(UPLO::Lower)
            .map_err(|e| Error::Linalg(format!("eigh: {e}")))
    }

    /// Largest singular value.
    pub fn spectral_norm(mat: &Array2<Complex64>) -> Result<f64> {
        let (_, s, _) = {
            check_finite(mat, "spectral norm input")?;
            let (u, s, vt) = mat
                .clone()
                .svddc_into(JobSvd::None)
                .map_err(|e| Error::Linalg(format!("spectral norm svd: {e}")))?;
            (u, s, vt)
        };
        Ok(s.iter().copied().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(legs: &[(&str, usize)], rng: &mut ChaCha8Rng) -> DenseTensor {
        let n: usize = legs.iter().map(|(_, d)| d).product();
        let data = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        DenseTensor::new(
            legs.iter().map(|(l, _)| l.to_string()).collect(),
            legs.iter().map(|(_, d)| *d).collect(),
            data,
        )
        .unwrap()
    }

    fn identity2(left: &str, right: &str) -> DenseTensor {
        DenseTensor::new(
            vec![left.into(), right.into()],
            vec![2, 2],
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn contract_identity_composition() {
        let a = identity2("i", "j");
        let b = identity2("k", "l");
        let c = contract(&a, &b, &[("j", "k")]).unwrap();
        assert_eq!(c.legs(), &["i".to_string(), "l".to_string()]);
        let expect = identity2("i", "l");
        for (x, y) in c.data().iter().zip(expect.data()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn contract_unit_vector_normalization() {
        let v = DenseTensor::new(
            vec!["i".into()],
            vec![2],
            vec![
                Complex64::new(0.6, 0.0),
                Complex64::new(0.0, 0.8),
            ],
        )
        .unwrap();
        let s = contract(&v, &v.conj(), &[("i", "i")]).unwrap();
        let val = s.into_scalar().unwrap();
        assert!((val - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn contract_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rand_tensor(&[("i", 4), ("k", 4)], &mut rng);
        let b = rand_tensor(&[("k", 4), ("j", 4)], &mut rng);
        let c = contract(&a, &b, &[("k", "k")]).unwrap();
        // independent brute-force triple loop
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    acc += a.data()[i * 4 + k] * b.data()[k * 4 + j];
                }
                let got = c.data()[i * 4 + j];
                assert!((got - acc).norm() < 1e-12 * (1.0 + acc.norm()));
            }
        }
    }

    #[test]
    fn contract_rejects_mismatched_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_tensor(&[("i", 2), ("j", 3)], &mut rng);
        let b = rand_tensor(&[("k", 4), ("l", 2)], &mut rng);
        assert!(contract(&a, &b, &[("j", "k")]).is_err());
    }

    #[test]
    fn duplicate_leg_rejected_on_construction() {
        let err = DenseTensor::zeros(vec!["x".into(), "x".into()], vec![2, 2]);
        assert!(matches!(err, Err(Error::DuplicateLeg(_))));
    }

    #[test]
    fn contract_bilinear_in_first_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let a1 = rand_tensor(&[("i", 3), ("k", 5)], &mut rng);
            let a2 = rand_tensor(&[("i", 3), ("k", 5)], &mut rng);
            let b = rand_tensor(&[("k", 5), ("j", 4)], &mut rng);
            let alpha = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let beta = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let lhs = contract(
                &a1.scaled(alpha).add(&a2.scaled(beta)).unwrap(),
                &b,
                &[("k", "k")],
            )
            .unwrap();
            let rhs = contract(&a1, &b, &[("k", "k")])
                .unwrap()
                .scaled(alpha)
                .add(&contract(&a2, &b, &[("k", "k")]).unwrap().scaled(beta))
                .unwrap();
            let scale = rhs.norm().max(1.0);
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                assert!((x - y).norm() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn contract_associative_on_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_tensor(&[("i", 4), ("x", 6)], &mut rng);
        let b = rand_tensor(&[("x", 6), ("y", 5)], &mut rng);
        let c = rand_tensor(&[("y", 5), ("j", 3)], &mut rng);
        let left = contract(&contract(&a, &b, &[("x", "x")]).unwrap(), &c, &[("y", "y")]).unwrap();
        let right = contract(&a, &contract(&b, &c, &[("y", "y")]).unwrap(), &[("x", "x")]).unwrap();
        let scale = left.norm().max(1.0);
        for (x, y) in left.data().iter().zip(right.data()) {
            assert!((x - y).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn svd_split_rank_one_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = rand_tensor(&[("i", 4)], &mut rng);
        let v = rand_tensor(&[("j", 5)], &mut rng);
        let t = contract(&u, &v, &[]).unwrap();
        let split = svd_split(&t, &["i"], "b", &TruncationPolicy::exact()).unwrap();
        assert_eq!(split.left.leg_dim("b").unwrap(), 1);
        assert!(split.discarded_weight < 1e-24);
    }

    #[test]
    fn svd_split_exact_reconstruction_without_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = rand_tensor(&[("i", 3), ("j", 4), ("k", 5)], &mut rng);
        let policy = TruncationPolicy::new(Some(12), 0.0).unwrap();
        let split = svd_split(&t, &["i", "j"], "b", &policy).unwrap();
        let recon = contract(&split.left, &split.right, &[("b", "b")]).unwrap();
        let diff: f64 = recon
            .permuted(&["i", "j", "k"])
            .unwrap()
            .data()
            .iter()
            .zip(t.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff / t.norm() < 1e-12);
    }

    #[test]
    fn svd_split_truncation_matches_gram_oracle() {
        // independent oracle: squared singular values are eigenvalues of A^dagger A
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = rand_tensor(&[("i", 8), ("j", 8)], &mut rng);
        let a = t.to_matrix(&["i"], &["j"]).unwrap();
        let gram_re = {
            let adag = a.t().mapv(|z| z.conj());
            let g = adag.dot(&a);
            // A^dagger A is Hermitian; embed as real 16x16 to reuse the real eigensolver
            let n = g.nrows();
            let mut big = Array2::<f64>::zeros((2 * n, 2 * n));
            for i in 0..n {
                for j in 0..n {
                    big[(i, j)] = g[(i, j)].re;
                    big[(i + n, j + n)] = g[(i, j)].re;
                    big[(i, j + n)] = -g[(i, j)].im;
                    big[(i + n, j)] = g[(i, j)].im;
                }
            }
            big
        };
        let (evals, _) = linalg::eigh_real(&gram_re).unwrap();
        // doubled spectrum: take every other eigenvalue from the top
        let mut lam: Vec<f64> = evals.iter().rev().step_by(2).copied().collect();
        lam.truncate(8);

        let policy = TruncationPolicy::new(Some(4), 0.0).unwrap();
        let split = svd_split(&t, &["i"], "b", &policy).unwrap();
        let recon = contract(&split.left, &split.right, &[("b", "b")]).unwrap();
        let err2: f64 = recon
            .permuted(&["i", "j"])
            .unwrap()
            .data()
            .iter()
            .zip(t.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        let dropped: f64 = lam[4..].iter().sum();
        assert!((err2 - dropped).abs() < 1e-9 * dropped.max(1.0));
        // discarded_weight * ||t||^2 equals the reconstruction error^2
        let total: f64 = t.norm() * t.norm();
        assert!((split.discarded_weight * total - err2).abs() < 1e-9 * err2.max(1.0));
    }

    #[test]
    fn svd_split_error_monotone_in_max_bond() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t = rand_tensor(&[("i", 8), ("j", 8)], &mut rng);
        let mut prev = f64::INFINITY;
        for bond in 1..=8 {
            let policy = TruncationPolicy::new(Some(bond), 0.0).unwrap();
            let split = svd_split(&t, &["i"], "b", &policy).unwrap();
            assert!(split.discarded_weight <= prev + 1e-15);
            prev = split.discarded_weight;
        }
        assert!(prev < 1e-24);
    }

    #[test]
    fn reshape_groups_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let t = rand_tensor(&[("a", 2), ("b", 3), ("c", 4)], &mut rng);
        let fused = t
            .reshape_groups(&["a", "b", "c"], &[("ab", 2), ("c", 1)])
            .unwrap();
        assert_eq!(fused.shape(), &[6, 4]);
        let back = fused.split_leg("ab", &[("a", 2), ("b", 3)]).unwrap();
        for (x, y) in back.data().iter().zip(t.data()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn lq_split_gives_row_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let t = rand_tensor(&[("l", 3), ("p", 2), ("r", 4)], &mut rng);
        let (l, q) = lq_split(&t, &["l"], "b").unwrap();
        // Q Q^dagger = I over (b)
        let qc = q.conj().renamed("b", "b2").unwrap();
        let qq = contract(&q, &qc, &[("p", "p"), ("r", "r")]).unwrap();
        let k = qq.leg_dim("b").unwrap();
        for i in 0..k {
            for j in 0..k {
                let v = qq.data()[i * k + j];
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        let recon = contract(&l, &q, &[("b", "b")]).unwrap();
        let orig = t.permuted(&["l", "p", "r"]).unwrap();
        for (x, y) in recon.permuted(&["l", "p", "r"]).unwrap().data().iter().zip(orig.data()) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
