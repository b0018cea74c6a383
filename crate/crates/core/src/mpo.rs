//! Matrix product operators: chains of rank-4 tensors with legs
//! `[l, u, d, r]` (`u` = output physical index, `d` = input).
//!
//! Checkpoint format (shared container with MPS, little-endian): magic
//! `MPOT`, version u32, site count u32, then per site the four dimensions
//! as u32 followed by `l*u*d*r` complex values as `(re, im)` f64 pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, TruncationPolicy};
use crate::tt;

const MAGIC: &[u8; 4] = b"MPOT";
const VERSION: u32 = 1;

/// Dense expansion guard (dimension of the full operator matrix).
const DENSE_GUARD: usize = 1 << 12;

#[derive(Clone, Debug)]
pub struct MpoOperator {
    tensors: Vec<DenseTensor>,
}

impl MpoOperator {
    pub fn from_site_tensors(tensors: Vec<DenseTensor>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::EmptyInput("MPO".into()));
        }
        let mut prev_r = 1usize;
        for (i, t) in tensors.iter().enumerate() {
            if t.legs() != ["l", "u", "d", "r"] {
                return Err(Error::InvalidArgument(format!(
                    "MPO tensor {i} must carry legs [l, u, d, r], got {:?}",
                    t.legs()
                )));
            }
            if t.shape()[1] != t.shape()[2] {
                return Err(Error::DimensionMismatch(
                    "MPO physical legs must match".into(),
                ));
            }
            if t.shape()[0] != prev_r {
                return Err(Error::DimensionMismatch(format!(
                    "MPO bond mismatch at site {i}"
                )));
            }
            prev_r = t.shape()[3];
        }
        if prev_r != 1 {
            return Err(Error::DimensionMismatch(
                "MPO rightmost bond must be 1".into(),
            ));
        }
        Ok(Self { tensors })
    }

    pub fn identity(n_sites: usize, phys_dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); phys_dim * phys_dim];
        for i in 0..phys_dim {
            data[i * phys_dim + i] = Complex64::new(1.0, 0.0);
        }
        let site = DenseTensor::new(
            vec!["l".into(), "u".into(), "d".into(), "r".into()],
            vec![1, phys_dim, phys_dim, 1],
            data,
        )
        .expect("identity tensor");
        Self {
            tensors: vec![site; n_sites],
        }
    }

    /// Product of single-site operators (bond dimension 1).
    pub fn from_local_operators(ops: &[Array2<Complex64>]) -> Result<Self> {
        let tensors = ops
            .iter()
            .map(|op| {
                let d = op.nrows();
                if op.ncols() != d {
                    return Err(Error::DimensionMismatch(
                        "local operator must be square".into(),
                    ));
                }
                DenseTensor::new(
                    vec!["l".into(), "u".into(), "d".into(), "r".into()],
                    vec![1, d, d, 1],
                    op.iter().copied().collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_site_tensors(tensors)
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.shape()[1]).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors
            .iter()
            .take(self.tensors.len() - 1)
            .map(|t| t.shape()[3])
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn site_tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    /// Conjugate transpose: swaps the physical legs and conjugates.
    pub fn dagger(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                t.conj()
                    .renamed("u", "tmp_u")
                    .and_then(|t| t.renamed("d", "u"))
                    .and_then(|t| t.renamed("tmp_u", "d"))
                    .and_then(|t| t.permuted(&["l", "u", "d", "r"]))
                    .expect("dagger rename")
            })
            .collect();
        Self { tensors }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut tensors = self.tensors.clone();
        tensors[0] = tensors[0].scaled(factor);
        Self { tensors }
    }

    /// Operator composition `self . other` (self applied after other).
    /// Bond dimensions multiply; no compression.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::DimensionMismatch(
                "MPO product with unequal lengths".into(),
            ));
        }
        let mut tensors = Vec::with_capacity(self.n_sites());
        for (a, b) in self.tensors.iter().zip(other.tensors.iter()) {
            let a2 = a.renamed("l", "al")?.renamed("r", "ar")?;
            let b2 = b
                .renamed("l", "bl")?
                .renamed("r", "br")?
                .renamed("u", "m")?;
            let c = crate::tensor::contract(&a2, &b2, &[("d", "m")])?;
            // legs: al, u, ar, bl, d, br
            tensors.push(c.reshape_groups(
                &["al", "bl", "u", "d", "ar", "br"],
                &[("l", 2), ("u", 1), ("d", 1), ("r", 2)],
            )?);
        }
        Self::from_site_tensors(tensors)
    }

    /// Weighted sum by bond-dimension concatenation; no compression.
    pub fn add_weighted(terms: &[(Complex64, &MpoOperator)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyInput("MPO sum".into()));
        }
        let fused: Vec<(Complex64, Vec<DenseTensor>)> = terms
            .iter()
            .map(|(w, op)| Ok((*w, op.fused_train()?)))
            .collect::<Result<_>>()?;
        let refs: Vec<(Complex64, &[DenseTensor])> = fused
            .iter()
            .map(|(w, t)| (*w, t.as_slice()))
            .collect();
        let summed = tt::direct_sum(&refs)?;
        Self::from_fused_train(summed, &terms[0].1.phys_dims())
    }

    /// SVD recompression. Returns the compressed operator and a rigorous
    /// Frobenius-norm bound on the difference from the input.
    pub fn compressed(&self, policy: &TruncationPolicy) -> Result<(Self, f64)> {
        let frob_before = self.frobenius_norm()?;
        let train = self.fused_train()?;
        let Some((out, weight, log_norm)) = tt::recompress(train, policy)? else {
            // exact zero operator compresses to itself
            return Ok((self.clone(), 0.0));
        };
        let mut out = out;
        // restore the physical scale on site 0
        out[0] = out[0].scaled(Complex64::new(log_norm.exp(), 0.0));
        let op = Self::from_fused_train(out, &self.phys_dims())?;
        // || T - T' ||_F <= ||T||_F * sqrt(sum of relative discarded weights)
        let err = frob_before * weight.max(0.0).sqrt();
        Ok((op, err))
    }

    pub fn frobenius_norm(&self) -> Result<f64> {
        let train = self.fused_train()?;
        tt::norm(&train)
    }

    /// Dense matrix expansion (row index = output, column = input), with a
    /// size guard.
    pub fn to_dense(&self) -> Result<Array2<Complex64>> {
        let dim: usize = self.phys_dims().iter().product();
        if dim > DENSE_GUARD {
            return Err(Error::SizeGuard(format!(
                "dense MPO expansion of dimension {dim} exceeds guard {DENSE_GUARD}"
            )));
        }
        // accumulate legs (U, D, r)
        let first = &self.tensors[0];
        let mut acc = first.reshape_groups(&["l", "u", "d", "r"], &[("cu", 2), ("cd", 1), ("r", 1)])?;
        for t in self.tensors.iter().skip(1) {
            let merged = crate::tensor::contract(
                &acc.renamed("r", "m")?,
                &t.renamed("l", "m")?,
                &[("m", "m")],
            )?;
            // legs: cu, cd, u, d, r
            acc = merged.reshape_groups(
                &["cu", "u", "cd", "d", "r"],
                &[("cu", 2), ("cd", 2), ("r", 1)],
            )?;
        }
        let mat = acc.reshape_groups(&["cu", "cd", "r"], &[("cu", 1), ("cd", 2)])?;
        let rows = mat.shape()[0];
        let cols = mat.shape()[1];
        Array2::from_shape_vec((rows, cols), mat.data().to_vec())
            .map_err(|e| Error::DimensionMismatch(e.to_string()))
    }

    /// Rank-3 view with the two physical legs fused, for train algorithms.
    pub(crate) fn fused_train(&self) -> Result<Vec<DenseTensor>> {
        self.tensors
            .iter()
            .map(|t| {
                t.reshape_groups(&["l", "u", "d", "r"], &[("l", 1), ("p", 2), ("r", 1)])
            })
            .collect()
    }

    pub(crate) fn from_fused_train(train: Vec<DenseTensor>, phys_dims: &[usize]) -> Result<Self> {
        let tensors = train
            .into_iter()
            .zip(phys_dims.iter())
            .map(|(t, &d)| {
                t.split_leg("p", &[("u", d), ("d", d)])
                    .and_then(|t| t.permuted(&["l", "u", "d", "r"]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_site_tensors(tensors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n_sites() as u32).to_le_bytes())?;
        for t in &self.tensors {
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for z in t.data() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad MPO magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unknown MPO version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let l = read_u32(&mut r)? as usize;
            let u = read_u32(&mut r)? as usize;
            let d = read_u32(&mut r)? as usize;
            let rr = read_u32(&mut r)? as usize;
            let count = l * u * d * rr;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                data.push(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?));
            }
            tensors.push(DenseTensor::new(
                vec!["l".into(), "u".into(), "d".into(), "r".into()],
                vec![l, u, d, rr],
                data,
            )?);
        }
        Self::from_site_tensors(tensors)
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
