//! Shared tensor-train plumbing for MPS and (physically fused) MPO chains.
//!
//! Every train tensor carries legs `["l", "p", "r"]` in that order, with
//! boundary bonds of dimension 1. Trains handled here are unnormalized;
//! callers track norms (usually logarithmically).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{contract, qr_split, svd_split, DenseTensor, TruncationPolicy};

pub(crate) const LEG_L: &str = "l";
pub(crate) const LEG_P: &str = "p";
pub(crate) const LEG_R: &str = "r";

pub(crate) fn check_train(ts: &[DenseTensor]) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::EmptyInput("tensor train".into()));
    }
    let mut prev_r = 1usize;
    for (i, t) in ts.iter().enumerate() {
        if t.legs() != [LEG_L, LEG_P, LEG_R] {
            return Err(Error::InvalidArgument(format!(
                "train tensor {i} must carry legs [l, p, r], got {:?}",
                t.legs()
            )));
        }
        let l = t.shape()[0];
        if l != prev_r {
            return Err(Error::DimensionMismatch(format!(
                "bond mismatch at site {i}: left {l} vs previous right {prev_r}"
            )));
        }
        prev_r = t.shape()[2];
    }
    if prev_r != 1 {
        return Err(Error::DimensionMismatch(format!(
            "rightmost bond must be 1, got {prev_r}"
        )));
    }
    Ok(())
}

pub(crate) fn bond_dims(ts: &[DenseTensor]) -> Vec<usize> {
    ts.iter().take(ts.len() - 1).map(|t| t.shape()[2]).collect()
}

pub(crate) fn phys_dims(ts: &[DenseTensor]) -> Vec<usize> {
    ts.iter().map(|t| t.shape()[1]).collect()
}

/// <train|train> via transfer contraction.
pub(crate) fn norm(ts: &[DenseTensor]) -> Result<f64> {
    let ov = overlap(ts, ts)?;
    Ok(ov.re.max(0.0).sqrt())
}

/// <bra|ket> (bra conjugated here).
pub(crate) fn overlap(bra: &[DenseTensor], ket: &[DenseTensor]) -> Result<Complex64> {
    if bra.len() != ket.len() {
        return Err(Error::DimensionMismatch(
            "overlap of trains with different lengths".into(),
        ));
    }
    let mut env = DenseTensor::new(
        vec!["a".into(), "b".into()],
        vec![1, 1],
        vec![Complex64::new(1.0, 0.0)],
    )?;
    for (bt, kt) in bra.iter().zip(ket.iter()) {
        let t1 = contract(&env, kt, &[("b", LEG_L)])?; // legs: a, p, r
        let bc = bt.conj().renamed(LEG_R, "rb")?;
        let t2 = contract(&t1, &bc, &[("a", LEG_L), ("p", LEG_P)])?; // legs: r, rb
        env = t2.renamed(LEG_R, "b")?.renamed("rb", "a")?;
    }
    Ok(env.data()[0])
}

/// <bra| Op |ket> with a rank-4 MPO (legs l,u,d,r).
pub(crate) fn sandwich(bra: &[DenseTensor], op: &[DenseTensor], ket: &[DenseTensor]) -> Result<Complex64> {
    if bra.len() != ket.len() || op.len() != ket.len() {
        return Err(Error::DimensionMismatch(
            "sandwich of chains with different lengths".into(),
        ));
    }
    let mut env = DenseTensor::new(
        vec!["a".into(), "w".into(), "b".into()],
        vec![1, 1, 1],
        vec![Complex64::new(1.0, 0.0)],
    )?;
    for ((bt, wt), kt) in bra.iter().zip(op.iter()).zip(ket.iter()) {
        let t1 = contract(&env, kt, &[("b", LEG_L)])?; // a, w, p, r
        let wr = wt.renamed(LEG_R, "wr")?;
        let t2 = contract(&t1, &wr, &[("w", LEG_L), ("p", "d")])?; // a, r, u, wr
        let bc = bt.conj().renamed(LEG_R, "rb")?;
        let t3 = contract(&t2, &bc, &[("a", LEG_L), ("u", LEG_P)])?; // r, wr, rb
        env = t3
            .renamed(LEG_R, "b")?
            .renamed("wr", "w")?
            .renamed("rb", "a")?;
    }
    Ok(env.data()[0])
}

/// <bra| Op Op |ket> with two MPO layers, contracted exactly.
pub(crate) fn sandwich_squared(
    bra: &[DenseTensor],
    op: &[DenseTensor],
    ket: &[DenseTensor],
) -> Result<Complex64> {
    let mut env = DenseTensor::new(
        vec!["a".into(), "v".into(), "w".into(), "b".into()],
        vec![1, 1, 1, 1],
        vec![Complex64::new(1.0, 0.0)],
    )?;
    for ((bt, wt), kt) in bra.iter().zip(op.iter()).zip(ket.iter()) {
        let t1 = contract(&env, kt, &[("b", LEG_L)])?; // a, v, w, p, r
        let w1 = wt.renamed(LEG_R, "wr")?;
        let t2 = contract(&t1, &w1, &[("w", LEG_L), ("p", "d")])?; // a, v, r, u, wr
        let w2 = wt.renamed(LEG_R, "vr")?.renamed("u", "u2")?;
        let t3 = contract(&t2, &w2, &[("v", LEG_L), ("u", "d")])?; // a, r, wr, u2, vr
        let bc = bt.conj().renamed(LEG_R, "rb")?;
        let t4 = contract(&t3, &bc, &[("a", LEG_L), ("u2", LEG_P)])?; // r, wr, vr, rb
        env = t4
            .renamed(LEG_R, "b")?
            .renamed("wr", "w")?
            .renamed("vr", "v")?
            .renamed("rb", "a")?;
    }
    Ok(env.data()[0])
}

/// Sweeps right-to-left turning sites 1..N-1 into row isometries; the
/// leftover norm lands on site 0 and is returned as `ln(norm)`. The train
/// comes back normalized. A zero train returns `None`.
pub(crate) fn right_canonicalize(mut ts: Vec<DenseTensor>) -> Result<Option<(Vec<DenseTensor>, f64)>> {
    let n = ts.len();
    for i in (1..n).rev() {
        // LQ via QR of the dagger: rows of Q orthonormal over (p, r)
        let t = &ts[i];
        let mat = t.to_matrix(&[LEG_L], &[LEG_P, LEG_R])?;
        let adag = mat.t().mapv(|z| z.conj()).as_standard_layout().to_owned();
        let (q1, r1) = crate::tensor::linalg::qr(&adag)?;
        let l_mat = r1.t().mapv(|z| z.conj()).as_standard_layout().to_owned();
        let q_mat = q1.t().mapv(|z| z.conj()).as_standard_layout().to_owned();
        let k = q_mat.nrows();
        let p_dim = t.shape()[1];
        let r_dim = t.shape()[2];
        let q_tensor = DenseTensor::from_matrix(&q_mat, &[(LEG_L, k)], &[(LEG_P, p_dim), (LEG_R, r_dim)])?;
        let l_tensor = DenseTensor::from_matrix(&l_mat, &[("ll", t.shape()[0])], &[("b", k)])?;
        ts[i] = q_tensor;
        let prev = ts[i - 1].renamed(LEG_R, "rr")?;
        let merged = contract(&prev, &l_tensor, &[("rr", "ll")])?; // l, p, b
        ts[i - 1] = merged.renamed("b", LEG_R)?;
    }
    let nrm = ts[0].norm();
    if nrm == 0.0 || !nrm.is_finite() {
        return Ok(None);
    }
    let inv = Complex64::new(1.0 / nrm, 0.0);
    ts[0] = ts[0].scaled(inv);
    Ok(Some((ts, nrm.ln())))
}

/// Left-to-right two-site SVD compression of a right-canonical, normalized
/// train. Returns the compressed train (left-canonical, site N-1 holding
/// the residual norm factored out), the summed relative discarded weight,
/// and `ln` of the kept norm (nonpositive).
pub(crate) fn compress_sweep(
    ts: Vec<DenseTensor>,
    policy: &TruncationPolicy,
) -> Result<(Vec<DenseTensor>, f64, f64)> {
    let n = ts.len();
    if n == 1 {
        let nrm = ts[0].norm();
        if nrm == 0.0 {
            return Err(Error::InvalidArgument("compressing a zero train".into()));
        }
        let t = ts[0].scaled(Complex64::new(1.0 / nrm, 0.0));
        return Ok((vec![t], 0.0, nrm.ln()));
    }
    let mut out: Vec<DenseTensor> = Vec::with_capacity(n);
    let mut center = ts[0].clone();
    let mut total_weight = 0.0f64;
    for (i, next) in ts.iter().enumerate().skip(1) {
        let theta = contract(&center.renamed(LEG_R, "m")?, &next.renamed(LEG_L, "m")?.renamed(LEG_P, "q")?, &[("m", "m")])?;
        // theta legs: l, p, q, r
        let split = svd_split(&theta, &[LEG_L, LEG_P], "b", policy)?;
        total_weight += split.discarded_weight;
        out.push(split.left.renamed("b", LEG_R)?);
        center = split
            .right
            .renamed("b", LEG_L)?
            .renamed("q", LEG_P)?;
        let _ = i;
    }
    let nrm = center.norm();
    if nrm == 0.0 {
        return Err(Error::InvalidArgument("train vanished during compression".into()));
    }
    out.push(center.scaled(Complex64::new(1.0 / nrm, 0.0)));
    Ok((out, total_weight, nrm.ln()))
}

/// Full recompression: canonicalize then sweep. `None` for a zero train.
pub(crate) fn recompress(
    ts: Vec<DenseTensor>,
    policy: &TruncationPolicy,
) -> Result<Option<(Vec<DenseTensor>, f64, f64)>> {
    let Some((rc, log0)) = right_canonicalize(ts)? else {
        return Ok(None);
    };
    let (out, weight, log1) = compress_sweep(rc, policy)?;
    Ok(Some((out, weight, log0 + log1)))
}

/// Schmidt spectra (squared singular values, descending, normalized) at
/// every internal bond of a normalized train.
pub(crate) fn schmidt_spectra(ts: &[DenseTensor]) -> Result<Vec<Vec<f64>>> {
    let Some((rc, _)) = right_canonicalize(ts.to_vec())? else {
        return Err(Error::InvalidArgument("schmidt spectrum of a zero train".into()));
    };
    let n = rc.len();
    let mut spectra = Vec::with_capacity(n.saturating_sub(1));
    let mut center = rc[0].clone();
    for next in rc.iter().skip(1) {
        let split = svd_split(&center, &[LEG_L, LEG_P], "b", &TruncationPolicy::exact())?;
        let total: f64 = split.singular_values.iter().map(|s| s * s).sum();
        spectra.push(
            split
                .singular_values
                .iter()
                .map(|s| s * s / total.max(f64::MIN_POSITIVE))
                .collect(),
        );
        let carried = contract(
            &split.right.renamed("b", LEG_L)?.renamed(LEG_R, "m")?,
            &next.renamed(LEG_L, "m")?,
            &[("m", "m")],
        )?; // legs l, p, r
        center = carried;
    }
    Ok(spectra)
}

/// Direct sum of weighted trains; weights are folded into site 0.
pub(crate) fn direct_sum(terms: &[(Complex64, &[DenseTensor])]) -> Result<Vec<DenseTensor>> {
    if terms.is_empty() {
        return Err(Error::EmptyInput("weighted sum".into()));
    }
    let n = terms[0].1.len();
    let pdims = phys_dims(terms[0].1);
    for (_, t) in terms {
        if t.len() != n || phys_dims(t) != pdims {
            return Err(Error::DimensionMismatch(
                "weighted sum over trains with different site structure".into(),
            ));
        }
    }
    if terms.len() == 1 {
        let (w, t) = &terms[0];
        let mut out = t.to_vec();
        out[0] = out[0].scaled(*w);
        return Ok(out);
    }
    if n == 1 {
        let mut acc = terms[0].1[0].scaled(terms[0].0);
        for (w, t) in terms.iter().skip(1) {
            acc = acc.add(&t[0].scaled(*w))?;
        }
        return Ok(vec![acc]);
    }
    let mut out = Vec::with_capacity(n);
    for site in 0..n {
        let d = pdims[site];
        let l_dims: Vec<usize> = terms.iter().map(|(_, t)| t[site].shape()[0]).collect();
        let r_dims: Vec<usize> = terms.iter().map(|(_, t)| t[site].shape()[2]).collect();
        let (l_tot, r_tot) = if site == 0 {
            (1, r_dims.iter().sum())
        } else if site == n - 1 {
            (l_dims.iter().sum(), 1)
        } else {
            (l_dims.iter().sum(), r_dims.iter().sum())
        };
        let mut data = vec![Complex64::new(0.0, 0.0); l_tot * d * r_tot];
        let mut l_off = 0usize;
        let mut r_off = 0usize;
        for (idx, (w, t)) in terms.iter().enumerate() {
            let st = &t[site];
            let (sl, sd, sr) = (st.shape()[0], st.shape()[1], st.shape()[2]);
            let weight = if site == 0 { *w } else { Complex64::new(1.0, 0.0) };
            let (lo, ro) = if site == 0 {
                (0, r_off)
            } else if site == n - 1 {
                (l_off, 0)
            } else {
                (l_off, r_off)
            };
            for a in 0..sl {
                for p in 0..sd {
                    for b in 0..sr {
                        let src = st.data()[(a * sd + p) * sr + b];
                        let dst = ((a + lo) * d + p) * r_tot + (b + ro);
                        data[dst] = src * weight;
                    }
                }
            }
            l_off += sl;
            r_off += sr;
            let _ = idx;
        }
        out.push(DenseTensor::new(
            vec![LEG_L.into(), LEG_P.into(), LEG_R.into()],
            vec![l_tot, d, r_tot],
            data,
        )?);
    }
    Ok(out)
}

/// Applies a rank-4 MPO (legs l,u,d,r) to a rank-3 train without
/// compression; bonds multiply.
pub(crate) fn zip_apply(op: &[DenseTensor], ts: &[DenseTensor]) -> Result<Vec<DenseTensor>> {
    if op.len() != ts.len() {
        return Err(Error::DimensionMismatch(
            "MPO and train lengths differ".into(),
        ));
    }
    let mut out = Vec::with_capacity(ts.len());
    for (w, a) in op.iter().zip(ts.iter()) {
        let w2 = w.renamed(LEG_L, "wl")?.renamed(LEG_R, "wr")?;
        let a2 = a.renamed(LEG_L, "al")?.renamed(LEG_R, "ar")?;
        let c = contract(&w2, &a2, &[("d", LEG_P)])?; // wl, u, wr, al, ar
        out.push(c.reshape_groups(
            &["wl", "al", "u", "wr", "ar"],
            &[(LEG_L, 2), (LEG_P, 1), (LEG_R, 2)],
        )?);
    }
    Ok(out)
}

/// Expands the train into a dense vector (row-major over sites).
pub(crate) fn to_dense(ts: &[DenseTensor], max_elements: usize) -> Result<Vec<Complex64>> {
    let total: usize = phys_dims(ts).iter().product();
    if total > max_elements {
        return Err(Error::SizeGuard(format!(
            "dense expansion of size {total} exceeds guard {max_elements}"
        )));
    }
    let mut acc = ts[0].reshape_groups(&[LEG_L, LEG_P, LEG_R], &[("s", 2), (LEG_R, 1)])?;
    for t in ts.iter().skip(1) {
        let merged = contract(&acc.renamed(LEG_R, "m")?, &t.renamed(LEG_L, "m")?, &[("m", "m")])?;
        // legs: s, p, r
        acc = merged.reshape_groups(&["s", LEG_P, LEG_R], &[("s", 2), (LEG_R, 1)])?;
    }
    let flat = acc.reshape_groups(&["s", LEG_R], &[("s", 2)])?;
    Ok(flat.data().to_vec())
}

/// Left-canonicalizes the first `upto` sites (QR sweep), leaving the
/// center at `upto`. Used to position a canonical center.
pub(crate) fn left_canonicalize_upto(mut ts: Vec<DenseTensor>, upto: usize) -> Result<Vec<DenseTensor>> {
    for i in 0..upto {
        let (q, r) = qr_split(&ts[i], &[LEG_L, LEG_P], "b")?;
        ts[i] = q.renamed("b", LEG_R)?;
        let next = ts[i + 1].renamed(LEG_L, "m")?;
        let merged = contract(&r.renamed("b", "m2")?.renamed(LEG_R, "m")?, &next, &[("m", "m")])?;
        ts[i + 1] = merged.renamed("m2", LEG_L)?;
    }
    Ok(ts)
}
