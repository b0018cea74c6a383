//! 1D local Hamiltonians H = sum_i h_i with every local term normalized to
//! operator norm at most 1, built both as an MPO and (at small sizes) as a
//! dense real symmetric matrix.
//!
//! Three model families are supported: the transverse-field Ising chain
//! with a longitudinal field (nonintegrable for generic couplings), the
//! Heisenberg XXZ chain, and the non-interacting field sum_i sigma_z.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpo::MpoOperator;
use crate::tensor::{linalg, DenseTensor};

/// Dense-matrix size guard: 2^14 * 2^14 doubles.
pub const DENSE_SITE_LIMIT: usize = 14;

const C1: Complex64 = Complex64::new(1.0, 0.0);
const C0: Complex64 = Complex64::new(0.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

fn pauli_x() -> Array2<Complex64> {
    ndarray::array![[C0, C1], [C1, C0]]
}

fn pauli_y() -> Array2<Complex64> {
    ndarray::array![[C0, -CI], [CI, C0]]
}

fn pauli_z() -> Array2<Complex64> {
    ndarray::array![[C1, C0], [C0, -C1]]
}

fn zeros2() -> Array2<Complex64> {
    Array2::zeros((2, 2))
}

/// Model family and bare couplings (before normalization).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    /// H = sum_i J Z_i Z_{i+1} + sum_i (g X_i + h Z_i)
    Ising { j: f64, g: f64, h: f64 },
    /// H = sum_i Jx (X_i X_{i+1} + Y_i Y_{i+1}) + Jz Z_i Z_{i+1} + sum_i h Z_i
    Xxz { jx: f64, jz: f64, h: f64 },
    /// H = sum_i Z_i
    FreeField,
}

impl Model {
    /// Two-site couplings as (left operator, right operator) pairs.
    fn pairs(&self) -> Vec<(Array2<Complex64>, Array2<Complex64>)> {
        match self {
            Model::Ising { j, .. } => vec![(pauli_z(), pauli_z().mapv(|v| v * *j))],
            Model::Xxz { jx, jz, .. } => vec![
                (pauli_x(), pauli_x().mapv(|v| v * *jx)),
                (pauli_y(), pauli_y().mapv(|v| v * *jx)),
                (pauli_z(), pauli_z().mapv(|v| v * *jz)),
            ],
            Model::FreeField => vec![],
        }
    }

    fn onsite(&self) -> Array2<Complex64> {
        match self {
            Model::Ising { g, h, .. } => {
                pauli_x().mapv(|v| v * *g) + pauli_z().mapv(|v| v * *h)
            }
            Model::Xxz { h, .. } => pauli_z().mapv(|v| v * *h),
            Model::FreeField => pauli_z(),
        }
    }

    fn is_interacting(&self) -> bool {
        !matches!(self, Model::FreeField)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Ising { .. } => "ising",
            Model::Xxz { .. } => "xxz",
            Model::FreeField => "free_field",
        }
    }

    /// The standard nonintegrable Ising point used throughout the test
    /// sweeps.
    pub fn ising_nonintegrable() -> Self {
        Model::Ising {
            j: 1.0,
            g: 1.05,
            h: 0.5,
        }
    }
}

fn kron_c64(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

fn realify(m: &Array2<Complex64>, what: &str) -> Result<Array2<f64>> {
    let max_im = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-12 {
        return Err(Error::Linalg(format!(
            "{what} expected real, imaginary residue {max_im:.3e}"
        )));
    }
    Ok(m.mapv(|z| z.re))
}

/// Symbolic description of a normalized 1D local Hamiltonian.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    n_sites: usize,
    model: Model,
    /// Every local term is divided by this, so that ||h_i|| <= 1.
    normalization: f64,
}

impl HamiltonianSpec {
    pub fn new(n_sites: usize, model: Model) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidArgument("n_sites must be positive".into()));
        }
        if model.is_interacting() && n_sites < 2 {
            return Err(Error::InvalidArgument(
                "interacting models need at least 2 sites".into(),
            ));
        }
        let mut spec = Self {
            n_sites,
            model,
            normalization: 1.0,
        };
        spec.normalization = spec.compute_normalization()?;
        Ok(spec)
    }

    pub fn ising(n_sites: usize, j: f64, g: f64, h: f64) -> Result<Self> {
        Self::new(n_sites, Model::Ising { j, g, h })
    }

    pub fn xxz(n_sites: usize, jx: f64, jz: f64, h: f64) -> Result<Self> {
        Self::new(n_sites, Model::Xxz { jx, jz, h })
    }

    pub fn free_field(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Model::FreeField)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Local terms before normalization, as dense real 4x4 blocks (or 2x2
    /// for the non-interacting model). Field operators are shared between
    /// the adjacent bond terms: boundary sites contribute fully to their
    /// only bond, interior sites half to each side.
    fn raw_local_terms(&self) -> Result<Vec<Array2<f64>>> {
        let onsite = self.model.onsite();
        if !self.model.is_interacting() {
            let block = realify(&onsite, "onsite term")?;
            return Ok(vec![block; self.n_sites]);
        }
        let n = self.n_sites;
        let pairs = self.model.pairs();
        let id = Array2::<Complex64>::eye(2);
        let mut terms = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let mut block = Array2::<Complex64>::zeros((4, 4));
            for (a, b) in &pairs {
                block = block + kron_c64(a, b);
            }
            let l_share = if i == 0 { 1.0 } else { 0.5 };
            let r_share = if i == n - 2 { 1.0 } else { 0.5 };
            block = block
                + kron_c64(&onsite, &id).mapv(|v| v * l_share)
                + kron_c64(&id, &onsite).mapv(|v| v * r_share);
            terms.push(realify(&block, "two-site term")?);
        }
        Ok(terms)
    }

    /// Operator norms of the local terms after normalization.
    pub fn local_term_norms(&self) -> Result<Vec<f64>> {
        Ok(self
            .raw_term_norms()?
            .into_iter()
            .map(|x| x / self.normalization)
            .collect())
    }

    fn raw_term_norms(&self) -> Result<Vec<f64>> {
        self.raw_local_terms()?
            .iter()
            .map(|block| {
                let (evals, _) = linalg::eigh_real(block)?;
                Ok(evals.iter().map(|x| x.abs()).fold(0.0, f64::max))
            })
            .collect()
    }

    fn compute_normalization(&self) -> Result<f64> {
        let max_norm = self
            .raw_term_norms()?
            .into_iter()
            .fold(0.0f64, f64::max);
        Ok(max_norm.max(1.0))
    }

    /// Upper bound on ||H|| from the triangle inequality over local terms;
    /// at most n_sites.
    pub fn operator_norm_bound(&self) -> f64 {
        self.local_term_norms()
            .map(|v| v.iter().sum())
            .unwrap_or(self.n_sites as f64)
    }

    /// Normalized Hamiltonian as an MPO (bond dimension at most 5).
    pub fn build_mpo(&self) -> Result<MpoOperator> {
        self.build_mpo_affine(1.0, 0.0)
    }

    /// MPO of `scale * H + shift * I` with the same bond dimension as H.
    pub fn build_mpo_affine(&self, scale: f64, shift: f64) -> Result<MpoOperator> {
        let n = self.n_sites;
        let f = Complex64::new(scale / self.normalization, 0.0);
        let shift_c = Complex64::new(shift, 0.0);
        let pairs = self.model.pairs();
        let onsite = self.model.onsite();
        let p = pairs.len();
        let dim = 2 + p;
        let id = Array2::<Complex64>::eye(2);

        // W block grid: row 0 = nothing placed, rows 1..=p = mid-term,
        // row dim-1 = finished.
        let block = |row: usize, col: usize, site: usize| -> Array2<Complex64> {
            if row == 0 && col == 0 {
                id.clone()
            } else if row == 0 && col == dim - 1 {
                let mut b = onsite.mapv(|v| v * f);
                if site == 0 {
                    b = b + id.mapv(|v| v * shift_c);
                }
                b
            } else if row == 0 && col >= 1 && col <= p {
                pairs[col - 1].0.clone()
            } else if row >= 1 && row <= p && col == dim - 1 {
                pairs[row - 1].1.mapv(|v| v * f)
            } else if row == dim - 1 && col == dim - 1 {
                id.clone()
            } else {
                zeros2()
            }
        };

        let mut tensors = Vec::with_capacity(n);
        for site in 0..n {
            let rows: Vec<usize> = if site == 0 { vec![0] } else { (0..dim).collect() };
            let cols: Vec<usize> = if site == n - 1 {
                vec![dim - 1]
            } else {
                (0..dim).collect()
            };
            let (dl, dr) = (rows.len(), cols.len());
            let mut data = vec![C0; dl * 2 * 2 * dr];
            for (ri, &row) in rows.iter().enumerate() {
                for (ci, &col) in cols.iter().enumerate() {
                    let b = block(row, col, site);
                    for u in 0..2 {
                        for d in 0..2 {
                            data[((ri * 2 + u) * 2 + d) * dr + ci] = b[(u, d)];
                        }
                    }
                }
            }
            tensors.push(DenseTensor::new(
                vec!["l".into(), "u".into(), "d".into(), "r".into()],
                vec![dl, 2, 2, dr],
                data,
            )?);
        }
        MpoOperator::from_site_tensors(tensors)
    }

    /// Normalized Hamiltonian as a dense real symmetric matrix
    /// (site 0 is the most significant bit).
    pub fn build_dense(&self) -> Result<Array2<f64>> {
        let n = self.n_sites;
        if n > DENSE_SITE_LIMIT {
            return Err(Error::SizeGuard(format!(
                "dense Hamiltonian needs n_sites <= {DENSE_SITE_LIMIT}, got {n}"
            )));
        }
        let dim = 1usize << n;
        let mut h = Array2::<f64>::zeros((dim, dim));
        let inv = 1.0 / self.normalization;

        let onsite = realify(&self.model.onsite(), "onsite")?;
        for site in 0..n {
            add_one_site(&mut h, n, site, &onsite, inv);
        }
        if self.model.is_interacting() {
            let mut pair_block = Array2::<Complex64>::zeros((4, 4));
            for (a, b) in &self.model.pairs() {
                pair_block = pair_block + kron_c64(a, b);
            }
            let pair_block = realify(&pair_block, "pair block")?;
            for site in 0..n - 1 {
                add_two_site(&mut h, n, site, &pair_block, inv);
            }
        }
        Ok(h)
    }
}

fn add_one_site(h: &mut Array2<f64>, n: usize, site: usize, op: &Array2<f64>, scale: f64) {
    let dim = 1usize << n;
    let shift = n - 1 - site;
    for s in 0..dim {
        let bit = (s >> shift) & 1;
        for out_bit in 0..2 {
            let v = op[(out_bit, bit)];
            if v != 0.0 {
                let t = (s & !(1 << shift)) | (out_bit << shift);
                h[(t, s)] += scale * v;
            }
        }
    }
}

fn add_two_site(h: &mut Array2<f64>, n: usize, site: usize, op: &Array2<f64>, scale: f64) {
    let dim = 1usize << n;
    let sh_a = n - 1 - site;
    let sh_b = n - 2 - site;
    for s in 0..dim {
        let ba = (s >> sh_a) & 1;
        let bb = (s >> sh_b) & 1;
        let col = ba * 2 + bb;
        for row in 0..4 {
            let v = op[(row, col)];
            if v != 0.0 {
                let oa = row >> 1;
                let ob = row & 1;
                let t = (s & !(1 << sh_a) & !(1 << sh_b)) | (oa << sh_a) | (ob << sh_b);
                h[(t, s)] += scale * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_from_mpo(spec: &HamiltonianSpec) -> Array2<f64> {
        let mpo = spec.build_mpo().unwrap();
        let dense = mpo.to_dense().unwrap();
        realify(&dense, "mpo dense").unwrap()
    }

    #[test]
    fn free_field_single_site_dense() {
        let spec = HamiltonianSpec::free_field(1).unwrap();
        let h = spec.build_dense().unwrap();
        assert_eq!(h[(0, 0)], 1.0);
        assert_eq!(h[(1, 1)], -1.0);
        assert_eq!(h[(0, 1)], 0.0);
    }

    #[test]
    fn free_field_mpo_is_sum_of_sigma_z() {
        let spec = HamiltonianSpec::free_field(3).unwrap();
        let got = dense_from_mpo(&spec);
        let want = spec.build_dense().unwrap();
        let diff = (&got - &want).iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        // diagonal entries are bit-sum spins
        assert_eq!(want[(0, 0)], 3.0);
        assert_eq!(want[(7, 7)], -3.0);
        assert!(spec.build_mpo().unwrap().bond_dims().iter().all(|&b| b <= 2));
    }

    #[test]
    fn zero_ising_is_zero_operator() {
        let spec = HamiltonianSpec::ising(3, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(spec.normalization(), 1.0);
        let h = spec.build_dense().unwrap();
        assert!(h.iter().all(|&x| x == 0.0));
        let m = dense_from_mpo(&spec);
        assert!(m.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn ising_dense_matches_pauli_string_oracle() {
        // brute-force oracle: explicit Kronecker products per term
        let (j, g, h) = (1.0, 1.05, 0.5);
        let n = 4;
        let spec = HamiltonianSpec::ising(n, j, g, h).unwrap();
        let dim = 1 << n;
        let mut oracle = Array2::<f64>::zeros((dim, dim));
        let sx = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let sz = ndarray::array![[1.0, 0.0], [0.0, -1.0]];
        let id = Array2::<f64>::eye(2);
        let kron = |a: &Array2<f64>, b: &Array2<f64>| {
            let (ar, ac) = a.dim();
            let (br, bc) = b.dim();
            let mut out = Array2::<f64>::zeros((ar * br, ac * bc));
            for i in 0..ar {
                for jj in 0..ac {
                    for k in 0..br {
                        for l in 0..bc {
                            out[(i * br + k, jj * bc + l)] = a[(i, jj)] * b[(k, l)];
                        }
                    }
                }
            }
            out
        };
        let embed = |ops: &[(usize, &Array2<f64>)]| {
            let mut full = Array2::<f64>::eye(1);
            for site in 0..n {
                let op = ops
                    .iter()
                    .find(|(s, _)| *s == site)
                    .map(|(_, o)| (*o).clone())
                    .unwrap_or_else(|| id.clone());
                full = kron(&full, &op);
            }
            full
        };
        for i in 0..n - 1 {
            oracle = oracle + embed(&[(i, &sz), (i + 1, &sz)]).mapv(|v| v * j);
        }
        for i in 0..n {
            oracle = oracle + embed(&[(i, &sx)]).mapv(|v| v * g) + embed(&[(i, &sz)]).mapv(|v| v * h);
        }
        let got = spec.build_dense().unwrap().mapv(|v| v * spec.normalization());
        let diff = (&got - &oracle).iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "max dev {diff}");

        let got_mpo = dense_from_mpo(&spec).mapv(|v| v * spec.normalization());
        let diff = (&got_mpo - &oracle).iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "mpo max dev {diff}");
        assert!(spec.build_mpo().unwrap().bond_dims().iter().all(|&b| b <= 3));
    }

    #[test]
    fn heisenberg_two_site_spectrum() {
        let spec = HamiltonianSpec::xxz(2, 1.0, 1.0, 0.0).unwrap();
        let h = spec.build_dense().unwrap().mapv(|v| v * spec.normalization());
        let (evals, _) = linalg::eigh_real(&h).unwrap();
        let mut sorted: Vec<f64> = evals.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-3.0, 1.0, 1.0, 1.0];
        for (a, b) in sorted.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(spec.build_mpo().unwrap().bond_dims().iter().all(|&b| b <= 5));
    }

    #[test]
    fn dense_is_symmetric_and_spectrum_in_range() {
        for spec in [
            HamiltonianSpec::ising(5, 1.0, 1.05, 0.5).unwrap(),
            HamiltonianSpec::xxz(5, 0.7, 1.3, 0.4).unwrap(),
            HamiltonianSpec::free_field(5).unwrap(),
        ] {
            let h = spec.build_dense().unwrap();
            let asym = (&h - &h.t())
                .iter()
                .map(|x| x.abs())
                .fold(0.0, f64::max);
            assert!(asym < 1e-12);
            let (evals, _) = linalg::eigh_real(&h).unwrap();
            let n = spec.n_sites() as f64;
            assert!(evals.iter().all(|&e| e >= -n - 1e-9 && e <= n + 1e-9));
            // every normalized local term has norm at most 1
            assert!(spec
                .local_term_norms()
                .unwrap()
                .iter()
                .all(|&x| x <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn mpo_bond_dimension_within_spec() {
        let spec = HamiltonianSpec::xxz(6, 1.0, 0.5, 0.2).unwrap();
        let mpo = spec.build_mpo().unwrap();
        assert!(mpo.bond_dims().iter().all(|&b| b <= 5));
    }

    #[test]
    fn affine_mpo_matches_dense() {
        let spec = HamiltonianSpec::ising(4, 1.0, 1.05, 0.5).unwrap();
        let (scale, shift) = (0.25, -0.7);
        let mpo = spec.build_mpo_affine(scale, shift).unwrap();
        let got = mpo.to_dense().unwrap();
        let want = {
            let h = spec.build_dense().unwrap();
            let mut w = h.mapv(|v| v * scale);
            for i in 0..w.nrows() {
                w[(i, i)] += shift;
            }
            w
        };
        let diff = got
            .iter()
            .zip(want.iter())
            .map(|(a, b)| (a - Complex64::new(*b, 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }
}
