//! Dense exact-diagonalization back end: spectra and populations of small
//! chains, Berry-Esseen error, characteristic functions, exact filtering,
//! and eigenstate-population bounds. Everything here is ground truth for
//! the MPS path at sizes where 2^N fits in memory.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{filtered_populations, FilterParams};
use crate::hamiltonian::{HamiltonianSpec, DENSE_SITE_LIMIT};
use crate::mps::MpsState;
use crate::tensor::linalg;

/// Eigenvector-level work (half-chain traces) is capped lower than plain
/// spectra.
pub const EIGENVECTOR_SITE_LIMIT: usize = 12;

/// Default floor on sigma/sqrt(N) below which filter-parameter suggestions
/// are refused.
pub const DEFAULT_S_RATIO_FLOOR: f64 = 0.1;

/// Energy eigenvalues and populations of a pure state, with derived
/// moments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumData {
    pub n_sites: usize,
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// |b_j|^2, summing to 1.
    pub populations: Vec<f64>,
    pub mean: f64,
    pub sigma: f64,
    /// sigma / sqrt(N).
    pub s_ratio: f64,
}

impl SpectrumData {
    pub fn from_parts(n_sites: usize, eigenvalues: Vec<f64>, populations: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != populations.len() || eigenvalues.is_empty() {
            return Err(Error::DimensionMismatch(
                "eigenvalues and populations must have equal nonzero length".into(),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("eigenvalues must be sorted".into()));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "populations sum to {total}, expected 1"
            )));
        }
        if populations.iter().any(|&p| p < -1e-14) {
            return Err(Error::InvalidArgument("negative population".into()));
        }
        let nf = n_sites as f64;
        if eigenvalues
            .iter()
            .any(|&e| e < -nf - 1e-6 || e > nf + 1e-6)
        {
            return Err(Error::InvalidArgument(
                "eigenvalues outside [-N, N]".into(),
            ));
        }
        let mean: f64 = eigenvalues
            .iter()
            .zip(&populations)
            .map(|(e, p)| e * p)
            .sum();
        let var: f64 = eigenvalues
            .iter()
            .zip(&populations)
            .map(|(e, p)| (e - mean) * (e - mean) * p)
            .sum();
        let sigma = var.max(0.0).sqrt();
        Ok(Self {
            n_sites,
            eigenvalues,
            populations,
            mean,
            sigma,
            s_ratio: sigma / nf.sqrt(),
        })
    }

    /// The coin-toss family: p_k = binom(N, k) / 2^N at energies N - 2k.
    /// This is exactly the energy distribution of |+>^N under sum sigma_z.
    pub fn binomial_coin_toss(n_sites: usize) -> Result<Self> {
        let n = n_sites as i64;
        let mut entries: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let log_p = libm::lgamma(n as f64 + 1.0)
                    - libm::lgamma(k as f64 + 1.0)
                    - libm::lgamma((n - k) as f64 + 1.0)
                    - n as f64 * std::f64::consts::LN_2;
                ((n - 2 * k) as f64, log_p.exp())
            })
            .collect();
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (evals, pops): (Vec<f64>, Vec<f64>) = entries.into_iter().unzip();
        let total: f64 = pops.iter().sum();
        let pops = pops.into_iter().map(|p| p / total).collect();
        Self::from_parts(n_sites, evals, pops)
    }

    /// Synthetic continuum spectrum with exactly Gaussian populations on a
    /// uniform energy grid over [-N, N], centered at zero.
    pub fn synthetic_gaussian(n_sites: usize, sigma: f64, n_points: usize) -> Result<Self> {
        if n_points < 3 || sigma <= 0.0 {
            return Err(Error::InvalidArgument(
                "synthetic gaussian needs n_points >= 3 and sigma > 0".into(),
            ));
        }
        let nf = n_sites as f64;
        let evals: Vec<f64> = (0..n_points)
            .map(|i| -nf + 2.0 * nf * (i as f64) / (n_points as f64 - 1.0))
            .collect();
        let raw: Vec<f64> = evals
            .iter()
            .map(|&e| (-e * e / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let pops = raw.into_iter().map(|p| p / total).collect();
        Self::from_parts(n_sites, evals, pops)
    }

    /// Errors unless sigma/sqrt(N) is at least `floor`.
    pub fn check_assumption(&self, floor: f64) -> Result<()> {
        if self.s_ratio < floor {
            return Err(Error::AssumptionViolated(format!(
                "s ratio sigma/sqrt(N) = {:.4} below floor {floor}",
                self.s_ratio
            )));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eigenvalue,population\n");
        for (e, p) in self.eigenvalues.iter().zip(&self.populations) {
            out.push_str(&format!("{e:.17e},{p:.17e}\n"));
        }
        out
    }
}

/// Populations of `state` in the eigenbasis of the normalized Hamiltonian.
pub fn diagonalize(spec: &HamiltonianSpec, state: &MpsState) -> Result<SpectrumData> {
    if spec.n_sites() > DENSE_SITE_LIMIT {
        return Err(Error::SizeGuard(format!(
            "diagonalize needs n_sites <= {DENSE_SITE_LIMIT}"
        )));
    }
    if state.n_sites() != spec.n_sites() {
        return Err(Error::DimensionMismatch(
            "state and Hamiltonian site counts differ".into(),
        ));
    }
    let h = spec.build_dense()?;
    let (evals, evecs) = linalg::eigh_real(&h)?;
    let psi = state.to_dense_vector()?;
    let dim = psi.len();
    let mut populations = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut overlap = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            overlap += Complex64::new(evecs[(i, j)], 0.0) * psi[i];
        }
        populations.push(overlap.norm_sqr());
    }
    let total: f64 = populations.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "state norm in eigenbasis is {total}, expected 1"
        )));
    }
    let populations: Vec<f64> = populations.into_iter().map(|p| p / total).collect();
    SpectrumData::from_parts(spec.n_sites(), evals.to_vec(), populations)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Gaussian CDF with the data's mean and sigma.
pub fn gaussian_cdf(data: &SpectrumData, x: f64) -> f64 {
    normal_cdf((x - data.mean) / data.sigma)
}

/// Berry-Esseen error: sup over x of |J(x) - G(x)|, where J is the
/// cumulative population function and G the moment-matched Gaussian CDF.
///
/// The sup of a step-vs-continuous difference is attained at a jump, from
/// one of the two sides, so it is evaluated exactly at every jump point.
/// An exact point mass (sigma = 0) takes the degenerate-limit value 1/2
/// at the atom.
pub fn berry_esseen_error(data: &SpectrumData) -> Result<(f64, f64)> {
    if data.sigma <= 0.0 {
        return Ok((0.5, data.mean));
    }
    // group numerically-degenerate eigenvalues into atoms
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (&e, &p) in data.eigenvalues.iter().zip(&data.populations) {
        match atoms.last_mut() {
            Some((e0, p0)) if (e - *e0).abs() <= 1e-10 => *p0 += p,
            _ => atoms.push((e, p)),
        }
    }
    let mut best = 0.0f64;
    let mut best_x = atoms[0].0;
    let mut cum = 0.0f64;
    for &(e, p) in &atoms {
        let g = gaussian_cdf(data, e);
        let below = (cum - g).abs();
        cum += p;
        let above = (cum - g).abs();
        let local = below.max(above);
        if local > best {
            best = local;
            best_x = e;
        }
    }
    Ok((best, best_x))
}

/// Characteristic function phi(t') = <exp(i t' (H - E)/sigma)> on a grid.
/// The grid must stay within |t'| <= sigma.
pub fn characteristic_function(data: &SpectrumData, t_grid: &[f64]) -> Result<Vec<Complex64>> {
    if t_grid.iter().any(|t| t.abs() > data.sigma + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "characteristic function grid must stay within |t'| <= sigma = {:.4}",
            data.sigma
        )));
    }
    if data.sigma <= 0.0 {
        // point mass: phi is identically 1 on the (all-zero) grid
        return Ok(vec![Complex64::new(1.0, 0.0); t_grid.len()]);
    }
    Ok(t_grid
        .iter()
        .map(|&t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&e, &p) in data.eigenvalues.iter().zip(&data.populations) {
                let phase = t * (e - data.mean) / data.sigma;
                acc += Complex64::new(p, 0.0) * Complex64::new(phase.cos(), phase.sin());
            }
            acc
        })
        .collect())
}

/// Ground-truth moments of the filtered state: returns `(mu, delta2,
/// norm2)` where `norm2 = sum_j |b_j|^2 g((E_j - E)/N)^2`.
pub fn exact_filtered_moments(data: &SpectrumData, params: &FilterParams) -> Result<(f64, f64, f64)> {
    let (_, mu, delta2, norm2) = filtered_populations(data, params)?;
    Ok((mu, delta2, norm2))
}

/// Per-eigenstate slack in the bound |b_j|^2 <= exp(-S2(E_j)/2) at the
/// half-chain cut.
#[derive(Clone, Debug, Serialize)]
pub struct PopulationBoundReport {
    pub n_states: usize,
    pub violations: usize,
    /// min over eigenstates of (-S2/2 - ln |b_j|^2); nonnegative when the
    /// bound holds.
    pub min_slack: f64,
    pub median_slack: f64,
    pub mean_s2: f64,
    pub max_s2: f64,
    pub max_population: f64,
}

/// Checks |b_j|^2 <= exp(-S2(E_j)/2) for every eigenstate, with S2 the
/// Renyi-2 entropy at the half-chain cut.
pub fn eigenstate_population_bound_check(
    spec: &HamiltonianSpec,
    state: &MpsState,
) -> Result<PopulationBoundReport> {
    let n = spec.n_sites();
    if n > EIGENVECTOR_SITE_LIMIT {
        return Err(Error::SizeGuard(format!(
            "population-bound check needs n_sites <= {EIGENVECTOR_SITE_LIMIT}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "population-bound check needs at least 2 sites".into(),
        ));
    }
    let h = spec.build_dense()?;
    let (_, evecs) = linalg::eigh_real(&h)?;
    let psi = state.to_dense_vector()?;
    let dim = psi.len();
    let na = n / 2;
    let da = 1usize << na;
    let db = dim / da;

    let mut slacks: Vec<f64> = Vec::with_capacity(dim);
    let mut violations = 0usize;
    let mut s2_sum = 0.0;
    let mut s2_max = 0.0f64;
    let mut p_max = 0.0f64;
    for j in 0..dim {
        let mut overlap = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            overlap += Complex64::new(evecs[(i, j)], 0.0) * psi[i];
        }
        let pop = overlap.norm_sqr();
        p_max = p_max.max(pop);

        let mut mat = Array2::<Complex64>::zeros((da, db));
        for a in 0..da {
            for b in 0..db {
                mat[(a, b)] = Complex64::new(evecs[(a * db + b, j)], 0.0);
            }
        }
        let (_, s, _) = linalg::svd(&mat)?;
        let purity: f64 = s.iter().map(|x| x.powi(4)).sum();
        let s2 = -purity.max(f64::MIN_POSITIVE).ln();
        s2_sum += s2;
        s2_max = s2_max.max(s2);

        if pop > (-s2 / 2.0).exp() + 1e-12 {
            violations += 1;
        }
        if pop > 1e-300 {
            slacks.push(-s2 / 2.0 - pop.ln());
        }
    }
    slacks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_slack = slacks.first().copied().unwrap_or(f64::INFINITY);
    let median_slack = slacks.get(slacks.len() / 2).copied().unwrap_or(f64::INFINITY);
    Ok(PopulationBoundReport {
        n_states: dim,
        violations,
        min_slack,
        median_slack,
        mean_s2: s2_sum / dim as f64,
        max_s2: s2_max,
        max_population: p_max,
    })
}

/// Dense unitary exp(-i t H) of the normalized Hamiltonian via
/// eigendecomposition.
pub fn dense_unitary(spec: &HamiltonianSpec, t: f64) -> Result<Array2<Complex64>> {
    let h = spec.build_dense()?;
    let (evals, evecs) = linalg::eigh_real(&h)?;
    let dim = h.nrows();
    let mut out = Array2::<Complex64>::zeros((dim, dim));
    // V diag(e^{-i t lambda}) V^T
    for k in 0..dim {
        let phase = Complex64::new(0.0, -t * evals[k]).exp();
        for i in 0..dim {
            let vik = evecs[(i, k)];
            if vik == 0.0 {
                continue;
            }
            let coeff = phase * vik;
            for j in 0..dim {
                out[(i, j)] += coeff * evecs[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Largest singular value of a dense complex matrix.
pub fn spectral_norm(mat: &Array2<Complex64>) -> Result<f64> {
    linalg::spectral_norm(mat)
}
