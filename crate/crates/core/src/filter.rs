//! The truncated cosine energy filter.
//!
//! The filter is the operator built from cos^M((H - E)/N) by binomial
//! expansion into complex exponentials exp(i 2m (H - E)/N), keeping only
//! the Chernoff window |m| <= floor(y sqrt(M)); the dropped tail costs at
//! most exp(-y^2/2) in operator norm on [-1, 1]. Applied to a product
//! state it narrows the energy distribution to a variance of order N^2/M
//! while moving the mean by at most order N/sqrt(M).
//!
//! The MPS path evaluates the same weighted combination of evolution
//! operators through the shared Chebyshev recurrence of the evolution
//! module, so one polynomial sweep serves every kept m at once; the
//! per-term time-evolution makeup (times 2m/N, binomial weights, accuracy
//! shares) is recorded in the run report.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{bessel_j_table, chebyshev_degree, series_tail_bound};
use crate::hamiltonian::HamiltonianSpec;
use crate::mps::MpsState;
use crate::oracle::SpectrumData;
use crate::tensor::TruncationPolicy;

/// Pre-normalization log-norm below this signals filtering into a
/// spectral gap.
pub const NORM_COLLAPSE_LOG: f64 = -345.387_763_949_107_83; // ln(1e-150)

/// Parameters of the truncated cosine filter.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FilterParams {
    /// Filter power M (even, at least 2).
    pub m: usize,
    /// Chernoff radius multiplier y > 0; kept terms satisfy
    /// |m| <= floor(y sqrt(M)).
    pub y: f64,
    /// Energy around which to filter.
    pub e_center: f64,
    /// Total operator-approximation budget for the MPS path.
    pub epsilon_total: f64,
}

impl FilterParams {
    pub fn new(m: usize, y: f64, e_center: f64, epsilon_total: f64) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "filter power M must be even and at least 2, got {m}"
            )));
        }
        if !(y > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Chernoff radius multiplier y must be positive, got {y}"
            )));
        }
        if !(epsilon_total > 0.0 && epsilon_total <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_total must lie in (0, 1], got {epsilon_total}"
            )));
        }
        if !e_center.is_finite() {
            return Err(Error::InvalidArgument("E center must be finite".into()));
        }
        Ok(Self {
            m,
            y,
            e_center,
            epsilon_total,
        })
    }

    /// Index cutoff floor(y sqrt(M)), clamped to the full range M/2.
    pub fn m_cutoff(&self) -> i64 {
        let raw = (self.y * (self.m as f64).sqrt()).floor() as i64;
        raw.min(self.m as i64 / 2).max(0)
    }

    pub fn with_e_center(mut self, e: f64) -> Self {
        self.e_center = e;
        self
    }

    /// The y rule used when none is given: y^2 = 6 log(N / delta) at the
    /// variance target delta^2 = N^2 / M, which reduces to y^2 = 3 log M.
    pub fn auto_y(m: usize) -> f64 {
        (3.0 * (m as f64).ln()).sqrt().max(0.5)
    }
}

/// Chernoff-truncated binomial weights: (m, binom(M, M/2 - m) / 2^M) for
/// |m| <= floor(y sqrt(M)), computed in log space.
pub fn binomial_weights(m: usize, y: f64) -> Result<Vec<(i64, f64)>> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "filter power M must be even and at least 2, got {m}"
        )));
    }
    let half = m as i64 / 2;
    let cutoff = ((y * (m as f64).sqrt()).floor() as i64).min(half).max(0);
    let mf = m as f64;
    let log2m = mf * std::f64::consts::LN_2;
    let mut out = Vec::with_capacity((2 * cutoff + 1) as usize);
    for mm in -cutoff..=cutoff {
        let k = (half - mm) as f64;
        let log_w = libm::lgamma(mf + 1.0)
            - libm::lgamma(k + 1.0)
            - libm::lgamma(mf - k + 1.0)
            - log2m;
        out.push((mm, log_w.exp()));
    }
    Ok(out)
}

/// g_y(x): the Chernoff-truncated cosine power, evaluated as the real
/// symmetric sum w_0 + 2 sum_m w_m cos(2 m x). Rejects |x| > 1, the
/// domain on which the truncation bound holds.
pub fn scalar_g(x: f64, m: usize, y: f64) -> Result<Complex64> {
    if x.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "scalar filter evaluation requires x in [-1, 1], got {x}"
        )));
    }
    let weights = binomial_weights(m, y)?;
    Ok(Complex64::new(eval_g(x, &weights), 0.0))
}

/// Unchecked evaluation of the truncated sum at any x, via the cosine
/// three-term recurrence (one trig call per point).
pub(crate) fn eval_g(x: f64, weights: &[(i64, f64)]) -> f64 {
    let cutoff = weights.iter().map(|(m, _)| *m).max().unwrap_or(0);
    let w_at = |mm: i64| -> f64 {
        let idx = (mm + cutoff) as usize;
        weights[idx].1
    };
    let mut acc = w_at(0);
    if cutoff == 0 {
        return acc;
    }
    let c1 = (2.0 * x).cos();
    let mut ckm1 = 1.0f64; // cos(0)
    let mut ck = c1; // cos(2x)
    acc += 2.0 * w_at(1) * ck;
    for mm in 2..=cutoff {
        let ckp1 = 2.0 * c1 * ck - ckm1;
        ckm1 = ck;
        ck = ckp1;
        acc += 2.0 * w_at(mm) * ck;
    }
    acc
}

/// Suggests filter parameters for a variance target: M = ceil(N^2 /
/// delta^2) rounded up to even and y^2 = 6 log(N/delta). When a
/// Berry-Esseen hint is given, M beyond N/zeta^2 is refused rather than
/// clamped.
pub fn suggest_params(
    n_sites: usize,
    target_delta: f64,
    zeta_hint: Option<f64>,
) -> Result<FilterParams> {
    if !(target_delta > 0.0) {
        return Err(Error::InvalidArgument(
            "target delta must be positive".into(),
        ));
    }
    let nf = n_sites as f64;
    let mut m = (nf * nf / (target_delta * target_delta)).ceil() as usize;
    m = m.max(2);
    if m % 2 == 1 {
        m += 1;
    }
    if let Some(zeta) = zeta_hint {
        if zeta > 0.0 {
            let ceiling = nf / (zeta * zeta);
            if (m as f64) > ceiling {
                return Err(Error::InfeasibleParams(format!(
                    "variance target {target_delta} needs M = {m}, above the \
                     Berry-Esseen ceiling N/zeta^2 = {ceiling:.1}"
                )));
            }
        }
    }
    let y = (6.0 * (nf / target_delta).ln()).max(0.0).sqrt().max(0.5);
    FilterParams::new(m, y, 0.0, 1e-8)
}

/// Filtered populations and moments on the dense path: populations are
/// reweighted by g((E_j - E)/N)^2 and renormalized.
/// Returns `(populations, mu, delta2, norm2)`.
pub(crate) fn filtered_populations(
    data: &SpectrumData,
    params: &FilterParams,
) -> Result<(Vec<f64>, f64, f64, f64)> {
    let total_p: f64 = data.populations.iter().sum();
    if (total_p - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "populations sum to {total_p}, expected 1"
        )));
    }
    let nf = data.n_sites as f64;
    let full_range = params.m_cutoff() == params.m as i64 / 2;
    // log-space filtered weights: ln(p_j g_j^2). At full range g equals
    // cos^M exactly, which stays representable as a log at any M; the
    // truncated sum is evaluated linearly.
    let log_q: Vec<f64> = if full_range {
        data.eigenvalues
            .iter()
            .zip(&data.populations)
            .map(|(&e, &p)| {
                let x = (e - params.e_center) / nf;
                let c = x.cos().abs().max(f64::MIN_POSITIVE);
                if p <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    p.ln() + 2.0 * params.m as f64 * c.ln()
                }
            })
            .collect()
    } else {
        let weights = binomial_weights(params.m, params.y)?;
        data.eigenvalues
            .iter()
            .zip(&data.populations)
            .map(|(&e, &p)| {
                let g = eval_g((e - params.e_center) / nf, &weights);
                let v = p * g * g;
                if v <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    v.ln()
                }
            })
            .collect()
    };
    let max_log = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max_log.is_finite() {
        // identically zero filtered norm; log-scale underflow is fine,
        // the populations are ratios
        return Err(Error::NormCollapse(f64::NEG_INFINITY));
    }
    let mut q: Vec<f64> = log_q.iter().map(|&l| (l - max_log).exp()).collect();
    let scaled_norm: f64 = q.iter().sum();
    let norm2 = scaled_norm * max_log.exp();
    let mut mu = 0.0;
    for (v, &e) in q.iter_mut().zip(&data.eigenvalues) {
        *v /= scaled_norm;
        mu += *v * e;
    }
    let mut delta2 = 0.0;
    for (v, &e) in q.iter().zip(&data.eigenvalues) {
        delta2 += v * (e - mu) * (e - mu);
    }
    Ok((q, mu, delta2, norm2))
}

/// Dense-path filter: returns the filtered populations together with
/// their mean and variance.
pub fn apply_filter_dense(
    data: &SpectrumData,
    params: &FilterParams,
) -> Result<(Vec<f64>, f64, f64)> {
    let (pops, mu, delta2, _) = filtered_populations(data, params)?;
    Ok((pops, mu, delta2))
}

/// Per-term record in the filter report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterTerm {
    /// Binomial index m.
    pub m: i64,
    /// Evolution time 2m/N of this term.
    pub time: f64,
    /// Binomial weight 2^{-M} binom(M, M/2 - m).
    pub weight: f64,
    /// Share of the total approximation budget assigned to this term.
    pub eps_share: f64,
    /// Polynomial degree used for this term's evolution operator.
    pub degree: usize,
}

/// Everything measured while applying the filter on the MPS path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterReport {
    pub n_sites: usize,
    pub m_power: usize,
    pub y: f64,
    pub e_center: f64,
    pub epsilon_total: f64,
    pub m_cutoff: i64,
    pub terms: Vec<FilterTerm>,
    /// Sum of kept binomial weights (at most 1).
    pub weight_sum: f64,
    /// Certified bound on the weighted series remainder over kept terms.
    pub series_tail_bound: f64,
    /// Highest Chebyshev degree swept.
    pub degree: usize,
    /// ln of the pre-normalization norm ||g |p>||.
    pub pre_norm_log: f64,
    /// Measured pre-norm over the mean-field floor sqrt(N)/M^{1/4}.
    pub norm_floor_ratio: f64,
    /// Relative discarded weight accumulated over every compression.
    pub discarded_weight: f64,
    pub bond_profile: Vec<usize>,
    pub max_bond: usize,
    /// Energy mean of the filtered state.
    pub mu: f64,
    /// Energy variance of the filtered state.
    pub delta2: f64,
    pub wall_time_ms: u128,
}

/// Applies the truncated cosine filter to an MPS and measures the result.
///
/// The state must be normalized; the returned state is normalized, with
/// the pre-normalization norm recorded in the report. Filtering into a
/// spectral gap (vanishing norm) is an error.
pub fn apply_filter_mps(
    state: &MpsState,
    params: &FilterParams,
    spec: &HamiltonianSpec,
    policy: &TruncationPolicy,
) -> Result<(MpsState, FilterReport)> {
    let started = std::time::Instant::now();
    let n = spec.n_sites();
    if state.n_sites() != n {
        return Err(Error::DimensionMismatch(
            "state and Hamiltonian site counts differ".into(),
        ));
    }
    if state.is_zero() {
        return Err(Error::InvalidArgument("cannot filter the zero state".into()));
    }
    let nf = n as f64;
    if params.e_center.abs() > nf {
        return Err(Error::InvalidArgument(format!(
            "E center {} outside the spectral range [-N, N]",
            params.e_center
        )));
    }

    let weights = binomial_weights(params.m, params.y)?;
    let cutoff = params.m_cutoff();
    let n_terms = (2 * cutoff + 1) as usize;
    let eps_share = params.epsilon_total / n_terms as f64;

    // per-term series degrees and the shared maximum
    let mut terms = Vec::with_capacity(n_terms);
    let mut degree = 0usize;
    let mut tail_total = 0.0f64;
    let mut weight_sum = 0.0f64;
    for &(mm, w) in &weights {
        let a = 2.0 * mm as f64;
        let deg_m = if mm == 0 { 0 } else { chebyshev_degree(a, eps_share) };
        degree = degree.max(deg_m);
        tail_total += w * series_tail_bound(a, deg_m);
        weight_sum += w;
        terms.push(FilterTerm {
            m: mm,
            time: 2.0 * mm as f64 / nf,
            weight: w,
            eps_share,
            degree: deg_m,
        });
    }

    // Chebyshev coefficients of the whole filter in x = H/N:
    // sum_m w_m e^{-i 2m E/N} e^{i 2m x} expanded term by term.
    let mut gamma = vec![Complex64::new(0.0, 0.0); degree + 1];
    for &(mm, w) in &weights {
        if mm == 0 {
            gamma[0] += Complex64::new(w, 0.0);
            continue;
        }
        if mm < 0 {
            continue; // handled with +|m| via parity below
        }
        let a = 2.0 * mm as f64;
        let deg_m = chebyshev_degree(a, eps_share);
        let j = bessel_j_table(a, deg_m);
        let phase = Complex64::new(0.0, -a * params.e_center / nf).exp();
        for (k, &jk) in j.iter().enumerate() {
            let ik = match k % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
            let factor = if k == 0 { 1.0 } else { 2.0 };
            // +m and -m terms combined: J_k(-a) = (-1)^k J_k(a), and the
            // phase conjugates, so the pair sums to 2 Re or 2i Im parts.
            let plus = phase * ik * factor * jk;
            let minus = phase.conj()
                * ik
                * factor
                * (if k % 2 == 0 { jk } else { -jk });
            gamma[k] += Complex64::new(w, 0.0) * (plus + minus);
        }
    }

    // shared Chebyshev sweep over states
    let hbar = spec.build_mpo_affine(1.0 / nf, 0.0)?;
    let input = state.normalized();
    let mut acc = scaled_state(&input, gamma[0], policy)?;
    // running scale of everything summed into the accumulator; rounding
    // noise lives at ~eps times this
    let mut sum_scale = gamma[0].norm();
    let mut v_prev = input.clone();
    let mut v_curr = if degree >= 1 {
        input.apply_mpo(&hbar, policy)?
    } else {
        input.clone()
    };
    if degree >= 1 {
        acc = accumulate(acc, &v_curr, gamma[1], policy)?;
        sum_scale += gamma[1].norm() * v_curr.physical_norm();
    }
    for k in 2..=degree {
        let hv = v_curr.apply_mpo(&hbar, policy)?;
        let v_next = MpsState::weighted_sum(
            &[
                (Complex64::new(2.0, 0.0), &hv),
                (Complex64::new(-1.0, 0.0), &v_prev),
            ],
            policy,
        )?;
        if gamma[k].norm() > 0.0 {
            acc = accumulate(acc, &v_next, gamma[k], policy)?;
            sum_scale += gamma[k].norm() * v_next.physical_norm();
        }
        v_prev = v_curr;
        v_curr = v_next;
    }

    let Some(filtered) = acc else {
        return Err(Error::NormCollapse(f64::NEG_INFINITY));
    };
    let pre_norm_log = filtered.log_norm();
    // Collapse: norm under the hard floor, or indistinguishable from the
    // accumulation's own error level (rounding noise grows with the sweep
    // length; truncation noise is bounded by the discarded weight).
    let rel_noise = ((degree as f64 + 1.0) * 1e-15)
        .max(filtered.cumulative_discarded_weight().max(0.0).sqrt() * 1e-3);
    let noise_floor = sum_scale.max(1e-300).ln() + rel_noise.ln();
    if pre_norm_log < NORM_COLLAPSE_LOG || pre_norm_log < noise_floor {
        return Err(Error::NormCollapse(pre_norm_log));
    }

    let result = filtered.normalized();
    let h_mpo = spec.build_mpo()?;
    let mu = result.expectation(&h_mpo)?.re;
    let e2 = result.expectation_squared(&h_mpo)?.re;
    let delta2 = e2 - mu * mu;

    let bond_profile = result.bond_dims();
    let max_bond = bond_profile.iter().copied().max().unwrap_or(1);
    let floor = nf.sqrt() / (params.m as f64).powf(0.25);
    let report = FilterReport {
        n_sites: n,
        m_power: params.m,
        y: params.y,
        e_center: params.e_center,
        epsilon_total: params.epsilon_total,
        m_cutoff: cutoff,
        terms,
        weight_sum,
        series_tail_bound: tail_total,
        degree,
        pre_norm_log,
        norm_floor_ratio: pre_norm_log.exp() / floor,
        discarded_weight: result.cumulative_discarded_weight(),
        bond_profile,
        max_bond,
        mu,
        delta2,
        wall_time_ms: started.elapsed().as_millis(),
    };
    Ok((result, report))
}

fn scaled_state(
    state: &MpsState,
    weight: Complex64,
    policy: &TruncationPolicy,
) -> Result<Option<MpsState>> {
    if weight.norm() == 0.0 {
        return Ok(None);
    }
    let s = MpsState::weighted_sum(&[(weight, state)], policy)?;
    Ok(Some(s))
}

fn accumulate(
    acc: Option<MpsState>,
    state: &MpsState,
    weight: Complex64,
    policy: &TruncationPolicy,
) -> Result<Option<MpsState>> {
    match acc {
        None => scaled_state(state, weight, policy),
        Some(a) => {
            let out = MpsState::weighted_sum(
                &[(Complex64::new(1.0, 0.0), &a), (weight, state)],
                policy,
            )?;
            if out.is_zero() {
                Ok(None)
            } else {
                Ok(Some(out))
            }
        }
    }
}
