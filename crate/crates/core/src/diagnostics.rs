//! Scaling studies: parameter sweeps over (model, M, policy, seed) cells,
//! power-law exponent fits, and entanglement-vs-bond reports.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{apply_filter_mps, FilterParams};
use crate::hamiltonian::{HamiltonianSpec, DENSE_SITE_LIMIT};
use crate::mps::MpsState;
use crate::oracle::{berry_esseen_error, diagonalize, exact_filtered_moments};
use crate::tensor::TruncationPolicy;

/// Least-squares power-law fit in log-log space.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Fits y = prefactor * x^exponent by ordinary least squares on logs.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(
            "power-law fit needs equal-length inputs".into(),
        ));
    }
    if xs.len() < 4 {
        return Err(Error::InvalidArgument(
            "power-law fit needs at least 4 points".into(),
        ));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "power-law fit needs strictly positive values".into(),
        ));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "power-law fit needs at least two distinct x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let pred = intercept + slope * x;
            (y - pred) * (y - pred)
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(ScalingFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        n_points: xs.len(),
    })
}

/// How the Chernoff radius is chosen per cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YRule {
    Auto,
    Fixed(f64),
}

/// Which pipeline legs a sweep runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Dense,
    Mps,
    Both,
}

/// Initial state per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Plus,
    Zero,
    /// Seeded Haar-like random product state.
    RandomProduct,
}

impl StateKind {
    pub fn build(&self, n: usize, seed: u64) -> Result<MpsState> {
        match self {
            StateKind::Plus => MpsState::all_plus(n),
            StateKind::Zero => MpsState::all_zero(n),
            StateKind::RandomProduct => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let locals: Vec<Vec<Complex64>> = (0..n)
                    .map(|_| {
                        let v = vec![
                            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        ];
                        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        v.into_iter().map(|z| z / nrm).collect()
                    })
                    .collect();
                MpsState::product_state(&locals)
            }
        }
    }
}

/// Grid description of a sweep; cells are the cartesian product of
/// models, filter powers, policies and seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPlan {
    pub models: Vec<HamiltonianSpec>,
    pub m_grid: Vec<usize>,
    pub y_rule: YRule,
    pub policies: Vec<TruncationPolicy>,
    pub seeds: Vec<u64>,
    pub state: StateKind,
    pub mode: SweepMode,
    pub epsilon_total: f64,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.m_grid.is_empty() || self.policies.is_empty() || self.seeds.is_empty() {
            return Err(Error::EmptyInput("sweep plan grids must be nonempty".into()));
        }
        if !(self.epsilon_total > 0.0 && self.epsilon_total <= 1.0) {
            return Err(Error::InvalidArgument(
                "sweep epsilon_total must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One sweep cell's results; `ok = false` rows carry the error text and
/// leave the measurement fields empty.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub model: String,
    pub n_sites: usize,
    pub m_power: usize,
    pub y: f64,
    pub max_bond_cap: Option<usize>,
    pub threshold: f64,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub e_center: Option<f64>,
    pub sigma2_initial: Option<f64>,
    pub mu_dense: Option<f64>,
    pub delta2_dense: Option<f64>,
    pub zeta: Option<f64>,
    pub mu_mps: Option<f64>,
    pub delta2_mps: Option<f64>,
    pub pre_norm_log: Option<f64>,
    pub max_bond: Option<usize>,
    pub s1_mid: Option<f64>,
    pub s2_mid: Option<f64>,
    pub discarded_weight: Option<f64>,
    pub wall_ms: u128,
}

/// Sweep result table (rows ordered by cell index).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn n_ok(&self) -> usize {
        self.rows.iter().filter(|r| r.ok).count()
    }

    /// CSV rendering with `# key: value` provenance headers.
    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(
            "index,model,n_sites,m_power,y,max_bond_cap,threshold,seed,ok,error,\
             e_center,sigma2_initial,mu_dense,delta2_dense,zeta,mu_mps,delta2_mps,\
             pre_norm_log,max_bond,s1_mid,s2_mid,discarded_weight,wall_ms\n",
        );
        let fmt_opt = |v: &Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.12e},{},{:.3e},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.index,
                r.model,
                r.n_sites,
                r.m_power,
                r.y,
                r.max_bond_cap.map(|b| b.to_string()).unwrap_or_default(),
                r.threshold,
                r.seed,
                r.ok,
                r.error.clone().unwrap_or_default().replace(',', ";"),
                fmt_opt(&r.e_center),
                fmt_opt(&r.sigma2_initial),
                fmt_opt(&r.mu_dense),
                fmt_opt(&r.delta2_dense),
                fmt_opt(&r.zeta),
                fmt_opt(&r.mu_mps),
                fmt_opt(&r.delta2_mps),
                fmt_opt(&r.pre_norm_log),
                r.max_bond.map(|b| b.to_string()).unwrap_or_default(),
                fmt_opt(&r.s1_mid),
                fmt_opt(&r.s2_mid),
                fmt_opt(&r.discarded_weight),
                r.wall_ms,
            ));
        }
        out
    }
}

struct Cell {
    index: usize,
    spec: HamiltonianSpec,
    m_power: usize,
    policy: TruncationPolicy,
    seed: u64,
}

/// Runs every cell of the plan; cells execute in parallel and failures
/// are recorded per row without aborting the sweep.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepTable> {
    plan.validate()?;
    let mut cells = Vec::new();
    let mut index = 0usize;
    for spec in &plan.models {
        for &m_power in &plan.m_grid {
            for policy in &plan.policies {
                for &seed in &plan.seeds {
                    cells.push(Cell {
                        index,
                        spec: spec.clone(),
                        m_power,
                        policy: *policy,
                        seed,
                    });
                    index += 1;
                }
            }
        }
    }
    let mut rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|cell| run_cell(plan, cell))
        .collect();
    rows.sort_by_key(|r| r.index);
    Ok(SweepTable { rows })
}

fn run_cell(plan: &SweepPlan, cell: &Cell) -> SweepRow {
    let started = std::time::Instant::now();
    let n = cell.spec.n_sites();
    let y = match plan.y_rule {
        YRule::Auto => FilterParams::auto_y(cell.m_power),
        YRule::Fixed(v) => v,
    };
    let mut row = SweepRow {
        index: cell.index,
        model: cell.spec.model().name().to_string(),
        n_sites: n,
        m_power: cell.m_power,
        y,
        max_bond_cap: cell.policy.max_bond,
        threshold: cell.policy.svd_threshold,
        seed: cell.seed,
        ok: false,
        error: None,
        e_center: None,
        sigma2_initial: None,
        mu_dense: None,
        delta2_dense: None,
        zeta: None,
        mu_mps: None,
        delta2_mps: None,
        pre_norm_log: None,
        max_bond: None,
        s1_mid: None,
        s2_mid: None,
        discarded_weight: None,
        wall_ms: 0,
    };
    let outcome = (|| -> Result<()> {
        let state = plan.state.build(n, cell.seed)?;
        let h_mpo = cell.spec.build_mpo()?;
        let e_center = state.expectation(&h_mpo)?.re;
        let e2 = state.expectation_squared(&h_mpo)?.re;
        row.e_center = Some(e_center);
        row.sigma2_initial = Some(e2 - e_center * e_center);
        let params = FilterParams::new(cell.m_power, y, e_center, plan.epsilon_total)?;

        if plan.mode != SweepMode::Mps && n <= DENSE_SITE_LIMIT {
            let data = diagonalize(&cell.spec, &state)?;
            let (zeta, _) = berry_esseen_error(&data)?;
            let (mu, delta2, _) = exact_filtered_moments(&data, &params)?;
            row.zeta = Some(zeta);
            row.mu_dense = Some(mu);
            row.delta2_dense = Some(delta2);
        }
        if plan.mode != SweepMode::Dense {
            let (filtered, report) = apply_filter_mps(&state, &params, &cell.spec, &cell.policy)?;
            row.mu_mps = Some(report.mu);
            row.delta2_mps = Some(report.delta2);
            row.pre_norm_log = Some(report.pre_norm_log);
            row.max_bond = Some(report.max_bond);
            row.discarded_weight = Some(report.discarded_weight);
            if n >= 2 {
                let mid = (n - 1) / 2;
                row.s1_mid = Some(filtered.renyi_entropy(mid, 1.0)?);
                row.s2_mid = Some(filtered.renyi_entropy(mid, 2.0)?);
            }
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => row.ok = true,
        Err(e) => row.error = Some(e.to_string()),
    }
    row.wall_ms = started.elapsed().as_millis();
    row
}

/// Per-cut entanglement against the bond-dimension ceiling.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyBondRow {
    pub cut: usize,
    pub bond: usize,
    pub s1: f64,
    pub s2: f64,
    pub log_bond: f64,
    /// log(bond) - S1; nonnegative up to rounding.
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyBondReport {
    pub rows: Vec<EntropyBondRow>,
    pub max_s1: f64,
    pub min_slack: f64,
}

/// Evaluates S1, S2 and log(bond) at every cut of the state.
pub fn entropy_vs_bond_report(state: &MpsState) -> Result<EntropyBondReport> {
    let spectra = state.schmidt_spectra()?;
    let bonds = state.bond_dims();
    let mut rows = Vec::with_capacity(spectra.len());
    let mut max_s1 = 0.0f64;
    let mut min_slack = f64::INFINITY;
    for (cut, (spectrum, &bond)) in spectra.iter().zip(&bonds).enumerate() {
        let s1 = crate::mps::renyi_from_spectrum(spectrum, 1.0);
        let s2 = crate::mps::renyi_from_spectrum(spectrum, 2.0);
        let log_bond = (bond as f64).ln();
        let slack = log_bond - s1;
        max_s1 = max_s1.max(s1);
        min_slack = min_slack.min(slack);
        rows.push(EntropyBondRow {
            cut,
            bond,
            s1,
            s2,
            log_bond,
            slack,
        });
    }
    Ok(EntropyBondReport {
        rows,
        max_s1,
        min_slack,
    })
}
