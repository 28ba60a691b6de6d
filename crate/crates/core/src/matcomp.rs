//! Nuclear-norm matrix completion by soft-impute and the nuclear-norm
//! approximate rank.
//!
//! `complete` runs singular-value soft-thresholding with the observed entries
//! re-imposed after every step. The threshold starts at `shrinkage`; each
//! time the relative Frobenius change between successive iterates drops
//! below `rel_tolerance` it is multiplied by `shrinkage_decay`, down to
//! `min_shrinkage_ratio · shrinkage`. Convergence at the floor ends the run.

use nalgebra::{DMatrix, SVD};

use crate::error::{invalid, Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSet {
    shape: (usize, usize),
    entries: Vec<(usize, usize, f64)>,
}

impl ObservedSet {
    pub fn new(shape: (usize, usize), entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = vec![false; shape.0 * shape.1];
        for &(r, c, v) in &entries {
            if r >= shape.0 {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: shape.0,
                });
            }
            if c >= shape.1 {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    len: shape.1,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("observation ({r}, {c})")));
            }
            let k = r * shape.1 + c;
            if seen[k] {
                return Err(Error::DuplicateObservation { row: r, col: c });
            }
            seen[k] = true;
        }
        Ok(Self { shape, entries })
    }

    /// Every entry of `m` observed.
    pub fn full(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push((r, c, m[(r, c)]));
            }
        }
        Self::new((rows, cols), entries)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn overwrite(&self, m: &mut DMatrix<f64>) {
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionConfig {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    /// Initial soft-threshold level. `None` uses 0.1 × the largest singular
    /// value of the warm start with observed entries filled in.
    pub shrinkage: Option<f64>,
    /// Multiplier applied to the threshold after each converged level, in (0, 1]. 1 keeps it fixed.
    pub shrinkage_decay: f64,
    /// Floor of the threshold relative to its initial level, in (0, 1].
    pub min_shrinkage_ratio: f64,
    pub warm_start: Option<DMatrix<f64>>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tolerance: 1e-4,
            shrinkage: None,
            shrinkage_decay: 0.5,
            min_shrinkage_ratio: 1e-4,
            warm_start: None,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        crate::grid::check_positive("rel_tolerance", self.rel_tolerance)?;
        if let Some(t) = self.shrinkage {
            crate::grid::check_positive("shrinkage", t)?;
        }
        if !(self.shrinkage_decay > 0.0 && self.shrinkage_decay <= 1.0) {
            return Err(invalid("shrinkage_decay", "must lie in (0, 1]"));
        }
        if !(self.min_shrinkage_ratio > 0.0 && self.min_shrinkage_ratio <= 1.0) {
            return Err(invalid("min_shrinkage_ratio", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub matrix: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Threshold in effect at the last iteration.
    pub shrinkage: f64,
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().sum()
}

/// Smallest k whose leading k singular values reach `fraction` of the
/// nuclear norm. Zero for the zero matrix.
pub fn approx_rank(m: &DMatrix<f64>, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(
            "fraction",
            format!("must lie in (0, 1], got {fraction}"),
        ));
    }
    let sv = singular_values(m);
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    let sv: Vec<f64> = sv
        .into_iter()
        .filter(|&s| s >= RANK_EPSILON * top)
        .collect();
    let total: f64 = sv.iter().sum();
    let target = fraction * total;
    let mut acc = 0.0;
    for (k, s) in sv.iter().enumerate() {
        acc += s;
        if acc >= target {
            return Ok(k + 1);
        }
    }
    Ok(sv.len())
}

/// Singular-value soft-thresholding: U · diag(max(σ − τ, 0)) · Vᵀ.
pub(crate) fn shrink(z: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let svd = SVD::new(z.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut out = DMatrix::zeros(z.nrows(), z.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let t = s - tau;
        if t > 0.0 {
            out += u.column(k) * v_t.row(k) * t;
        }
    }
    out
}

/// Soft-impute completion. Rows and columns without any observation carry
/// no information about their entries; they are excluded from the solve
/// and taken from the warm start (zeros without one).
pub fn complete(obs: &ObservedSet, cfg: &CompletionConfig) -> Result<Completion> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let (rows, cols) = obs.shape();
    let mut full = match &cfg.warm_start {
        Some(w) => {
            if w.shape() != obs.shape() {
                return Err(Error::ShapeMismatch {
                    left: w.shape(),
                    right: obs.shape(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("warm start".into()));
            }
            w.clone()
        }
        None => DMatrix::zeros(rows, cols),
    };
    obs.overwrite(&mut full);

    // compact index maps onto the rows and columns that carry observations
    let mut row_map = vec![usize::MAX; rows];
    let mut col_map = vec![usize::MAX; cols];
    for &(r, c, _) in obs.entries() {
        row_map[r] = 0;
        col_map[c] = 0;
    }
    let kept_rows = compact(&mut row_map);
    let kept_cols = compact(&mut col_map);
    let sub_obs = ObservedSet {
        shape: (kept_rows.len(), kept_cols.len()),
        entries: obs
            .entries()
            .iter()
            .map(|&(r, c, v)| (row_map[r], col_map[c], v))
            .collect(),
    };
    let z0 = DMatrix::from_fn(kept_rows.len(), kept_cols.len(), |i, j| {
        full[(kept_rows[i], kept_cols[j])]
    });
    let solved = soft_impute(&sub_obs, z0, cfg);
    for (i, &r) in kept_rows.iter().enumerate() {
        for (j, &c) in kept_cols.iter().enumerate() {
            full[(r, c)] = solved.matrix[(i, j)];
        }
    }
    Ok(Completion {
        matrix: full,
        ..solved
    })
}

/// Numbers the marked (non-MAX) slots consecutively; returns the original
/// indices in order.
fn compact(map: &mut [usize]) -> Vec<usize> {
    let mut kept = Vec::new();
    for (i, slot) in map.iter_mut().enumerate() {
        if *slot != usize::MAX {
            *slot = kept.len();
            kept.push(i);
        }
    }
    kept
}

fn soft_impute(obs: &ObservedSet, mut z: DMatrix<f64>, cfg: &CompletionConfig) -> Completion {
    let (rows, cols) = obs.shape();
    let tau0 = match cfg.shrinkage {
        Some(t) => t,
        None => 0.1 * singular_values(&z).first().copied().unwrap_or(0.0),
    };
    if tau0 == 0.0 || obs.len() == rows * cols {
        return Completion {
            matrix: z,
            converged: true,
            iterations: 0,
            shrinkage: tau0,
        };
    }
    let floor = tau0 * cfg.min_shrinkage_ratio;
    let mut tau = tau0;
    for k in 1..=cfg.max_iterations {
        let mut next = shrink(&z, tau);
        obs.overwrite(&mut next);
        let change = (&next - &z).norm() / z.norm().max(1.0);
        z = next;
        if change < cfg.rel_tolerance {
            if tau <= floor {
                return Completion {
                    matrix: z,
                    converged: true,
                    iterations: k,
                    shrinkage: tau,
                };
            }
            tau = (tau * cfg.shrinkage_decay).max(floor);
        }
    }
    Completion {
        matrix: z,
        converged: false,
        iterations: cfg.max_iterations,
        shrinkage: tau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};
    use rand_distr::StandardNormal;

    use crate::seed::Rng;

    fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn random_obs(g: &DMatrix<f64>, p: f64, rng: &mut Rng) -> ObservedSet {
        let mut entries = Vec::new();
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                if rng.random::<f64>() < p {
                    entries.push((r, c, g[(r, c)]));
                }
            }
        }
        ObservedSet::new(g.shape(), entries).unwrap()
    }

    #[test]
    fn nuclear_norm_simple_cases() {
        assert!((nuclear_norm(&DMatrix::identity(6, 6)) - 6.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 4.0]));
        assert!((nuclear_norm(&d) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn nuclear_norm_matches_eigen_oracle() {
        let mut rng = Rng::seed_from_u64(5);
        let m = gaussian(20, 7, &mut rng);
        let gram = m.transpose() * &m;
        let eig = gram.symmetric_eigen();
        let oracle: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
        assert!((nuclear_norm(&m) - oracle).abs() < 1e-8);
    }

    #[test]
    fn approx_rank_cases() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![100.0, 1.0]));
        assert_eq!(approx_rank(&d, 0.99).unwrap(), 1);
        assert_eq!(approx_rank(&DMatrix::identity(10, 10), 0.99).unwrap(), 10);
        assert_eq!(approx_rank(&DMatrix::zeros(4, 3), 0.99).unwrap(), 0);
        let mut rng = Rng::seed_from_u64(8);
        let u = gaussian(30, 1, &mut rng);
        let v = gaussian(6, 1, &mut rng);
        assert_eq!(approx_rank(&(&u * v.transpose()), 0.99).unwrap(), 1);
        let low = gaussian(30, 3, &mut rng) * gaussian(3, 6, &mut rng);
        assert_eq!(approx_rank(&low, 1.0).unwrap(), 3);
        assert!(approx_rank(&low, 0.0).is_err());
    }

    #[test]
    fn observed_set_validation() {
        assert!(ObservedSet::new((2, 2), vec![(2, 0, 1.0)]).is_err());
        assert!(ObservedSet::new((2, 2), vec![(0, 2, 1.0)]).is_err());
        assert!(matches!(
            ObservedSet::new((2, 2), vec![(0, 1, 1.0), (0, 1, 2.0)]),
            Err(Error::DuplicateObservation { row: 0, col: 1 })
        ));
        assert!(ObservedSet::new((2, 2), vec![(0, 0, f64::NAN)]).is_err());
        let empty = ObservedSet::new((2, 2), vec![]).unwrap();
        assert!(matches!(
            complete(&empty, &CompletionConfig::default()),
            Err(Error::EmptyObservations)
        ));
    }

    #[test]
    fn full_observation_is_returned_exactly() {
        let mut rng = Rng::seed_from_u64(1);
        let m = gaussian(12, 4, &mut rng);
        let out = complete(
            &ObservedSet::full(&m).unwrap(),
            &CompletionConfig::default(),
        )
        .unwrap();
        assert_eq!(out.matrix, m);
        assert!(out.converged);
    }

    #[test]
    fn zero_observations_give_zero() {
        let entries = vec![(0, 0, 0.0), (3, 1, 0.0), (5, 2, 0.0)];
        let obs = ObservedSet::new((6, 3), entries).unwrap();
        let out = complete(&obs, &CompletionConfig::default()).unwrap();
        assert_eq!(out.matrix, DMatrix::zeros(6, 3));
    }

    #[test]
    fn observed_entries_are_exact() {
        let mut rng = Rng::seed_from_u64(2);
        let g = gaussian(40, 2, &mut rng) * gaussian(2, 6, &mut rng);
        let obs = random_obs(&g, 0.6, &mut rng);
        let out = complete(&obs, &CompletionConfig::default()).unwrap();
        for &(r, c, v) in obs.entries() {
            assert_eq!(out.matrix[(r, c)], v);
        }
    }

    #[test]
    fn recovers_well_determined_low_rank() {
        let mut rng = Rng::seed_from_u64(3);
        let g = gaussian(200, 2, &mut rng) * gaussian(2, 10, &mut rng);
        let obs = random_obs(&g, 0.6, &mut rng);
        let cfg = CompletionConfig {
            rel_tolerance: 1e-7,
            max_iterations: 50_000,
            ..CompletionConfig::default()
        };
        let out = complete(&obs, &cfg).unwrap();
        assert!(out.converged);
        let rel = (&out.matrix - &g).norm() / g.norm();
        assert!(rel < 1e-2, "relative error {rel}");
    }

    #[test]
    fn ground_truth_warm_start_is_a_fixed_point() {
        let mut rng = Rng::seed_from_u64(3);
        let g = gaussian(200, 2, &mut rng) * gaussian(2, 10, &mut rng);
        let obs = random_obs(&g, 0.6, &mut rng);
        let cfg = CompletionConfig {
            rel_tolerance: 1e-7,
            max_iterations: 50_000,
            warm_start: Some(g.clone()),
            ..CompletionConfig::default()
        };
        let out = complete(&obs, &cfg).unwrap();
        let rel = (&out.matrix - &g).norm() / g.norm();
        assert!(rel < 1e-2, "relative error {rel}");
    }

    #[test]
    fn objective_is_monotone_at_fixed_threshold() {
        let mut rng = Rng::seed_from_u64(6);
        let g = gaussian(60, 3, &mut rng) * gaussian(3, 8, &mut rng);
        let obs = random_obs(&g, 0.5, &mut rng);
        let tau = 1.5;
        let objective = |l: &DMatrix<f64>| {
            let fit: f64 = obs
                .entries()
                .iter()
                .map(|&(r, c, v)| (v - l[(r, c)]).powi(2))
                .sum();
            0.5 * fit + tau * nuclear_norm(l)
        };
        let mut z = DMatrix::zeros(60, 8);
        obs.overwrite(&mut z);
        let mut prev = f64::INFINITY;
        for _ in 0..40 {
            let l = shrink(&z, tau);
            let f = objective(&l);
            assert!(f <= prev + 1e-9 * prev.abs().max(1.0), "{f} > {prev}");
            prev = f;
            z = l;
            obs.overwrite(&mut z);
        }
    }

    #[test]
    fn unobserved_rows_keep_warm_start() {
        let mut rng = Rng::seed_from_u64(9);
        let g = gaussian(20, 1, &mut rng) * gaussian(1, 5, &mut rng);
        let entries = (0..20)
            .filter(|&r| r != 7)
            .flat_map(|r| [(r, 0, g[(r, 0)]), (r, 3, g[(r, 3)])])
            .collect();
        let obs = ObservedSet::new((20, 5), entries).unwrap();
        let warm = DMatrix::from_element(20, 5, 0.25);
        let cfg = CompletionConfig {
            warm_start: Some(warm),
            ..CompletionConfig::default()
        };
        let out = complete(&obs, &cfg).unwrap().matrix;
        for c in 0..5 {
            assert_eq!(out[(7, c)], 0.25);
        }
        let plain = complete(&obs, &CompletionConfig::default()).unwrap().matrix;
        assert!(plain.row(7).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = Rng::seed_from_u64(7);
        let g = gaussian(30, 2, &mut rng) * gaussian(2, 6, &mut rng);
        let obs = random_obs(&g, 0.5, &mut rng);
        let row_perm: Vec<usize> = (0..30).map(|i| (i * 7 + 3) % 30).collect();
        let col_perm = [4, 2, 0, 5, 1, 3];
        let permuted = ObservedSet::new(
            (30, 6),
            obs.entries()
                .iter()
                .map(|&(r, c, v)| (row_perm[r], col_perm[c], v))
                .collect(),
        )
        .unwrap();
        let cfg = CompletionConfig::default();
        let a = complete(&obs, &cfg).unwrap().matrix;
        let b = complete(&permuted, &cfg).unwrap().matrix;
        for r in 0..30 {
            for c in 0..6 {
                assert!((a[(r, c)] - b[(row_perm[r], col_perm[c])]).abs() < 1e-8);
            }
        }
    }
}
