//! Laplacian spectrum of a Kronecker product graph, estimated from the
//! normalized-Laplacian spectra of its factors.
//!
//! For factors `G_1..G_n` with normalized-Laplacian eigenpairs
//! `(lambda_k^i, v_k^i)` and ascending degree lists `d^i`, each multi-index
//! `(k_1..k_n)` gives an estimated eigenpair of `L(G_1 x ... x G_n)`:
//!
//! ```text
//! mu  = [1 - prod_i (1 - lambda_{k_i}^i)] * prod_i d_{k_i}^i
//! v   = v_{k_1}^1 (x) ... (x) v_{k_n}^n
//! ```
//!
//! The k-th smallest eigenvalue is paired with the k-th smallest degree. The
//! estimate is exact when every factor is regular.
//!
//! Joint states are flattened in mixed radix with the first factor most
//! significant, the same order the Kronecker product uses:
//! `((s_1 * |S_2| + s_2) * |S_3| + s_3) ...`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::KronError;
use crate::graph::{normalized_laplacian, FactorGraph};
use crate::linalg::{kron_vectors, sym_eig, Spectrum};

/// Flat index of a joint state.
pub type JointIndex = u64;

pub const DEFAULT_TIE_TOL: f64 = 1e-9;
pub const DEFAULT_JOINT_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KronConfig {
    /// Tolerance for eigenvalue ties and for extremum ties.
    pub tie_tol: f64,
    /// Largest joint vector or index set that may be materialized.
    pub joint_cap: usize,
}

impl Default for KronConfig {
    fn default() -> Self {
        Self {
            tie_tol: DEFAULT_TIE_TOL,
            joint_cap: DEFAULT_JOINT_CAP,
        }
    }
}

/// Normalized-Laplacian spectra and ascending degree lists of the factors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpectrumSet {
    spectra: Vec<Spectrum>,
    sorted_degrees: Vec<Vec<f64>>,
}

impl FactorSpectrumSet {
    pub fn from_graphs(graphs: &[FactorGraph]) -> Result<Self, KronError> {
        let mut spectra = Vec::with_capacity(graphs.len());
        let mut degrees = Vec::with_capacity(graphs.len());
        for g in graphs {
            spectra.push(sym_eig(&normalized_laplacian(g)?)?);
            let mut d: Vec<f64> = g.degrees().into_iter().map(|d| d as f64).collect();
            d.sort_by(f64::total_cmp);
            degrees.push(d);
        }
        Self::from_parts(spectra, degrees)
    }

    /// Builds a set from explicit spectra (e.g. closed forms) and degree
    /// lists. Degrees must ascend and match the spectrum sizes.
    pub fn from_parts(spectra: Vec<Spectrum>, sorted_degrees: Vec<Vec<f64>>) -> Result<Self, KronError> {
        if spectra.len() != sorted_degrees.len() {
            return Err(KronError::InvalidFactors(format!(
                "{} spectra but {} degree lists",
                spectra.len(),
                sorted_degrees.len()
            )));
        }
        if spectra.is_empty() {
            return Err(KronError::InvalidFactors("no factors".into()));
        }
        for (i, (s, d)) in spectra.iter().zip(&sorted_degrees).enumerate() {
            if s.len() != d.len() || s.is_empty() {
                return Err(KronError::InvalidFactors(format!(
                    "factor {i}: {} eigenpairs but {} degrees",
                    s.len(),
                    d.len()
                )));
            }
            if d.windows(2).any(|w| w[0] > w[1]) {
                return Err(KronError::InvalidFactors(format!(
                    "factor {i}: degrees are not ascending"
                )));
            }
        }
        Ok(Self {
            spectra,
            sorted_degrees,
        })
    }

    pub fn n_factors(&self) -> usize {
        self.spectra.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spectra.iter().map(Spectrum::len).collect()
    }

    pub fn spectrum(&self, i: usize) -> &Spectrum {
        &self.spectra[i]
    }

    pub fn sorted_degrees(&self, i: usize) -> &[f64] {
        &self.sorted_degrees[i]
    }

    pub fn joint_size(&self) -> u128 {
        self.spectra.iter().map(|s| s.len() as u128).product()
    }

    /// Estimated eigenvalue for a 0-based multi-index. Factor eigenvalues
    /// are clamped to `[0, 2]`, the range of a normalized Laplacian, so
    /// rounding noise cannot push the estimate below zero.
    pub fn mu(&self, k: &[usize]) -> f64 {
        let mut prod_shift = 1.0;
        let mut prod_deg = 1.0;
        for (i, &ki) in k.iter().enumerate() {
            prod_shift *= 1.0 - self.spectra[i].values[ki].clamp(0.0, 2.0);
            prod_deg *= self.sorted_degrees[i][ki];
        }
        (1.0 - prod_shift) * prod_deg
    }
}

/// One estimated joint eigenpair, identified by its 1-based multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEigenCandidate {
    pub mu: f64,
    pub multi_index: Vec<usize>,
}

impl JointEigenCandidate {
    pub fn zero_based(&self) -> Vec<usize> {
        self.multi_index.iter().map(|k| k - 1).collect()
    }
}

/// Iterates 0-based multi-indices in lexicographic (mixed radix) order.
struct MultiIndexIter<'a> {
    dims: &'a [usize],
    cur: Vec<usize>,
    done: bool,
}

impl<'a> MultiIndexIter<'a> {
    fn new(dims: &'a [usize]) -> Self {
        Self {
            dims,
            cur: vec![0; dims.len()],
            done: dims.contains(&0),
        }
    }
}

impl Iterator for MultiIndexIter<'_> {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let mut i = self.dims.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.cur[i] += 1;
            if self.cur[i] < self.dims[i] {
                break;
            }
            self.cur[i] = 0;
        }
        Some(out)
    }
}

fn check_cap(size: u128, cap: usize) -> Result<(), KronError> {
    if size > cap as u128 {
        Err(KronError::Overflow { size, cap })
    } else {
        Ok(())
    }
}

/// Every estimated joint eigenpair, ascending by `mu`. Runs of `mu` values
/// within the tie tolerance are ordered by multi-index.
pub fn estimate_joint_spectrum(
    fs: &FactorSpectrumSet,
    cfg: &KronConfig,
) -> Result<Vec<JointEigenCandidate>, KronError> {
    check_cap(fs.joint_size(), cfg.joint_cap)?;
    let dims = fs.dims();
    let mut out: Vec<JointEigenCandidate> = MultiIndexIter::new(&dims)
        .map(|k| JointEigenCandidate {
            mu: fs.mu(&k),
            multi_index: k.iter().map(|x| x + 1).collect(),
        })
        .collect();
    out.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let mut start = 0;
    while start < out.len() {
        let mut end = start + 1;
        while end < out.len() && out[end].mu - out[end - 1].mu <= cfg.tie_tol {
            end += 1;
        }
        out[start..end].sort_by(|a, b| a.multi_index.cmp(&b.multi_index));
        start = end;
    }
    Ok(out)
}

/// Materializes `v_{k_1} (x) ... (x) v_{k_n}`.
pub fn candidate_vector(
    fs: &FactorSpectrumSet,
    c: &JointEigenCandidate,
    cfg: &KronConfig,
) -> Result<Vec<f64>, KronError> {
    check_cap(fs.joint_size(), cfg.joint_cap)?;
    let k = validate_candidate(fs, c)?;
    let parts: Vec<&[f64]> = k.iter().enumerate().map(|(i, &ki)| fs.spectrum(i).vector(ki)).collect();
    Ok(kron_vectors(&parts))
}

fn validate_candidate(fs: &FactorSpectrumSet, c: &JointEigenCandidate) -> Result<Vec<usize>, KronError> {
    let dims = fs.dims();
    if c.multi_index.len() != dims.len() {
        return Err(KronError::InvalidFactors(format!(
            "multi-index has {} entries for {} factors",
            c.multi_index.len(),
            dims.len()
        )));
    }
    for (&k, &d) in c.multi_index.iter().zip(&dims) {
        if k == 0 || k > d {
            return Err(KronError::IndexOutOfRange { index: k, dim: d });
        }
    }
    Ok(c.zero_based())
}

/// Candidates tied with the second entry of the ascending candidate list.
///
/// When the trivial pair `(1, .., 1)` sits alone at the bottom this is the
/// usual Fiedler index. When other candidates share its estimated value (as
/// happens for bipartite factors) all of them are returned, the trivial one
/// included.
pub fn estimate_joint_fiedler(fs: &FactorSpectrumSet, cfg: &KronConfig) -> Result<Vec<JointEigenCandidate>, KronError> {
    let dims = fs.dims();
    let allowed: Vec<Vec<usize>> = dims.iter().map(|&d| (0..d).collect()).collect();
    tie_set_at_rank(fs, &allowed, 2, cfg)
}

/// Fiedler estimate restricted to informative factor modes.
///
/// Factor eigenpairs with `lambda` at 0 or 2 (the degree profile and, on a
/// bipartite factor, its alternating mirror) are dropped, and the tie set at
/// the smallest remaining `mu` is returned. A factor with no other modes keeps
/// all of its modes.
pub fn estimate_joint_fiedler_nontrivial(
    fs: &FactorSpectrumSet,
    cfg: &KronConfig,
) -> Result<Vec<JointEigenCandidate>, KronError> {
    let allowed: Vec<Vec<usize>> = (0..fs.n_factors())
        .map(|i| {
            let vals = &fs.spectrum(i).values;
            let inner: Vec<usize> = (0..vals.len())
                .filter(|&k| vals[k] > cfg.tie_tol && vals[k] < 2.0 - cfg.tie_tol)
                .collect();
            if inner.is_empty() {
                (0..vals.len()).collect()
            } else {
                inner
            }
        })
        .collect();
    tie_set_at_rank(fs, &allowed, 1, cfg)
}

/// All candidates (drawn from `allowed` modes) whose `mu` lies within the tie
/// tolerance of the `rank`-th smallest value, counted with multiplicity.
fn tie_set_at_rank(
    fs: &FactorSpectrumSet,
    allowed: &[Vec<usize>],
    rank: usize,
    cfg: &KronConfig,
) -> Result<Vec<JointEigenCandidate>, KronError> {
    let sizes: Vec<usize> = allowed.iter().map(Vec::len).collect();
    let map = |idx: &[usize]| -> Vec<usize> { idx.iter().enumerate().map(|(i, &j)| allowed[i][j]).collect() };

    // pass 1: smallest `rank` values and the overall spread
    let mut smallest: Vec<f64> = Vec::with_capacity(rank + 1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut count = 0usize;
    for idx in MultiIndexIter::new(&sizes) {
        let mu = fs.mu(&map(&idx));
        count += 1;
        lo = lo.min(mu);
        hi = hi.max(mu);
        let pos = smallest.partition_point(|&x| x <= mu);
        if pos < rank {
            smallest.insert(pos, mu);
            smallest.truncate(rank);
        }
    }
    if count < rank || hi - lo <= cfg.tie_tol {
        return Err(KronError::Degenerate);
    }
    let target = smallest[rank - 1];

    // pass 2: collect the tie set in multi-index order
    let mut out = Vec::new();
    for idx in MultiIndexIter::new(&sizes) {
        let k = map(&idx);
        let mu = fs.mu(&k);
        if (mu - target).abs() <= cfg.tie_tol {
            if out.len() >= cfg.joint_cap {
                return Err(KronError::Overflow {
                    size: count as u128,
                    cap: cfg.joint_cap,
                });
            }
            out.push(JointEigenCandidate {
                mu,
                multi_index: k.iter().map(|x| x + 1).collect(),
            });
        }
    }
    Ok(out)
}

/// Mixed-radix flattening of per-factor indices.
pub fn joint_index(per_agent: &[usize], dims: &[usize]) -> Result<JointIndex, KronError> {
    if per_agent.len() != dims.len() {
        return Err(KronError::InvalidFactors(format!(
            "{} indices for {} dimensions",
            per_agent.len(),
            dims.len()
        )));
    }
    let mut flat: JointIndex = 0;
    for (&s, &d) in per_agent.iter().zip(dims) {
        if s >= d {
            return Err(KronError::IndexOutOfRange { index: s, dim: d });
        }
        flat = flat
            .checked_mul(d as JointIndex)
            .and_then(|f| f.checked_add(s as JointIndex))
            .ok_or(KronError::Overflow {
                size: dims.iter().map(|&d| d as u128).product(),
                cap: usize::MAX,
            })?;
    }
    Ok(flat)
}

/// Inverse of [`joint_index`].
pub fn decompose_index(flat: JointIndex, dims: &[usize]) -> Result<Vec<usize>, KronError> {
    let total: u128 = dims.iter().map(|&d| d as u128).product();
    if flat as u128 >= total {
        return Err(KronError::IndexOutOfRange {
            index: flat as usize,
            dim: total.min(usize::MAX as u128) as usize,
        });
    }
    let mut rest = flat;
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = (rest % d as JointIndex) as usize;
        rest /= d as JointIndex;
    }
    Ok(out)
}

/// Joint states at the minimum and maximum of a candidate vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Extrema {
    /// Flat indices, ascending.
    pub min: Vec<JointIndex>,
    pub max: Vec<JointIndex>,
}

/// Minimum and maximum entries of a Kronecker candidate vector, found from
/// the factor vectors alone.
///
/// The extremes of a product of factor entries are reached by picking, in
/// each factor, either its largest or its smallest entry, so only `2^n` sign
/// patterns are scored. Each pattern that attains an extreme is expanded to
/// every joint state whose factor entries sit within tolerance of the
/// pattern's values, and those states are kept when their exact product is
/// within `tol` of the extreme.
pub fn kron_extrema(
    fs: &FactorSpectrumSet,
    c: &JointEigenCandidate,
    tol: f64,
    joint_cap: usize,
) -> Result<Extrema, KronError> {
    let k = validate_candidate(fs, c)?;
    let dims = fs.dims();
    let vecs: Vec<&[f64]> = k.iter().enumerate().map(|(i, &ki)| fs.spectrum(i).vector(ki)).collect();
    let n = vecs.len();
    let bounds: Vec<[f64; 2]> = vecs
        .iter()
        .map(|v| {
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            [hi, lo]
        })
        .collect();

    let patterns: Vec<(Vec<f64>, f64)> = (0..1usize << n)
        .map(|mask| {
            let vals: Vec<f64> = (0..n).map(|i| bounds[i][(mask >> i) & 1]).collect();
            let prod = vals.iter().product();
            (vals, prod)
        })
        .collect();
    let best = patterns.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let worst = patterns.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);

    let expand = |target: f64| -> Result<Vec<JointIndex>, KronError> {
        let mut found = BTreeSet::new();
        for (vals, prod) in &patterns {
            if (prod - target).abs() > tol {
                continue;
            }
            let mut per_factor: Vec<Vec<usize>> = Vec::with_capacity(n);
            for i in 0..n {
                let rest: f64 = (0..n).filter(|&j| j != i).map(|j| vals[j].abs()).product();
                let window = if rest > 0.0 { 2.0 * tol / rest } else { f64::INFINITY };
                per_factor.push(
                    (0..dims[i])
                        .filter(|&s| (vecs[i][s] - vals[i]).abs() <= window)
                        .collect(),
                );
            }
            let combos: u128 = per_factor.iter().map(|p| p.len() as u128).product();
            check_cap(combos, joint_cap)?;
            let sizes: Vec<usize> = per_factor.iter().map(Vec::len).collect();
            for idx in MultiIndexIter::new(&sizes) {
                let state: Vec<usize> = idx.iter().enumerate().map(|(i, &j)| per_factor[i][j]).collect();
                let value: f64 = state.iter().enumerate().map(|(i, &s)| vecs[i][s]).product();
                if (value - target).abs() <= tol {
                    found.insert(joint_index(&state, &dims)?);
                }
            }
        }
        check_cap(found.len() as u128, joint_cap)?;
        Ok(found.into_iter().collect())
    };

    Ok(Extrema {
        min: expand(worst)?,
        max: expand(best)?,
    })
}

/// CSV with header `mu,k_1,..,k_n`.
pub fn candidates_to_csv(cands: &[JointEigenCandidate]) -> String {
    let n = cands.first().map_or(0, |c| c.multi_index.len());
    let mut s = String::from("mu");
    for i in 1..=n {
        let _ = write!(s, ",k_{i}");
    }
    s.push('\n');
    for c in cands {
        let _ = write!(s, "{}", c.mu);
        for k in &c.multi_index {
            let _ = write!(s, ",{k}");
        }
        s.push('\n');
    }
    s
}
