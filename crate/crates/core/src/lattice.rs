//! Random dipolar spin clusters.
//!
//! Spins are dropped one at a time into a cube so that every spin has a
//! partner within `r_max` and no pair is closer than `r_min`. The cluster is
//! then re-oriented against the quantisation axis until the couplings sum to
//! zero, mimicking the balanced sign distribution of a large 3D sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Number of candidate draws allowed per spin before giving up.
pub const MAX_CANDIDATE_DRAWS: usize = 100_000;

/// Resolution of the spherical scan used to bracket the zero of the coupling
/// sum before bisection.
const ORIENT_GRID_THETA: usize = 48;
const ORIENT_GRID_PHI: usize = 96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid graph parameters: {0}")]
    InvalidParameters(String),
    #[error(
        "could not place spin {placed} of {n_spins} after {draws} candidate draws \
         (r_min/r_max infeasible for this size?)"
    )]
    SamplingFailed {
        placed: usize,
        n_spins: usize,
        draws: usize,
    },
    #[error("no orientation with vanishing coupling sum was found")]
    NoZeroCrossing,
}

/// A cluster of spin-1/2 sites with their dipolar coupling matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SpinGraph<T> {
    positions: Vec<[T; 3]>,
    axis: [T; 3],
    /// Row-major `L x L`, symmetric with zero diagonal.
    couplings: Vec<T>,
    coupling_scale: T,
    r_min: T,
    r_max: T,
    seed: Option<u64>,
}

fn sub<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize<T: Real>(a: [T; 3]) -> [T; 3] {
    let n = dot(&a, &a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Dipolar coupling `c (3 cos^2 theta - 1) / r^3` for separation `d`.
pub fn dipolar_coupling<T: Real>(d: &[T; 3], axis: &[T; 3], scale: T) -> T {
    let r2 = dot(d, d);
    let r = r2.sqrt();
    let cos = dot(d, axis) / r;
    scale * (T::lit(3.0) * cos * cos - T::one()) / (r2 * r)
}

impl<T: Real> SpinGraph<T> {
    /// Build a graph from explicit positions, oriented along `axis`.
    pub fn from_positions(positions: Vec<[T; 3]>, axis: [T; 3], coupling_scale: T) -> Self {
        let mut g = SpinGraph {
            positions,
            axis: normalize(axis),
            couplings: Vec::new(),
            coupling_scale,
            r_min: T::zero(),
            r_max: T::zero(),
            seed: None,
        };
        if g.positions.len() > 1 {
            let (lo, hi) = g.distance_range();
            g.r_min = lo;
            g.r_max = hi;
        }
        g.recompute_couplings();
        g
    }

    fn recompute_couplings(&mut self) {
        let n = self.positions.len();
        self.couplings = vec![T::zero(); n * n];
        for k in 0..n {
            for l in (k + 1)..n {
                let d = sub(&self.positions[l], &self.positions[k]);
                let j = dipolar_coupling(&d, &self.axis, self.coupling_scale);
                self.couplings[k * n + l] = j;
                self.couplings[l * n + k] = j;
            }
        }
    }

    fn distance_range(&self) -> (T, T) {
        let mut lo = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
        let mut hi = T::zero();
        for (k, l) in self.pair_indices() {
            let d = self.distance(k, l);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    pub fn n_spins(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[T; 3]] {
        &self.positions
    }

    pub fn axis(&self) -> [T; 3] {
        self.axis
    }

    pub fn coupling_scale(&self) -> T {
        self.coupling_scale
    }

    pub fn r_min(&self) -> T {
        self.r_min
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    #[inline]
    pub fn coupling(&self, k: usize, l: usize) -> T {
        self.couplings[k * self.n_spins() + l]
    }

    /// Row-major coupling matrix.
    pub fn coupling_matrix(&self) -> &[T] {
        &self.couplings
    }

    pub fn distance(&self, k: usize, l: usize) -> T {
        let d = sub(&self.positions[l], &self.positions[k]);
        dot(&d, &d).sqrt()
    }

    /// All `(k, l)` with `k < l`.
    pub fn pair_indices(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n_spins();
        (0..n).flat_map(move |k| ((k + 1)..n).map(move |l| (k, l)))
    }

    /// `(k, l, J_kl)` for `k < l`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.pair_indices().map(move |(k, l)| (k, l, self.coupling(k, l)))
    }

    /// Sum of `J_kl` over `k < l` if the graph were oriented along `axis`.
    pub fn coupling_sum_along(&self, axis: &[T; 3]) -> T {
        let axis = normalize(*axis);
        self.pair_indices().fold(T::zero(), |acc, (k, l)| {
            let d = sub(&self.positions[l], &self.positions[k]);
            acc + dipolar_coupling(&d, &axis, self.coupling_scale)
        })
    }

    /// Sum of `|J_kl|` over `k < l` for the current orientation.
    pub fn coupling_abs_sum(&self) -> T {
        self.pairs().fold(T::zero(), |acc, (_, _, j)| acc + j.abs())
    }

    pub fn stats(&self) -> CouplingStats<T> {
        coupling_stats(self)
    }

    /// Median `|J_kl|` over all pairs.
    pub fn median_coupling(&self) -> T {
        self.stats().median_abs
    }

    /// Copy with `coupling_scale` chosen so that the median `|J_kl|` is one.
    /// Simulation times are then in units of the inverse median coupling.
    pub fn with_unit_median(&self) -> Self {
        let med = self.median_coupling();
        let mut g = self.clone();
        if med > T::zero() {
            g.coupling_scale /= med;
            g.recompute_couplings();
        }
        g
    }

    /// Copy oriented along a new axis; positions are untouched.
    pub fn with_axis(&self, axis: [T; 3]) -> Self {
        let mut g = self.clone();
        g.axis = normalize(axis);
        g.recompute_couplings();
        g
    }
}

/// Summary statistics of the coupling matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingStats<T> {
    pub median_abs: T,
    pub max_abs: T,
    pub sum: T,
}

pub fn coupling_stats<T: Real>(graph: &SpinGraph<T>) -> CouplingStats<T> {
    let mut mags: Vec<T> = graph.pairs().map(|(_, _, j)| j.abs()).collect();
    let sum = graph.pairs().fold(T::zero(), |acc, (_, _, j)| acc + j);
    if mags.is_empty() {
        return CouplingStats {
            median_abs: T::zero(),
            max_abs: T::zero(),
            sum,
        };
    }
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = mags.len();
    let median_abs = if m % 2 == 1 {
        mags[m / 2]
    } else {
        (mags[m / 2 - 1] + mags[m / 2]) * T::lit(0.5)
    };
    CouplingStats {
        median_abs,
        max_abs: mags[m - 1],
        sum,
    }
}

/// Draw a random cluster of `n_spins` sites.
///
/// The cube side is `n_spins^(1/3) * r_max`. Each new spin must sit at least
/// `r_min` from every placed spin and within `r_max` of at least one of them,
/// which guarantees both constraints for the finished graph. The result is
/// oriented along `+z` and not yet balanced; see [`orient_graph`].
pub fn sample_graph<T: Real>(
    n_spins: usize,
    r_min: T,
    r_max: T,
    seed: u64,
) -> Result<SpinGraph<T>, LatticeError> {
    if n_spins < 2 {
        return Err(LatticeError::InvalidParameters(format!(
            "n_spins must be at least 2, got {n_spins}"
        )));
    }
    if !(r_min > T::zero()) || !(r_max > r_min) {
        return Err(LatticeError::InvalidParameters(format!(
            "need 0 < r_min < r_max, got r_min={r_min}, r_max={r_max}"
        )));
    }
    let side = (n_spins as f64).cbrt() * r_max.as_f64();
    let r_min2 = r_min * r_min;
    let r_max2 = r_max * r_max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> [T; 3] {
        [
            T::lit(rng.gen::<f64>() * side),
            T::lit(rng.gen::<f64>() * side),
            T::lit(rng.gen::<f64>() * side),
        ]
    };

    let mut positions = Vec::with_capacity(n_spins);
    positions.push(draw(&mut rng));
    while positions.len() < n_spins {
        let mut accepted = None;
        for _ in 0..MAX_CANDIDATE_DRAWS {
            let cand = draw(&mut rng);
            let mut too_close = false;
            let mut has_neighbor = false;
            for p in &positions {
                let d = sub(&cand, p);
                let d2 = dot(&d, &d);
                if d2 < r_min2 {
                    too_close = true;
                    break;
                }
                if d2 <= r_max2 {
                    has_neighbor = true;
                }
            }
            if !too_close && has_neighbor {
                accepted = Some(cand);
                break;
            }
        }
        match accepted {
            Some(p) => positions.push(p),
            None => {
                return Err(LatticeError::SamplingFailed {
                    placed: positions.len(),
                    n_spins,
                    draws: MAX_CANDIDATE_DRAWS,
                })
            }
        }
    }

    let mut g = SpinGraph {
        positions,
        axis: [T::zero(), T::zero(), T::one()],
        couplings: Vec::new(),
        coupling_scale: T::one(),
        r_min,
        r_max,
        seed: Some(seed),
    };
    g.recompute_couplings();
    Ok(g)
}

fn spherical<T: Real>(theta: f64, phi: f64) -> [T; 3] {
    [
        T::lit(theta.sin() * phi.cos()),
        T::lit(theta.sin() * phi.sin()),
        T::lit(theta.cos()),
    ]
}

/// Rotate the quantisation axis until `sum_{k<l} J_kl = 0`.
///
/// The coupling sum is a continuous function of the axis. Starting from the
/// current axis, the closest point of a spherical grid with the opposite sign
/// is located and the great-circle arc between the two is bisected. A graph
/// that is already balanced is returned unchanged, so the operation is
/// idempotent.
pub fn orient_graph<T: Real>(graph: &SpinGraph<T>) -> Result<SpinGraph<T>, LatticeError> {
    if graph.n_spins() < 2 {
        return Err(LatticeError::InvalidParameters(
            "orientation needs at least two spins".into(),
        ));
    }
    let scale = graph.coupling_abs_sum();
    let tol = T::tol_floor(1e-13) * scale;
    let a = graph.axis;
    let sa = graph.coupling_sum_along(&a);
    if sa.abs() <= tol {
        return Ok(graph.clone());
    }

    // Closest grid point (by angle, folding antipodes) with opposite sign.
    let mut best: Option<([T; 3], T)> = None;
    for i in 0..ORIENT_GRID_THETA {
        let theta = (i as f64 + 0.5) * std::f64::consts::PI / ORIENT_GRID_THETA as f64;
        for j in 0..ORIENT_GRID_PHI {
            let phi = j as f64 * 2.0 * std::f64::consts::PI / ORIENT_GRID_PHI as f64;
            let mut b: [T; 3] = spherical(theta, phi);
            let s = graph.coupling_sum_along(&b);
            if s * sa >= T::zero() {
                continue;
            }
            let mut c = dot(&a, &b);
            if c < T::zero() {
                b = [-b[0], -b[1], -b[2]];
                c = -c;
            }
            if best.as_ref().map_or(true, |(_, bc)| c > *bc) {
                best = Some((b, c));
            }
        }
    }
    let (b, _) = best.ok_or(LatticeError::NoZeroCrossing)?;

    let point = |t: T| -> [T; 3] {
        let u = T::one() - t;
        normalize([u * a[0] + t * b[0], u * a[1] + t * b[1], u * a[2] + t * b[2]])
    };
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut axis = b;
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        let p = point(mid);
        let s = graph.coupling_sum_along(&p);
        axis = p;
        if s.abs() <= tol || hi - lo <= T::default_epsilon() {
            break;
        }
        if s * sa > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(graph.with_axis(axis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_graph_respects_distance_constraints() {
        let g: SpinGraph<f64> = sample_graph(15, 0.9, 1.1, 7).unwrap();
        assert_eq!(g.n_spins(), 15);
        for k in 0..15 {
            let mut nearest = f64::MAX;
            for l in 0..15 {
                if l != k {
                    let d = g.distance(k, l);
                    assert!(d >= 0.9, "pair ({k},{l}) too close: {d}");
                    nearest = nearest.min(d);
                }
            }
            assert!(nearest <= 1.1, "spin {k} isolated: nearest {nearest}");
        }
        assert_eq!(g.axis(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn two_spin_graph_distance_in_window() {
        let g: SpinGraph<f64> = sample_graph(2, 0.9, 1.1, 0).unwrap();
        let d = g.distance(0, 1);
        assert!((0.9..=1.1).contains(&d));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let err = sample_graph::<f64>(15, 1.1, 0.9, 1).unwrap_err();
        assert!(matches!(err, LatticeError::InvalidParameters(_)));
        assert!(sample_graph::<f64>(1, 0.9, 1.1, 1).is_err());
    }

    #[test]
    fn infeasible_density_reports_failure() {
        // A window this thin around a point forces endless rejections.
        let err = sample_graph::<f64>(40, 0.999_999, 1.0, 3).unwrap_err();
        assert!(matches!(err, LatticeError::SamplingFailed { .. }), "{err:?}");
    }

    #[test]
    fn same_seed_same_positions() {
        let a: SpinGraph<f64> = sample_graph(12, 0.9, 1.1, 99).unwrap();
        let b: SpinGraph<f64> = sample_graph(12, 0.9, 1.1, 99).unwrap();
        assert_eq!(a.positions(), b.positions());
        let c: SpinGraph<f64> = sample_graph(12, 0.9, 1.1, 100).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn closed_form_two_spin_couplings() {
        let par: SpinGraph<f64> = SpinGraph::from_positions(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]], [0.0, 0.0, 1.0], 1.0);
        let s = coupling_stats(&par);
        assert!((par.coupling(0, 1) - 2.0).abs() < 1e-15);
        assert!((s.median_abs - 2.0).abs() < 1e-15);
        let perp: SpinGraph<f64> = SpinGraph::from_positions(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], [0.0, 0.0, 1.0], 1.0);
        assert!((perp.coupling(0, 1) + 1.0).abs() < 1e-15);
        assert_eq!(perp.coupling(0, 1), perp.coupling(1, 0));
    }

    #[test]
    fn orientation_balances_coupling_sum() {
        let g: SpinGraph<f64> = sample_graph(15, 0.9, 1.1, 7).unwrap();
        let o = orient_graph(&g).unwrap();
        let s = o.stats();
        assert!(s.sum.abs() / o.coupling_abs_sum() < 1e-9, "{}", s.sum);
        assert_eq!(o.positions(), g.positions());
    }

    #[test]
    fn magic_angle_pair_is_left_alone() {
        let t = (1.0f64 / 3.0).sqrt().acos();
        let g = SpinGraph::from_positions(vec![[0.0, 0.0, 0.0], [t.sin(), 0.0, t.cos()]], [0.0, 0.0, 1.0], 1.0);
        assert!(g.stats().sum.abs() < 1e-12);
        let o = orient_graph(&g).unwrap();
        let ax = o.axis();
        assert!((ax[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orientation_is_idempotent() {
        let g: SpinGraph<f64> = sample_graph(8, 0.9, 1.1, 21).unwrap();
        let once = orient_graph(&g).unwrap();
        let twice = orient_graph(&once).unwrap();
        let c = dot(&once.axis(), &twice.axis()).min(1.0);
        assert!(c.acos() < 1e-9);
    }

    #[test]
    fn collinear_cluster_still_orients() {
        let g: SpinGraph<f64> = SpinGraph::from_positions(
            vec![[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 2.0]],
            [0.0, 0.0, 1.0],
            1.0,
        );
        let o = orient_graph(&g).unwrap();
        assert!(o.stats().sum.abs() < 1e-9 * g.coupling_abs_sum());
    }

    #[test]
    fn single_precision_sampling_works() {
        let g: SpinGraph<f32> = sample_graph(6, 0.9, 1.1, 5).unwrap();
        let o = orient_graph(&g).unwrap();
        assert!(o.stats().sum.abs() / o.coupling_abs_sum() < 1e-4);
    }

    #[test]
    fn unit_median_rescaling() {
        let g: SpinGraph<f64> = orient_graph(&sample_graph(10, 0.9, 1.1, 4).unwrap()).unwrap();
        let u = g.with_unit_median();
        assert!((u.median_coupling() - 1.0).abs() < 1e-12);
        assert!(u.stats().sum.abs() < 1e-9 * u.coupling_abs_sum());
    }

    #[test]
    fn graph_serialises_round_trip() {
        let g: SpinGraph<f64> = sample_graph(5, 0.9, 1.1, 2).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: SpinGraph<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
