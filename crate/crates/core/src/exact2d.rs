//! Exact stability machinery for two scoring attributes.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dominates, exchange_angle_2d, roi_to_angle_interval_2d, AngleInterval};
use crate::model::{Dataset, Ranking, RegionOfInterest, WeightVector};
use crate::scalar::Scalar;

/// Why a ranking cannot be produced by any scoring function in scope.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Infeasibility {
    /// `below` outranks `above` under every scoring function.
    Dominated { above: String, below: String },
    /// Adjacent-pair bounds cross; no scoring function yields the ranking.
    EmptyRegion,
    /// The ranking region lies entirely outside the region of interest.
    OutsideRoi,
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Infeasibility::Dominated { above, below } => {
                write!(f, "`{below}` outranks `{above}` under every scoring function")
            }
            Infeasibility::EmptyRegion => f.write_str("the ranking region is empty"),
            Infeasibility::OutsideRoi => f.write_str("the ranking region does not meet the region of interest"),
        }
    }
}

/// Result of a stability verification.
#[derive(Clone, Debug, PartialEq)]
pub enum Verified<V> {
    Feasible(V),
    Infeasible(Infeasibility),
}

impl<V> Verified<V> {
    pub fn feasible(self) -> Option<V> {
        match self {
            Verified::Feasible(v) => Some(v),
            Verified::Infeasible(_) => None,
        }
    }
}

/// The region of a 2D ranking and its stability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Region2d<T> {
    pub interval: AngleInterval<T>,
    /// Width relative to the region of interest (the quadrant if none given).
    pub stability: T,
    /// Width relative to the whole quadrant.
    pub quadrant_stability: T,
}

fn check_2d<T: Scalar>(dataset: &Dataset<T>) -> Result<()> {
    if dataset.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: dataset.dim() });
    }
    Ok(())
}

/// Angle interval of `ranking` and its stability, optionally inside `roi`.
pub fn verify_2d<T: Scalar>(
    dataset: &Dataset<T>,
    ranking: &Ranking,
    roi: Option<&RegionOfInterest<T>>,
) -> Result<Verified<Region2d<T>>> {
    check_2d(dataset)?;
    let order = dataset.permutation_of(&ranking.order)?;
    let mut lo = T::zero();
    let mut hi = T::FRAC_PI_2();
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (t, u) = (dataset.attrs(a), dataset.attrs(b));
        let reversed_tie = t == u && dataset.id_rank(a) > dataset.id_rank(b);
        if dominates(u, t) || reversed_tie {
            return Ok(Verified::Infeasible(Infeasibility::Dominated {
                above: dataset.id(a).to_owned(),
                below: dataset.id(b).to_owned(),
            }));
        }
        let Some(angle) = exchange_angle_2d(t, u) else { continue };
        if t[0] < u[0] {
            lo = lo.max(angle);
        } else {
            hi = hi.min(angle);
        }
        if lo >= hi {
            return Ok(Verified::Infeasible(Infeasibility::EmptyRegion));
        }
    }
    let scope = match roi {
        Some(r) => roi_to_angle_interval_2d(r)?,
        None => AngleInterval::quadrant(),
    };
    let (lo, hi) = (lo.max(scope.lo), hi.min(scope.hi));
    if hi <= lo {
        return Ok(Verified::Infeasible(Infeasibility::OutsideRoi));
    }
    Ok(Verified::Feasible(Region2d {
        interval: AngleInterval { lo, hi },
        stability: (hi - lo) / scope.width(),
        quadrant_stability: (hi - lo) / T::FRAC_PI_2(),
    }))
}

/// Ranking regions of an angle range, most stable first.
///
/// Stored compactly: the sorted region boundaries plus a permutation of
/// region indices by decreasing width.
#[derive(Clone, Debug)]
pub struct RegionHeap<T> {
    scope: AngleInterval<T>,
    bounds: Vec<T>,
    order: Vec<u32>,
    cursor: usize,
}

impl<T: Scalar> RegionHeap<T> {
    /// Number of regions in total, including those already popped.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.cursor
    }

    pub fn scope(&self) -> AngleInterval<T> {
        self.scope
    }

    /// Region `i` in angular order.
    pub fn interval(&self, i: usize) -> AngleInterval<T> {
        AngleInterval { lo: self.bounds[i], hi: self.bounds[i + 1] }
    }

    /// All regions in angular order.
    pub fn intervals(&self) -> impl Iterator<Item = AngleInterval<T>> + '_ {
        (0..self.len()).map(|i| self.interval(i))
    }

    pub fn stability_of(&self, interval: &AngleInterval<T>) -> T {
        interval.width() / self.scope.width()
    }

    /// Next most stable region without ranking it.
    pub fn pop_interval(&mut self) -> Option<AngleInterval<T>> {
        let i = *self.order.get(self.cursor)? as usize;
        self.cursor += 1;
        Some(self.interval(i))
    }

    pub fn peek_interval(&self) -> Option<AngleInterval<T>> {
        self.order.get(self.cursor).map(|&i| self.interval(i as usize))
    }
}

#[derive(Clone, Copy, Debug)]
struct Event<T> {
    angle: T,
    upper: u32,
    lower: u32,
}

impl<T: Scalar> PartialEq for Event<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Event<T> {}

impl<T: Scalar> PartialOrd for Event<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Event<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.angle
            .partial_cmp(&other.angle)
            .unwrap_or(Ordering::Equal)
            .then(self.upper.cmp(&other.upper))
            .then(self.lower.cmp(&other.lower))
    }
}

struct Sweep<'a, T> {
    dataset: &'a Dataset<T>,
    order: Vec<u32>,
    pos: Vec<u32>,
    events: BinaryHeap<Reverse<Event<T>>>,
    end: T,
    eps: T,
}

impl<'a, T: Scalar> Sweep<'a, T> {
    fn score(&self, i: u32, angle: T) -> T {
        let t = self.dataset.attrs(i as usize);
        let (s, c) = angle.sin_cos();
        t[0] * c + t[1] * s
    }

    /// Rate of change of the score in the angle.
    fn slope(&self, i: u32, angle: T) -> T {
        let t = self.dataset.attrs(i as usize);
        let (s, c) = angle.sin_cos();
        t[1] * c - t[0] * s
    }

    /// Order just after `angle` among items that tie at `angle`.
    fn tie_order(&self, a: u32, b: u32, angle: T) -> Ordering {
        self.slope(b, angle)
            .partial_cmp(&self.slope(a, angle))
            .unwrap_or(Ordering::Equal)
            .then(self.dataset.id_rank(a as usize).cmp(&self.dataset.id_rank(b as usize)))
    }

    fn tied(&self, a: u32, b: u32, angle: T) -> bool {
        (self.score(a, angle) - self.score(b, angle)).abs() <= self.eps
    }

    /// Queue the exchange of the adjacent pair at `upper_pos` if it lies ahead.
    fn push_pair(&mut self, upper_pos: usize, after: T) {
        if upper_pos + 1 >= self.order.len() {
            return;
        }
        let (upper, lower) = (self.order[upper_pos], self.order[upper_pos + 1]);
        let (t, u) = (self.dataset.attrs(upper as usize), self.dataset.attrs(lower as usize));
        if let Some(angle) = exchange_angle_2d(t, u) {
            if angle > after + self.eps && angle < self.end - self.eps {
                self.events.push(Reverse(Event { angle, upper, lower }));
            }
        }
    }

    /// Re-sort the run of items tied with position `p` at `angle`;
    /// returns the run as a half-open position range.
    fn resolve_run(&mut self, p: usize, angle: T) -> (usize, usize) {
        let mut s = p;
        while s > 0 && self.tied(self.order[s - 1], self.order[s], angle) {
            s -= 1;
        }
        let mut e = p + 1;
        while e < self.order.len() && self.tied(self.order[e - 1], self.order[e], angle) {
            e += 1;
        }
        let mut run = self.order[s..e].to_vec();
        run.sort_by(|&a, &b| self.tie_order(a, b, angle));
        for (k, &item) in run.iter().enumerate() {
            self.order[s + k] = item;
            self.pos[item as usize] = (s + k) as u32;
        }
        (s, e)
    }
}

/// Sweep a ray across `interval` and collect every ranking region in it.
pub fn ray_sweep<T: Scalar>(dataset: &Dataset<T>, interval: AngleInterval<T>) -> Result<RegionHeap<T>> {
    check_2d(dataset)?;
    let eps = T::geom_eps();
    let (start, end) = (interval.lo, interval.hi);
    let n = dataset.len();
    let mut sweep =
        Sweep { dataset, order: (0..n as u32).collect(), pos: vec![0; n], events: BinaryHeap::new(), end, eps };

    let scores: Vec<T> = (0..n as u32).map(|i| sweep.score(i, start)).collect();
    let mut order = std::mem::take(&mut sweep.order);
    order.sort_by(|&a, &b| scores[b as usize].partial_cmp(&scores[a as usize]).unwrap_or(Ordering::Equal));
    // Settle near-ties by the order they take just after the start angle.
    let mut s = 0;
    while s < n {
        let mut e = s + 1;
        while e < n && (scores[order[e - 1] as usize] - scores[order[e] as usize]).abs() <= eps {
            e += 1;
        }
        if e - s > 1 {
            order[s..e].sort_by(|&a, &b| sweep.tie_order(a, b, start));
        }
        s = e;
    }
    sweep.order = order;
    for (p, &i) in sweep.order.iter().enumerate() {
        sweep.pos[i as usize] = p as u32;
    }
    for p in 0..n.saturating_sub(1) {
        sweep.push_pair(p, start);
    }

    let mut bounds = vec![start];
    let mut block: Vec<Event<T>> = Vec::new();
    while let Some(Reverse(first)) = sweep.events.pop() {
        block.clear();
        block.push(first);
        while let Some(Reverse(next)) = sweep.events.peek() {
            if next.angle > first.angle + eps {
                break;
            }
            block.push(*next);
            sweep.events.pop();
        }
        block.retain(|ev| sweep.pos[ev.lower as usize] == sweep.pos[ev.upper as usize] + 1);
        if block.is_empty() {
            continue;
        }
        let angle = first.angle;
        if angle - *bounds.last().expect("nonempty") > eps {
            bounds.push(angle);
        }
        let mut runs: Vec<(usize, usize)> = Vec::with_capacity(block.len());
        for ev in &block {
            let p = sweep.pos[ev.upper as usize] as usize;
            if runs.iter().any(|&(s, e)| p >= s && p < e) {
                continue;
            }
            runs.push(sweep.resolve_run(p, angle));
        }
        for (s, e) in runs {
            for p in s.saturating_sub(1)..e {
                sweep.push_pair(p, angle);
            }
        }
    }
    bounds.push(end);

    let regions = bounds.len() - 1;
    if regions > u32::MAX as usize {
        return Err(Error::InvalidArgument("too many regions".into()));
    }
    let mut order: Vec<u32> = (0..regions as u32).collect();
    order.sort_by(|&a, &b| {
        let wa = bounds[a as usize + 1] - bounds[a as usize];
        let wb = bounds[b as usize + 1] - bounds[b as usize];
        wb.partial_cmp(&wa).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    Ok(RegionHeap { scope: interval, bounds, order, cursor: 0 })
}

/// Ray sweep over the angle range of a 2D region of interest.
pub fn ray_sweep_roi<T: Scalar>(dataset: &Dataset<T>, roi: &RegionOfInterest<T>) -> Result<RegionHeap<T>> {
    ray_sweep(dataset, roi_to_angle_interval_2d(roi)?)
}

/// A region produced by [`get_next_2d`].
#[derive(Clone, Debug, PartialEq)]
pub struct Next2d<T> {
    pub ranking: Ranking,
    pub stability: T,
    pub interval: AngleInterval<T>,
    /// Weight vector at the middle of the interval.
    pub weights: WeightVector<T>,
}

/// Pop the most stable remaining region and rank at its middle angle.
pub fn get_next_2d<T: Scalar>(heap: &mut RegionHeap<T>, dataset: &Dataset<T>) -> Option<Next2d<T>> {
    let interval = heap.pop_interval()?;
    let (s, c) = interval.mid().sin_cos();
    let weights = WeightVector::from_unchecked(vec![c, s]);
    let ranking = Ranking::from_indices(dataset, &dataset.rank_indices(weights.as_slice()));
    Some(Next2d { ranking, stability: heap.stability_of(&interval), interval, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{ids, toy};
    use crate::model::{generate_synthetic, rank, Item, SyntheticMode};
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use std::collections::HashSet;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn ranking(ids: &[&str]) -> Ranking {
        Ranking { order: ids.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn verify_toy_ranking() {
        let ds = toy::<f64>();
        let r = verify_2d(&ds, &ranking(&["t2", "t4", "t3", "t5", "t1"]), None).unwrap().feasible().unwrap();
        assert!((r.interval.lo - 0.7378).abs() < 1e-3);
        assert!((r.interval.hi - 0.8761).abs() < 1e-3);
        assert!((r.stability - 0.0880).abs() < 1e-3);
        assert_eq!(r.stability, r.quadrant_stability);
    }

    #[test]
    fn verify_with_roi() {
        let ds = toy::<f64>();
        let roi = RegionOfInterest::constraints(
            2,
            vec![
                crate::Constraint::new(vec![-(0.7f64.sin()), 0.7f64.cos()], crate::Relation::Ge),
                crate::Constraint::new(vec![0.9f64.sin(), -(0.9f64.cos())], crate::Relation::Ge),
            ],
        )
        .unwrap();
        let r = verify_2d(&ds, &ranking(&["t2", "t4", "t3", "t5", "t1"]), Some(&roi)).unwrap().feasible().unwrap();
        assert!((r.stability - 0.6915).abs() < 1e-3);
        assert!((r.quadrant_stability - 0.0880).abs() < 1e-3);
        let far = verify_2d(&ds, &ranking(&["t2", "t4", "t1", "t3", "t5"]), Some(&roi)).unwrap();
        assert_eq!(far, Verified::Infeasible(Infeasibility::OutsideRoi));
    }

    #[test]
    fn verify_dominated_pairs() {
        let ds = Dataset::<f64>::from_rows(&[("a", &[0.9, 0.9]), ("b", &[0.1, 0.1])]).unwrap();
        let bad = verify_2d(&ds, &ranking(&["b", "a"]), None).unwrap();
        assert_eq!(bad, Verified::Infeasible(Infeasibility::Dominated { above: "b".into(), below: "a".into() }));
        let good = verify_2d(&ds, &ranking(&["a", "b"]), None).unwrap().feasible().unwrap();
        assert_eq!(good.stability, 1.0);
        assert_eq!((good.interval.lo, good.interval.hi), (0.0, FRAC_PI_2));
    }

    #[test]
    fn verify_equal_items_follow_ids() {
        let ds = Dataset::<f64>::from_rows(&[("a", &[0.5, 0.5]), ("b", &[0.5, 0.5])]).unwrap();
        assert!(verify_2d(&ds, &ranking(&["a", "b"]), None).unwrap().feasible().is_some());
        assert!(verify_2d(&ds, &ranking(&["b", "a"]), None).unwrap().feasible().is_none());
    }

    #[test]
    fn verify_crossing_bounds() {
        let ds = toy::<f64>();
        // t1 above t3 needs a small angle, t5 above t4 needs a large one.
        let r = verify_2d(&ds, &ranking(&["t1", "t3", "t5", "t4", "t2"]), None).unwrap();
        assert_eq!(r, Verified::Infeasible(Infeasibility::EmptyRegion));
    }

    #[test]
    fn verify_rejects_bad_input() {
        let ds = toy::<f64>();
        assert!(matches!(verify_2d(&ds, &ranking(&["t2", "t4", "t3", "t5"]), None), Err(Error::InvalidArgument(_))));
        let ds3 = Dataset::<f64>::from_rows(&[("a", &[0.1, 0.2, 0.3])]).unwrap();
        assert!(matches!(verify_2d(&ds3, &ranking(&["a"]), None), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn toy_sweep_has_eleven_regions() {
        let ds = toy::<f64>();
        let heap = ray_sweep(&ds, AngleInterval::quadrant()).unwrap();
        assert_eq!(heap.len(), 11);
        let total: f64 = heap.intervals().map(|i| i.width()).sum();
        assert!((total - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn toy_get_next_sequence() {
        let ds = toy::<f64>();
        let mut heap = ray_sweep(&ds, AngleInterval::quadrant()).unwrap();
        let first = get_next_2d(&mut heap, &ds).unwrap();
        assert_eq!(ids(&first.ranking), ["t2", "t4", "t1", "t3", "t5"]);
        assert!((first.stability - 0.3948).abs() < 1e-3);
        assert!((first.interval.hi - 0.6202).abs() < 1e-3);
        let second = get_next_2d(&mut heap, &ds).unwrap();
        assert!((second.stability - 0.1444).abs() < 1e-3);
        assert!((second.interval.lo - 1.3439).abs() < 1e-3);
        let third = get_next_2d(&mut heap, &ds).unwrap();
        assert!((third.stability - 0.1015).abs() < 1e-3);
        for _ in 3..11 {
            assert!(get_next_2d(&mut heap, &ds).is_some());
        }
        assert!(get_next_2d(&mut heap, &ds).is_none());
    }

    #[test]
    fn single_item_sweep() {
        let ds = Dataset::<f64>::from_rows(&[("t1", &[0.3, 0.4])]).unwrap();
        let mut heap = ray_sweep(&ds, AngleInterval::new(FRAC_PI_4, std::f64::consts::FRAC_PI_3).unwrap()).unwrap();
        let r = get_next_2d(&mut heap, &ds).unwrap();
        assert_eq!(r.stability, 1.0);
        assert!(get_next_2d(&mut heap, &ds).is_none());
    }

    #[test]
    fn coincident_exchanges_form_one_step() {
        // Three collinear items all exchange at pi/4; a fourth is equal to one of them.
        let ds = Dataset::<f64>::from_rows(&[
            ("a", &[0.8, 0.2]),
            ("b", &[0.5, 0.5]),
            ("c", &[0.2, 0.8]),
            ("d", &[0.5, 0.5]),
        ])
        .unwrap();
        let mut heap = ray_sweep(&ds, AngleInterval::quadrant()).unwrap();
        assert_eq!(heap.len(), 2);
        let mut got: Vec<Next2d<f64>> = (0..2).map(|_| get_next_2d(&mut heap, &ds).unwrap()).collect();
        got.sort_by(|a, b| a.interval.lo.total_cmp(&b.interval.lo));
        assert_eq!(ids(&got[0].ranking), ["a", "b", "d", "c"]);
        assert_eq!(ids(&got[1].ranking), ["c", "b", "d", "a"]);
        assert!((got[0].stability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn f32_sweep() {
        let ds = toy::<f32>();
        let mut heap = ray_sweep(&ds, AngleInterval::quadrant()).unwrap();
        assert_eq!(heap.len(), 11);
        let first = get_next_2d(&mut heap, &ds).unwrap();
        assert!((first.stability - 0.3948).abs() < 1e-3);
    }

    fn grid_rankings(ds: &Dataset<f64>, lo: f64, hi: f64, points: usize) -> HashSet<Vec<usize>> {
        (0..points)
            .map(|k| {
                let a = lo + (hi - lo) * (k as f64 + 0.5) / points as f64;
                ds.rank_indices(&[a.cos(), a.sin()])
            })
            .collect()
    }

    #[test]
    fn matches_grid_oracle_on_synthetic_data() {
        for seed in 0..5 {
            let ds = generate_synthetic::<f64>(20, 2, SyntheticMode::AntiCorrelated, seed).unwrap();
            let mut heap = ray_sweep(&ds, AngleInterval::quadrant()).unwrap();
            let mut found = HashSet::new();
            while let Some(r) = get_next_2d(&mut heap, &ds) {
                found.insert(ds.permutation_of(&r.ranking.order).unwrap());
            }
            assert_eq!(found, grid_rankings(&ds, 0.0, FRAC_PI_2, 1_000_000));
        }
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset<f64>> {
        proptest::collection::vec((0u8..6, 0u8..6), 1..12).prop_map(|rows| {
            // Coarse values produce many ties, collinear triples and duplicates.
            let items = rows
                .into_iter()
                .enumerate()
                .map(|(i, (a, b))| Item::new(format!("i{i:02}"), vec![a as f64 / 5.0, b as f64 / 5.0]))
                .collect();
            Dataset::from_items(items).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sweep_partition_and_consistency(ds in arb_dataset(), lo in 0.0f64..0.7, width in 0.05f64..0.85) {
            let scope = AngleInterval::new(lo, lo + width).unwrap();
            let roi = RegionOfInterest::constraints(
                2,
                vec![
                    crate::Constraint::new(vec![-scope.lo.sin(), scope.lo.cos()], crate::Relation::Ge),
                    crate::Constraint::new(vec![scope.hi.sin(), -scope.hi.cos()], crate::Relation::Ge),
                ],
            ).unwrap();
            let mut heap = ray_sweep(&ds, scope).unwrap();
            let mut total = 0.0;
            let mut last = f64::INFINITY;
            let mut seen = HashSet::new();
            let mut intervals = Vec::new();
            let mut rng = RngStream::new(1);
            while let Some(r) = get_next_2d(&mut heap, &ds) {
                prop_assert!(r.stability <= last + 1e-15);
                last = r.stability;
                total += r.interval.width();
                prop_assert!(seen.insert(r.ranking.clone()));
                intervals.push(r.interval);
                let v = verify_2d(&ds, &r.ranking, Some(&roi)).unwrap().feasible().unwrap();
                prop_assert!((v.interval.lo - r.interval.lo).abs() < 1e-9);
                prop_assert!((v.interval.hi - r.interval.hi).abs() < 1e-9);
                prop_assert!((v.stability - r.stability).abs() < 1e-9);
                for _ in 0..100 {
                    let a = r.interval.lo + rng.uniform() * r.interval.width();
                    let w = WeightVector::from_f64(&[a.cos(), a.sin()]).unwrap();
                    let got = rank(&ds, &w).unwrap();
                    // Points within rounding of an exchange angle may tie differently.
                    let margin = (a - r.interval.lo).min(r.interval.hi - a);
                    if margin > 1e-9 {
                        prop_assert_eq!(&got, &r.ranking);
                    }
                }
            }
            prop_assert!((total - width).abs() < 1e-9);
            intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            for w in intervals.windows(2) {
                prop_assert!((w[0].hi - w[1].lo).abs() < 1e-15);
            }
        }
    }
}
