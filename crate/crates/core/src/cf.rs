//! User-based collaborative filtering: Pearson weights, mean-centered
//! weighted-average prediction with mergeable accumulators, and RMSE.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::dataset::{ItemId, PointId, RatingMatrix, RatingScale, UserRatings};
use crate::error::{Error, Result};
use crate::num::Scalar;

pub const DEFAULT_MIN_OVERLAP: usize = 2;

/// Pearson correlation over the co-rated items of `a` and `b`.
///
/// Returns 0 when fewer than `min_overlap` items are shared or either
/// side has zero variance on them. Clamped to `[-1, 1]`.
pub fn pearson<T: Scalar>(a: &BTreeMap<ItemId, T>, b: &BTreeMap<ItemId, T>, min_overlap: usize) -> T {
    let (small, large, swapped) = if a.len() <= b.len() {
        (a, b, false)
    } else {
        (b, a, true)
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (item, x) in small {
        if let Some(y) = large.get(item) {
            xs.push(*x);
            ys.push(*y);
        }
    }
    if swapped {
        std::mem::swap(&mut xs, &mut ys);
    }
    let n = xs.len();
    if n < min_overlap.max(1) {
        return T::zero();
    }
    let nf = T::of(n as f64);
    let mx = xs.iter().copied().sum::<T>() / nf;
    let my = ys.iter().copied().sum::<T>() / nf;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (*x - mx, *y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return T::zero();
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    r.max(-T::one()).min(T::one())
}

/// An active user's known ratings and the items to predict.
#[derive(Clone, Debug, PartialEq)]
pub struct CfRequest {
    pub known: UserRatings,
    pub targets: Vec<ItemId>,
}

impl CfRequest {
    pub fn new(known: UserRatings, mut targets: Vec<ItemId>) -> Result<Self> {
        if known.is_empty() {
            return Err(Error::Invalid("CF request needs at least one known rating".into()));
        }
        targets.sort_unstable();
        targets.dedup();
        if let Some(t) = targets.iter().find(|t| known.contains_key(t)) {
            return Err(Error::Invalid(format!("target item {t} is also a known rating")));
        }
        Ok(CfRequest { known, targets })
    }

    pub fn active_mean(&self) -> f64 {
        mean(&self.known)
    }
}

pub(crate) fn mean(ratings: &UserRatings) -> f64 {
    if ratings.is_empty() {
        0.0
    } else {
        ratings.values().sum::<f64>() / ratings.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfConfig {
    pub min_overlap: usize,
    /// Mean-centered (Resnick) prediction; `false` gives the raw weighted
    /// average of neighbor ratings.
    pub centered: bool,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig {
            min_overlap: DEFAULT_MIN_OVERLAP,
            centered: true,
        }
    }
}

/// Weighted-sum and weight-mass accumulators for one target item.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accum {
    pub weighted_sum: f64,
    pub mass: f64,
}

impl Accum {
    pub fn add(&mut self, other: Accum) {
        self.weighted_sum += other.weighted_sum;
        self.mass += other.mass;
    }
}

/// Per-target deltas contributed by one neighbor.
pub type Contribution = BTreeMap<ItemId, Accum>;

/// Deltas `(w·(r − mean), |w|)` for each target the neighbor has rated.
pub fn predict_contribution(
    request: &CfRequest,
    neighbor: &UserRatings,
    neighbor_mean: f64,
    weight: f64,
    cfg: &CfConfig,
) -> Contribution {
    let mut out = Contribution::new();
    if weight == 0.0 {
        return out;
    }
    let center = if cfg.centered { neighbor_mean } else { 0.0 };
    for t in &request.targets {
        if let Some(r) = neighbor.get(t) {
            out.insert(
                *t,
                Accum {
                    weighted_sum: weight * (r - center),
                    mass: weight.abs(),
                },
            );
        }
    }
    out
}

/// Weight and contribution of one neighbor whose ratings are `neighbor`.
pub fn neighbor_contribution(request: &CfRequest, neighbor: &UserRatings, cfg: &CfConfig) -> (f64, Contribution) {
    let w = pearson(&request.known, neighbor, cfg.min_overlap);
    (w, predict_contribution(request, neighbor, mean(neighbor), w, cfg))
}

/// Mergeable partial prediction state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CfResult {
    pub accums: BTreeMap<ItemId, Accum>,
}

impl CfResult {
    pub fn new(request: &CfRequest) -> Self {
        CfResult {
            accums: request.targets.iter().map(|t| (*t, Accum::default())).collect(),
        }
    }

    pub fn add(&mut self, contribution: &Contribution) {
        for (item, a) in contribution {
            self.accums.entry(*item).or_default().add(*a);
        }
    }

    pub fn merge(&mut self, other: &CfResult) {
        for (item, a) in &other.accums {
            self.accums.entry(*item).or_default().add(*a);
        }
    }

    /// `active_mean + sum/mass` (or `sum/mass` uncentered), falling back
    /// to the active mean when no neighbor rated the item; clamped.
    pub fn finalize(&self, active_mean: f64, scale: RatingScale, cfg: &CfConfig) -> BTreeMap<ItemId, f64> {
        self.accums
            .iter()
            .map(|(item, a)| {
                let p = if a.mass > 0.0 {
                    let base = if cfg.centered { active_mean } else { 0.0 };
                    base + a.weighted_sum / a.mass
                } else {
                    active_mean
                };
                (*item, scale.clamp(p))
            })
            .collect()
    }
}

/// Exhaustive prediction over every user of `matrix`.
pub fn process_exact(request: &CfRequest, matrix: &RatingMatrix, cfg: &CfConfig) -> CfResult {
    let mut result = CfResult::new(request);
    for (_, ratings) in matrix.users() {
        let (_, c) = neighbor_contribution(request, ratings, cfg);
        result.add(&c);
    }
    result
}

/// Root mean squared error of `predictions` over `actuals`.
pub fn rmse<T: Scalar>(predictions: &[T], actuals: &[T]) -> Result<T> {
    if predictions.len() != actuals.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} test ratings",
            predictions.len(),
            actuals.len()
        )));
    }
    if actuals.is_empty() {
        return Err(Error::Invalid("empty test set".into()));
    }
    let sq: T = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (*p - *a) * (*p - *a))
        .sum();
    Ok((sq / T::of(actuals.len() as f64)).sqrt())
}

/// RMSE of keyed predictions over a test set; a missing prediction is an error.
pub fn rmse_test_set(predictions: &BTreeMap<(PointId, ItemId), f64>, test: &[TestRating]) -> Result<f64> {
    let mut p = Vec::with_capacity(test.len());
    for t in test {
        p.push(
            *predictions
                .get(&(t.user, t.item))
                .ok_or_else(|| Error::Invalid(format!("no prediction for user {} item {}", t.user, t.item)))?,
        );
    }
    let a: Vec<f64> = test.iter().map(|t| t.rating).collect();
    rmse(&p, &a)
}

/// Relative RMSE increase in percent, floored at 0. With an exact RMSE of
/// 0 the loss is 0 when the approximate RMSE is also 0, else 100.
pub fn accuracy_loss_cf(rmse_approx: f64, rmse_exact: f64) -> f64 {
    if rmse_exact == 0.0 {
        return if rmse_approx == 0.0 { 0.0 } else { 100.0 };
    }
    (100.0 * (rmse_approx - rmse_exact) / rmse_exact).max(0.0)
}

/// Held-out rating: `user_id,item_id,actual_rating`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestRating {
    pub user: PointId,
    pub item: ItemId,
    pub rating: f64,
}

pub fn parse_test_set(reader: impl Read, origin: &Path) -> Result<Vec<TestRating>> {
    let rows = crate::dataset::parse_rating_rows(reader, origin, "user_id,item_id,actual_rating")?;
    Ok(rows
        .into_iter()
        .map(|(user, item, rating)| TestRating { user, item, rating })
        .collect())
}

pub fn test_set_to_csv(test: &[TestRating]) -> String {
    let mut out = String::from("user_id,item_id,actual_rating\n");
    for t in test {
        let _ = writeln!(out, "{},{},{}", t.user, t.item, t.rating);
    }
    out
}

/// CF request file: `request_id,item_id,rating` rows of known ratings;
/// targets come from the test set rows whose user id is the request id.
pub fn parse_requests(reader: impl Read, origin: &Path, test: &[TestRating]) -> Result<Vec<(PointId, CfRequest)>> {
    let rows = crate::dataset::parse_rating_rows(reader, origin, "request_id,item_id,rating")?;
    let mut known: BTreeMap<PointId, UserRatings> = BTreeMap::new();
    for (rid, item, r) in rows {
        if known.entry(rid).or_default().insert(item, r).is_some() {
            return Err(Error::Duplicate(format!("request {rid} rates item {item} twice")));
        }
    }
    let mut targets: BTreeMap<PointId, Vec<ItemId>> = BTreeMap::new();
    for t in test {
        targets.entry(t.user).or_default().push(t.item);
    }
    known
        .into_iter()
        .map(|(rid, k)| Ok((rid, CfRequest::new(k, targets.remove(&rid).unwrap_or_default())?)))
        .collect()
}

pub fn requests_to_csv(requests: &[(PointId, CfRequest)]) -> String {
    let mut out = String::from("request_id,item_id,rating\n");
    for (rid, req) in requests {
        for (item, r) in &req.known {
            let _ = writeln!(out, "{rid},{item},{r}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(ItemId, f64)]) -> BTreeMap<ItemId, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn pearson_examples() {
        let a = map(&[(1, 1.0), (2, 3.0), (3, 5.0)]);
        assert!((pearson(&a, &a, 2) - 1.0f64).abs() < 1e-12);
        let b = map(&[(1, 3.0), (2, 2.0), (3, 1.0)]);
        let c = map(&[(1, 1.0), (2, 2.0), (3, 3.0)]);
        assert!((pearson(&c, &b, 2) + 1.0f64).abs() < 1e-12);

        // (4,5,3,2) vs (3,4,2,2): 8 / sqrt(5 * 2.75)
        let a = map(&[(1, 4.0), (2, 5.0), (3, 3.0), (4, 2.0)]);
        let b = map(&[(1, 3.0), (2, 4.0), (3, 2.0), (4, 2.0)]);
        let expected = 3.5 / (5.0f64 * 2.75).sqrt();
        assert!((pearson(&a, &b, 2) - expected).abs() < 1e-12);
    }

    #[test]
    fn pearson_degenerate_cases() {
        let a = map(&[(1, 4.0), (2, 5.0)]);
        assert_eq!(pearson(&a, &map(&[(1, 4.0)]), 2), 0.0);
        assert_eq!(pearson(&a, &map(&[(1, 3.0), (2, 3.0)]), 2), 0.0);
        assert_eq!(pearson(&a, &map(&[(7, 3.0), (8, 3.0)]), 2), 0.0);
        let f: BTreeMap<ItemId, f32> = [(1, 1.0), (2, 2.0), (3, 4.0)].into_iter().collect();
        assert!((pearson(&f, &f, 2) - 1.0).abs() < 1e-6);
    }

    fn request(known: &[(ItemId, f64)], targets: &[ItemId]) -> CfRequest {
        CfRequest::new(map(known), targets.to_vec()).unwrap()
    }

    #[test]
    fn request_validation() {
        assert!(CfRequest::new(UserRatings::new(), vec![1]).is_err());
        assert!(CfRequest::new(map(&[(1, 3.0)]), vec![1]).is_err());
    }

    #[test]
    fn contribution_examples() {
        let cfg = CfConfig::default();
        let req = request(&[(1, 3.0), (2, 3.0)], &[9]);
        assert!(predict_contribution(&req, &map(&[(1, 4.0)]), 4.0, 0.7, &cfg).is_empty());

        let mut res = CfResult::new(&req);
        res.add(&predict_contribution(&req, &map(&[(9, 4.0)]), 4.0, 1.0, &cfg));
        assert_eq!(res.finalize(3.0, RatingScale::default(), &cfg)[&9], 3.0);

        // Two neighbors, weights 0.5 and 0.25.
        let mut res = CfResult::new(&req);
        res.add(&predict_contribution(&req, &map(&[(9, 5.0)]), 3.5, 0.5, &cfg));
        res.add(&predict_contribution(&req, &map(&[(9, 2.0)]), 3.0, 0.25, &cfg));
        let expected = 3.0 + (0.5 * 1.5 + -0.25) / 0.75;
        assert!((res.finalize(3.0, RatingScale::default(), &cfg)[&9] - expected).abs() < 1e-12);
    }

    #[test]
    fn finalize_fallback_and_clamp() {
        let cfg = CfConfig::default();
        let req = request(&[(1, 3.0)], &[9]);
        let mut res = CfResult::new(&req);
        assert_eq!(res.finalize(3.0, RatingScale::default(), &cfg)[&9], 3.0);
        res.accums.insert(
            9,
            Accum {
                weighted_sum: 1.0,
                mass: 0.5,
            },
        );
        assert_eq!(res.finalize(3.0, RatingScale::default(), &cfg)[&9], 5.0);
    }

    #[test]
    fn raw_mode() {
        let cfg = CfConfig {
            centered: false,
            ..CfConfig::default()
        };
        let req = request(&[(1, 3.0)], &[9]);
        let mut res = CfResult::new(&req);
        res.add(&predict_contribution(&req, &map(&[(9, 4.0)]), 2.0, 0.5, &cfg));
        res.add(&predict_contribution(&req, &map(&[(9, 2.0)]), 2.0, 0.5, &cfg));
        assert_eq!(res.finalize(3.0, RatingScale::default(), &cfg)[&9], 3.0);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0, 5.0], &[4.0, 4.0]).unwrap(), 1.0);
        assert!(rmse(&[3.0], &[3.0, 4.0]).is_err());
        let preds = BTreeMap::from([((1, 2), 3.0)]);
        let test = [TestRating {
            user: 1,
            item: 3,
            rating: 4.0,
        }];
        assert!(rmse_test_set(&preds, &test).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(accuracy_loss_cf(1.0, 1.0), 0.0);
        assert!((accuracy_loss_cf(1.1, 1.0) - 10.0).abs() < 1e-9);
        assert_eq!(accuracy_loss_cf(0.9, 1.0), 0.0);
        assert_eq!(accuracy_loss_cf(0.0, 0.0), 0.0);
        assert_eq!(accuracy_loss_cf(0.1, 0.0), 100.0);
    }

    #[test]
    fn request_file_round_trip() {
        let test = vec![
            TestRating {
                user: 7,
                item: 3,
                rating: 4.0,
            },
            TestRating {
                user: 7,
                item: 4,
                rating: 2.5,
            },
        ];
        let reqs = vec![(7, request(&[(1, 3.0), (2, 5.0)], &[3, 4]))];
        let csv = requests_to_csv(&reqs);
        let back = parse_requests(csv.as_bytes(), Path::new("r.csv"), &test).unwrap();
        assert_eq!(back, reqs);
        let t = parse_test_set(test_set_to_csv(&test).as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(t, test);
    }
}
