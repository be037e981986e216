use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const MAX_SCORE: u8 = 5;
const CATEGORIES: usize = MAX_SCORE as usize + 1;

/// One row of the ratings CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub item_id: String,
    pub rater_id: String,
    pub condition: String,
    pub score: u8,
}

/// Reads `item_id,rater_id,condition,score` with a header row.
pub fn read_ratings_csv<R: Read>(input: R) -> Result<Vec<Rating>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Rating>().enumerate() {
        let r = row.map_err(|e| EvalError::Ratings(format!("row {}: {e}", i + 2)))?;
        if r.score > MAX_SCORE {
            return Err(EvalError::Ratings(format!("row {}: score {} outside 0..=5", i + 2, r.score)));
        }
        out.push(r);
    }
    Ok(out)
}

/// Units (rated items) by raters; missing ratings allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatingSet {
    units: BTreeMap<String, BTreeMap<String, u8>>,
}

impl RatingSet {
    pub fn new() -> Self {
        RatingSet::default()
    }

    pub fn insert(&mut self, unit: &str, rater: &str, score: u8) -> Result<(), EvalError> {
        if score > MAX_SCORE {
            return Err(EvalError::Ratings(format!("score {score} outside 0..=5")));
        }
        self.units.entry(unit.to_string()).or_default().insert(rater.to_string(), score);
        Ok(())
    }

    /// Builds a set with one unit per (item, condition).
    pub fn from_ratings(ratings: &[Rating]) -> Result<Self, EvalError> {
        let mut s = RatingSet::new();
        for r in ratings {
            s.insert(&format!("{}\u{1f}{}", r.item_id, r.condition), &r.rater_id, r.score)?;
        }
        Ok(s)
    }

    /// From a dense matrix of units × raters.
    pub fn from_matrix(rows: &[Vec<Option<u8>>]) -> Result<Self, EvalError> {
        let mut s = RatingSet::new();
        for (u, row) in rows.iter().enumerate() {
            for (r, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    s.insert(&format!("u{u:06}"), &format!("r{r:06}"), *v)?;
                }
            }
        }
        Ok(s)
    }

    fn pairable(&self) -> Vec<Vec<u8>> {
        self.units
            .values()
            .map(|m| m.values().copied().collect::<Vec<u8>>())
            .filter(|v| v.len() >= 2)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    /// Set when every pairable value is identical; alpha is then reported as 1.
    pub degenerate: bool,
    pub units: usize,
    pub values: usize,
}

/// Krippendorff's alpha with the ordinal distance metric, computed from the
/// coincidence matrix: `α = 1 − (n − 1)·Σ o_ck δ²_ck / Σ n_c n_k δ²_ck`.
pub fn krippendorff_alpha(ratings: &RatingSet) -> Result<AlphaResult, EvalError> {
    let units = ratings.pairable();
    if units.len() < 2 {
        return Err(EvalError::InsufficientRatings(units.len()));
    }
    let mut o = [[0.0f64; CATEGORIES]; CATEGORIES];
    for vals in &units {
        let w = 1.0 / (vals.len() - 1) as f64;
        for (i, &a) in vals.iter().enumerate() {
            for (j, &b) in vals.iter().enumerate() {
                if i != j {
                    o[a as usize][b as usize] += w;
                }
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let delta2 = |c: usize, k: usize| -> f64 {
        let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
        let span: f64 = n_c[lo..=hi].iter().sum();
        let d = span - (n_c[lo] + n_c[hi]) / 2.0;
        d * d
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..CATEGORIES {
        for k in 0..CATEGORIES {
            if c == k {
                continue;
            }
            let d = delta2(c, k);
            observed += o[c][k] * d;
            expected += n_c[c] * n_c[k] * d;
        }
    }
    let values = n.round() as usize;
    if expected == 0.0 {
        return Ok(AlphaResult { alpha: 1.0, degenerate: true, units: units.len(), values });
    }
    Ok(AlphaResult {
        alpha: 1.0 - (n - 1.0) * observed / expected,
        degenerate: false,
        units: units.len(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinLoss {
    pub win: f64,
    pub lose: f64,
    pub tie: f64,
    pub n: usize,
}

/// Fractions of pairs where the rating with context beats, loses to or
/// ties the rating without.
pub fn pairwise_winloss(pairs: &[(f64, f64)]) -> Result<WinLoss, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPairs);
    }
    let (mut w, mut l, mut t) = (0usize, 0usize, 0usize);
    for &(with, without) in pairs {
        if with > without {
            w += 1;
        } else if with < without {
            l += 1;
        } else {
            t += 1;
        }
    }
    let n = pairs.len() as f64;
    Ok(WinLoss { win: w as f64 / n, lose: l as f64 / n, tie: t as f64 / n, n: pairs.len() })
}

/// Aggregates of a ratings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanSummary {
    pub mean_rating: BTreeMap<String, f64>,
    pub alpha: Option<AlphaResult>,
    pub winloss: Option<WinLoss>,
}

/// Means per condition, alpha over (item, condition) units, and win/lose
/// over (item, rater) pairs rated under both `with` and `without`.
pub fn summarize_ratings(ratings: &[Rating], with: &str, without: &str) -> Result<HumanSummary, EvalError> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in ratings {
        let e = sums.entry(r.condition.clone()).or_default();
        e.0 += r.score as f64;
        e.1 += 1;
    }
    let mean_rating = sums.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect();
    let alpha = match krippendorff_alpha(&RatingSet::from_ratings(ratings)?) {
        Ok(a) => Some(a),
        Err(EvalError::InsufficientRatings(_)) => None,
        Err(e) => return Err(e),
    };
    let mut by_pair: BTreeMap<(&str, &str), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in ratings {
        let e = by_pair.entry((&r.item_id, &r.rater_id)).or_default();
        if r.condition == with {
            e.0 = Some(r.score as f64);
        } else if r.condition == without {
            e.1 = Some(r.score as f64);
        }
    }
    let pairs: Vec<(f64, f64)> = by_pair.values().filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    let winloss = if pairs.is_empty() { None } else { Some(pairwise_winloss(&pairs)?) };
    Ok(HumanSummary { mean_rating, alpha, winloss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pairwise form: α = 1 − D_o/D_e with D_o the weighted mean distance of
    /// within-unit pairs and D_e the mean distance over all value pairs.
    fn oracle(rows: &[Vec<Option<u8>>]) -> f64 {
        let units: Vec<Vec<u8>> = rows
            .iter()
            .map(|r| r.iter().flatten().copied().collect::<Vec<u8>>())
            .filter(|v| v.len() >= 2)
            .collect();
        let all: Vec<u8> = units.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let freq = |g: u8| all.iter().filter(|&&v| v == g).count() as f64;
        let dist = |a: u8, b: u8| {
            let (lo, hi) = (a.min(b), a.max(b));
            let s: f64 = (lo..=hi).map(freq).sum::<f64>() - (freq(lo) + freq(hi)) / 2.0;
            s * s
        };
        let mut d_o = 0.0;
        for u in &units {
            let m = u.len() as f64;
            for i in 0..u.len() {
                for j in 0..u.len() {
                    if i != j {
                        d_o += dist(u[i], u[j]) / (m - 1.0);
                    }
                }
            }
        }
        d_o /= n;
        let mut d_e = 0.0;
        for i in 0..all.len() {
            for j in 0..all.len() {
                if i != j {
                    d_e += dist(all[i], all[j]);
                }
            }
        }
        d_e /= n * (n - 1.0);
        1.0 - d_o / d_e
    }

    #[test]
    fn perfect_agreement() {
        let s = RatingSet::from_matrix(&[vec![Some(1), Some(1)], vec![Some(4), Some(4)], vec![Some(2), Some(2)]]).unwrap();
        let a = krippendorff_alpha(&s).unwrap();
        assert_eq!(a.alpha, 1.0);
        assert!(!a.degenerate);
    }

    #[test]
    fn anti_agreement_fixture() {
        let rows = vec![vec![Some(0), Some(5)], vec![Some(5), Some(0)]];
        let a = krippendorff_alpha(&RatingSet::from_matrix(&rows).unwrap()).unwrap();
        assert!((a.alpha - oracle(&rows)).abs() < 1e-9);
        assert!((a.alpha - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_insufficient() {
        let s = RatingSet::from_matrix(&[vec![Some(3), Some(3)], vec![Some(3), Some(3)]]).unwrap();
        let a = krippendorff_alpha(&s).unwrap();
        assert!(a.degenerate);
        assert_eq!(a.alpha, 1.0);
        let one = RatingSet::from_matrix(&[vec![Some(1), Some(2)]]).unwrap();
        assert!(matches!(krippendorff_alpha(&one), Err(EvalError::InsufficientRatings(1))));
        let lonely = RatingSet::from_matrix(&[vec![Some(1), None], vec![Some(2), Some(3)]]).unwrap();
        assert!(krippendorff_alpha(&lonely).is_err());
        assert!(RatingSet::new().insert("u", "r", 6).is_err());
    }

    #[test]
    fn winloss_examples() {
        let w = pairwise_winloss(&[(4.0, 3.0), (2.0, 2.0), (1.0, 3.0), (5.0, 2.0)]).unwrap();
        assert_eq!((w.win, w.tie, w.lose), (0.5, 0.25, 0.25));
        assert_eq!(pairwise_winloss(&[(3.0, 1.0)]).unwrap().win, 1.0);
        assert_eq!(pairwise_winloss(&[(2.0, 2.0); 3]).unwrap().tie, 1.0);
        assert!(pairwise_winloss(&[]).is_err());
    }

    #[test]
    fn csv_and_summary() {
        let csv = "item_id,rater_id,condition,score\ni1,r1,with,4\ni1,r1,without,2\ni1,r2,with,4\ni1,r2,without,3\ni2,r1,with,1\ni2,r1,without,1\ni2,r2,with,2\ni2,r2,without,1\n";
        let rs = read_ratings_csv(csv.as_bytes()).unwrap();
        assert_eq!(rs.len(), 8);
        let s = summarize_ratings(&rs, "with", "without").unwrap();
        assert_eq!(s.mean_rating["with"], 11.0 / 4.0);
        let wl = s.winloss.unwrap();
        assert_eq!((wl.win, wl.tie, wl.lose, wl.n), (0.75, 0.25, 0.0, 4));
        assert_eq!(s.alpha.unwrap().units, 4);
        assert!(read_ratings_csv("item_id,rater_id,condition,score\ni,r,c,9\n".as_bytes()).is_err());
        assert!(read_ratings_csv("item_id,rater_id,condition,score\ni,r,c,x\n".as_bytes()).is_err());
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<Option<u8>>>> {
        proptest::collection::vec(proptest::collection::vec(proptest::option::weighted(0.85, 0u8..=5), 3), 2..8)
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle(rows in matrix()) {
            let s = RatingSet::from_matrix(&rows).unwrap();
            if let Ok(a) = krippendorff_alpha(&s) {
                if !a.degenerate {
                    prop_assert!((a.alpha - oracle(&rows)).abs() < 1e-9);
                }
                prop_assert!(a.alpha <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn invariant_under_reordering(rows in matrix(), rot in 0usize..8) {
            let a = krippendorff_alpha(&RatingSet::from_matrix(&rows).unwrap());
            let mut items = rows.clone();
            items.reverse();
            let k = rot % items.len();
            items.rotate_left(k);
            let permuted: Vec<Vec<Option<u8>>> = items.into_iter().map(|mut r| { r.reverse(); r }).collect();
            let b = krippendorff_alpha(&RatingSet::from_matrix(&permuted).unwrap());
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!((a.alpha - b.alpha).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one ordering failed"),
            }
        }
    }
}
