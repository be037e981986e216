use std::collections::BTreeMap;

use super::ic::{protein_functional_ic, IcTable};
use super::DedupError;
use crate::go_graph::GoDag;
use crate::protein::{ProteinRecord, Superkingdom};

/// Bucket key for a functional IC value: rounded half-to-even at three
/// decimals, kept as thousandths.
pub fn ic_bucket(value: f64) -> i64 {
    (value * 1000.0).round_ties_even() as i64
}

/// Keeps one protein (smallest accession) per distinct rounded functional IC.
/// Output is sorted by accession.
pub fn sample_by_ic<'a>(
    group: &[&'a ProteinRecord],
    dag: &GoDag,
    ic: &IcTable,
) -> Result<Vec<&'a ProteinRecord>, DedupError> {
    let mut buckets: BTreeMap<i64, &'a ProteinRecord> = BTreeMap::new();
    for &p in group {
        let key = ic_bucket(protein_functional_ic(p, dag, ic)?);
        buckets
            .entry(key)
            .and_modify(|cur| {
                if p.accession < cur.accession {
                    *cur = p;
                }
            })
            .or_insert(p);
    }
    let mut out: Vec<&ProteinRecord> = buckets.into_values().collect();
    out.sort_by(|a, b| a.accession.cmp(&b.accession));
    Ok(out)
}

/// Largest-remainder apportionment of `total` seats by `weights`.
/// Remainder ties go to the larger weight, then to the earlier class.
pub fn largest_remainder(total: usize, weights: &BTreeMap<Superkingdom, f64>) -> BTreeMap<Superkingdom, usize> {
    let sum: f64 = weights.values().sum();
    let mut seats: BTreeMap<Superkingdom, usize> = weights.keys().map(|&k| (k, 0)).collect();
    if sum <= 0.0 || total == 0 {
        return seats;
    }
    let mut rems = Vec::with_capacity(weights.len());
    let mut given = 0usize;
    for (&k, &w) in weights {
        let exact = total as f64 * w / sum;
        let floor = exact.floor() as usize;
        seats.insert(k, floor);
        given += floor;
        rems.push((k, exact - floor as f64, w));
    }
    rems.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| b.2.total_cmp(&a.2))
            .then_with(|| a.0.cmp(&b.0))
    });
    for (k, _, _) in rems.into_iter().take(total.saturating_sub(given)) {
        *seats.get_mut(&k).unwrap() += 1;
    }
    seats
}

/// Draws `target_n` proteins so that superkingdoms follow
/// `global_proportions`. Classes short of candidates hand their remaining
/// seats to other classes in proportion to what those still have. Within a
/// class, proteins are taken by ascending accession.
pub fn species_quota_sample<'a>(
    candidates: &[&'a ProteinRecord],
    target_n: usize,
    global_proportions: &BTreeMap<Superkingdom, f64>,
) -> Result<Vec<&'a ProteinRecord>, DedupError> {
    let sum: f64 = global_proportions.values().sum();
    if (sum - 1.0).abs() > 1e-9 || global_proportions.values().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(DedupError::InvalidProportions(sum));
    }
    let mut by_class: BTreeMap<Superkingdom, Vec<&'a ProteinRecord>> = BTreeMap::new();
    for &p in candidates {
        by_class.entry(p.superkingdom).or_default().push(p);
    }
    for v in by_class.values_mut() {
        v.sort_by(|a, b| a.accession.cmp(&b.accession));
    }
    let selected: Vec<&'a ProteinRecord> = if target_n >= candidates.len() {
        by_class.into_values().flatten().collect()
    } else {
        let mut weights: BTreeMap<Superkingdom, f64> = global_proportions.clone();
        for &k in by_class.keys() {
            weights.entry(k).or_insert(0.0);
        }
        let avail = |k: &Superkingdom| by_class.get(k).map_or(0, Vec::len);
        let mut quota = largest_remainder(target_n, &weights);
        loop {
            let mut shortfall = 0;
            for (k, q) in quota.iter_mut() {
                let a = avail(k);
                if *q > a {
                    shortfall += *q - a;
                    *q = a;
                }
            }
            if shortfall == 0 {
                break;
            }
            let spare: BTreeMap<Superkingdom, f64> = quota
                .iter()
                .filter(|(k, q)| avail(k) > **q)
                .map(|(k, q)| (*k, (avail(k) - q) as f64))
                .collect();
            for (k, extra) in largest_remainder(shortfall, &spare) {
                *quota.get_mut(&k).unwrap() += extra;
            }
        }
        by_class
            .into_iter()
            .flat_map(|(k, ps)| {
                let q = quota.get(&k).copied().unwrap_or(0);
                ps.into_iter().take(q)
            })
            .collect()
    };
    let mut out = selected;
    out.sort_by(|a, b| a.accession.cmp(&b.accession));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::go_graph::parse_obo;
    use crate::protein::Annotation;
    use Superkingdom::*;

    fn p(acc: &str, k: Superkingdom, terms: &[&str]) -> ProteinRecord {
        ProteinRecord {
            accession: acc.into(),
            sequence: "MK".into(),
            go_terms: terms.iter().map(|s| s.to_string()).collect(),
            superkingdom: k,
            annotation: Annotation::default(),
        }
    }

    fn props(items: &[(Superkingdom, f64)]) -> BTreeMap<Superkingdom, f64> {
        items.iter().copied().collect()
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(ic_bucket(2.0814), 2081);
        assert_eq!(ic_bucket(2.081), 2081);
        assert_eq!(ic_bucket(3.5), 3500);
        // exact binary halves: 62.5 -> 62, 187.5 -> 188
        assert_eq!(ic_bucket(0.0625), 62);
        assert_eq!(ic_bucket(0.1875), 188);
    }

    #[test]
    fn ic_buckets_keep_one_each() {
        // three terms in separate branches with hand-picked IC values
        let text = "[Term]\nid: GO:R\nname: r\nnamespace: biological_process\n\n\
            [Term]\nid: GO:A\nname: a\nnamespace: biological_process\nis_a: GO:R\n\n\
            [Term]\nid: GO:B\nname: b\nnamespace: biological_process\nis_a: GO:R\n\n\
            [Term]\nid: GO:C\nname: c\nnamespace: biological_process\nis_a: GO:R\n";
        let dag = parse_obo(text.as_bytes()).unwrap();
        let values = [("GO:R", 0.0), ("GO:A", 2.081), ("GO:B", 2.0814), ("GO:C", 3.5)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let ic = IcTable::from_values(values);
        let ps = [p("P3", Bacteria, &["GO:A"]), p("P1", Bacteria, &["GO:B"]), p("P2", Bacteria, &["GO:C"])];
        let refs: Vec<&ProteinRecord> = ps.iter().collect();
        let out = sample_by_ic(&refs, &dag, &ic).unwrap();
        let accs: Vec<&str> = out.iter().map(|p| p.accession.as_str()).collect();
        assert_eq!(accs, vec!["P1", "P2"]);
        // idempotent
        let again = sample_by_ic(&out, &dag, &ic).unwrap();
        assert_eq!(again, out);
        // identical annotations collapse to one
        let same = [p("X2", Bacteria, &["GO:A"]), p("X1", Bacteria, &["GO:A"])];
        let refs: Vec<&ProteinRecord> = same.iter().collect();
        assert_eq!(sample_by_ic(&refs, &dag, &ic).unwrap().len(), 1);
        assert_eq!(sample_by_ic(&refs[..1], &dag, &ic).unwrap()[0].accession, "X2");
    }

    #[test]
    fn apportionment_examples() {
        let q = largest_remainder(4, &props(&[(Eukaryota, 0.5), (Bacteria, 0.5)]));
        assert_eq!((q[&Eukaryota], q[&Bacteria]), (2, 2));
        let q = largest_remainder(2, &props(&[(Eukaryota, 0.75), (Bacteria, 0.25)]));
        assert_eq!((q[&Eukaryota], q[&Bacteria]), (2, 0));
    }

    #[test]
    fn quota_sampling() {
        let ps: Vec<ProteinRecord> = (0..6)
            .map(|i| p(&format!("E{i}"), Eukaryota, &[]))
            .chain((0..6).map(|i| p(&format!("B{i}"), Bacteria, &[])))
            .collect();
        let refs: Vec<&ProteinRecord> = ps.iter().collect();
        let out = species_quota_sample(&refs, 4, &props(&[(Eukaryota, 0.5), (Bacteria, 0.5)])).unwrap();
        let accs: Vec<&str> = out.iter().map(|p| p.accession.as_str()).collect();
        assert_eq!(accs, vec!["B0", "B1", "E0", "E1"]);
        let out = species_quota_sample(&refs, 2, &props(&[(Eukaryota, 0.75), (Bacteria, 0.25)])).unwrap();
        assert!(out.iter().all(|p| p.superkingdom == Eukaryota));
    }

    #[test]
    fn single_class_pool_and_shortfall() {
        let ps: Vec<ProteinRecord> = (0..5).map(|i| p(&format!("A{i}"), Archaea, &[])).collect();
        let refs: Vec<&ProteinRecord> = ps.iter().collect();
        // archaea weight is small but it is the only class with candidates
        let out = species_quota_sample(&refs, 3, &props(&[(Eukaryota, 0.9), (Archaea, 0.1)])).unwrap();
        assert_eq!(out.len(), 3);

        let mut mixed = ps.clone();
        mixed.push(p("E0", Eukaryota, &[]));
        let refs: Vec<&ProteinRecord> = mixed.iter().collect();
        let out = species_quota_sample(&refs, 4, &props(&[(Eukaryota, 0.5), (Archaea, 0.5)])).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out.iter().filter(|p| p.superkingdom == Eukaryota).count(), 1);
    }

    #[test]
    fn oversized_target_returns_all() {
        let ps: Vec<ProteinRecord> = (0..3).map(|i| p(&format!("V{i}"), Viruses, &[])).collect();
        let refs: Vec<&ProteinRecord> = ps.iter().collect();
        let out = species_quota_sample(&refs, 10, &props(&[(Viruses, 1.0)])).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn proportions_must_sum_to_one() {
        let r = species_quota_sample(&[], 1, &props(&[(Viruses, 0.5)]));
        assert!(matches!(r, Err(DedupError::InvalidProportions(_))));
    }
}
