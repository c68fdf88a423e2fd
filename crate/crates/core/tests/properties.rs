use std::collections::{BTreeMap, BTreeSet};

use accuracytrader::cf::{self, CfConfig, CfRequest, CfResult};
use accuracytrader::dataset::{partition, Corpus, Dataset, Document, PointContent, RatingMatrix, RatingScale, Subset};
use accuracytrader::engine::{self, EngineParams, FixedClock};
use accuracytrader::search::{self, CorpusStats, Hit, HitTarget, SearchRequest, SearchResult};
use accuracytrader::sim::percentile;
use accuracytrader::spatial::{self, ReducedPoint};
use accuracytrader::synopsis::{self, ChangeSet, SynopsisConfig};
use accuracytrader_oracle as oracle;
use proptest::prelude::*;

fn ratings_strategy(users: usize, items: u64) -> impl Strategy<Value = BTreeMap<u64, BTreeMap<u64, f64>>> {
    prop::collection::btree_map(
        0..users as u64,
        prop::collection::btree_map(
            0..items,
            (2u32..=10).prop_map(|x| f64::from(x) / 2.0),
            1..items as usize,
        ),
        1..=users,
    )
}

fn matrix_of(rows: &BTreeMap<u64, BTreeMap<u64, f64>>) -> RatingMatrix {
    let mut m = RatingMatrix::new(RatingScale::default());
    for (u, r) in rows {
        m.set_user(*u, r.clone()).unwrap();
    }
    m
}

const WORDS: [&str; 12] = [
    "alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa", "lambda", "mu",
];

fn corpus_strategy(max_docs: usize) -> impl Strategy<Value = Corpus> {
    prop::collection::vec(prop::collection::vec(0..WORDS.len(), 1..12), 2..max_docs).prop_map(|docs| {
        let mut c = Corpus::new();
        for (i, words) in docs.iter().enumerate() {
            let body: Vec<&str> = words.iter().map(|w| WORDS[*w]).collect();
            c.insert(i as u64, Document::from_text(format!("d{i}"), &body.join(" ")))
                .unwrap();
        }
        c
    })
}

fn query_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(0..WORDS.len(), 1..4).prop_map(|w| w.iter().map(|i| WORDS[*i]).collect::<Vec<_>>().join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_a_bijection(rows in ratings_strategy(40, 6), n in 1usize..8) {
        let data = Dataset::Ratings(matrix_of(&rows));
        prop_assume!(n <= data.len());
        let parts = partition(&data, n).unwrap();
        prop_assert_eq!(parts.len(), n);
        let mut seen = BTreeSet::new();
        for (c, p) in parts.iter().enumerate() {
            prop_assert_eq!(p.component_id, c);
            for id in p.data.point_ids() {
                prop_assert!(seen.insert(id), "point {} in two subsets", id);
                prop_assert_eq!(p.data.content(id), data.content(id));
            }
        }
        prop_assert_eq!(seen, data.point_ids().into_iter().collect::<BTreeSet<_>>());
        let sizes: Vec<usize> = parts.iter().map(Subset::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn pearson_symmetric_and_affine_invariant(
        pairs in prop::collection::btree_map(0u64..30, (0.0f64..5.0, 0.0f64..5.0), 0..20),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let a: BTreeMap<u64, f64> = pairs.iter().map(|(k, v)| (*k, v.0)).collect();
        let b: BTreeMap<u64, f64> = pairs.iter().map(|(k, v)| (*k, v.1)).collect();
        let w = cf::pearson(&a, &b, 2);
        prop_assert!((w - cf::pearson(&b, &a, 2)).abs() <= 1e-12);
        prop_assert!((w - oracle::oracle_pearson(&a, &b, 2)).abs() <= 1e-12);
        let moved: BTreeMap<u64, f64> = b.iter().map(|(k, v)| (*k, v * scale + shift)).collect();
        prop_assert!((w - cf::pearson(&a, &moved, 2)).abs() <= 1e-9);
        prop_assert!((-1.0..=1.0).contains(&w));
    }

    #[test]
    fn rtree_random_operations_keep_invariants(
        ops in prop::collection::vec((any::<bool>(), 0u64..60, -10.0f64..10.0, -10.0f64..10.0), 1..200),
    ) {
        let mut tree = spatial::RTree::<f64>::new(2, 2, 6).unwrap();
        let mut model: BTreeSet<u64> = BTreeSet::new();
        for (insert, id, x, y) in ops {
            if insert && !model.contains(&id) {
                tree.insert(ReducedPoint::new(id, vec![x, y])).unwrap();
                model.insert(id);
            } else if !insert && model.contains(&id) {
                tree.delete(id).unwrap();
                model.remove(&id);
            }
            prop_assert!(tree.check_invariants().is_ok(), "{:?}", tree.check_invariants());
        }
        prop_assert_eq!(tree.point_ids().collect::<BTreeSet<_>>(), model.clone());
        prop_assert_eq!(tree.members(tree.root()), model);
    }

    #[test]
    fn cf_contributions_are_additive(rows in ratings_strategy(30, 8), split in 1usize..29) {
        let matrix = matrix_of(&rows);
        let known: BTreeMap<u64, f64> = [(0, 4.0), (1, 2.0), (2, 3.5), (3, 1.0)].into_iter().collect();
        let req = CfRequest::new(known, vec![4, 5, 6, 7]).unwrap();
        let cfg = CfConfig::default();
        let whole = cf::process_exact(&req, &matrix, &cfg);
        let ids: Vec<u64> = matrix.user_ids().collect();
        let cut = split.min(ids.len());
        let mut left = cf::process_exact(&req, &matrix.restrict(&ids[..cut]), &cfg);
        let right = cf::process_exact(&req, &matrix.restrict(&ids[cut..]), &cfg);
        left.merge(&right);
        for (item, a) in &whole.accums {
            let b = left.accums.get(item).copied().unwrap_or_default();
            prop_assert!((a.weighted_sum - b.weighted_sum).abs() <= 1e-9);
            prop_assert!((a.mass - b.mass).abs() <= 1e-9);
        }
        let preds = whole.finalize(req.active_mean(), RatingScale::default(), &cfg);
        let reference = oracle::oracle_cf_exact(&matrix, &req.known, &req.targets, 2, RatingScale::default());
        for (item, p) in preds {
            prop_assert!((p - reference[&item]).abs() <= 1e-9);
        }
    }

    #[test]
    fn search_refinement_never_loses_overlap(corpus in corpus_strategy(60), query in query_strategy(), k in 1usize..6) {
        let subset = Subset { component_id: 0, data: Dataset::Text(corpus.clone()) };
        let cfg = SynopsisConfig { compression_ratio: 4.0, ..SynopsisConfig::default() };
        let state = synopsis::create(&subset, &cfg).unwrap();
        let req = SearchRequest::new(&query, k).unwrap();
        let stats = CorpusStats::from_corpus(&corpus);
        let exact = search::search_exact(&search::InvertedIndex::build(&corpus), &req);
        let m = state.synopsis.len();
        let mut last = -1.0;
        for i in 0..=m {
            let params = EngineParams { l_spe: f64::INFINITY, i_max: i };
            let out = engine::process_search(&state, &req, &stats, &params, &mut FixedClock(0.0)).unwrap();
            prop_assert_eq!(out.sets_processed(), i);
            let acc = search::accuracy_search(&out.result, &exact);
            prop_assert!(acc >= last, "accuracy fell from {} to {} at {} sets", last, acc, i);
            last = acc;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn search_matches_brute_force(corpus in corpus_strategy(40), query in query_strategy(), k in 1usize..8) {
        let req = SearchRequest::new(&query, k).unwrap();
        let got = search::search_exact(&search::InvertedIndex::build(&corpus), &req);
        let want = oracle::oracle_search_exact(&corpus, &req.terms, k);
        prop_assert_eq!(got.len(), want.len());
        for (h, (id, s)) in got.hits.iter().zip(&want) {
            prop_assert_eq!(h.target, HitTarget::Page(*id));
            prop_assert!((h.score - s).abs() <= 1e-12);
        }
    }

    #[test]
    fn merge_matches_brute_force(
        lists in prop::collection::vec(prop::collection::vec((0u64..25, 0u32..8), 0..10), 1..5),
        k in 1usize..12,
    ) {
        // Coarse scores force ties.
        let score = |s: u32| f64::from(s) / 4.0;
        let results: Vec<SearchResult> = lists
            .iter()
            .map(|l| {
                let hits = l.iter().map(|(id, s)| Hit { target: HitTarget::Page(*id), score: score(*s) }).collect();
                SearchResult::from_hits(hits, k)
            })
            .collect();
        let plain: Vec<Vec<(u64, f64)>> = results
            .iter()
            .map(|r| r.hits.iter().map(|h| (r_page(h), h.score)).collect())
            .collect();
        let got: Vec<(u64, f64)> = search::merge_topk(&results, k).hits.iter().map(|h| (r_page(h), h.score)).collect();
        prop_assert_eq!(got, oracle::oracle_merge(&plain, k));
    }

    #[test]
    fn percentile_and_rmse_match_brute_force(xs in prop::collection::vec(-1e3f64..1e3, 1..300), p in 0.0f64..=100.0) {
        prop_assert_eq!(percentile(&xs, p), oracle::oracle_percentile(&xs, p));
        let ys: Vec<f64> = xs.iter().rev().copied().collect();
        let got = cf::rmse(&xs, &ys).unwrap();
        prop_assert!((got - oracle::oracle_rmse(&xs, &ys)).abs() <= 1e-12 * got.max(1.0));
    }
}

fn r_page(h: &Hit) -> u64 {
    match h.target {
        HitTarget::Page(id) => id,
        HitTarget::Placeholder { .. } => unreachable!(),
    }
}

type Row = BTreeMap<u64, f64>;

fn change_strategy(next_id: u64) -> impl Strategy<Value = (Vec<Row>, Vec<(u64, Row)>)> {
    let row = || prop::collection::btree_map(0u64..10, (2u32..=10).prop_map(|x| f64::from(x) / 2.0), 1..8);
    (
        prop::collection::vec(row(), 0..4),
        prop::collection::vec((0..next_id, row()), 0..4),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn incremental_update_matches_reaggregation(
        rows in ratings_strategy(80, 10),
        steps in prop::collection::vec(change_strategy(80), 1..6),
    ) {
        let subset = Subset { component_id: 0, data: Dataset::Ratings(matrix_of(&rows)) };
        let cfg = SynopsisConfig { compression_ratio: 8.0, ..SynopsisConfig::default() };
        let mut state = synopsis::create(&subset, &cfg).unwrap();
        let mut next = 1000u64;
        for (adds, mods) in steps {
            let mut changes = ChangeSet::default();
            for r in adds {
                changes.added.push((next, PointContent::Ratings(r)));
                next += 1;
            }
            let mut touched = BTreeSet::new();
            for (id, r) in mods {
                if state.subset.data.contains(id) && touched.insert(id) {
                    changes.modified.push((id, PointContent::Ratings(r)));
                }
            }
            let changed: BTreeSet<u64> = changes.added.iter().chain(&changes.modified).map(|c| c.0).collect();
            let (after, _) = synopsis::update(&state, &changes, &cfg).unwrap();
            prop_assert!(after.check_consistency().is_ok());
            let reference = oracle::oracle_reaggregate(&after.index, &after.subset.data);
            prop_assert_eq!(&after.synopsis.points, &reference);
            if after.level == state.level {
                for p in &after.synopsis.points {
                    let members = after.index.members(p.id).unwrap();
                    if state.index.members(p.id) == Some(members) && members.is_disjoint(&changed) {
                        prop_assert_eq!(Some(p), state.synopsis.get(p.id));
                    }
                }
            }
            state = after;
        }
    }
}

#[test]
fn unbounded_engine_reproduces_exact_cf() {
    let synth = accuracytrader::synth::generate_cf(&accuracytrader::synth::CfSynthConfig {
        users: 400,
        active_users: 20,
        ..Default::default()
    })
    .unwrap();
    let subset = Subset {
        component_id: 0,
        data: Dataset::Ratings(synth.matrix.clone()),
    };
    let state = synopsis::create(
        &subset,
        &SynopsisConfig {
            compression_ratio: 10.0,
            ..SynopsisConfig::default()
        },
    )
    .unwrap();
    let cfg = CfConfig::default();
    for (_, req) in &synth.requests {
        let out = engine::process_cf(&state, req, cfg, &EngineParams::unbounded(), &mut FixedClock(0.0)).unwrap();
        assert_eq!(out.sets_processed(), state.synopsis.len());
        let preds = out.result.finalize(req.active_mean(), synth.matrix.scale(), &cfg);
        let reference = oracle::oracle_cf_exact(&synth.matrix, &req.known, &req.targets, 2, synth.matrix.scale());
        for (item, p) in &preds {
            assert!(
                (p - reference[item]).abs() <= 1e-9,
                "item {item}: {p} vs {}",
                reference[item]
            );
        }
        let direct: CfResult = cf::process_exact(req, &synth.matrix, &cfg);
        assert_eq!(direct.accums.len(), out.result.accums.len());
    }
}
