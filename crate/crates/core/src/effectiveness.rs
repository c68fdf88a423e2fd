//! How well correlation ranking concentrates the relevant originals.
//!
//! Each component's ranked aggregated points are split into
//! [`SECTIONS`] equal rank sections. For CF a section's value is the
//! share of its original users that are highly related to the active user
//! (`|w| > 0.8`); for search it is the share of the exact top-k pages
//! whose aggregated point falls into that section.

use std::collections::BTreeMap;

use crate::cf::{self, CfConfig, CfRequest};
use crate::dataset::{Dataset, PointId};
use crate::engine::{rank, ApproxTask, CfTask, SearchTask};
use crate::error::{Error, Result};
use crate::search::{self, CorpusStats, InvertedIndex, SearchRequest};
use crate::spatial::AggId;
use crate::synopsis::SynopsisState;

pub const SECTIONS: usize = 10;
pub const HIGHLY_RELATED: f64 = 0.8;

/// Section (0-based) of the `rank`-th of `m` ranked points.
pub fn section_of(rank: usize, m: usize) -> usize {
    (rank * SECTIONS / m.max(1)).min(SECTIONS - 1)
}

/// Mean per-section value over requests.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionProfile {
    pub values: [f64; SECTIONS],
    pub requests: usize,
}

impl SectionProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,value,requests\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{v:.6},{}\n", i + 1, self.requests));
        }
        out
    }
}

fn mean_profile(per_request: &[[Option<f64>; SECTIONS]]) -> SectionProfile {
    let mut values = [0.0; SECTIONS];
    for (s, v) in values.iter_mut().enumerate() {
        let xs: Vec<f64> = per_request.iter().filter_map(|r| r[s]).collect();
        if !xs.is_empty() {
            *v = xs.iter().sum::<f64>() / xs.len() as f64;
        }
    }
    SectionProfile {
        values,
        requests: per_request.len(),
    }
}

fn ranking<T: ApproxTask>(mut task: T) -> Vec<AggId> {
    rank(&task.process_synopsis())
}

pub fn cf_sections(
    states: &[SynopsisState],
    requests: &[(PointId, CfRequest)],
    cfg: &CfConfig,
) -> Result<SectionProfile> {
    let mut per_request = Vec::with_capacity(requests.len());
    for (_, req) in requests {
        let mut related = [0usize; SECTIONS];
        let mut total = [0usize; SECTIONS];
        for state in states {
            let Dataset::Ratings(matrix) = &state.subset.data else {
                return Err(Error::Invalid("CF sections need rating subsets".into()));
            };
            let order = ranking(CfTask::new(state, req, *cfg)?);
            for (r, agg) in order.iter().enumerate() {
                let s = section_of(r, order.len());
                for m in state.index.members(*agg).into_iter().flatten() {
                    total[s] += 1;
                    let w = cf::pearson(&req.known, matrix.user(*m).expect("member in subset"), cfg.min_overlap);
                    if w.abs() > HIGHLY_RELATED {
                        related[s] += 1;
                    }
                }
            }
        }
        let mut row = [None; SECTIONS];
        for s in 0..SECTIONS {
            if total[s] > 0 {
                row[s] = Some(related[s] as f64 / total[s] as f64);
            }
        }
        per_request.push(row);
    }
    Ok(mean_profile(&per_request))
}

/// Per-component statistics, or one global set when `global_stats`.
pub fn component_stats(states: &[SynopsisState], global_stats: bool) -> Result<Vec<CorpusStats>> {
    let mut stats = Vec::with_capacity(states.len());
    for state in states {
        let Dataset::Text(corpus) = &state.subset.data else {
            return Err(Error::Invalid("search needs text subsets".into()));
        };
        stats.push(CorpusStats::from_corpus(corpus));
    }
    if global_stats {
        let mut global = CorpusStats::default();
        for s in &stats {
            global.merge(s);
        }
        stats = vec![global; states.len()];
    }
    Ok(stats)
}

pub fn search_sections(
    states: &[SynopsisState],
    requests: &[(u64, SearchRequest)],
    global_stats: bool,
) -> Result<SectionProfile> {
    let stats = component_stats(states, global_stats)?;
    let indexes: Vec<InvertedIndex> = states
        .iter()
        .zip(&stats)
        .map(|(state, st)| match &state.subset.data {
            Dataset::Text(c) => InvertedIndex::build_with_stats(c, st.clone()),
            Dataset::Ratings(_) => unreachable!("checked by component_stats"),
        })
        .collect();
    let owners: Vec<BTreeMap<PointId, AggId>> = states.iter().map(|s| s.index.owner_map()).collect();
    let mut per_request = Vec::with_capacity(requests.len());
    for (_, req) in requests {
        let partials: Vec<_> = indexes.iter().map(|ix| search::search_exact(ix, req)).collect();
        let exact = search::merge_topk(&partials, req.k);
        if exact.is_empty() {
            continue;
        }
        let mut section_of_page: BTreeMap<PointId, usize> = BTreeMap::new();
        for (c, state) in states.iter().enumerate() {
            let order = ranking(SearchTask::new(state, req, &stats[c])?);
            let pos: BTreeMap<AggId, usize> = order.iter().enumerate().map(|(r, a)| (*a, r)).collect();
            for page in exact.pages() {
                if let Some(agg) = owners[c].get(&page) {
                    section_of_page.insert(page, section_of(pos[agg], order.len()));
                }
            }
        }
        let mut row = [Some(0.0); SECTIONS];
        let share = 1.0 / exact.len() as f64;
        for s in section_of_page.values() {
            *row[*s].as_mut().expect("initialized") += share;
        }
        per_request.push(row);
    }
    Ok(mean_profile(&per_request))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in &idx[i..=j] {
                out[*k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_cover_ranks_evenly() {
        let counts = (0..20).fold([0; SECTIONS], |mut acc, r| {
            acc[section_of(r, 20)] += 1;
            acc
        });
        assert_eq!(counts, [2; SECTIONS]);
        assert_eq!(section_of(0, 1), 0);
        assert_eq!(section_of(24, 25), 9);
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]) - 1.0).abs() < 1e-12);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 2.0]);
        assert!((r - 0.894_427_190_999_915_9).abs() < 1e-12);
    }
}
