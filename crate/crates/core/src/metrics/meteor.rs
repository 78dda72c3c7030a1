//! METEOR: staged unigram alignment (exact, then Porter stem), harmonic
//! mean weighted toward recall, and a fragmentation penalty on the number of
//! chunks the alignment breaks into.
//!
//! Each stage matches as many still-unaligned unigrams as possible. Among
//! the maximum matchings of a stage, the one yielding the fewest chunks is
//! chosen: by exhaustive branch-and-bound search for short candidates, by a
//! greedy left-to-right pass otherwise. The synonym stage of the original
//! metric is not implemented.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MetricConfig, TokenSeq};
use crate::error::{Error, Result};

/// Which alignment search produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentPath {
    /// Greedy left-to-right pass (candidate longer than the exhaustive limit).
    Greedy,
    /// Exhaustive search finished; chunk count is minimal.
    Exhaustive,
    /// Exhaustive search ran out of node budget; best alignment found so far.
    Budgeted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `(candidate index, reference index)` pairs sorted by candidate index.
    pub pairs: Vec<(usize, usize)>,
    pub path: AlignmentPath,
}

impl Alignment {
    pub fn chunks(&self) -> usize {
        count_chunks(&self.pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeteorDetail {
    pub score: f64,
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub path: AlignmentPath,
    /// Index of the reference that produced the score.
    pub reference_index: usize,
}

/// Number of maximal runs of matches that are adjacent, in order, in both
/// strings. `pairs` must be sorted by candidate index.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// Best METEOR score over the references.
pub fn meteor(candidate: &TokenSeq, references: &[TokenSeq], config: &MetricConfig) -> Result<f64> {
    meteor_detail(candidate, references, config).map(|d| d.score)
}

pub fn meteor_detail(candidate: &TokenSeq, references: &[TokenSeq], config: &MetricConfig) -> Result<MeteorDetail> {
    if references.is_empty() {
        return Err(Error::invalid("meteor needs at least one reference"));
    }
    let mut best: Option<MeteorDetail> = None;
    for (idx, reference) in references.iter().enumerate() {
        let mut detail = meteor_single(candidate, reference, config);
        detail.reference_index = idx;
        if best.as_ref().is_none_or(|b| detail.score > b.score) {
            best = Some(detail);
        }
    }
    Ok(best.expect("references is non-empty"))
}

/// METEOR of `candidate` against one reference.
pub fn meteor_single(candidate: &[String], reference: &[String], config: &MetricConfig) -> MeteorDetail {
    let alignment = align(candidate, reference, config);
    let matches = alignment.pairs.len();
    let chunks = alignment.chunks();
    let mut detail = MeteorDetail {
        score: 0.0,
        matches,
        chunks,
        precision: 0.0,
        recall: 0.0,
        fmean: 0.0,
        penalty: 0.0,
        path: alignment.path,
        reference_index: 0,
    };
    if matches == 0 {
        return detail;
    }
    let m = matches as f64;
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let alpha = config.meteor_alpha;
    let fmean = precision * recall / (alpha * precision + (1.0 - alpha) * recall);
    let penalty = config.meteor_gamma * (chunks as f64 / m).powf(config.meteor_beta);
    detail.precision = precision;
    detail.recall = recall;
    detail.fmean = fmean;
    detail.penalty = penalty;
    detail.score = fmean * (1.0 - penalty);
    detail
}

/// Aligns candidate and reference unigrams: exact surface matches first,
/// then Porter-stem matches among the leftovers when stemming is enabled.
pub fn align(candidate: &[String], reference: &[String], config: &MetricConfig) -> Alignment {
    let exhaustive = candidate.len() <= config.exhaustive_max_tokens;
    let mut state = AlignState::new(candidate.len(), reference.len());
    let mut budgeted = false;

    let exact_c: Vec<Option<String>> = candidate.iter().cloned().map(Some).collect();
    let exact_r: Vec<Option<String>> = reference.iter().cloned().map(Some).collect();
    budgeted |= state.run_stage(&exact_c, &exact_r, exhaustive, config.exhaustive_node_budget);

    if config.use_stemming {
        let stem_keys = |tokens: &[String], used: &dyn Fn(usize) -> bool| -> Vec<Option<String>> {
            tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (!used(i)).then(|| porter_stemmer::stem(t)))
                .collect()
        };
        let stem_c = stem_keys(candidate, &|i| state.cand_to_ref[i].is_some());
        let stem_r = stem_keys(reference, &|j| state.ref_used[j]);
        budgeted |= state.run_stage(&stem_c, &stem_r, exhaustive, config.exhaustive_node_budget);
    }

    let pairs = state
        .cand_to_ref
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    let path = match (exhaustive, budgeted) {
        (false, _) => AlignmentPath::Greedy,
        (true, false) => AlignmentPath::Exhaustive,
        (true, true) => AlignmentPath::Budgeted,
    };
    Alignment { pairs, path }
}

struct AlignState {
    cand_to_ref: Vec<Option<usize>>,
    ref_used: Vec<bool>,
}

impl AlignState {
    fn new(cand_len: usize, ref_len: usize) -> Self {
        Self {
            cand_to_ref: vec![None; cand_len],
            ref_used: vec![false; ref_len],
        }
    }

    /// Runs one matching stage. Keys of `None` are ineligible (already
    /// aligned by an earlier stage). Returns true if the exhaustive search
    /// hit its node budget.
    fn run_stage(
        &mut self,
        cand_keys: &[Option<String>],
        ref_keys: &[Option<String>],
        exhaustive: bool,
        budget: usize,
    ) -> bool {
        let (greedy, greedy_used) = self.greedy_stage(cand_keys, ref_keys);
        if !exhaustive {
            self.cand_to_ref = greedy;
            self.ref_used = greedy_used;
            return false;
        }
        let mut search = StageSearch::new(self, cand_keys, ref_keys, greedy, budget);
        search.dfs(0, None, 0);
        let exhausted = search.nodes > search.budget;
        self.cand_to_ref = search.best;
        self.ref_used = vec![false; self.ref_used.len()];
        for j in self.cand_to_ref.iter().flatten() {
            self.ref_used[*j] = true;
        }
        exhausted
    }

    fn greedy_stage(
        &self,
        cand_keys: &[Option<String>],
        ref_keys: &[Option<String>],
    ) -> (Vec<Option<usize>>, Vec<bool>) {
        let mut assign = self.cand_to_ref.clone();
        let mut used = self.ref_used.clone();
        for (i, key) in cand_keys.iter().enumerate() {
            let Some(key) = key else { continue };
            let fits = |j: usize, used: &[bool]| j < ref_keys.len() && !used[j] && ref_keys[j].as_ref() == Some(key);
            let continuation = i
                .checked_sub(1)
                .and_then(|p| assign[p])
                .map(|j| j + 1)
                .filter(|&j| fits(j, &used));
            let pick = continuation.or_else(|| (0..ref_keys.len()).find(|&j| fits(j, &used)));
            if let Some(j) = pick {
                assign[i] = Some(j);
                used[j] = true;
            }
        }
        (assign, used)
    }
}

/// Branch-and-bound search over the maximum matchings of one stage for the
/// assignment with the fewest chunks. The chunk count of a decided prefix
/// never decreases as more positions are decided, so it is a valid bound.
struct StageSearch<'a> {
    cand_keys: &'a [Option<String>],
    /// Reference positions grouped by key, ascending.
    ref_slots: HashMap<&'a str, Vec<usize>>,
    /// Matches still required per key for a maximum matching.
    quota: HashMap<&'a str, usize>,
    /// Eligible candidate positions with the same key strictly after `i`.
    later_same: Vec<usize>,
    current: Vec<Option<usize>>,
    ref_used: Vec<bool>,
    best: Vec<Option<usize>>,
    best_chunks: usize,
    nodes: usize,
    budget: usize,
}

impl<'a> StageSearch<'a> {
    fn new(
        state: &AlignState,
        cand_keys: &'a [Option<String>],
        ref_keys: &'a [Option<String>],
        greedy: Vec<Option<usize>>,
        budget: usize,
    ) -> Self {
        let mut ref_slots: HashMap<&str, Vec<usize>> = HashMap::new();
        for (j, key) in ref_keys.iter().enumerate() {
            if let Some(k) = key {
                if !state.ref_used[j] {
                    ref_slots.entry(k.as_str()).or_default().push(j);
                }
            }
        }
        let mut cand_counts: HashMap<&str, usize> = HashMap::new();
        for k in cand_keys.iter().flatten() {
            *cand_counts.entry(k.as_str()).or_default() += 1;
        }
        let quota = cand_counts
            .iter()
            .map(|(k, &n)| (*k, n.min(ref_slots.get(k).map_or(0, Vec::len))))
            .collect();
        let mut later_same = vec![0; cand_keys.len()];
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for i in (0..cand_keys.len()).rev() {
            if let Some(k) = &cand_keys[i] {
                let n = seen.entry(k.as_str()).or_default();
                later_same[i] = *n;
                *n += 1;
            }
        }
        let pairs: Vec<_> = greedy
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
            .collect();
        Self {
            cand_keys,
            ref_slots,
            quota,
            later_same,
            current: state.cand_to_ref.clone(),
            ref_used: state.ref_used.clone(),
            best_chunks: count_chunks(&pairs),
            best: greedy,
            nodes: 0,
            budget,
        }
    }

    fn dfs(&mut self, i: usize, last: Option<(usize, usize)>, chunks: usize) {
        self.nodes += 1;
        if self.nodes > self.budget || chunks >= self.best_chunks {
            return;
        }
        if i == self.current.len() {
            self.best_chunks = chunks;
            self.best = self.current.clone();
            return;
        }
        let step = |j: usize| match last {
            Some((c, r)) if c + 1 == i && r + 1 == j => chunks,
            _ => chunks + 1,
        };

        let Some(key) = self.cand_keys[i].as_deref() else {
            match self.current[i] {
                Some(j) => self.dfs(i + 1, Some((i, j)), step(j)),
                None => self.dfs(i + 1, last, chunks),
            }
            return;
        };

        let remaining = self.quota.get(key).copied().unwrap_or(0);
        if remaining > 0 {
            let slots = self.ref_slots.get(key).cloned().unwrap_or_default();
            let preferred = last.filter(|(c, _)| c + 1 == i).map(|(_, r)| r + 1);
            let ordered = preferred
                .into_iter()
                .filter(|p| slots.contains(p))
                .chain(slots.iter().copied().filter(|&j| Some(j) != preferred));
            for j in ordered.collect::<Vec<_>>() {
                if self.ref_used[j] {
                    continue;
                }
                self.ref_used[j] = true;
                self.current[i] = Some(j);
                *self.quota.get_mut(key).unwrap() -= 1;
                self.dfs(i + 1, Some((i, j)), step(j));
                *self.quota.get_mut(key).unwrap() += 1;
                self.current[i] = None;
                self.ref_used[j] = false;
            }
        }
        if self.later_same[i] >= remaining {
            self.dfs(i + 1, last, chunks);
        }
    }
}
