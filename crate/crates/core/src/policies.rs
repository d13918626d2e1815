//! Addition and deletion scoring policies.
//!
//! Low-level score functions (entropy, cosine diversity, committee
//! disagreement, prediction variance, greedy exploitation) compose into
//! declarative [`PolicySpec`] trees: hybrids split a batch between
//! sub-policies, rank ensembles combine heterogeneous scores on rank scale
//! so unbounded metrics can be mixed. Larger scores always mean "more
//! desirable to add"; deletion removes the lowest-ranked labeled samples.
//!
//! Spec strings parse from a small grammar, e.g.
//! `hybrid(greedy:32,variance:32)`, `rank_ensemble(entropy:1,diversity:1)`,
//! with an optional `@rand2n` suffix that replaces exact top-n selection by
//! a uniform draw of n from the top 2n.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

use crate::datasets::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::learners::{sample_ref, Committee, LearnerParams};
use crate::pool::SampleId;
use crate::seed::{mix_seed, rng_for, STREAM_RANDOM_POLICY};

// ---------------------------------------------------------------------------
// Score functions
// ---------------------------------------------------------------------------

/// Shannon entropy of a probability vector (natural log, `0 ln 0 = 0`).
pub fn entropy_score(prob: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &p in prob {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidInput(format!(
                "probability entry {p} is negative or non-finite"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(prob
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum())
}

/// Cosine distance `1 - cos(feature, mean_feature)`, in `[0, 2]`.
/// Zero-norm inputs are undefined; callers decide how to substitute.
pub fn diversity_score(feature: &[f64], mean_feature: &[f64]) -> Result<f64> {
    if feature.len() != mean_feature.len() {
        return Err(Error::LengthMismatch {
            left: feature.len(),
            right: mean_feature.len(),
        });
    }
    let dot: f64 = feature.iter().zip(mean_feature).map(|(a, b)| a * b).sum();
    let nf = feature.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nm = mean_feature.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nf == 0.0 || nm == 0.0 {
        return Err(Error::UndefinedDistance);
    }
    let cos = (dot / (nf * nm)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Arithmetic mean of the backbone features over the current training ids.
pub fn mean_feature(
    params: &LearnerParams,
    training_ids: &[SampleId],
    dataset: &Dataset,
) -> Result<Vec<f64>> {
    if training_ids.is_empty() {
        return Err(Error::Precondition(
            "mean_feature requires a nonempty training pool".into(),
        ));
    }
    let mut mean = params.features(sample_ref(dataset, training_ids[0])?)?;
    for &id in &training_ids[1..] {
        let f = params.features(sample_ref(dataset, id)?)?;
        for (m, v) in mean.iter_mut().zip(&f) {
            *m += v;
        }
    }
    let n = training_ids.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Committee disagreement: mean KL from each member's distribution to the
/// committee-average distribution (natural log).
pub fn jsd_uncertainty(committee_probs: &[Vec<f64>]) -> Result<f64> {
    let c = committee_probs.len();
    if c < 2 {
        return Err(Error::InvalidInput(format!(
            "jsd needs at least 2 committee members, got {c}"
        )));
    }
    let k = committee_probs[0].len();
    for p in committee_probs {
        if p.len() != k {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: k,
            });
        }
        let mut sum = 0.0;
        for &v in p {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput("invalid probability entry".into()));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "member distribution sums to {sum}, expected 1"
            )));
        }
    }
    let mut mean = vec![0.0; k];
    for p in committee_probs {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= c as f64;
    }
    let mut total = 0.0;
    for p in committee_probs {
        for i in 0..k {
            if p[i] > 0.0 {
                // mean[i] >= p[i]/C > 0 here
                total += p[i] * (p[i] / mean[i]).ln();
            }
        }
    }
    Ok(total / c as f64)
}

/// Population variance (divide by C) of the committee's predictions.
pub fn variance_uncertainty(committee_predictions: &[f64]) -> Result<f64> {
    let c = committee_predictions.len();
    if c < 2 {
        return Err(Error::InvalidInput(format!(
            "variance needs at least 2 committee members, got {c}"
        )));
    }
    let mean: f64 = committee_predictions.iter().sum::<f64>() / c as f64;
    Ok(committee_predictions
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>()
        / c as f64)
}

/// Greedy exploitation score: committee-mean predicted affinity.
pub fn greedy_score(committee: &Committee, dataset: &Dataset, id: SampleId) -> Result<f64> {
    committee.mean_prediction(sample_ref(dataset, id)?)
}

/// Replace each component's scores by their fractional ranks (ascending,
/// ties by average rank) and return the weighted rank sum. The output order
/// is invariant under any strictly monotone transform of a component.
pub fn rank_ensemble(components: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    if components.is_empty() {
        return Err(Error::InvalidInput("rank ensemble needs components".into()));
    }
    let n = components[0].0.len();
    for (scores, weight) in components {
        if scores.len() != n {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: n,
            });
        }
        if !weight.is_finite() || *weight <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "rank ensemble weight {weight} must be positive"
            )));
        }
    }
    let mut combined = vec![0.0; n];
    for (scores, weight) in components {
        let ranks = fractional_ranks(scores)?;
        for (c, r) in combined.iter_mut().zip(&ranks) {
            *c += weight * r;
        }
    }
    Ok(combined)
}

/// 1-based ranks in ascending score order, ties averaged.
fn fractional_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {bad}")));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &slot in &idx[i..=j] {
            ranks[slot] = avg;
        }
        i = j + 1;
    }
    Ok(ranks)
}

// ---------------------------------------------------------------------------
// Batch selection
// ---------------------------------------------------------------------------

/// Result of a batch selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub ids: BTreeSet<SampleId>,
    /// True when fewer candidates than requested were available.
    pub exhausted: bool,
}

fn check_scores(scores: &[f64], candidates: &[SampleId]) -> Result<()> {
    if scores.len() != candidates.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: candidates.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {bad}")));
    }
    Ok(())
}

/// Candidate indices ordered by (score descending, id ascending).
fn descending_order(scores: &[f64], candidates: &[SampleId]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(candidates[a].cmp(&candidates[b]))
    });
    idx
}

/// Select the `n` highest-scored candidates (ties broken by smaller id).
/// In randomized mode, draw `n` uniformly from the `2n` highest-scored.
/// If fewer than `n` candidates exist, all are selected and the result is
/// flagged exhausted.
pub fn select_batch(
    scores: &[f64],
    candidates: &[SampleId],
    n: usize,
    randomized_top2n: bool,
    rng_seed: u64,
) -> Result<Selection> {
    check_scores(scores, candidates)?;
    if n >= candidates.len() {
        return Ok(Selection {
            ids: candidates.iter().copied().collect(),
            exhausted: n > candidates.len(),
        });
    }
    let order = descending_order(scores, candidates);
    let ids = if randomized_top2n {
        let pool = &order[..(2 * n).min(order.len())];
        let mut rng = rng_for(rng_seed, STREAM_RANDOM_POLICY, 1);
        rand::seq::index::sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| candidates[pool[i]])
            .collect()
    } else {
        order[..n].iter().map(|&i| candidates[i]).collect()
    };
    Ok(Selection {
        ids,
        exhausted: false,
    })
}

/// Select the `n_d` lowest-scored labeled samples for deletion (ties by
/// smaller id), or a uniform draw of `n_d` from the bottom `2·n_d` in
/// randomized mode. Deleting the entire pool is rejected.
pub fn select_deletion_batch(
    scores: &[f64],
    labeled: &[SampleId],
    n_d: usize,
    rng_seed: u64,
    randomized_top2n: bool,
) -> Result<BTreeSet<SampleId>> {
    check_scores(scores, labeled)?;
    if n_d == 0 {
        return Ok(BTreeSet::new());
    }
    if n_d >= labeled.len() {
        return Err(Error::InvalidConfig(format!(
            "deleting {n_d} of {} labeled samples would empty the pool",
            labeled.len()
        )));
    }
    let negated: Vec<f64> = scores.iter().map(|&s| -s).collect();
    let sel = select_batch(&negated, labeled, n_d, randomized_top2n, rng_seed)?;
    Ok(sel.ids)
}

// ---------------------------------------------------------------------------
// Policy specs
// ---------------------------------------------------------------------------

/// Declarative description of a scoring strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Replace exact top-n selection by a uniform draw of n from the top 2n.
    pub randomized_top2n: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    /// Shannon entropy of the committee-mean class distribution.
    Entropy,
    /// Cosine distance from the labeled pool's mean feature vector.
    Diversity,
    /// Variance of committee predictions (regression).
    Variance,
    /// Mean KL to the committee-average distribution (classification).
    Jsd,
    /// Committee-mean predicted affinity (exploitation).
    Greedy,
    /// Uniform random scores.
    Random,
    /// Batch split between sub-policies, each selecting `count` samples
    /// in order over the not-yet-selected candidates.
    Hybrid(Vec<(PolicySpec, usize)>),
    /// Weighted sum of per-component fractional ranks.
    RankEnsemble(Vec<(PolicySpec, f64)>),
}

impl PolicySpec {
    pub fn simple(kind: PolicyKind) -> Self {
        Self {
            kind,
            randomized_top2n: false,
        }
    }

    /// Parse a spec string, e.g. `hybrid(greedy:32,variance:32)@rand2n`.
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse_full()
    }

    /// Check the policy can score the given task's samples.
    pub fn validate_for_task(&self, task: TaskKind) -> Result<()> {
        match &self.kind {
            PolicyKind::Entropy | PolicyKind::Jsd => {
                if task != TaskKind::Classification {
                    return Err(Error::Unsupported(format!(
                        "{} policy needs class distributions; the task is regression",
                        self.kind.name()
                    )));
                }
            }
            PolicyKind::Variance | PolicyKind::Greedy => {
                if task != TaskKind::Affinity {
                    return Err(Error::Unsupported(format!(
                        "{} policy needs regression outputs; the task is classification",
                        self.kind.name()
                    )));
                }
            }
            PolicyKind::Diversity | PolicyKind::Random => {}
            PolicyKind::Hybrid(parts) => {
                for (part, _) in parts {
                    part.validate_for_task(task)?;
                }
            }
            PolicyKind::RankEnsemble(parts) => {
                for (part, _) in parts {
                    part.validate_for_task(task)?;
                }
            }
        }
        Ok(())
    }

    /// For a hybrid, the batch size its part counts add up to.
    pub fn hybrid_total(&self) -> Option<usize> {
        match &self.kind {
            PolicyKind::Hybrid(parts) => Some(parts.iter().map(|(_, c)| c).sum()),
            _ => None,
        }
    }
}

impl PolicyKind {
    fn name(&self) -> &'static str {
        match self {
            PolicyKind::Entropy => "entropy",
            PolicyKind::Diversity => "diversity",
            PolicyKind::Variance => "variance",
            PolicyKind::Jsd => "jsd",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Random => "random",
            PolicyKind::Hybrid(_) => "hybrid",
            PolicyKind::RankEnsemble(_) => "rank_ensemble",
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PolicyKind::Hybrid(parts) => {
                write!(f, "hybrid(")?;
                for (i, (part, count)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{part}:{count}")?;
                }
                write!(f, ")")?;
            }
            PolicyKind::RankEnsemble(parts) => {
                write!(f, "rank_ensemble(")?;
                for (i, (part, weight)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{part}:{weight}")?;
                }
                write!(f, ")")?;
            }
            other => write!(f, "{}", other.name())?,
        }
        if self.randomized_top2n {
            write!(f, "@rand2n")?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::PolicySpec {
            position: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn parse_full(&mut self) -> Result<PolicySpec> {
        let spec = self.parse_spec()?;
        self.skip_ws();
        if !self.rest().is_empty() {
            return Err(self.error(format!("unexpected trailing input {:?}", self.rest())));
        }
        Ok(spec)
    }

    fn parse_spec(&mut self) -> Result<PolicySpec> {
        self.skip_ws();
        let ident = self.parse_ident()?;
        let kind = match ident.as_str() {
            "entropy" => PolicyKind::Entropy,
            "diversity" => PolicyKind::Diversity,
            "variance" => PolicyKind::Variance,
            "jsd" => PolicyKind::Jsd,
            "greedy" => PolicyKind::Greedy,
            "random" => PolicyKind::Random,
            "hybrid" => {
                let parts = self.parse_parts()?;
                let mut counted = Vec::with_capacity(parts.len());
                for (spec, value) in parts {
                    if value.fract() != 0.0 || value < 1.0 {
                        return Err(self.error(format!(
                            "hybrid counts must be positive integers, got {value}"
                        )));
                    }
                    counted.push((spec, value as usize));
                }
                PolicyKind::Hybrid(counted)
            }
            "rank_ensemble" => {
                let parts = self.parse_parts()?;
                for (_, weight) in &parts {
                    if !weight.is_finite() || *weight <= 0.0 {
                        return Err(self.error(format!(
                            "rank_ensemble weights must be positive, got {weight}"
                        )));
                    }
                }
                PolicyKind::RankEnsemble(parts)
            }
            other => {
                return Err(self.error(format!(
                    "unknown policy {other:?} (expected entropy, diversity, variance, jsd, \
                     greedy, random, hybrid, rank_ensemble)"
                )))
            }
        };
        let randomized = self.eat("@rand2n");
        Ok(PolicySpec {
            kind,
            randomized_top2n: randomized,
        })
    }

    fn parse_ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .rest()
            .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected a policy name"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn parse_parts(&mut self) -> Result<Vec<(PolicySpec, f64)>> {
        if !self.eat("(") {
            return Err(self.error("expected '(' after composite policy name"));
        }
        let mut parts = Vec::new();
        loop {
            let spec = self.parse_spec()?;
            if !self.eat(":") {
                return Err(self.error("expected ':' between policy and its count/weight"));
            }
            let value = self.parse_number()?;
            parts.push((spec, value));
            if self.eat(",") {
                continue;
            }
            if self.eat(")") {
                break;
            }
            return Err(self.error("expected ',' or ')' in part list"));
        }
        if parts.is_empty() {
            return Err(self.error("composite policy needs at least one part"));
        }
        Ok(parts)
    }

    fn parse_number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self
            .rest()
            .starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == '-' || c == '+')
        {
            self.pos += 1;
        }
        self.text[start..self.pos]
            .parse()
            .map_err(|_| self.error(format!("invalid number {:?}", &self.text[start..self.pos])))
    }
}

// ---------------------------------------------------------------------------
// Policy evaluation over candidates
// ---------------------------------------------------------------------------

/// Everything a policy needs to score candidates. Immutable, so scoring can
/// fan out across workers; chunked and serial evaluation agree exactly.
pub struct ScoreContext<'a> {
    pub dataset: &'a Dataset,
    pub committee: &'a Committee,
    /// The current labeled pool (diversity is measured from its center).
    pub labeled: &'a [SampleId],
}

// Sub-streams for nested policy seeds.
const SUB_PART_SCORE: u64 = 21;
const SUB_PART_SELECT: u64 = 22;

/// Score candidates with a single policy, resolving composites to one score
/// vector: rank ensembles take the weighted rank sum, and a hybrid is scored
/// as a rank ensemble weighted by its part counts (its "combined rank"
/// orientation, used for deletion and nesting).
pub fn policy_scores(
    spec: &PolicySpec,
    ctx: &ScoreContext<'_>,
    candidates: &[SampleId],
    rng_seed: u64,
) -> Result<Vec<f64>> {
    match &spec.kind {
        PolicyKind::Entropy => candidates
            .iter()
            .map(|&id| entropy_score(&ctx.committee.mean_probability(sample_ref(ctx.dataset, id)?)?))
            .collect(),
        PolicyKind::Diversity => {
            let backbone = &ctx.committee.members[0];
            let center = mean_feature(backbone, ctx.labeled, ctx.dataset)?;
            candidates
                .iter()
                .map(|&id| {
                    let f = backbone.features(sample_ref(ctx.dataset, id)?)?;
                    match diversity_score(&f, &center) {
                        Ok(d) => Ok(d),
                        // Zero-norm vectors count as sitting at the center.
                        Err(Error::UndefinedDistance) => Ok(0.0),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        }
        PolicyKind::Variance => candidates
            .iter()
            .map(|&id| {
                variance_uncertainty(&ctx.committee.predictions(sample_ref(ctx.dataset, id)?)?)
            })
            .collect(),
        PolicyKind::Jsd => candidates
            .iter()
            .map(|&id| jsd_uncertainty(&ctx.committee.probabilities(sample_ref(ctx.dataset, id)?)?))
            .collect(),
        PolicyKind::Greedy => candidates
            .iter()
            .map(|&id| greedy_score(ctx.committee, ctx.dataset, id))
            .collect(),
        PolicyKind::Random => {
            let mut rng = rng_for(rng_seed, STREAM_RANDOM_POLICY, 0);
            Ok(candidates.iter().map(|_| rng.gen::<f64>()).collect())
        }
        PolicyKind::Hybrid(parts) => {
            let components = parts
                .iter()
                .enumerate()
                .map(|(i, (part, count))| {
                    let seed = mix_seed(rng_seed, SUB_PART_SCORE, i as u64);
                    Ok((policy_scores(part, ctx, candidates, seed)?, *count as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            rank_ensemble(&components)
        }
        PolicyKind::RankEnsemble(parts) => {
            let components = parts
                .iter()
                .enumerate()
                .map(|(i, (part, weight))| {
                    let seed = mix_seed(rng_seed, SUB_PART_SCORE, i as u64);
                    Ok((policy_scores(part, ctx, candidates, seed)?, *weight))
                })
                .collect::<Result<Vec<_>>>()?;
            rank_ensemble(&components)
        }
    }
}

/// Select an addition batch of `n` from the unlabeled candidates.
///
/// A hybrid resolves its parts in listed order, each part selecting its
/// count from the candidates the earlier parts left behind, so the halves
/// are disjoint. Other policies reduce to a single score vector and take
/// the top n.
pub fn select_addition(
    spec: &PolicySpec,
    ctx: &ScoreContext<'_>,
    candidates: &[SampleId],
    n: usize,
    rng_seed: u64,
) -> Result<Selection> {
    if candidates.len() <= n {
        return Ok(Selection {
            ids: candidates.iter().copied().collect(),
            exhausted: candidates.len() < n,
        });
    }
    match &spec.kind {
        PolicyKind::Hybrid(parts) => {
            let total: usize = parts.iter().map(|(_, c)| c).sum();
            if total != n {
                return Err(Error::InvalidConfig(format!(
                    "hybrid part counts sum to {total}, batch size is {n}"
                )));
            }
            let mut remaining: Vec<SampleId> = candidates.to_vec();
            let mut ids = BTreeSet::new();
            let mut exhausted = false;
            for (i, (part, count)) in parts.iter().enumerate() {
                if remaining.is_empty() {
                    exhausted = true;
                    break;
                }
                let take = (*count).min(remaining.len());
                exhausted |= take < *count;
                let scores = policy_scores(
                    part,
                    ctx,
                    &remaining,
                    mix_seed(rng_seed, SUB_PART_SCORE, i as u64),
                )?;
                let sel = select_batch(
                    &scores,
                    &remaining,
                    take,
                    part.randomized_top2n || spec.randomized_top2n,
                    mix_seed(rng_seed, SUB_PART_SELECT, i as u64),
                )?;
                remaining.retain(|id| !sel.ids.contains(id));
                ids.extend(sel.ids);
            }
            Ok(Selection { ids, exhausted })
        }
        _ => {
            let scores = policy_scores(spec, ctx, candidates, rng_seed)?;
            select_batch(
                &scores,
                candidates,
                n,
                spec.randomized_top2n,
                mix_seed(rng_seed, SUB_PART_SELECT, u64::MAX),
            )
        }
    }
}

/// Select a deletion batch: score the labeled pool with the policy's
/// combined orientation and remove the lowest.
pub fn select_deletion(
    spec: &PolicySpec,
    ctx: &ScoreContext<'_>,
    labeled: &[SampleId],
    n_d: usize,
    rng_seed: u64,
) -> Result<BTreeSet<SampleId>> {
    if n_d == 0 {
        return Ok(BTreeSet::new());
    }
    let scores = policy_scores(spec, ctx, labeled, rng_seed)?;
    select_deletion_batch(
        &scores,
        labeled,
        n_d,
        mix_seed(rng_seed, SUB_PART_SELECT, u64::MAX),
        spec.randomized_top2n,
    )
}
