//! Sequential evidence accumulation over the three response hypotheses.
//!
//! Each answer contributes a likelihood under Guess, Veridical and
//! Perceiver. Evidence is kept as summed log-likelihoods and the posterior
//! is recomputed from them, so it never underflows and the same answers in
//! the same order always give the same bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::items::QuestionItem;
use crate::stimulus::{BiasModel, Difficulty, IllusionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Guess,
    Veridical,
    Perceiver,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 3] = [Hypothesis::Guess, Hypothesis::Veridical, Hypothesis::Perceiver];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictLabel {
    Perceiver,
    Veridical,
    Guess,
    Inconclusive,
}

impl From<Hypothesis> for VerdictLabel {
    fn from(h: Hypothesis) -> Self {
        match h {
            Hypothesis::Guess => VerdictLabel::Guess,
            Hypothesis::Veridical => VerdictLabel::Veridical,
            Hypothesis::Perceiver => VerdictLabel::Perceiver,
        }
    }
}

impl std::fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerdictLabel::Perceiver => "perceiver",
            VerdictLabel::Veridical => "veridical",
            VerdictLabel::Guess => "guess",
            VerdictLabel::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("answer index {index} out of range for {k} choices")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("every hypothesis assigns zero probability to the observations")]
    DegenerateUpdate,
    #[error("no scored items in session")]
    EmptySession,
}

fn default_kinds() -> Vec<IllusionKind> {
    IllusionKind::ALL.to_vec()
}

/// Everything that shapes a session: prior, lapse rate, stopping rule,
/// item mix and the seed that drives item generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    /// Prior over (Guess, Veridical, Perceiver).
    pub prior: [f64; 3],
    pub lapse_epsilon: f64,
    pub tau: f64,
    pub n_max: u32,
    pub catch_ratio_milli: u32,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<IllusionKind>,
    pub master_seed: u64,
    pub difficulty: Difficulty,
    pub bias: BiasModel,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            prior: [1.0 / 3.0; 3],
            lapse_epsilon: 0.05,
            tau: 0.99,
            n_max: 50,
            catch_ratio_milli: 250,
            kinds: default_kinds(),
            master_seed: 0,
            difficulty: Difficulty::Standard,
            bias: BiasModel::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: String| Err(InferenceError::ConfigInvalid(m));
        if self.prior.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad(format!("prior {:?} has a negative or non-finite component", self.prior));
        }
        let sum: f64 = self.prior.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return bad(format!("prior sums to {sum}, not 1"));
        }
        if !(0.0..0.5).contains(&self.lapse_epsilon) {
            return bad(format!("lapse_epsilon {} outside [0, 0.5)", self.lapse_epsilon));
        }
        if !(self.tau > 0.5 && self.tau < 1.0) {
            return bad(format!("tau {} outside (0.5, 1)", self.tau));
        }
        if self.prior.iter().any(|p| *p >= self.tau) {
            return bad("a prior component already reaches tau".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be positive".into());
        }
        if self.catch_ratio_milli > 1000 {
            return bad("catch_ratio_milli above 1000".into());
        }
        if self.kinds.is_empty() {
            return bad("no illusion kinds enabled".into());
        }
        self.bias.validate().map_err(|e| InferenceError::ConfigInvalid(e.to_string()))
    }
}

/// Belief over (Guess, Veridical, Perceiver) after `n_observed` answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub probs: [f64; 3],
    pub n_observed: u32,
    /// Summed log-likelihood of all answers under each hypothesis. An
    /// answer impossible under a hypothesis makes its entry -inf, written
    /// as `null` in JSON.
    #[serde(with = "log_evidence_json")]
    pub log_evidence: [f64; 3],
    prior: [f64; 3],
}

mod log_evidence_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; 3], s: S) -> Result<S::Ok, S::Error> {
        v.map(|x| (x != f64::NEG_INFINITY).then_some(x)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 3], D::Error> {
        Ok(<[Option<f64>; 3]>::deserialize(d)?.map(|x| x.unwrap_or(f64::NEG_INFINITY)))
    }
}

impl Posterior {
    pub fn from_prior(prior: [f64; 3]) -> Self {
        Self { probs: prior, n_observed: 0, log_evidence: [0.0; 3], prior }
    }

    pub fn prior(&self) -> [f64; 3] {
        self.prior
    }

    pub fn prob(&self, h: Hypothesis) -> f64 {
        self.probs[h.index()]
    }

    /// Most probable hypothesis; ties go to the earlier one in
    /// (Guess, Veridical, Perceiver) order.
    pub fn argmax(&self) -> Hypothesis {
        let mut best = Hypothesis::Guess;
        for h in Hypothesis::ALL {
            if self.probs[h.index()] > self.probs[best.index()] {
                best = h;
            }
        }
        best
    }
}

/// Probability of `answer_idx` under each hypothesis.
pub fn item_likelihoods(item: &QuestionItem, answer_idx: usize, epsilon: f64) -> Result<[f64; 3], InferenceError> {
    likelihoods(item.k, item.veridical_idx, item.illusion_idx, answer_idx, epsilon)
}

pub fn likelihoods(
    k: usize,
    veridical_idx: usize,
    illusion_idx: usize,
    answer_idx: usize,
    epsilon: f64,
) -> Result<[f64; 3], InferenceError> {
    if answer_idx >= k {
        return Err(InferenceError::IndexOutOfRange { index: answer_idx, k });
    }
    let kf = k as f64;
    let hit = |idx: usize| if answer_idx == idx { 1.0 - epsilon } else { 0.0 };
    Ok([1.0 / kf, hit(veridical_idx) + epsilon / kf, hit(illusion_idx) + epsilon / kf])
}

pub fn update_posterior(post: &Posterior, likes: [f64; 3]) -> Result<Posterior, InferenceError> {
    if likes.iter().any(|l| !l.is_finite() || *l < 0.0) || likes.iter().all(|l| *l == 0.0) {
        return Err(InferenceError::DegenerateUpdate);
    }
    let mut log_evidence = post.log_evidence;
    for (acc, l) in log_evidence.iter_mut().zip(likes) {
        *acc += l.ln();
    }
    let probs = normalize(post.prior, log_evidence)?;
    Ok(Posterior { probs, n_observed: post.n_observed + 1, log_evidence, prior: post.prior })
}

fn normalize(prior: [f64; 3], log_evidence: [f64; 3]) -> Result<[f64; 3], InferenceError> {
    let mut logs = [0.0; 3];
    for i in 0..3 {
        logs[i] = prior[i].ln() + log_evidence[i];
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(InferenceError::DegenerateUpdate);
    }
    let w = logs.map(|l| (l - max).exp());
    let total: f64 = w.iter().sum();
    Ok(w.map(|x| x / total))
}

/// Exact `P(X >= observed)` where X is a sum of independent Bernoulli
/// variables with the given success probabilities.
pub fn guess_pvalue(match_probs: &[f64], observed_matches: usize) -> Result<f64, InferenceError> {
    if match_probs.is_empty() {
        return Err(InferenceError::EmptySession);
    }
    if observed_matches == 0 {
        return Ok(1.0);
    }
    if observed_matches > match_probs.len() {
        return Ok(0.0);
    }
    // dist[j] = P(j successes so far)
    let mut dist = vec![0.0; match_probs.len() + 1];
    dist[0] = 1.0;
    for (i, &p) in match_probs.iter().enumerate() {
        for j in (0..=i + 1).rev() {
            let stay = dist[j] * (1.0 - p);
            let step = if j > 0 { dist[j - 1] * p } else { 0.0 };
            dist[j] = stay + step;
        }
    }
    Ok(dist[observed_matches..].iter().sum::<f64>().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Verdict(VerdictLabel),
}

pub fn stopping_decision(post: &Posterior, cfg: &TestConfig) -> Decision {
    for h in Hypothesis::ALL {
        if post.prob(h) >= cfg.tau {
            return Decision::Verdict(h.into());
        }
    }
    if post.n_observed >= cfg.n_max {
        Decision::Verdict(VerdictLabel::Inconclusive)
    } else {
        Decision::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform() -> Posterior {
        Posterior::from_prior(TestConfig::default().prior)
    }

    #[test]
    fn likelihood_examples() {
        let l = likelihoods(4, 0, 2, 2, 0.05).unwrap();
        assert_eq!(l[0], 0.25);
        assert!((l[1] - 0.0125).abs() < 1e-15);
        assert!((l[2] - 0.9625).abs() < 1e-15);
        let l = likelihoods(4, 0, 2, 0, 0.05).unwrap();
        assert!((l[1] - 0.9625).abs() < 1e-15 && (l[2] - 0.0125).abs() < 1e-15);
        let l = likelihoods(4, 1, 1, 1, 0.05).unwrap();
        assert_eq!(l[1], l[2]);
        assert_eq!(likelihoods(4, 0, 1, 4, 0.05), Err(InferenceError::IndexOutOfRange { index: 4, k: 4 }));
    }

    #[test]
    fn single_update_matches_hand_arithmetic() {
        let p = update_posterior(&uniform(), [0.25, 0.0125, 0.9625]).unwrap();
        assert!((p.probs[2] - 0.9625 / 1.225).abs() < 1e-12);
        assert!((p.probs[2] - 0.785714).abs() < 1e-6);
        assert_eq!(p.n_observed, 1);
    }

    #[test]
    fn flat_likelihood_leaves_posterior_unchanged() {
        let start = update_posterior(&uniform(), [0.25, 0.0125, 0.9625]).unwrap();
        let after = update_posterior(&start, [0.3, 0.3, 0.3]).unwrap();
        for i in 0..3 {
            assert!((after.probs[i] - start.probs[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_likelihoods_are_degenerate() {
        assert_eq!(update_posterior(&uniform(), [0.0; 3]), Err(InferenceError::DegenerateUpdate));
    }

    #[test]
    fn ideal_perceiver_crosses_tau_on_fourth_match() {
        let cfg = TestConfig::default();
        let mut p = uniform();
        let expected = |m: i32| {
            let a = 0.9625f64.powi(m);
            a / (a + 0.25f64.powi(m) + 0.0125f64.powi(m))
        };
        for m in 1..=4 {
            p = update_posterior(&p, likelihoods(4, 0, 1, 1, 0.05).unwrap()).unwrap();
            assert!((p.probs[2] - expected(m)).abs() < 1e-12);
            let d = stopping_decision(&p, &cfg);
            if m < 4 {
                assert_eq!(d, Decision::Continue);
            } else {
                assert_eq!(d, Decision::Verdict(VerdictLabel::Perceiver));
            }
        }
        assert!((expected(3) - 0.982).abs() < 1e-3);
        assert!((expected(4) - 0.99547).abs() < 1e-5);
    }

    #[test]
    fn stopping_examples() {
        let cfg = TestConfig::default();
        let mut p = uniform();
        p.probs = [0.002, 0.003, 0.995];
        assert_eq!(stopping_decision(&p, &cfg), Decision::Verdict(VerdictLabel::Perceiver));
        p.probs = [0.01, 0.01, 0.98];
        assert_eq!(stopping_decision(&p, &cfg), Decision::Continue);
        p.probs = [0.3, 0.3, 0.4];
        p.n_observed = cfg.n_max;
        assert_eq!(stopping_decision(&p, &cfg), Decision::Verdict(VerdictLabel::Inconclusive));
    }

    #[test]
    fn pvalue_examples() {
        assert!((guess_pvalue(&[0.25; 10], 10).unwrap() - 0.25f64.powi(10)).abs() < 1e-18);
        assert!((guess_pvalue(&[0.25; 10], 10).unwrap() - 9.5367e-7).abs() < 1e-10);
        // patterns with >= 2 of (0.5, 0.25, 0.25): 0.5*0.25*0.75*2 + 0.5*0.25*0.25 + 0.5*0.25*0.25
        let by_hand: f64 = 0.5 * 0.25 * 0.75 * 2.0 + 0.5 * 0.25 * 0.25 + 0.5 * 0.25 * 0.25;
        assert!((by_hand - 0.25).abs() < 1e-15);
        assert!((guess_pvalue(&[0.5, 0.25, 0.25], 2).unwrap() - by_hand).abs() < 1e-15);
        assert_eq!(guess_pvalue(&[0.25, 0.5], 0).unwrap(), 1.0);
        assert_eq!(guess_pvalue(&[], 0), Err(InferenceError::EmptySession));
    }

    #[test]
    fn config_validation() {
        assert!(TestConfig::default().validate().is_ok());
        let mut c = TestConfig::default();
        c.prior = [0.5, 0.3, 0.3];
        assert!(matches!(c.validate(), Err(InferenceError::ConfigInvalid(_))));
        let mut c = TestConfig::default();
        c.tau = 0.3;
        assert!(c.validate().is_err());
        let mut c = TestConfig::default();
        c.prior = [0.005, 0.005, 0.99];
        assert!(c.validate().is_err());
        let mut c = TestConfig::default();
        c.lapse_epsilon = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_fills_defaults() {
        let c: TestConfig = serde_json::from_str(r#"{"tau":0.95}"#).unwrap();
        assert_eq!(c.tau, 0.95);
        assert_eq!(c.n_max, 50);
        assert_eq!(c.kinds.len(), 6);
    }

    #[test]
    fn impossible_answer_survives_json() {
        let likes = likelihoods(4, 0, 1, 1, 0.0).unwrap();
        let post = update_posterior(&Posterior::from_prior([1.0 / 3.0; 3]), likes).unwrap();
        assert_eq!(post.log_evidence[1], f64::NEG_INFINITY);
        let text = serde_json::to_string(&post).unwrap();
        assert!(text.contains("null"));
        let back: Posterior = serde_json::from_str(&text).unwrap();
        assert_eq!(back, post);
    }

    proptest! {
        #[test]
        fn posterior_stays_normalized(answers in proptest::collection::vec((2usize..=6, 0usize..6, 0usize..6, 0usize..6), 1..200),
                                       eps in 0.0f64..0.49) {
            let mut p = uniform();
            for (k, v, i, a) in answers {
                let l = likelihoods(k, v % k, i % k, a % k, eps).unwrap();
                p = update_posterior(&p, l).unwrap();
                let s: f64 = p.probs.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(p.probs.iter().all(|x| *x >= 0.0));
            }
        }

        #[test]
        fn order_does_not_matter(answers in proptest::collection::vec((2usize..=6, 0usize..6, 0usize..6, 0usize..6), 1..60),
                                 seed in any::<u64>()) {
            let likes: Vec<[f64; 3]> = answers
                .iter()
                .map(|&(k, v, i, a)| likelihoods(k, v % k, i % k, a % k, 0.05).unwrap())
                .collect();
            let mut shuffled = likes.clone();
            crate::rng::DetRng::new("test-order", &[seed]).shuffle(&mut shuffled);
            let run = |ls: &[[f64; 3]]| ls.iter().fold(uniform(), |p, l| update_posterior(&p, *l).unwrap());
            let (a, b) = (run(&likes), run(&shuffled));
            for i in 0..3 {
                prop_assert!((a.probs[i] - b.probs[i]).abs() < 1e-9);
            }
        }
    }
}
