//! Client selection: per-client attention scores that double as the
//! selection distribution, weighted sampling without replacement, and the
//! dynamic client-fraction schedule.

use rand::Rng;

use crate::error::{Error, Result};

/// Per-client attention scores.
///
/// The scores form a stochastic vector (positive, summing to one) and are
/// used directly as the client-selection distribution. Updates move
/// probability mass only among the clients selected in a round, so the
/// vector stays stochastic without renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    scores: Vec<f64>,
    round: usize,
}

impl AttentionState {
    /// Initial scores proportional to the local dataset sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidConfig(
                "attention state needs at least one client".into(),
            ));
        }
        if let Some(pos) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidData(format!(
                "client {pos} has an empty local dataset"
            )));
        }
        let total: f64 = sizes.iter().map(|&n| n as f64).sum();
        Ok(Self {
            scores: sizes.iter().map(|&n| n as f64 / total).collect(),
            round: 1,
        })
    }

    pub fn num_clients(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Round the scores currently apply to (starts at 1, advances per update).
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn min_score(&self) -> f64 {
        self.scores.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Shannon entropy of the score distribution, in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .scores
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Redistribute the selected clients' probability mass in proportion to
    /// their model divergences, keeping a fraction `alpha` of each previous
    /// score:
    ///
    /// `a_i ← alpha·a_i + (1 − alpha)·(d_i / Σd)·Σ_selected a`
    ///
    /// Unselected scores are untouched, and the selected subset's total mass
    /// is conserved, so the vector stays stochastic. When every distance is
    /// zero the locals were identical and carry no ranking signal; the
    /// update is skipped and the scores kept.
    pub fn update(&mut self, selected: &[usize], distances: &[f64], alpha: f64) -> Result<()> {
        if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        if selected.is_empty() {
            return Err(Error::InvalidSelection(
                "attention update needs at least one selected client".into(),
            ));
        }
        if selected.len() != distances.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} selected clients but {} distances",
                selected.len(),
                distances.len()
            )));
        }
        let m = self.scores.len();
        let mut seen = vec![false; m];
        for &i in selected {
            if i >= m {
                return Err(Error::InvalidSelection(format!(
                    "client index {i} out of range for {m} clients"
                )));
            }
            if seen[i] {
                return Err(Error::InvalidSelection(format!(
                    "client {i} selected twice"
                )));
            }
            seen[i] = true;
        }
        for &d in distances {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidData(format!(
                    "distances must be finite and nonnegative, got {d}"
                )));
            }
        }

        self.round += 1;
        let total_distance: f64 = distances.iter().sum();
        if total_distance == 0.0 {
            return Ok(());
        }
        let selected_mass: f64 = selected.iter().map(|&i| self.scores[i]).sum();
        for (&i, &d) in selected.iter().zip(distances) {
            self.scores[i] =
                alpha * self.scores[i] + (1.0 - alpha) * (d / total_distance) * selected_mass;
        }
        Ok(())
    }

    /// Draw `k` distinct clients by successive weighted draws without
    /// replacement: after each draw the drawn client's mass is removed and
    /// the remainder renormalized. Deterministic given the rng state.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<SelectionOutcome> {
        let m = self.scores.len();
        if k == 0 || k > m {
            return Err(Error::InvalidConfig(format!(
                "cohort size {k} outside [1, {m}]"
            )));
        }
        let mut taken = vec![false; m];
        let mut selected = Vec::with_capacity(k);
        for _ in 0..k {
            let remaining: f64 = self
                .scores
                .iter()
                .zip(&taken)
                .filter(|&(_, &t)| !t)
                .map(|(&w, _)| w)
                .sum();
            let pick = if remaining > 0.0 {
                let u = rng.random_range(0.0..remaining);
                let mut acc = 0.0;
                let mut choice = None;
                for (i, (&w, &t)) in self.scores.iter().zip(&taken).enumerate() {
                    if t {
                        continue;
                    }
                    acc += w;
                    if u < acc {
                        choice = Some(i);
                        break;
                    }
                }
                // float leftovers: fall back to the last untaken index
                choice.unwrap_or_else(|| {
                    (0..m)
                        .rev()
                        .find(|&i| !taken[i])
                        .expect("k <= m leaves an untaken index")
                })
            } else {
                // no mass left; take the lowest untaken index
                (0..m)
                    .find(|&i| !taken[i])
                    .expect("k <= m leaves an untaken index")
            };
            taken[pick] = true;
            selected.push(pick);
        }
        Ok(SelectionOutcome { selected })
    }
}

/// Distinct client indices in draw order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOutcome {
    selected: Vec<usize>,
}

impl SelectionOutcome {
    pub fn indices(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Indices in ascending order (the deterministic reduction order).
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.selected.clone();
        v.sort_unstable();
        v
    }
}

/// Monotone nondecreasing step schedule of the client fraction over rounds.
///
/// The `total_rounds` are split into `num_fractions` blocks of
/// `⌊total_rounds / num_fractions⌋` rounds each, the final block absorbing
/// any remainder. Block `b` (1-based) uses fraction
/// `gamma_start + (b − 1)·gamma_step` where
/// `gamma_step = (gamma_end − gamma_start) / (num_fractions − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionSchedule {
    gamma_start: f64,
    gamma_end: f64,
    num_fractions: usize,
    total_rounds: usize,
    rounds_per_block: usize,
    gamma_step: f64,
}

impl FractionSchedule {
    pub fn new(
        gamma_start: f64,
        gamma_end: f64,
        num_fractions: usize,
        total_rounds: usize,
    ) -> Result<Self> {
        for (name, g) in [("gamma_start", gamma_start), ("gamma_end", gamma_end)] {
            if !g.is_finite() || g <= 0.0 || g >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1), got {g}"
                )));
            }
        }
        if gamma_end < gamma_start {
            return Err(Error::InvalidConfig(format!(
                "decreasing schedules are not supported (gamma_start {gamma_start} > gamma_end {gamma_end})"
            )));
        }
        if num_fractions == 0 {
            return Err(Error::InvalidConfig("num_fractions must be >= 1".into()));
        }
        if total_rounds < num_fractions {
            return Err(Error::InvalidConfig(format!(
                "total_rounds ({total_rounds}) must be >= num_fractions ({num_fractions})"
            )));
        }
        if num_fractions == 1 && gamma_start != gamma_end {
            return Err(Error::InvalidConfig(
                "a single-fraction schedule requires gamma_start == gamma_end".into(),
            ));
        }
        let gamma_step = if num_fractions > 1 {
            (gamma_end - gamma_start) / (num_fractions - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            gamma_start,
            gamma_end,
            num_fractions,
            total_rounds,
            rounds_per_block: total_rounds / num_fractions,
            gamma_step,
        })
    }

    /// The fraction used in round `round` (1-based). Round `t` belongs to
    /// block `⌈t / rounds_per_block⌉`, capped at the final block.
    pub fn fraction_at(&self, round: usize) -> Result<f64> {
        if round == 0 || round > self.total_rounds {
            return Err(Error::InvalidConfig(format!(
                "round {round} outside [1, {}]",
                self.total_rounds
            )));
        }
        let block = round
            .div_ceil(self.rounds_per_block)
            .min(self.num_fractions);
        Ok(self.gamma_start + (block - 1) as f64 * self.gamma_step)
    }

    pub fn gamma_start(&self) -> f64 {
        self.gamma_start
    }

    pub fn gamma_end(&self) -> f64 {
        self.gamma_end
    }

    /// Fraction increment between consecutive blocks.
    pub fn gamma_step(&self) -> f64 {
        self.gamma_step
    }

    /// Rounds per block (the final block absorbs any remainder).
    pub fn rounds_per_block(&self) -> usize {
        self.rounds_per_block
    }

    pub fn num_fractions(&self) -> usize {
        self.num_fractions
    }

    pub fn total_rounds(&self) -> usize {
        self.total_rounds
    }

    /// `(first_round, last_round, fraction)` for each block, in order.
    pub fn blocks(&self) -> Vec<(usize, usize, f64)> {
        (1..=self.num_fractions)
            .map(|b| {
                let first = (b - 1) * self.rounds_per_block + 1;
                let last = if b == self.num_fractions {
                    self.total_rounds
                } else {
                    b * self.rounds_per_block
                };
                let gamma = self.gamma_start + (b - 1) as f64 * self.gamma_step;
                (first, last, gamma)
            })
            .collect()
    }
}

/// Number of clients a fraction selects: `round(gamma·m)` clamped to `[1, m]`.
pub fn cohort_size(gamma: f64, m: usize) -> usize {
    ((gamma * m as f64).round() as usize).clamp(1, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_normalizes_sizes() {
        let state = AttentionState::from_sizes(&[600; 100]).unwrap();
        assert!(state.scores().iter().all(|&s| s == 1.0 / 100.0));
        assert_eq!(state.round(), 1);

        let state = AttentionState::from_sizes(&[1, 3]).unwrap();
        assert_eq!(state.scores(), &[0.25, 0.75]);

        let state = AttentionState::from_sizes(&[42]).unwrap();
        assert_eq!(state.scores(), &[1.0]);

        assert!(AttentionState::from_sizes(&[]).is_err());
        assert!(AttentionState::from_sizes(&[5, 0, 3]).is_err());
    }

    #[test]
    fn update_reproduces_hand_example() {
        // scores [0.5, 0.3, 0.2], clients 0 and 1 selected with distances
        // [3, 1], alpha 0.9: selected mass 0.8, shares 0.75/0.25
        //   a0 = 0.9*0.5 + 0.1*0.75*0.8 = 0.51
        //   a1 = 0.9*0.3 + 0.1*0.25*0.8 = 0.29
        let mut state = AttentionState::from_sizes(&[5, 3, 2]).unwrap();
        assert_eq!(state.scores(), &[0.5, 0.3, 0.2]);
        state.update(&[0, 1], &[3.0, 1.0], 0.9).unwrap();
        let s = state.scores();
        assert!((s[0] - 0.51).abs() < 1e-12);
        assert!((s[1] - 0.29).abs() < 1e-12);
        assert_eq!(s[2], 0.2);
        assert_eq!(state.round(), 2);
    }

    #[test]
    fn update_with_alpha_near_one_keeps_scores() {
        // the (1 - alpha) term vanishes in the alpha -> 1 limit
        let mut state = AttentionState::from_sizes(&[5, 3, 2]).unwrap();
        let before = state.scores().to_vec();
        let alpha = 1.0 - f64::EPSILON / 2.0; // largest f64 below 1
        state.update(&[0, 2], &[7.0, 1.0], alpha).unwrap();
        for (a, b) in state.scores().iter().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn update_with_equal_distances_splits_mass_evenly() {
        // equal distances: each selected score becomes
        // alpha*a_i + (1 - alpha) * selected_mass / K
        let mut state = AttentionState::from_sizes(&[1, 2, 3, 4]).unwrap();
        let before = state.scores().to_vec();
        let selected = [1, 3];
        let mass: f64 = selected.iter().map(|&i| before[i]).sum();
        let alpha = 0.6;
        state.update(&selected, &[2.5, 2.5], alpha).unwrap();
        for &i in &selected {
            let expected = alpha * before[i] + (1.0 - alpha) * mass / 2.0;
            assert!((state.scores()[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn update_skips_on_all_zero_distances() {
        let mut state = AttentionState::from_sizes(&[1, 2, 3]).unwrap();
        let before = state.scores().to_vec();
        state.update(&[0, 1], &[0.0, 0.0], 0.9).unwrap();
        assert_eq!(state.scores(), &before[..]);
        assert_eq!(state.round(), 2);
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let mut state = AttentionState::from_sizes(&[1, 2, 3]).unwrap();
        assert!(state.update(&[0], &[1.0], 1.0).is_err());
        assert!(state.update(&[0], &[1.0], -0.1).is_err());
        assert!(state.update(&[0], &[-1.0], 0.9).is_err());
        assert!(state.update(&[0], &[f64::NAN], 0.9).is_err());
        assert!(state.update(&[0, 0], &[1.0, 1.0], 0.9).is_err());
        assert!(state.update(&[7], &[1.0], 0.9).is_err());
        assert!(state.update(&[0, 1], &[1.0], 0.9).is_err());
        assert!(state.update(&[], &[], 0.9).is_err());
    }

    proptest! {
        #[test]
        fn update_conserves_mass_and_leaves_unselected_untouched(
            seed in 0u64..1000,
            m in 2usize..30,
            alpha in 0.0f64..0.999,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sizes: Vec<usize> = (0..m).map(|_| rng.random_range(1..50)).collect();
            let mut state = AttentionState::from_sizes(&sizes).unwrap();
            let before = state.scores().to_vec();

            let k = rng.random_range(1..=m);
            let mut pool: Vec<usize> = (0..m).collect();
            let mut selected = Vec::with_capacity(k);
            for _ in 0..k {
                let j = rng.random_range(0..pool.len());
                selected.push(pool.swap_remove(j));
            }
            let distances: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();

            state.update(&selected, &distances, alpha).unwrap();

            let mass_before: f64 = selected.iter().map(|&i| before[i]).sum();
            let mass_after: f64 = selected.iter().map(|&i| state.scores()[i]).sum();
            prop_assert!((mass_after - mass_before).abs() < 1e-12);
            prop_assert!((state.scores().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (i, (&after, &prior)) in state.scores().iter().zip(&before).enumerate() {
                if !selected.contains(&i) {
                    prop_assert_eq!(after.to_bits(), prior.to_bits());
                }
            }
        }
    }

    #[test]
    fn scores_stay_positive_under_repeated_updates() {
        let mut state = AttentionState::from_sizes(&[1; 10]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5000 {
            let selected: Vec<usize> = {
                let k = rng.random_range(1..=10usize);
                let mut pool: Vec<usize> = (0..10).collect();
                (0..k)
                    .map(|_| pool.swap_remove(rng.random_range(0..pool.len())))
                    .collect()
            };
            let distances: Vec<f64> = (0..selected.len())
                .map(|_| rng.random_range(0.0..5.0))
                .collect();
            state.update(&selected, &distances, 0.9).unwrap();
        }
        assert!(state.scores().iter().all(|&s| s > 0.0));
        assert!((state.scores().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn larger_distance_wins_among_equal_priors() {
        let mut state = AttentionState::from_sizes(&[1; 4]).unwrap();
        state.update(&[0, 1, 2], &[1.0, 2.0, 5.0], 0.9).unwrap();
        let s = state.scores();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn sample_selects_everyone_when_k_equals_m() {
        let state = AttentionState::from_sizes(&[1, 100, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let outcome = state.sample(4, &mut rng).unwrap();
        assert_eq!(outcome.sorted(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn sample_never_repeats_and_respects_bounds() {
        let state = AttentionState::from_sizes(&[3, 1, 4, 1, 5, 9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let k = rng.random_range(1..=6usize);
            let outcome = state.sample(k, &mut rng).unwrap();
            let sorted = outcome.sorted();
            assert_eq!(sorted.len(), k);
            assert!(sorted.windows(2).all(|w| w[0] < w[1]));
            assert!(sorted.iter().all(|&i| i < 6));
        }
        assert!(state.sample(0, &mut rng).is_err());
        assert!(state.sample(7, &mut rng).is_err());
    }

    #[test]
    fn sample_is_deterministic_given_rng_state() {
        let state = AttentionState::from_sizes(&[2, 3, 5, 7]).unwrap();
        let a: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..50).map(|_| state.sample(2, &mut rng).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..50).map(|_| state.sample(2, &mut rng).unwrap()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn sample_marginals_match_scores_monte_carlo() {
        // K = 1: empirical frequency of each client tracks its score
        let state = AttentionState::from_sizes(&[5, 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = 10_000;
        let hits = (0..draws)
            .filter(|_| state.sample(1, &mut rng).unwrap().indices()[0] == 0)
            .count();
        let expected = draws as f64 * 0.5;
        let sigma = (draws as f64 * 0.5 * 0.5).sqrt();
        assert!(
            (hits as f64 - expected).abs() <= 3.0 * sigma,
            "{hits} hits vs expected {expected}"
        );
    }

    #[test]
    fn sample_tiny_score_frequency_matches_monte_carlo() {
        // one client with score epsilon: selection frequency ~ epsilon
        let sizes = [1usize, 9999];
        let state = AttentionState::from_sizes(&sizes).unwrap();
        let p = state.scores()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| state.sample(1, &mut rng).unwrap().indices()[0] == 0)
            .count();
        let expected = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (hits as f64 - expected).abs() <= 3.0 * sigma,
            "{hits} hits vs expected {expected} (sigma {sigma})"
        );
    }

    #[test]
    fn schedule_reproduces_reference_five_block_table() {
        let schedule = FractionSchedule::new(0.1, 0.5, 5, 1000).unwrap();
        assert!((schedule.gamma_step() - 0.1).abs() < 1e-15);
        assert_eq!(schedule.rounds_per_block(), 200);
        assert_eq!(schedule.fraction_at(1).unwrap(), 0.1);
        assert!((schedule.fraction_at(201).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(schedule.fraction_at(1000).unwrap(), 0.5);
        // block boundary belongs to the earlier block
        assert_eq!(schedule.fraction_at(200).unwrap(), 0.1);
        assert!(schedule.fraction_at(0).is_err());
        assert!(schedule.fraction_at(1001).is_err());
    }

    #[test]
    fn schedule_constant_when_single_fraction() {
        let schedule = FractionSchedule::new(0.1, 0.1, 1, 50).unwrap();
        for t in 1..=50 {
            assert_eq!(schedule.fraction_at(t).unwrap(), 0.1);
        }
        assert!(FractionSchedule::new(0.1, 0.5, 1, 50).is_err());
    }

    #[test]
    fn schedule_final_block_absorbs_remainder() {
        let schedule = FractionSchedule::new(0.1, 0.5, 5, 1001).unwrap();
        assert_eq!(schedule.rounds_per_block(), 200);
        let blocks = schedule.blocks();
        let lengths: Vec<usize> = blocks.iter().map(|&(f, l, _)| l - f + 1).collect();
        assert_eq!(lengths, vec![200, 200, 200, 200, 201]);
        assert_eq!(schedule.fraction_at(1001).unwrap(), 0.5);
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(FractionSchedule::new(0.5, 0.1, 5, 1000).is_err());
        assert!(FractionSchedule::new(0.0, 0.5, 5, 1000).is_err());
        assert!(FractionSchedule::new(0.1, 1.0, 5, 1000).is_err());
        assert!(FractionSchedule::new(0.1, 0.5, 0, 1000).is_err());
        assert!(FractionSchedule::new(0.1, 0.5, 5, 4).is_err());
    }

    proptest! {
        #[test]
        fn schedule_is_monotone_nondecreasing(
            start_pct in 1u32..50,
            extra_pct in 0u32..49,
            fractions in 1usize..8,
            rounds in 8usize..200,
        ) {
            let gamma_start = start_pct as f64 / 100.0;
            let gamma_end = if fractions == 1 {
                gamma_start
            } else {
                (start_pct + extra_pct) as f64 / 100.0
            };
            prop_assume!(rounds >= fractions);
            let schedule =
                FractionSchedule::new(gamma_start, gamma_end, fractions, rounds).unwrap();
            let mut prev = 0.0;
            let mut distinct = Vec::new();
            for t in 1..=rounds {
                let g = schedule.fraction_at(t).unwrap();
                prop_assert!(g >= prev);
                if distinct.last() != Some(&g) {
                    distinct.push(g);
                }
                prev = g;
            }
            let expected = if gamma_start == gamma_end { 1 } else { fractions };
            prop_assert_eq!(distinct.len(), expected);
        }
    }

    #[test]
    fn schedule_blocks_cover_each_value_for_its_full_length() {
        let schedule = FractionSchedule::new(0.1, 0.5, 5, 1000).unwrap();
        for (first, last, gamma) in schedule.blocks() {
            for t in first..=last {
                assert_eq!(schedule.fraction_at(t).unwrap(), gamma);
            }
        }
    }

    #[test]
    fn cohort_size_rounds_and_clamps() {
        assert_eq!(cohort_size(0.1, 100), 10);
        assert_eq!(cohort_size(0.5, 100), 50);
        assert_eq!(cohort_size(0.004, 100), 1);
        assert_eq!(cohort_size(0.996, 100), 100);
        assert_eq!(cohort_size(0.5, 1), 1);
    }
}
