use proptest::prelude::*;

use uadt_core::grpo::{group_advantages, token_kl};
use uadt_core::policy::{PolicyShape, PolicySnapshot};
use uadt_core::rewards::{self, compute_reward, parse_response, RewardWeights, RougeVariant};
use uadt_core::stats;
use uadt_core::tasks::{gen_mcq_suite, gen_open_suite, TaskKind};
use uadt_core::uadt::UadtState;
use uadt_core::vocab::Vocab;

fn seq(max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..6, 0..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_normalize_and_entropy_is_bounded(
        seed in any::<u64>(),
        scale in 0.01f64..3.0,
        ctx in prop::collection::vec(0u32..22, 1..5),
        prefix in prop::collection::vec(0u32..22, 0..5),
    ) {
        let shape = PolicyShape { vocab: Vocab::new(4, 0).unwrap(), embed_dim: 3, hidden_dim: 4 };
        let p = PolicySnapshot::init(shape, scale, seed);
        let d = p.forward_step(&ctx, &prefix).unwrap();
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(d.probs.iter().all(|x| *x >= 0.0));
        let direct: f64 = d.probs.iter().filter(|x| **x > 0.0).map(|x| -x * x.ln()).sum();
        prop_assert!((d.entropy - direct).abs() < 1e-9);
        prop_assert!(d.entropy >= 0.0 && d.entropy <= (22f64).ln());
    }

    #[test]
    fn rollouts_are_deterministic_and_consistent(seed in any::<u64>(), task_seed in 0u64..50) {
        let v = Vocab::new(3, 0).unwrap();
        let p = PolicySnapshot::init(PolicyShape { vocab: v, embed_dim: 3, hidden_dim: 3 }, 0.5, 9);
        let task = gen_mcq_suite(&v, "p", 1, 3, 0.2, false, task_seed).unwrap().instances.remove(0);
        let a = p.sample_rollout(&task, seed, 10).unwrap();
        prop_assert_eq!(&a, &p.sample_rollout(&task, seed, 10).unwrap());
        prop_assert!(!a.tokens.is_empty() && a.tokens.len() <= 10);
        prop_assert!((a.seq_entropy - stats::mean(&a.per_token_entropy)).abs() < 1e-9);
        let (lp, _) = p.logprob_and_entropy(&task.context, &a.tokens).unwrap();
        for (x, y) in lp.iter().zip(&a.per_token_logprob) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn advantages_are_standardized(rewards in prop::collection::vec(-3.0f64..3.0, 2..16)) {
        let a = group_advantages(&rewards);
        prop_assert!(stats::mean(&a).abs() < 1e-9);
        let s = stats::std_pop(&rewards);
        if s > 1e-3 {
            prop_assert!((stats::std_pop(&a) - 1.0).abs() < 1e-6);
        }
        let scaled: Vec<f64> = rewards.iter().map(|r| 4.0 * r + 1.5).collect();
        if s > 1e-3 {
            for (x, y) in a.iter().zip(group_advantages(&scaled)) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kl_estimate_is_nonnegative_and_zero_on_equality(lp in prop::collection::vec(-8.0f64..0.0, 1..10), shift in -2.0f64..2.0) {
        prop_assert_eq!(token_kl(&lp, &lp), 0.0);
        let other: Vec<f64> = lp.iter().map(|x| x + shift).collect();
        prop_assert!(token_kl(&lp, &other) >= 0.0);
    }

    #[test]
    fn shaping_follows_entropy_gap(
        a in -5.0f64..5.0,
        h in 0.0f64..4.0,
        tau in 0.0f64..4.0,
        gamma in 0.01f64..5.0,
        lambda in 0.0f64..3.0,
    ) {
        let s = UadtState::new(tau, 0.9, gamma, lambda).unwrap();
        let shaped = s.shape_advantage(a, h);
        prop_assert!((shaped - a).abs() <= lambda * h + 1e-12);
        let w = s.uncertainty_factor(h);
        prop_assert!(w > -1.0 - 1e-15 && w < 1.0 + 1e-15);
        if h > 0.0 && lambda > 0.0 && shaped != a {
            prop_assert_eq!((shaped - a).signum(), (h - tau).signum());
        }
    }

    #[test]
    fn ema_contracts_toward_constant_input(tau0 in -5.0f64..5.0, target in 0.0f64..5.0, alpha in 0.01f64..0.99, steps in 1usize..200) {
        let mut s = UadtState::new(tau0, alpha, 0.5, 1.0).unwrap();
        for _ in 0..steps {
            s = s.update_threshold(&[target, target]);
        }
        let expect = alpha.powi(steps as i32) * (tau0 - target).abs();
        prop_assert!(((s.tau - target).abs() - expect).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_bounded_and_symmetric_where_expected(c in seq(12), r in seq(12)) {
        for x in [
            rewards::bleu(&c, &r, 4),
            rewards::rouge(&c, &r, RougeVariant::Rouge1),
            rewards::rouge(&c, &r, RougeVariant::RougeL),
            rewards::meteor(&c, &r),
            rewards::iou_accuracy(&c, &r),
        ] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert_eq!(rewards::iou_accuracy(&c, &r), rewards::iou_accuracy(&r, &c));
        prop_assert_eq!(rewards::rouge(&c, &r, RougeVariant::RougeL), rewards::rouge(&r, &c, RougeVariant::RougeL));
        if !c.is_empty() {
            prop_assert!((rewards::bleu(&c, &c, 4) - 1.0).abs() < 1e-12);
            prop_assert_eq!(rewards::rouge(&c, &c, RougeVariant::Rouge1), 1.0);
            prop_assert_eq!(rewards::rouge(&c, &c, RougeVariant::RougeL), 1.0);
        }
    }

    #[test]
    fn adding_a_matching_unigram_never_lowers_rouge1_recall(c in seq(12), r in seq(12), pick in any::<prop::sample::Index>()) {
        prop_assume!(!r.is_empty());
        // F1 = 2 * overlap / (|c| + |r|)
        let recall = |c: &[u8]| rewards::rouge(c, &r, RougeVariant::Rouge1) * (c.len() + r.len()) as f64 / (2.0 * r.len() as f64);
        let mut longer = c.clone();
        longer.push(r[pick.index(r.len())]);
        prop_assert!(recall(&longer) >= recall(&c) - 1e-12);
    }

    #[test]
    fn generated_traces_are_well_formed_and_correct(seed in any::<u64>(), noise in 0.0f64..1.0, multi in any::<bool>(), options in 2usize..5) {
        let v = Vocab::new(4, 6).unwrap();
        let suite = gen_mcq_suite(&v, "m", 5, options, noise, multi, seed).unwrap();
        let open = gen_open_suite(&v, "o", 5, 1 + (seed % 4) as usize, seed).unwrap();
        for t in suite.instances.iter().chain(&open.instances) {
            let cot = t.cot_target.as_ref().unwrap();
            let parsed = parse_response(&v, cot, t.kind);
            prop_assert!(parsed.well_formed);
            let r = compute_reward(&parsed, &t.key, RewardWeights::default());
            prop_assert_eq!(r.format, 1.0);
            let answer = parsed.answer.as_ref().unwrap();
            if t.kind == TaskKind::OpenEnded {
                prop_assert_eq!(answer, &t.key.truth);
                prop_assert!((rewards::bleu(answer, &t.key.truth, 4) - 1.0).abs() < 1e-12);
            } else {
                prop_assert!((r.accuracy - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn arbitrary_tokens_never_score_format_without_grammar(tokens in prop::collection::vec(0u32..22, 0..20)) {
        let v = Vocab::new(4, 0).unwrap();
        let parsed = parse_response(&v, &tokens, TaskKind::SingleMcq);
        let r = compute_reward(&parsed, &uadt_core::rewards::AnswerKey {
            kind: TaskKind::SingleMcq,
            options: None,
            truth: vec![v.label(0)],
        }, RewardWeights::default());
        prop_assert!(r.format == 0.0 || r.format == 1.0);
        if r.format == 0.0 {
            prop_assert_eq!(r.accuracy, 0.0);
        }
    }
}
