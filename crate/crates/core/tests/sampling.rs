use uadt_core::policy::{PolicyShape, PolicySnapshot};
use uadt_core::rng;
use uadt_core::vocab::{Vocab, EOS};

#[test]
fn uniform_policy_samples_uniformly() {
    let v = Vocab::new(0, 0).unwrap();
    let p = PolicySnapshot::zeros(PolicyShape { vocab: v, embed_dim: 2, hidden_dim: 2 });
    let n = v.size();
    let mut counts = vec![0usize; n];
    let mut r = rng::rng(17);
    for _ in 0..100_000 {
        let s = p.sample_tokens(&[1], &mut r, 3).unwrap();
        assert!(s.tokens.len() <= 3);
        assert!(s.tokens[..s.tokens.len() - 1].iter().all(|t| *t != EOS));
        for t in s.tokens {
            counts[t as usize] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    for c in counts {
        let f = c as f64 / total as f64;
        assert!((f - 1.0 / n as f64).abs() < 0.01, "frequency {f}");
    }
}
