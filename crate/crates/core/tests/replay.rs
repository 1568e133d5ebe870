use flexrank::rl::{beta_schedule, topk_epsilon_greedy, PrioritizedBuffer, PRIORITY_EPSILON};
use flexrank::seed::{Purpose, SeedStream};
use proptest::prelude::*;

#[test]
fn priorities_one_and_three() {
    let mut buf = PrioritizedBuffer::new(4);
    buf.push(());
    buf.push(());
    buf.update_priorities(&[0, 1], &[1.0 - PRIORITY_EPSILON, 3.0 - PRIORITY_EPSILON]);
    assert!((buf.probability(0) - 0.25).abs() < 1e-12);
    assert!((buf.probability(1) - 0.75).abs() < 1e-12);
    // |D| = 2, P = 0.25, beta = 1 -> (1 / (2 * 0.25))^1 = 2.
    let mut rng = SeedStream::new(0).rng(0, 0, Purpose::Replay);
    let batch = (0..100).find_map(|_| buf.sample(1, 1.0, &mut rng).filter(|b| b.indices[0] == 0)).unwrap();
    assert!((batch.weights[0] - 2.0).abs() < 1e-12);
}

#[test]
fn uniform_priorities_sample_uniformly() {
    let n = 10;
    let mut buf = PrioritizedBuffer::new(n);
    for i in 0..n {
        buf.push(i);
    }
    let mut rng = SeedStream::new(4).rng(0, 0, Purpose::Replay);
    let mut counts = vec![0usize; n];
    let draws = 100_000;
    for _ in 0..draws / n {
        for i in buf.sample(n, 0.4, &mut rng).unwrap().indices {
            counts[i] += 1;
        }
    }
    let expected = draws as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // Chi-square, 9 degrees of freedom, upper 1% point.
    assert!(chi2 < 21.666, "chi2 {chi2} counts {counts:?}");
}

#[test]
fn proportional_sampling_follows_priorities() {
    let mut buf = PrioritizedBuffer::new(3);
    for i in 0..3 {
        buf.push(i);
    }
    buf.update_priorities(&[0, 1, 2], &[1.0, 2.0, 5.0]);
    let mut rng = SeedStream::new(9).rng(0, 0, Purpose::Replay);
    let mut counts = [0usize; 3];
    for _ in 0..50_000 {
        for i in buf.sample(2, 1.0, &mut rng).unwrap().indices {
            counts[i] += 1;
        }
    }
    let total: f64 = [1.0, 2.0, 5.0].iter().map(|p| p + PRIORITY_EPSILON).sum();
    let chi2: f64 = counts
        .iter()
        .zip([1.0, 2.0, 5.0])
        .map(|(&c, p)| {
            let e = 1e5 * (p + PRIORITY_EPSILON) / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < 9.21, "chi2 {chi2}");
}

#[test]
fn too_few_items_is_no_op() {
    let mut buf = PrioritizedBuffer::new(8);
    buf.push(1);
    let mut rng = SeedStream::new(0).rng(0, 0, Purpose::Replay);
    assert!(buf.sample(2, 0.4, &mut rng).is_none());
}

#[test]
fn beta_reaches_one_at_last_episode() {
    assert_eq!(beta_schedule(0.4, 0, 11), 0.4);
    assert!((beta_schedule(0.4, 5, 11) - 0.7).abs() < 1e-12);
    assert_eq!(beta_schedule(0.4, 10, 11), 1.0);
}

#[test]
fn topk_example() {
    let mut rng = SeedStream::new(0).rng(0, 0, Purpose::Exploration);
    let sel = topk_epsilon_greedy(&[0.1, 0.9, 0.5, 0.7], 2, 0.0, &mut rng).unwrap();
    assert_eq!(sel.indices(), &[1, 3]);
    let all = topk_epsilon_greedy(&[0.3, 0.2, 0.1], 3, 0.0, &mut rng).unwrap();
    let mut idx = all.into_inner();
    idx.sort();
    assert_eq!(idx, vec![0, 1, 2]);
    assert!(topk_epsilon_greedy(&[0.3, 0.2], 3, 0.0, &mut rng).is_err());
}

proptest! {
    #[test]
    fn topk_is_always_distinct(values in prop::collection::vec(-1.0..1.0f64, 1..40), k in 1usize..40, eps in 0.0..=1.0f64, seed in any::<u64>()) {
        prop_assume!(k <= values.len());
        let mut rng = SeedStream::new(seed).rng(0, 0, Purpose::Exploration);
        let sel = topk_epsilon_greedy(&values, k, eps, &mut rng).unwrap();
        prop_assert_eq!(sel.len(), k);
        prop_assert_eq!(sel.collision_pairs(), 0);
        prop_assert!(sel.indices().iter().all(|&i| i < values.len()));
    }

    #[test]
    fn buffer_never_exceeds_capacity(cap in 1usize..20, pushes in 0usize..100) {
        let mut buf = PrioritizedBuffer::new(cap);
        for i in 0..pushes {
            buf.push(i);
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
        // FIFO eviction keeps the most recent items.
        let mut kept: Vec<usize> = buf.iter().copied().collect();
        kept.sort();
        let want: Vec<usize> = (pushes.saturating_sub(cap)..pushes).collect();
        prop_assert_eq!(kept, want);
    }
}
