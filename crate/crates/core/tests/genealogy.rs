mod common;

use common::{eight_tips, rng, EIGHT_TIPS};
use lambdacoal::genealogy::{Genealogy, NewickWriter};
use lambdacoal::{extract_stats, parse_newick, simulate, CoalescentData, Error, LambdaMeasure, SamplingSchedule, Trajectory};
use proptest::prelude::*;

fn assert_same_data(a: &CoalescentData, b: &CoalescentData, tol: f64) {
    assert_eq!(a.sample_counts(), b.sample_counts());
    assert_eq!(a.block_sizes(), b.block_sizes());
    for (x, y) in a.sampling_times().iter().zip(b.sampling_times()) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
    for (x, y) in a.coalescent_times().iter().zip(b.coalescent_times()) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

/// Lineages alive at `u` counted from branches: a branch from a node at
/// `tc` up to its parent at `tp` is extant on `(tc, tp]`.
fn branch_count(g: &Genealogy, u: f64) -> usize {
    g.nodes()
        .iter()
        .filter_map(|node| node.parent.map(|p| (node.time, g.node(p).time)))
        .filter(|&(tc, tp)| tc < u && u <= tp)
        .count()
}

#[test]
fn three_tip_binary_tree() {
    let g = parse_newick("((a:1,b:1):1,c:2);", None).unwrap();
    assert_eq!(g.num_tips(), 3);
    assert_eq!(g.internal_nodes().count(), 2);
    assert!((g.root_time() - 2.0).abs() < 1e-12);
    let d = extract_stats(&g).unwrap();
    assert_eq!(d.coalescent_times(), &[1.0, 2.0]);
    assert_eq!(d.block_sizes(), &[2, 2]);
}

#[test]
fn trifurcation_is_one_event() {
    let d = extract_stats(&parse_newick("(a:1,b:1,c:1);", None).unwrap()).unwrap();
    assert_eq!(d.sampling_times(), &[0.0]);
    assert_eq!(d.sample_counts(), &[3]);
    assert_eq!(d.coalescent_times(), &[1.0]);
    assert_eq!(d.block_sizes(), &[3]);
}

#[test]
fn eight_tip_heterochronous_tree() {
    let d = eight_tips();
    assert_eq!(d.num_samples(), 8);
    assert_eq!(d.num_events(), 6);
    assert_eq!(d.sampling_times().len(), 3);
    assert_eq!(d.sample_counts(), &[4, 3, 1]);
    assert_eq!(d.block_sizes(), &[2, 2, 3, 2, 2, 2]);
    let merged: usize = d.block_sizes().iter().map(|m| m - 1).sum();
    assert_eq!(merged, 7);
    // Just below the trifurcation: two pair mergers and the second batch.
    let t3 = d.coalescent_times()[2];
    assert_eq!(d.lineage_count(t3 - 1e-6), 5);
    // Right-open: at the event time itself the merger is not yet applied.
    assert_eq!(d.lineage_count(t3), 5);
    assert_eq!(d.lineage_count(t3 + 1e-6), 3);
    assert_eq!(d.lineage_count(d.tmrca()), 2);
    assert_eq!(d.lineage_count(d.tmrca() + 1e-6), 1);
}

#[test]
fn isochronous_count_before_first_event() {
    let d = CoalescentData::new(vec![0.0], vec![5], vec![1.0, 2.0, 3.0, 4.0], vec![2; 4]).unwrap();
    assert_eq!(d.lineage_count(0.5), 5);
}

#[test]
fn steps_jump_by_batches_and_mergers() {
    let d = eight_tips();
    let steps = d.lineage_steps();
    let mut removed = 0;
    let mut added = d.sample_counts()[0];
    for w in steps.counts.windows(2) {
        if w[1] < w[0] {
            removed += w[0] - w[1];
        } else {
            added += w[1] - w[0];
        }
    }
    // The last merger closes the final interval.
    assert_eq!(removed + steps.counts.last().unwrap() - 1, 7);
    assert_eq!(added, 8);
    for (a, b, count) in steps.intervals() {
        assert_eq!(d.lineage_count(0.5 * (a + b)), count);
    }
}

#[test]
fn simultaneous_internal_nodes_rejected() {
    let g = parse_newick("((a:1,b:1):1,(c:1,d:1):1);", None).unwrap();
    assert!(matches!(extract_stats(&g), Err(Error::SimultaneousMergers(_))));
}

#[test]
fn malformed_input_reports_errors() {
    assert!(matches!(parse_newick("((a:1,b:1):1,c:2", None), Err(Error::NewickSyntax { .. })));
    assert!(matches!(parse_newick("((a:1,b:-1):1,c:2);", None), Err(Error::NegativeBranch { .. })));
}

#[test]
fn nine_digit_writer_rounds_branch_lengths() {
    let g = parse_newick("((a:1.23456789012,b:1.23456789012):1,c:2.23456789012);", None).unwrap();
    let text = NewickWriter::with_significant_digits(9).write(&g);
    assert!(text.contains("1.23456789"), "{text}");
    assert!(!text.contains("1.234567890"), "{text}");
    let back = extract_stats(&parse_newick(&text, None).unwrap()).unwrap();
    assert_same_data(&extract_stats(&g).unwrap(), &back, 1e-8);
}

#[test]
fn lineage_count_matches_branch_recount_on_simulated_trees() {
    let mut r = rng(11);
    let traj = Trajectory::uniform(1.0).unwrap();
    let alphas = [1.0, 1.5, 1.9, 2.0];
    for i in 0..1000 {
        let n = 3 + i % 30;
        let schedule = if i % 2 == 0 {
            SamplingSchedule::isochronous(n).unwrap()
        } else {
            SamplingSchedule::split(n, vec![0.0, 0.3], &[0.5, 0.5]).unwrap()
        };
        let m = LambdaMeasure::for_alpha(alphas[i % 4]).unwrap();
        let g = simulate(&schedule, &traj, &m, &mut r).unwrap();
        let d = extract_stats(&g).unwrap();
        let tk = d.tmrca();
        let mut probes: Vec<f64> = d.coalescent_times().to_vec();
        probes.extend(d.sampling_times().iter().filter(|&&s| s > 0.0));
        probes.extend((1..20).map(|j| tk * j as f64 / 20.0));
        for u in probes {
            assert_eq!(d.lineage_count(u), branch_count(&g, u), "tree {i} at {u}");
        }
        let merged: usize = d.block_sizes().iter().map(|m| m - 1).sum();
        assert_eq!(d.num_samples() - merged, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn newick_round_trip_is_identity(seed in any::<u64>(), n in 2usize..60, alpha in 0.5f64..2.0, late in 0.0f64..2.0) {
        let mut r = rng(seed);
        let schedule = SamplingSchedule::split(n.max(4), vec![0.0, late + 0.1], &[0.5, 0.5]).unwrap();
        let m = LambdaMeasure::for_alpha(alpha).unwrap();
        let g = simulate(&schedule, &Trajectory::uniform(1.0).unwrap(), &m, &mut r).unwrap();
        let d = extract_stats(&g).unwrap();
        let text = NewickWriter::round_trip().write(&g);
        let back = extract_stats(&parse_newick(&text, None).unwrap()).unwrap();
        assert_same_data(&d, &back, 1e-9);
    }

    #[test]
    fn merged_lineages_total_n_minus_one(seed in any::<u64>(), n in 2usize..80, alpha in 0.1f64..2.0) {
        let g = simulate(
            &SamplingSchedule::isochronous(n).unwrap(),
            &Trajectory::uniform(1.0).unwrap(),
            &LambdaMeasure::for_alpha(alpha).unwrap(),
            &mut rng(seed),
        ).unwrap();
        let d = extract_stats(&g).unwrap();
        let steps = d.lineage_steps();
        let drops: usize = steps.counts.windows(2).map(|w| w[0].saturating_sub(w[1])).sum::<usize>()
            + steps.counts.last().unwrap() - 1;
        prop_assert_eq!(drops, n - 1);
        for (k, &t) in d.coalescent_times().iter().enumerate() {
            prop_assert!(d.lineage_count(t) >= d.block_sizes()[k]);
        }
    }
}

#[test]
fn eight_tip_text_parses_without_dates() {
    let g = parse_newick(EIGHT_TIPS, None).unwrap();
    assert!(!g.is_dated());
    assert!(!g.is_binary());
}
