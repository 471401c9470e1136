mod common;

use common::chain::*;
use common::toys::{dataset, sampled_law};
use flowsteer::denoiser::ExactPosterior;
use flowsteer::discrete::{Categorical, RandomStream};
use flowsteer::flow::*;
use proptest::prelude::*;
use rayon::prelude::*;

fn full_support_2d() -> Coupling {
    (0..9).map(|i| (vec![0, 0], vec![(i % 3) as u8, (i / 3) as u8], 1.0 + i as f64)).collect()
}

fn mixed_sources_1d() -> Coupling {
    vec![(vec![0], vec![2], 0.5), (vec![1], vec![0], 0.3), (vec![2], vec![1], 0.2)]
}

#[test]
fn euler_sampler_matches_the_enumerated_chain() {
    let c = full_support_2d();
    let law = terminal_law(&c, 3, 5);
    let hist = sampled_law(&c, 3, 5, Stepper::Euler, 100_000, 1);
    let bound = 3.0 * (9.0f64 / 1e5).sqrt();
    assert!(tv(&hist, &law) <= bound, "{}", tv(&hist, &law));
}

#[test]
fn rk2_sampler_matches_the_enumerated_chain() {
    for (c, vocab) in [(full_support_2d(), 3), (mixed_sources_1d(), 3)] {
        let law = rk2_terminal_law(&c, vocab, 5);
        let hist = sampled_law(&c, vocab, 5, Stepper::Rk2, 100_000, 2);
        let bound = 3.0 * (hist.len() as f64 / 1e5).sqrt();
        assert!(tv(&hist, &law) <= bound, "{}", tv(&hist, &law));
    }
}

#[test]
fn exact_denoiser_flow_reaches_the_data_law() {
    let c = full_support_2d();
    let hist = sampled_law(&c, 3, 100, Stepper::Euler, 50_000, 3);
    assert!(tv(&hist, &data_law(&c, 3)) <= 0.03);
}

#[test]
fn rk2_is_no_worse_than_euler_on_a_point_source_sequence() {
    let c: Coupling = vec![(vec![0], vec![1], 0.5), (vec![0], vec![2], 0.3), (vec![0], vec![3], 0.2)];
    let p = data_law(&c, 4);
    let (e, r) = (tv(&terminal_law(&c, 4, 25), &p), tv(&rk2_terminal_law(&c, 4, 25), &p));
    assert!(r <= e + 1e-12, "rk2 {r} euler {e}");
    let hist = sampled_law(&c, 4, 25, Stepper::Rk2, 50_000, 4);
    assert!(tv(&hist, &p) <= 3.0 * (4.0f64 / 5e4).sqrt());
}

#[test]
fn euler_is_exact_on_one_dimension_with_mixed_sources() {
    let c = mixed_sources_1d();
    for steps in [1, 2, 7, 25] {
        assert!(tv(&terminal_law(&c, 3, steps), &data_law(&c, 3)) < 1e-12);
    }
}

#[test]
fn parallel_and_serial_trajectories_agree() {
    let c = full_support_2d();
    let den = ExactPosterior::new(dataset(&c, 3)).unwrap();
    let grid = TimeGrid::new(10).unwrap();
    let x0 = state(&[0, 0], 3);
    let run = |r: u64| {
        simulate_trajectory(&x0, &den, &grid, Stepper::Rk2, &mut RandomStream::new(9, r), None).unwrap()
    };
    let serial: Vec<_> = (0..64).map(run).collect();
    let parallel: Vec<_> = (0..64u64).into_par_iter().map(run).collect();
    assert_eq!(serial, parallel);
}

fn row_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (2usize..6).prop_flat_map(|v| (prop::collection::vec(0.0f64..1.0, v), 0..v))
}

proptest! {
    #[test]
    fn euler_kernel_rows_are_distributions((w, cur) in row_strategy(), t in 0.0f64..0.99, frac in 0.0f64..=1.0) {
        let s: f64 = w.iter().sum::<f64>() + 1e-6;
        let den = Categorical::new(w.iter().map(|v| (v + 1e-6 / w.len() as f64) / s).collect()).unwrap();
        let h = frac * (1.0 - t);
        let u = marginal_velocity(&den, cur, t).unwrap();
        prop_assert!(u.sum().abs() < 1e-12);
        let mut total = 0.0;
        for (y, &rate) in u.rates.iter().enumerate() {
            if y != cur {
                prop_assert!(rate >= 0.0);
            }
            let p = if y == cur { 1.0 } else { 0.0 } + h * rate;
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
            total += p;
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}
