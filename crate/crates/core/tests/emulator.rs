use ohs_core::cost::{CostParameters, PowerLawTheta};
use ohs_core::emulator::{
    coalesce, ei_formula, error_set, next_point_ei, posterior, posterior_with_nugget, run_emulation_algorithm,
    EmulationConfig, GpConfig, Nugget, NuggetSpec,
};
use ohs_core::oracle::Estimate;
use ohs_core::parametric::ObservationSet;
use ohs_core::rng;
use proptest::prelude::*;

fn reference_gp() -> GpConfig {
    GpConfig {
        prior_theta: PowerLawTheta::new(1e4, 1.2, 0.2).unwrap(),
        prior_k1: 0.4,
        prior_n: 1e5,
        sigma_u2: 1e7,
        zeta: 5000.0,
        tau: 0.0,
        alpha: 0.1,
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

prop_compose! {
    fn observations()(raw in prop::collection::vec((1u64..20, -50.0..50.0f64, 0.1..10.0f64), 1..40)) -> Vec<(u64, f64, f64)> {
        raw
    }
}

proptest! {
    #[test]
    fn coalescing_is_associative(obs in observations(), cut in 0usize..40) {
        let cut = cut.min(obs.len());
        let all = ObservationSet::new(
            obs.iter().map(|o| o.0).collect(),
            obs.iter().map(|o| o.1).collect(),
            obs.iter().map(|o| o.2).collect(),
        ).unwrap();
        let once = coalesce(&all);

        let mut head = ObservationSet::default();
        for &(n, v, s2) in &obs[..cut] {
            head.push(n, v, s2).unwrap();
        }
        let mut staged = coalesce(&head).to_observations();
        for &(n, v, s2) in &obs[cut..] {
            staged.push(n, v, s2).unwrap();
        }
        let twice = coalesce(&staged);
        prop_assert_eq!(&once.sizes, &twice.sizes);
        for i in 0..once.len() {
            prop_assert!(close(once.means[i], twice.means[i], 1e-12) || (once.means[i] - twice.means[i]).abs() < 1e-12);
            prop_assert!(close(once.variances[i], twice.variances[i], 1e-12));
        }
    }

    #[test]
    fn expected_improvement_is_never_negative(reference in -1e6..1e6f64, mu in -1e6..1e6f64, psi in 0.0..1e8f64) {
        prop_assert!(ei_formula(reference, mu, psi) >= 0.0);
    }
}

#[test]
fn expected_improvement_on_many_triples() {
    let mut r = rng::rng(3);
    for _ in 0..10_000 {
        let reference = rng::normal(&mut r, 0.0, 100.0);
        let mu = rng::normal(&mut r, 0.0, 100.0);
        let psi = rng::uniform(&mut r, 0.0, 1e4);
        assert!(ei_formula(reference, mu, psi) >= 0.0);
    }
    assert!((ei_formula(5.0, 5.0, 1.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    assert_eq!(ei_formula(5.0, 5.0, 0.0), 0.0);
}

#[test]
fn coalesce_examples() {
    let two = ObservationSet::new(vec![7, 7], vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
    let c = coalesce(&two);
    assert_eq!((c.means[0], c.variances[0]), (2.0, 0.25));

    let weighted = ObservationSet::new(vec![7, 7], vec![0.0, 4.0], vec![1.0, 4.0]).unwrap();
    let c = coalesce(&weighted);
    assert!((c.means[0] - 0.8).abs() < 1e-15 && (c.variances[0] - 0.8).abs() < 1e-15);

    let distinct = ObservationSet::new(vec![9, 3, 5], vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
    let c = coalesce(&distinct);
    assert_eq!(c.sizes, vec![3, 5, 9]);
    assert_eq!(c.means, vec![2.0, 3.0, 1.0]);
}

#[test]
fn posterior_is_prior_far_from_data() {
    let gp = reference_gp();
    let obs = ObservationSet::new(vec![1000, 2000, 3000], vec![9e4, 7e4, 6e4], vec![100.0; 3]).unwrap();
    let post = posterior(&obs, &gp).unwrap();
    let su = gp.sigma_u2.sqrt();
    for n in [60_000.0, 80_000.0, 99_999.0] {
        let (mu, psi) = post.mu_psi(n);
        assert!((mu - gp.prior_mean(n)).abs() < 1e-6 * su);
        assert!((psi - gp.sigma_u2).abs() < 1e-6 * gp.sigma_u2);
    }
}

#[test]
fn psi_dips_at_design_points_and_ei_avoids_them() {
    let gp = reference_gp();
    let truth = CostParameters::new(1e5, 0.4, gp.prior_theta).unwrap();
    let design = [20_000u64, 50_000, 80_000];
    let obs = ObservationSet::new(
        design.to_vec(),
        design.iter().map(|&n| truth.total_cost(n as f64) + 300.0).collect(),
        vec![1e4; 3],
    )
    .unwrap();
    let post = posterior(&obs, &gp).unwrap();
    for w in design.windows(2) {
        let mid = 0.5 * (w[0] + w[1]) as f64;
        assert!(post.psi(w[0] as f64) < post.psi(mid));
        assert!(post.psi(w[1] as f64) < post.psi(mid));
    }
    let candidates: Vec<u64> = (1..1000).map(|i| i * 100).collect();
    let (best, _) = next_point_ei(&post, &candidates).unwrap();
    assert!(design.iter().all(|&d| d.abs_diff(best) > 1000), "{best}");
}

#[test]
fn replicates_pin_the_posterior_down() {
    let gp = reference_gp();
    let truth = CostParameters::new(1e5, 0.4, gp.prior_theta).unwrap();
    let sd = 200.0;
    let mut r = rng::rng(8);
    let mut obs = ObservationSet::new(
        vec![5000, 70_000],
        vec![truth.total_cost(5000.0), truth.total_cost(7e4)],
        vec![sd * sd; 2],
    )
    .unwrap();
    let mut values = Vec::new();
    let mut last_psi = f64::INFINITY;
    let mut last_ei = f64::INFINITY;
    for target in [1usize, 10, 100, 1000] {
        while values.len() < target {
            let v = rng::normal(&mut r, truth.total_cost(30_000.0), sd);
            values.push(v);
            obs.push(30_000, v, sd * sd).unwrap();
        }
        let post = posterior(&obs, &gp).unwrap();
        let (mu, psi) = post.mu_psi(30_000.0);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!(psi < last_psi, "psi did not fall at R = {target}");
        assert!((mu - mean).abs() < 3.0 * sd / (target as f64).sqrt());
        let ei = post.expected_improvement(30_000.0);
        assert!(ei <= last_ei + 1e-9);
        last_psi = psi;
        last_ei = ei;
    }
    assert!(last_psi < 1e-3 * gp.sigma_u2);
}

#[test]
fn error_set_conventions() {
    let gp = reference_gp();
    let truth = CostParameters::new(1e5, 0.4, gp.prior_theta).unwrap();
    let design: Vec<u64> = (1..10).map(|i| i * 10_000).collect();
    let obs = ObservationSet::new(
        design.clone(),
        design.iter().map(|&n| truth.total_cost(n as f64)).collect(),
        vec![1e5; design.len()],
    )
    .unwrap();
    let post = posterior(&obs, &gp).unwrap();
    let candidates: Vec<u64> = (1..100).map(|i| i * 1000).collect();
    let star = 30_000;
    let half = error_set(&post, star, 0.5, &candidates);
    assert!(half.contains(star));
    for &n in &candidates {
        assert_eq!(half.contains(n), post.mu(n as f64) <= post.mu(star as f64), "n = {n}");
    }
    let strict = error_set(&post, star, 0.1, &candidates);
    assert!(strict.members.iter().all(|&n| half.contains(n)));
}

#[test]
fn nugget_without_kappa_matches_plain_posterior() {
    let gp = reference_gp();
    let obs = ObservationSet::new(vec![1000, 40_000, 90_000], vec![9e4, 3e4, 4e4], vec![2e4, 1e4, 3e4]).unwrap();
    let plain = posterior(&obs, &gp).unwrap();
    let mut spec = NuggetSpec::new(Nugget {
        scale: 0.0,
        exponent: 1.0,
    });
    spec.observation_variance = true;
    let nugget = posterior_with_nugget(&obs, &gp, &spec).unwrap();
    for n in [500.0, 20_000.0, 40_000.0, 70_000.0] {
        assert!(close(plain.mu(n), nugget.mu(n), 1e-12));
        assert!(close(plain.psi(n), nugget.psi(n), 1e-9));
    }
}

#[test]
fn desk_scale_emulation_visits_everything_and_converges() {
    let truth = CostParameters::new(200.0, 0.4, PowerLawTheta::new(2.0, 0.5, 0.3).unwrap()).unwrap();
    let sd = 30.0;
    let mut r = rng::rng(0);
    let mut oracle = |n: u64| -> ohs_core::Result<Estimate> {
        Ok(Estimate {
            value: rng::normal(&mut r, truth.total_cost(n as f64), sd),
            variance: sd * sd,
        })
    };
    let gp = GpConfig {
        prior_theta: PowerLawTheta::new(1.0, 0.5, 0.35).unwrap(),
        prior_k1: 0.4,
        prior_n: 200.0,
        sigma_u2: 3e5,
        zeta: 1.5,
        tau: 0.0,
        alpha: 0.1,
    };
    let mut config = EmulationConfig::new(gp, 5000);
    config.candidates = (1..200).collect();
    let mut trace = Vec::new();
    let out = run_emulation_algorithm(&mut oracle, config, &[20, 100, 180], &mut trace).unwrap();
    let data = out.state.posterior().data();
    assert_eq!(data.sizes, (1..200).collect::<Vec<u64>>());
    // Sizes visited once carry a single draw's noise, so each size is judged
    // against its own coalesced standard error.
    let post = out.state.posterior();
    for i in 0..data.len() {
        let n = data.sizes[i] as f64;
        let err = (post.mu(n) - truth.total_cost(n)).abs();
        assert!(
            err < 4.0 * data.variances[i].sqrt(),
            "n = {n}: error {err}, {} visits",
            data.counts[i]
        );
    }
    let optimum = (1..200u64)
        .min_by(|&a, &b| truth.total_cost(a as f64).total_cmp(&truth.total_cost(b as f64)))
        .unwrap();
    let at_optimum = data.sizes.binary_search(&optimum).unwrap();
    assert!(data.counts[at_optimum] > 1, "the optimum was never revisited");
}
